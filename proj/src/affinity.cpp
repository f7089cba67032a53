#include "letsne/affinity.hpp"

#include <algorithm>
#include <cmath>

namespace letsne {

namespace {

/// Shifted-exponent Gaussian row for one sigma; returns 2^H in the same pass.
double gaussian_row(const Vector& distances_sq, double sigma, Vector& probs) {
  const double min_d = distances_sq.minCoeff();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  probs = (-(distances_sq.array() - min_d) * inv).exp();
  probs /= probs.sum();
  double entropy_bits = 0.0;
  for (Index j = 0; j < probs.size(); ++j) {
    if (probs(j) > 0.0) entropy_bits -= probs(j) * std::log2(probs(j));
  }
  return std::exp2(entropy_bits);
}

void floor_and_renormalize(Vector& probs, int anchor) {
  for (Index j = 0; j < probs.size(); ++j) {
    if (j != anchor && probs(j) < kProbFloor) probs(j) = kProbFloor;
  }
  probs /= probs.sum();
}

}  // namespace

SigmaResult calibrate_sigma(const Vector& distances_sq, double perplexity) {
  const Index m = distances_sq.size();
  if (m < 1) throw UsageError("calibrate_sigma: empty distance vector");
  if (!(perplexity > 1.0) || perplexity > static_cast<double>(m)) {
    throw UsageError("calibrate_sigma: perplexity must lie in (1, m]");
  }
  if (distances_sq.maxCoeff() <= 0.0) {
    throw UsageError("calibrate_sigma: all distances are zero (degenerate input)");
  }

  constexpr int kMaxIters = 100;
  constexpr double kTol = 1e-6;
  double lo = 1e-20, hi = 1e20;
  Vector probs;
  SigmaResult best;
  double best_err = std::numeric_limits<double>::infinity();
  int iters = 0;
  auto evaluate = [&](double sigma) {
    ++iters;
    const double perp = gaussian_row(distances_sq, sigma, probs);
    const double err = std::abs(perp - perplexity);
    if (err < best_err) {
      best_err = err;
      best = {sigma, false, perp};
    }
    return perp;
  };

  // Bracket the target first, halving/doubling past the initial range if the
  // target escapes it. Perplexity grows monotonically with sigma.
  double perp_lo = evaluate(lo);
  while (perp_lo > perplexity && lo > 1e-60 && iters < kMaxIters) {
    lo /= 2.0;
    perp_lo = evaluate(lo);
  }
  if (best_err > kTol) {
    double perp_hi = evaluate(hi);
    while (perp_hi < perplexity && hi < 1e60 && iters < kMaxIters) {
      hi *= 2.0;
      perp_hi = evaluate(hi);
    }
  }
  // Geometric bisection.
  while (iters < kMaxIters && best_err > kTol) {
    const double sigma = std::sqrt(lo * hi);
    if (evaluate(sigma) > perplexity) {
      hi = sigma;
    } else {
      lo = sigma;
    }
  }
  best.converged = best_err <= 1e-3;
  return best;
}

AffinityRows conditional_p(const Matrix& batch, double perplexity) {
  const Index m = batch.rows();
  if (m < 2) throw UsageError("conditional_p: need at least 2 samples");
  if (m > 2 && (!(perplexity > 1.0) || perplexity > static_cast<double>(m - 1))) {
    throw UsageError("conditional_p: perplexity must lie in (1, m-1]");
  }

  // One dense distance pass; m is a mini-batch.
  const Vector sq_norms = batch.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * (batch * batch.transpose())).colwise() + sq_norms;
  d2.rowwise() += sq_norms.transpose();
  d2 = d2.cwiseMax(0.0);

  AffinityRows rows;
  rows.reserve(static_cast<size_t>(m));
  Vector cand(m - 1), probs;
  for (Index i = 0; i < m; ++i) {
    Index c = 0;
    for (Index j = 0; j < m; ++j) {
      if (j != i) cand(c++) = d2(i, j);
    }
    AffinityRow row;
    row.anchor = static_cast<int>(i);
    row.probs = Vector::Zero(m);
    if (m == 2 || cand.maxCoeff() <= 0.0) {
      // Single candidate, or every candidate coincides with the anchor:
      // normalization alone fixes the row, nothing to calibrate.
      row.sigma = 1.0;
      row.calibrated = true;
      probs = Vector::Constant(m - 1, 1.0 / static_cast<double>(m - 1));
    } else {
      const SigmaResult cal = calibrate_sigma(cand, perplexity);
      row.sigma = cal.sigma;
      row.calibrated = cal.converged;
      gaussian_row(cand, cal.sigma, probs);
    }
    c = 0;
    for (Index j = 0; j < m; ++j) {
      if (j != i) row.probs(j) = probs(c++);
    }
    floor_and_renormalize(row.probs, row.anchor);
    rows.push_back(std::move(row));
  }
  return rows;
}

AffinityRows compress(const AffinityRows& rows, const SparseAdjacency& adj, double cf) {
  if (cf < 1.0) throw UsageError("compress: cf must be >= 1");
  if (adj.size() != static_cast<Index>(rows.size())) {
    throw UsageError("compress: adjacency size does not match row count");
  }
  if (cf == 1.0) return rows;

  AffinityRows out = rows;
  for (AffinityRow& row : out) {
    for (int j : adj.neighbors(row.anchor)) {
      row.probs(j) *= cf;
    }
    row.probs /= row.probs.sum();
    floor_and_renormalize(row.probs, row.anchor);
  }
  return out;
}

AffinityRows conditional_q(const Matrix& Y) {
  const Index m = Y.rows();
  if (m < 2) throw UsageError("conditional_q: need at least 2 samples");

  const Vector sq_norms = Y.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * (Y * Y.transpose())).colwise() + sq_norms;
  d2.rowwise() += sq_norms.transpose();
  d2 = d2.cwiseMax(0.0);

  AffinityRows rows;
  rows.reserve(static_cast<size_t>(m));
  for (Index i = 0; i < m; ++i) {
    AffinityRow row;
    row.anchor = static_cast<int>(i);
    row.sigma = std::numeric_limits<double>::quiet_NaN();
    row.probs = (1.0 + d2.row(i).array()).inverse();
    row.probs(i) = 0.0;
    row.probs /= row.probs.sum();
    floor_and_renormalize(row.probs, row.anchor);
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix stack_rows(const AffinityRows& rows) {
  if (rows.empty()) return Matrix();
  const Index m = rows[0].probs.size();
  Matrix out = Matrix::Zero(static_cast<Index>(rows.size()), m);
  for (const AffinityRow& row : rows) {
    out.row(row.anchor) = row.probs.transpose();
  }
  return out;
}

}  // namespace letsne
