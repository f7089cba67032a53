#include "letsne/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "letsne/rng.hpp"

namespace letsne {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::visualization: return "vis";
    case TrainMode::labelled: return "labelled";
    case TrainMode::region: return "region";
  }
  return "?";
}

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "vis" || name == "visualization") return TrainMode::visualization;
  if (name == "labelled" || name == "labeled") return TrainMode::labelled;
  if (name == "region") return TrainMode::region;
  throw UsageError("unknown mode '" + name + "' (expected vis|labelled|region)");
}

KlDirection kl_direction_for(TrainMode mode) {
  return mode == TrainMode::visualization ? KlDirection::forward : KlDirection::reverse;
}

AdjacencyMode adjacency_mode_for(TrainMode mode) {
  switch (mode) {
    case TrainMode::visualization: return AdjacencyMode::knn;
    case TrainMode::labelled: return AdjacencyMode::label;
    case TrainMode::region: return AdjacencyMode::region;
  }
  return AdjacencyMode::knn;
}

TrainConfig TrainConfig::defaults_for(TrainMode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.cf = mode == TrainMode::visualization ? 5.0 : 200.0;
  return cfg;
}

void TrainConfig::validate() const {
  if (cf < 1.0) throw UsageError("config: cf must be >= 1");
  if (lambda < 0.0) throw UsageError("config: lambda must be >= 0");
  if (batch_size < 4) throw UsageError("config: batch_size must be >= 4");
  if (embedding_dim < 1) throw UsageError("config: dims must be >= 1");
  if (epochs < 0) throw UsageError("config: epochs must be >= 0");
  if (!(perplexity > 1.0)) throw UsageError("config: perplexity must be > 1");
  if (mode == TrainMode::visualization && k < 1) throw UsageError("config: k must be >= 1");
  for (int h : hidden_dims) {
    if (h < 1) throw UsageError("config: hidden dims must be >= 1");
  }
}

namespace {

double kl_sum(const AffinityRows& a, const AffinityRows& b) {
  if (a.size() != b.size()) throw UsageError("KL: row count mismatch");
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const AffinityRow& ra = a[i];
    const AffinityRow& rb = b[i];
    if (ra.anchor != rb.anchor || ra.probs.size() != rb.probs.size()) {
      throw UsageError("KL: rows are not congruent");
    }
    for (Index j = 0; j < ra.probs.size(); ++j) {
      if (j == ra.anchor) continue;
      total += ra.probs(j) * std::log(ra.probs(j) / rb.probs(j));
    }
  }
  return total;
}

}  // namespace

double kl_forward(const AffinityRows& p, const AffinityRows& q) { return kl_sum(p, q); }

double kl_reverse(const AffinityRows& q, const AffinityRows& p) { return kl_sum(q, p); }

namespace {

/// Student-t kernel weights w_ij = (1+||y_i-y_j||^2)^-1 with zero diagonal,
/// plus the conditional q matrix (floored like conditional_q).
void t_kernel(const Matrix& Y, Matrix& W, Matrix& Q) {
  const Index m = Y.rows();
  const Vector sq = Y.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * (Y * Y.transpose())).colwise() + sq;
  d2.rowwise() += sq.transpose();
  W = (1.0 + d2.cwiseMax(0.0).array()).inverse();
  W.diagonal().setZero();
  Q = W;
  for (Index i = 0; i < m; ++i) {
    Q.row(i) /= Q.row(i).sum();
    for (Index j = 0; j < m; ++j) {
      if (j != i && Q(i, j) < kProbFloor) Q(i, j) = kProbFloor;
    }
    Q.row(i) /= Q.row(i).sum();
  }
}

double kl_matrix(const Matrix& a, const Matrix& b) {
  double total = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j == i) continue;
      total += a(i, j) * std::log(a(i, j) / b(i, j));
    }
  }
  return total;
}

}  // namespace

LossTerms embedding_loss(const Matrix& Y, const SparseAdjacency& adj, const Matrix& p_tilde,
                         KlDirection direction, double lambda) {
  const double m = static_cast<double>(Y.rows());
  Matrix W, Q;
  t_kernel(Y, W, Q);
  LossTerms loss;
  loss.laplacian = laplacian_quadratic(adj, Y) / m;
  loss.kl = (direction == KlDirection::forward ? kl_matrix(p_tilde, Q) : kl_matrix(Q, p_tilde)) / m;
  loss.total = loss.laplacian + lambda * loss.kl;
  return loss;
}

Matrix embedding_loss_grad(const Matrix& Y, const SparseAdjacency& adj, const Matrix& p_tilde,
                           KlDirection direction, double lambda) {
  const Index m = Y.rows();
  const double md = static_cast<double>(m);
  Matrix W, Q;
  t_kernel(Y, W, Q);

  // Laplacian term: d/dy_i (1/m) sum_edges ||y_i-y_j||^2 = (2/m) sum_j A_ij (y_i-y_j).
  Matrix grad = Matrix::Zero(m, Y.cols());
  for (Index i = 0; i < m; ++i) {
    for (int j : adj.neighbors(static_cast<int>(i))) {
      grad.row(i) += (2.0 / md) * (Y.row(i) - Y.row(j));
    }
  }

  if (lambda > 0.0) {
    // Coefficient c_ij so that dKL/dy_i = sum_k (c_ik + c_ki) w_ik (y_i - y_k).
    Matrix coeff(m, m);
    if (direction == KlDirection::forward) {
      // KL(p~||q): 2 (p~ - q) per ordered pair.
      coeff = 2.0 * (p_tilde - Q);
    } else {
      // KL(q||p~): -2 q (log(q/p~) - rowKL).
      Matrix log_ratio = (Q.array() / p_tilde.array()).log();
      log_ratio.diagonal().setZero();
      Vector row_kl = (Q.array() * log_ratio.array()).rowwise().sum();
      coeff = -2.0 * Q.array() * (log_ratio.colwise() - row_kl).array();
      coeff.diagonal().setZero();
    }
    const Matrix s = (coeff + coeff.transpose()).cwiseProduct(W);
    // grad_i += (lambda/m) sum_k s_ik (y_i - y_k)
    const Vector row_sums = s.rowwise().sum();
    grad += (lambda / md) * (row_sums.asDiagonal() * Y - s * Y);
  }
  return grad;
}

BatchResult batch_loss_and_grad(MlpModel& model, const Matrix& X_batch,
                                const SparseAdjacency& adj_batch, const TrainConfig& cfg) {
  if (adj_batch.size() != X_batch.rows()) {
    throw UsageError("batch_loss_and_grad: adjacency does not match the batch");
  }
  // Affinities are batch-local: sigma is recalibrated on every batch. The
  // target perplexity is capped by what a batch of this size can attain.
  const double perplexity = std::min(cfg.perplexity, static_cast<double>(X_batch.rows() - 1));
  const AffinityRows p = conditional_p(X_batch, perplexity);
  const AffinityRows p_tilde = compress(p, adj_batch, cfg.cf);
  const Matrix P = stack_rows(p_tilde);

  ForwardCache cache;
  const Matrix Y = forward_train(model, X_batch, cache);
  const KlDirection direction = kl_direction_for(cfg.mode);

  BatchResult result;
  result.loss = embedding_loss(Y, adj_batch, P, direction, cfg.lambda);
  if (!std::isfinite(result.loss.total)) {
    throw TrainingError("non-finite loss on a batch of " + std::to_string(X_batch.rows()));
  }
  result.dLdY = embedding_loss_grad(Y, adj_batch, P, direction, cfg.lambda);
  result.grads = backward(model, cache, result.dLdY);
  return result;
}

std::vector<int> training_rows(const DataMatrix& data, TrainMode mode) {
  if (mode == TrainMode::labelled) {
    if (!data.has_labels()) throw UsageError("labelled mode needs labels");
    std::vector<int> rows = data.labelled_rows();
    if (rows.empty()) throw UsageError("labelled mode: no labelled samples in the dataset");
    return rows;
  }
  std::vector<int> rows(static_cast<size_t>(data.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

TrainOutput train(const DataMatrix& data, const SparseAdjacency& adj, const TrainConfig& cfg) {
  cfg.validate();
  if (adj.mode() != adjacency_mode_for(cfg.mode)) {
    throw UsageError("train: adjacency mode '" + to_string(adj.mode()) +
                     "' does not fit train mode '" + to_string(cfg.mode) + "'");
  }
  const std::vector<int> rows = training_rows(data, cfg.mode);
  if (adj.size() != static_cast<Index>(rows.size())) {
    throw UsageError("train: adjacency covers " + std::to_string(adj.size()) +
                     " samples but " + std::to_string(rows.size()) + " are trainable");
  }
  if (static_cast<int>(rows.size()) < 4) throw UsageError("train: fewer than 4 trainable samples");

  TrainOutput out;
  out.model = init_model(static_cast<int>(data.cols()), cfg.hidden_dims, cfg.embedding_dim,
                         cfg.seed);
  AdamState adam = AdamState::zeros_like(out.model);

  // Positions into `rows`; shuffled per epoch, partitioned into batches.
  std::vector<int> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x45504f43 + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    LossTerms epoch_loss;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const size_t m = stop - start;
      if (m < 4) continue;  // drop tail batches too small for batch norm

      std::vector<int> batch_positions(order.begin() + static_cast<long>(start),
                                       order.begin() + static_cast<long>(stop));
      Matrix X_batch(static_cast<Index>(m), data.cols());
      for (size_t b = 0; b < m; ++b) {
        X_batch.row(static_cast<Index>(b)) = data.values.row(rows[static_cast<size_t>(batch_positions[b])]);
      }
      const SparseAdjacency adj_batch = restrict_to_batch(adj, batch_positions);

      BatchResult batch;
      try {
        batch = batch_loss_and_grad(out.model, X_batch, adj_batch, cfg);
        ++step;
        adam_step(out.model, adam, batch.grads, cfg.adam, step);
      } catch (const TrainingError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches) + ": " + e.what());
      }

      epoch_loss.laplacian += batch.loss.laplacian;
      epoch_loss.kl += batch.loss.kl;
      epoch_loss.total += batch.loss.total;
      ++batches;
      if (cfg.observer) {
        cfg.observer(BatchEvent{epoch, batches - 1, static_cast<Index>(m),
                                kl_direction_for(cfg.mode), adj.mode(), batch.loss});
      }
    }
    if (batches > 0) {
      epoch_loss.laplacian /= batches;
      epoch_loss.kl /= batches;
      epoch_loss.total /= batches;
    }
    out.embedding.history.push_back(epoch_loss);
  }

  out.embedding.Y = forward_inference(out.model, data.values);
  if (!out.embedding.Y.allFinite()) {
    throw TrainingError("final projection contains non-finite values");
  }
  out.embedding.config = cfg;
  return out;
}

}  // namespace letsne
