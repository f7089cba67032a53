#pragma once

#include <vector>

#include "letsne/common.hpp"
#include "letsne/graph.hpp"

namespace letsne {

/// Probability entries below this are raised to the floor and the row is
/// renormalized. Keeps every log(p) finite; the reverse KL divides by
/// near-zero conditionals in the high-compression regime.
inline constexpr double kProbFloor = 1e-12;

/// One conditional probability row: probs[anchor] == 0, the rest sum to 1.
struct AffinityRow {
  int anchor = 0;
  Vector probs;
  double sigma = 0.0;        // calibrated bandwidth (p-rows only)
  bool calibrated = true;    // false when the perplexity target was unattainable
};

using AffinityRows = std::vector<AffinityRow>;

struct SigmaResult {
  double sigma = 0.0;
  bool converged = false;
  double achieved_perplexity = 0.0;
};

/// Geometric bisection on sigma until 2^H(p) hits the target perplexity
/// within 1e-3 (H in bits), at most 100 iterations. `distances_sq` holds the
/// squared distances from the anchor to its candidates (anchor excluded).
SigmaResult calibrate_sigma(const Vector& distances_sq, double perplexity);

/// Gaussian conditionals with per-anchor calibrated bandwidth. A row whose
/// candidates all coincide with the anchor degenerates to uniform.
AffinityRows conditional_p(const Matrix& batch, double perplexity);

/// Multiply each neighbor entry by cf and renormalize. cf == 1 returns the
/// input untouched.
AffinityRows compress(const AffinityRows& rows, const SparseAdjacency& adj, double cf);

/// Student-t (1 dof) conditionals of the embedding batch.
AffinityRows conditional_q(const Matrix& Y);

/// Stack rows into an m x m matrix, row i = anchor i's probabilities.
Matrix stack_rows(const AffinityRows& rows);

}  // namespace letsne
