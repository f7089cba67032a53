#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "letsne/affinity.hpp"
#include "letsne/common.hpp"
#include "letsne/data.hpp"
#include "letsne/graph.hpp"
#include "letsne/network.hpp"

namespace letsne {

enum class TrainMode { visualization, labelled, region };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

/// Visualization matches embedding neighborhoods to input ones (KL(p~||q));
/// the clustering modes pin embedding mass where the compressed conditionals
/// allow it (KL(q||p~)).
enum class KlDirection { forward, reverse };
KlDirection kl_direction_for(TrainMode mode);
AdjacencyMode adjacency_mode_for(TrainMode mode);

struct LossTerms {
  double laplacian = 0.0;  // batch-normalized Y^T L Y
  double kl = 0.0;         // batch-normalized KL term (unweighted)
  double total = 0.0;      // laplacian + lambda * kl
};

/// Observation of one optimized batch, for instrumentation and logging.
struct BatchEvent {
  int epoch = 0;
  int batch_index = 0;
  Index batch_size = 0;
  KlDirection direction = KlDirection::forward;
  AdjacencyMode adjacency = AdjacencyMode::knn;
  LossTerms loss;
};

struct TrainConfig {
  TrainMode mode = TrainMode::visualization;
  double perplexity = 30.0;
  double cf = 5.0;
  double lambda = 1.0;
  int k = 10;  // kNN neighbors (visualization mode)
  int batch_size = 256;
  int epochs = 50;
  uint64_t seed = 0;
  int embedding_dim = 2;
  std::vector<int> hidden_dims = {256, 64};
  AdamConfig adam;
  std::function<void(const BatchEvent&)> observer;  // optional

  static TrainConfig defaults_for(TrainMode mode);
  void validate() const;
};

struct EmbeddingResult {
  Matrix Y;  // inference projection of the full dataset, n x e
  std::vector<LossTerms> history;  // one entry per epoch (batch means)
  TrainConfig config;              // echo of the settings that produced Y
};

/// Forward KL: sum over anchors i and j != i of p~ log(p~/q).
double kl_forward(const AffinityRows& p, const AffinityRows& q);
/// Reverse KL: sum of q log(q/p~).
double kl_reverse(const AffinityRows& q, const AffinityRows& p);

/// Per-batch loss of an embedding under fixed compressed conditionals.
/// Both terms are divided by the batch size so lambda keeps its meaning
/// across batch sizes.
LossTerms embedding_loss(const Matrix& Y, const SparseAdjacency& adj, const Matrix& p_tilde,
                         KlDirection direction, double lambda);

/// Analytic d(total)/dY of embedding_loss.
Matrix embedding_loss_grad(const Matrix& Y, const SparseAdjacency& adj, const Matrix& p_tilde,
                           KlDirection direction, double lambda);

struct BatchResult {
  LossTerms loss;
  Matrix dLdY;
  Gradients grads;
};

/// One train-mode pass over a batch: affinities with per-batch sigma
/// calibration, compression, loss, dL/dY, and parameter gradients.
BatchResult batch_loss_and_grad(MlpModel& model, const Matrix& X_batch,
                                const SparseAdjacency& adj_batch, const TrainConfig& cfg);

/// Rows that participate in training: labelled mode restricts to samples with
/// a real label, the other modes train on everything.
std::vector<int> training_rows(const DataMatrix& data, TrainMode mode);

struct TrainOutput {
  MlpModel model;
  EmbeddingResult embedding;
};

/// Mini-batch training loop. `adj` is the global adjacency over the training
/// rows (its mode must match the config mode); each batch sees the induced
/// subgraph. Returns the trained model plus the inference projection of every
/// sample, labelled or not.
TrainOutput train(const DataMatrix& data, const SparseAdjacency& adj, const TrainConfig& cfg);

}  // namespace letsne
