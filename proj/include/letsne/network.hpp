#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "letsne/common.hpp"

namespace letsne {

enum class Activation { relu, identity };

struct LayerSpec {
  int fan_in = 0;
  int fan_out = 0;
  Activation activation = Activation::identity;
  bool batch_norm = false;
};

struct Layer {
  LayerSpec spec;
  Matrix W;      // fan_in x fan_out
  RowVector b;   // fan_out
  // batch-norm parameters; empty when spec.batch_norm is false
  RowVector gamma, beta, running_mean, running_var;
};

/// Shallow fully-connected encoder. Hidden layers are linear -> batch norm ->
/// ReLU; the final layer is a plain linear map (raw embedding output).
struct MlpModel {
  std::vector<Layer> layers;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;

  int input_dim() const { return layers.front().spec.fan_in; }
  int output_dim() const { return layers.back().spec.fan_out; }
  /// Trainable scalars: weights, biases, and batch-norm gamma/beta.
  Index parameter_count() const;
};

/// Per-layer intermediates retained by a train-mode forward pass.
struct ForwardCache {
  struct LayerCache {
    Matrix input;     // batch x fan_in
    Matrix x_hat;     // normalized pre-activation (batch-norm layers)
    RowVector inv_std;
    Matrix pre_activation;  // value fed to the activation
  };
  std::vector<LayerCache> layers;
  Index batch_size = 0;
};

/// Same shapes as the trainable parameters.
struct Gradients {
  struct LayerGrads {
    Matrix dW;
    RowVector db, dgamma, dbeta;
  };
  std::vector<LayerGrads> layers;
  bool all_finite() const;
};

/// He-uniform weights, zero biases, gamma 1 / beta 0, running stats (0, 1).
MlpModel init_model(int input_dim, const std::vector<int>& hidden_dims, int output_dim,
                    uint64_t seed);

/// Train-mode forward: batch statistics normalize, running statistics update
/// with momentum, intermediates land in `cache`. Needs a batch of >= 2.
Matrix forward_train(MlpModel& model, const Matrix& X, ForwardCache& cache);

/// Inference-mode forward: running statistics, no mutation.
Matrix forward_inference(const MlpModel& model, const Matrix& X);

/// Analytic gradients for every trainable, including the batch-statistic
/// terms of batch norm. `cache` must come from forward_train on this batch.
Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& dLdY);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators, shape-congruent with Gradients.
struct AdamState {
  Gradients m, v;
  static AdamState zeros_like(const MlpModel& model);
};

/// One Adam update with bias correction. `step` counts from 1.
void adam_step(MlpModel& model, AdamState& state, const Gradients& grads,
               const AdamConfig& cfg, int step);

/// Container file: one JSON architecture line, then little-endian f64
/// parameter blocks in layer order (W row-major, b, then gamma, beta,
/// running mean, running variance for batch-norm layers). Round-trips
/// bit-exactly.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace letsne
