#include "letsne/network.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "letsne/rng.hpp"

namespace letsne {

Index MlpModel::parameter_count() const {
  Index count = 0;
  for (const Layer& l : layers) {
    count += l.W.size() + l.b.size() + l.gamma.size() + l.beta.size();
  }
  return count;
}

bool Gradients::all_finite() const {
  for (const auto& l : layers) {
    if (!l.dW.allFinite() || !l.db.allFinite()) return false;
    if (l.dgamma.size() && !l.dgamma.allFinite()) return false;
    if (l.dbeta.size() && !l.dbeta.allFinite()) return false;
  }
  return true;
}

MlpModel init_model(int input_dim, const std::vector<int>& hidden_dims, int output_dim,
                    uint64_t seed) {
  if (input_dim < 1 || output_dim < 1) throw UsageError("init_model: dims must be >= 1");
  for (int h : hidden_dims) {
    if (h < 1) throw UsageError("init_model: hidden dims must be >= 1");
  }

  MlpModel model;
  Rng rng(mix_seed(seed, 0x4d4c5021));  // "MLP!"
  int fan_in = input_dim;
  const size_t n_layers = hidden_dims.size() + 1;
  for (size_t l = 0; l < n_layers; ++l) {
    const bool is_output = l == hidden_dims.size();
    Layer layer;
    layer.spec.fan_in = fan_in;
    layer.spec.fan_out = is_output ? output_dim : hidden_dims[l];
    layer.spec.activation = is_output ? Activation::identity : Activation::relu;
    layer.spec.batch_norm = !is_output;

    const double limit = std::sqrt(6.0 / layer.spec.fan_in);
    layer.W.resize(layer.spec.fan_in, layer.spec.fan_out);
    for (Index i = 0; i < layer.W.rows(); ++i) {
      for (Index j = 0; j < layer.W.cols(); ++j) {
        layer.W(i, j) = rng.uniform(-limit, limit);
      }
    }
    layer.b = RowVector::Zero(layer.spec.fan_out);
    if (layer.spec.batch_norm) {
      layer.gamma = RowVector::Ones(layer.spec.fan_out);
      layer.beta = RowVector::Zero(layer.spec.fan_out);
      layer.running_mean = RowVector::Zero(layer.spec.fan_out);
      layer.running_var = RowVector::Ones(layer.spec.fan_out);
    }
    model.layers.push_back(std::move(layer));
    fan_in = model.layers.back().spec.fan_out;
  }
  return model;
}

namespace {

Matrix apply_activation(const Matrix& pre, Activation act) {
  switch (act) {
    case Activation::relu: return pre.cwiseMax(0.0);
    case Activation::identity: return pre;
  }
  return pre;
}

}  // namespace

Matrix forward_train(MlpModel& model, const Matrix& X, ForwardCache& cache) {
  if (X.rows() < 2) throw UsageError("forward_train: batch norm needs a batch of >= 2");
  if (X.cols() != model.input_dim()) throw UsageError("forward_train: input width mismatch");

  cache.layers.clear();
  cache.layers.resize(model.layers.size());
  cache.batch_size = X.rows();

  Matrix cur = X;
  for (size_t l = 0; l < model.layers.size(); ++l) {
    Layer& layer = model.layers[l];
    ForwardCache::LayerCache& lc = cache.layers[l];
    lc.input = cur;
    Matrix z = (cur * layer.W).rowwise() + layer.b;
    if (layer.spec.batch_norm) {
      const RowVector mu = z.colwise().mean();
      const RowVector var = (z.rowwise() - mu).array().square().colwise().mean();
      lc.inv_std = (var.array() + model.bn_eps).rsqrt();
      lc.x_hat = (z.rowwise() - mu).array().rowwise() * lc.inv_std.array();
      z = (lc.x_hat.array().rowwise() * layer.gamma.array()).rowwise() + layer.beta.array();
      layer.running_mean = model.bn_momentum * layer.running_mean + (1.0 - model.bn_momentum) * mu;
      layer.running_var = model.bn_momentum * layer.running_var + (1.0 - model.bn_momentum) * var;
    }
    lc.pre_activation = z;
    cur = apply_activation(z, layer.spec.activation);
  }
  return cur;
}

Matrix forward_inference(const MlpModel& model, const Matrix& X) {
  if (X.rows() < 1) throw UsageError("forward_inference: empty batch");
  if (X.cols() != model.input_dim()) throw UsageError("forward_inference: input width mismatch");

  Matrix cur = X;
  for (const Layer& layer : model.layers) {
    Matrix z = (cur * layer.W).rowwise() + layer.b;
    if (layer.spec.batch_norm) {
      const RowVector inv_std = (layer.running_var.array() + model.bn_eps).rsqrt();
      z = ((z.rowwise() - layer.running_mean).array().rowwise() * inv_std.array());
      z = (z.array().rowwise() * layer.gamma.array()).rowwise() + layer.beta.array();
    }
    cur = apply_activation(z, layer.spec.activation);
  }
  return cur;
}

Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& dLdY) {
  if (cache.layers.size() != model.layers.size()) {
    throw UsageError("backward: cache does not match the model");
  }
  if (dLdY.rows() != cache.batch_size || dLdY.cols() != model.output_dim()) {
    throw UsageError("backward: dL/dY shape does not match the cached batch");
  }

  Gradients grads;
  grads.layers.resize(model.layers.size());
  const double m = static_cast<double>(cache.batch_size);

  Matrix delta = dLdY;  // gradient w.r.t. the current layer's activation output
  for (size_t li = model.layers.size(); li-- > 0;) {
    const Layer& layer = model.layers[li];
    const ForwardCache::LayerCache& lc = cache.layers[li];
    if (lc.input.rows() != cache.batch_size || lc.input.cols() != layer.spec.fan_in) {
      throw UsageError("backward: stale cache for layer " + std::to_string(li));
    }
    Gradients::LayerGrads& lg = grads.layers[li];

    if (layer.spec.activation == Activation::relu) {
      delta = (lc.pre_activation.array() > 0.0).select(delta, 0.0);
    }

    Matrix dZ;  // gradient w.r.t. the linear output z = xW + b
    if (layer.spec.batch_norm) {
      lg.dgamma = (delta.array() * lc.x_hat.array()).colwise().sum();
      lg.dbeta = delta.colwise().sum();
      // dx_hat folded into the standard batch-norm input gradient:
      // dZ = inv_std/m * (m*dxh - sum(dxh) - x_hat * sum(dxh*x_hat))
      const Matrix dxh = delta.array().rowwise() * layer.gamma.array();
      const RowVector sum_dxh = dxh.colwise().sum();
      const RowVector sum_dxh_xhat = (dxh.array() * lc.x_hat.array()).colwise().sum();
      Matrix tmp = m * dxh;
      tmp.rowwise() -= sum_dxh;
      tmp.array() -= lc.x_hat.array().rowwise() * sum_dxh_xhat.array();
      dZ = tmp.array().rowwise() * (lc.inv_std.array() / m);
    } else {
      dZ = delta;
    }

    lg.dW = lc.input.transpose() * dZ;
    lg.db = dZ.colwise().sum();
    if (li > 0) delta = dZ * layer.W.transpose();
  }
  return grads;
}

AdamState AdamState::zeros_like(const MlpModel& model) {
  AdamState state;
  auto zeros = [&](Gradients& g) {
    g.layers.resize(model.layers.size());
    for (size_t l = 0; l < model.layers.size(); ++l) {
      const Layer& layer = model.layers[l];
      g.layers[l].dW = Matrix::Zero(layer.W.rows(), layer.W.cols());
      g.layers[l].db = RowVector::Zero(layer.b.size());
      g.layers[l].dgamma = RowVector::Zero(layer.gamma.size());
      g.layers[l].dbeta = RowVector::Zero(layer.beta.size());
    }
  };
  zeros(state.m);
  zeros(state.v);
  return state;
}

namespace {

template <typename T>
void adam_update(T& param, T& m, T& v, const T& g, const AdamConfig& cfg, double bc1,
                 double bc2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  param.array() -= cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
}

}  // namespace

void adam_step(MlpModel& model, AdamState& state, const Gradients& grads,
               const AdamConfig& cfg, int step) {
  if (step < 1) throw UsageError("adam_step: step counts from 1");
  if (grads.layers.size() != model.layers.size()) {
    throw UsageError("adam_step: gradient shape mismatch");
  }
  if (!grads.all_finite()) {
    throw TrainingError("adam_step: non-finite gradient");
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, step);
  for (size_t l = 0; l < model.layers.size(); ++l) {
    Layer& layer = model.layers[l];
    adam_update(layer.W, state.m.layers[l].dW, state.v.layers[l].dW, grads.layers[l].dW, cfg, bc1, bc2);
    adam_update(layer.b, state.m.layers[l].db, state.v.layers[l].db, grads.layers[l].db, cfg, bc1, bc2);
    if (layer.spec.batch_norm) {
      adam_update(layer.gamma, state.m.layers[l].dgamma, state.v.layers[l].dgamma,
                  grads.layers[l].dgamma, cfg, bc1, bc2);
      adam_update(layer.beta, state.m.layers[l].dbeta, state.v.layers[l].dbeta,
                  grads.layers[l].dbeta, cfg, bc1, bc2);
    }
  }
}

namespace {

void write_doubles(std::ostream& os, const double* data, Index count) {
  for (Index i = 0; i < count; ++i) {
    const uint64_t bits = std::bit_cast<uint64_t>(data[i]);
    char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    os.write(buf, 8);
  }
}

void read_doubles(std::istream& is, double* data, Index count) {
  std::vector<char> buf(static_cast<size_t>(count) * 8);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<size_t>(is.gcount()) != buf.size()) {
    throw FormatError("model file: parameter block truncated");
  }
  for (Index i = 0; i < count; ++i) {
    uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<uint64_t>(static_cast<unsigned char>(buf[static_cast<size_t>(i) * 8 + b]))
              << (8 * b);
    }
    data[i] = std::bit_cast<double>(bits);
  }
}

void write_matrix(std::ostream& os, const Matrix& mat) {
  // row-major on disk
  for (Index i = 0; i < mat.rows(); ++i) {
    for (Index j = 0; j < mat.cols(); ++j) {
      const double v = mat(i, j);
      write_doubles(os, &v, 1);
    }
  }
}

void read_matrix(std::istream& is, Matrix& mat) {
  for (Index i = 0; i < mat.rows(); ++i) {
    for (Index j = 0; j < mat.cols(); ++j) {
      read_doubles(is, &mat(i, j), 1);
    }
  }
}

}  // namespace

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for write: " + path);

  nlohmann::ordered_json arch;
  arch["bn_momentum"] = model.bn_momentum;
  arch["bn_eps"] = model.bn_eps;
  arch["layers"] = nlohmann::json::array();
  for (const Layer& l : model.layers) {
    arch["layers"].push_back({{"fan_in", l.spec.fan_in},
                              {"fan_out", l.spec.fan_out},
                              {"activation", l.spec.activation == Activation::relu ? "relu" : "identity"},
                              {"batch_norm", l.spec.batch_norm}});
  }
  out << arch.dump() << '\n';

  for (const Layer& l : model.layers) {
    write_matrix(out, l.W);
    write_doubles(out, l.b.data(), l.b.size());
    if (l.spec.batch_norm) {
      write_doubles(out, l.gamma.data(), l.gamma.size());
      write_doubles(out, l.beta.data(), l.beta.size());
      write_doubles(out, l.running_mean.data(), l.running_mean.size());
      write_doubles(out, l.running_var.data(), l.running_var.size());
    }
  }
  if (!out) throw FormatError("write failed: " + path);
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw FormatError(path + ": missing architecture line");

  nlohmann::json arch;
  try {
    arch = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad architecture JSON: " + e.what());
  }

  MlpModel model;
  model.bn_momentum = arch.value("bn_momentum", 0.9);
  model.bn_eps = arch.value("bn_eps", 1e-5);
  for (const auto& jl : arch.at("layers")) {
    Layer l;
    l.spec.fan_in = jl.at("fan_in").get<int>();
    l.spec.fan_out = jl.at("fan_out").get<int>();
    const std::string act = jl.at("activation").get<std::string>();
    if (act == "relu") {
      l.spec.activation = Activation::relu;
    } else if (act == "identity") {
      l.spec.activation = Activation::identity;
    } else {
      throw FormatError(path + ": unknown activation '" + act + "'");
    }
    l.spec.batch_norm = jl.at("batch_norm").get<bool>();
    if (l.spec.fan_in < 1 || l.spec.fan_out < 1) {
      throw FormatError(path + ": layer dimensions must be >= 1");
    }
    l.W.resize(l.spec.fan_in, l.spec.fan_out);
    read_matrix(in, l.W);
    l.b.resize(l.spec.fan_out);
    read_doubles(in, l.b.data(), l.b.size());
    if (l.spec.batch_norm) {
      l.gamma.resize(l.spec.fan_out);
      l.beta.resize(l.spec.fan_out);
      l.running_mean.resize(l.spec.fan_out);
      l.running_var.resize(l.spec.fan_out);
      read_doubles(in, l.gamma.data(), l.gamma.size());
      read_doubles(in, l.beta.data(), l.beta.size());
      read_doubles(in, l.running_mean.data(), l.running_mean.size());
      read_doubles(in, l.running_var.data(), l.running_var.size());
    }
    model.layers.push_back(std::move(l));
  }
  if (model.layers.empty()) throw FormatError(path + ": no layers");
  for (size_t l = 1; l < model.layers.size(); ++l) {
    if (model.layers[l].spec.fan_in != model.layers[l - 1].spec.fan_out) {
      throw FormatError(path + ": layer dimensions do not chain");
    }
  }
  return model;
}

}  // namespace letsne
