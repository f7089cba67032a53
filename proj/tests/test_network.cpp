#include <doctest.h>

#include <cmath>

#include "letsne/network.hpp"
#include "letsne/rng.hpp"
#include "test_util.hpp"

using namespace letsne;

namespace {

Matrix random_matrix(Rng& rng, Index r, Index c) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

/// Fixed quadratic functional of the output so dL/dY = C + D .* Y.
struct ProbeLoss {
  Matrix C, D;
  double value(const Matrix& Y) const {
    return (C.array() * Y.array()).sum() + 0.5 * (D.array() * Y.array().square()).sum();
  }
  Matrix grad(const Matrix& Y) const { return C.array() + D.array() * Y.array(); }
};

/// Pointers to every trainable scalar, in a stable order.
std::vector<double*> trainables(MlpModel& model) {
  std::vector<double*> out;
  for (Layer& l : model.layers) {
    for (Index i = 0; i < l.W.size(); ++i) out.push_back(l.W.data() + i);
    for (Index i = 0; i < l.b.size(); ++i) out.push_back(l.b.data() + i);
    for (Index i = 0; i < l.gamma.size(); ++i) out.push_back(l.gamma.data() + i);
    for (Index i = 0; i < l.beta.size(); ++i) out.push_back(l.beta.data() + i);
  }
  return out;
}

std::vector<double> flatten(const Gradients& grads) {
  std::vector<double> out;
  for (const auto& l : grads.layers) {
    for (Index i = 0; i < l.dW.size(); ++i) out.push_back(l.dW.data()[i]);
    for (Index i = 0; i < l.db.size(); ++i) out.push_back(l.db.data()[i]);
    for (Index i = 0; i < l.dgamma.size(); ++i) out.push_back(l.dgamma.data()[i]);
    for (Index i = 0; i < l.dbeta.size(); ++i) out.push_back(l.dbeta.data()[i]);
  }
  return out;
}

}  // namespace

TEST_CASE("init_model parameter count follows the architecture") {
  const MlpModel model = init_model(10, {256, 64}, 2, 3);
  REQUIRE(model.layers.size() == 3);
  // weights+biases plus gamma/beta on the two hidden layers
  const Index expected = (10 * 256 + 256) + (256 * 64 + 64) + (64 * 2 + 2) + 2 * (256 + 64);
  CHECK(model.parameter_count() == expected);
  CHECK(expected == 20034);

  CHECK(init_model(5, {}, 3, 0).layers.size() == 1);
  CHECK(init_model(5, {}, 3, 0).parameter_count() == 5 * 3 + 3);
}

TEST_CASE("init_model is deterministic per seed") {
  const MlpModel a = init_model(6, {8}, 2, 42);
  const MlpModel b = init_model(6, {8}, 2, 42);
  const MlpModel c = init_model(6, {8}, 2, 43);
  CHECK(a.layers[0].W == b.layers[0].W);
  CHECK(a.layers[1].W == b.layers[1].W);
  CHECK(a.layers[0].W != c.layers[0].W);
}

TEST_CASE("forward of an identity linear layer is the identity") {
  MlpModel model = init_model(3, {}, 3, 0);
  model.layers[0].W = Matrix::Identity(3, 3);
  model.layers[0].b.setZero();
  Rng rng(1);
  const Matrix X = random_matrix(rng, 5, 3);
  ForwardCache cache;
  CHECK((forward_train(model, X, cache) - X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((forward_inference(model, X) - X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batch norm standardizes the pre-activation columns") {
  MlpModel model = init_model(4, {4}, 2, 7);
  model.layers[0].W = Matrix::Identity(4, 4);  // expose the raw input to the bn step
  model.layers[0].b.setZero();
  Rng rng(2);
  Matrix X = random_matrix(rng, 64, 4);
  X.col(2).array() += 5.0;  // nonzero mean, arbitrary variance
  X.col(1).array() *= 3.0;
  ForwardCache cache;
  forward_train(model, X, cache);
  const Matrix& bn_out = cache.layers[0].pre_activation;  // gamma=1, beta=0
  for (Index j = 0; j < 4; ++j) {
    CHECK(std::abs(bn_out.col(j).mean()) < 1e-9);
    const double var = (bn_out.col(j).array() - bn_out.col(j).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("train mode needs a real batch") {
  MlpModel model = init_model(3, {4}, 2, 0);
  ForwardCache cache;
  CHECK_THROWS_AS(forward_train(model, Matrix::Random(1, 3), cache), UsageError);
}

TEST_CASE("running statistics converge to a fixed batch") {
  MlpModel model = init_model(5, {6}, 2, 11);
  Rng rng(3);
  const Matrix X = random_matrix(rng, 32, 5);
  ForwardCache cache;
  Matrix train_out;
  for (int it = 0; it < 400; ++it) train_out = forward_train(model, X, cache);
  const Matrix infer_out = forward_inference(model, X);
  CHECK((train_out - infer_out).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("inference is pure") {
  MlpModel model = init_model(4, {5}, 2, 9);
  Rng rng(4);
  const Matrix X = random_matrix(rng, 8, 4);
  const RowVector rm = model.layers[0].running_mean;
  const Matrix y1 = forward_inference(model, X);
  const Matrix y2 = forward_inference(model, X);
  CHECK(y1 == y2);
  CHECK(model.layers[0].running_mean == rm);
}

TEST_CASE("backward: zero upstream gradient gives zero gradients") {
  MlpModel model = init_model(4, {6}, 3, 5);
  Rng rng(5);
  const Matrix X = random_matrix(rng, 7, 4);
  ForwardCache cache;
  forward_train(model, X, cache);
  const Gradients g = backward(model, cache, Matrix::Zero(7, 3));
  for (const auto& l : g.layers) {
    CHECK(l.dW.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.db.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("backward: closed-form gradient of a single linear layer") {
  // L = 0.5 ||Y||^2 with Y = XW + b gives dW = X^T Y, db = colsum(Y)
  MlpModel model = init_model(3, {}, 2, 6);
  Rng rng(6);
  const Matrix X = random_matrix(rng, 9, 3);
  ForwardCache cache;
  const Matrix Y = forward_train(model, X, cache);
  const Gradients g = backward(model, cache, Y);
  CHECK((g.layers[0].dW - X.transpose() * Y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.layers[0].db - Y.colwise().sum()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward rejects a stale cache") {
  MlpModel model = init_model(3, {4}, 2, 8);
  ForwardCache cache;
  forward_train(model, Matrix::Random(6, 3), cache);
  CHECK_THROWS_AS(backward(model, cache, Matrix::Zero(5, 2)), UsageError);
}

TEST_CASE("backward matches central finite differences on random models") {
  Rng rng(7);
  const std::vector<std::vector<int>> architectures = {{}, {5}, {6, 4}};
  const double h = 1e-5;
  for (size_t arch = 0; arch < architectures.size(); ++arch) {
    for (int trial = 0; trial < 3; ++trial) {
      const int d = 2 + static_cast<int>(rng.below(5));
      const Index m = 3 + static_cast<Index>(rng.below(6));
      const int e = 2;
      MlpModel model = init_model(d, architectures[arch], e,
                                  1000 + static_cast<uint64_t>(arch) * 10 + trial);
      const Matrix X = random_matrix(rng, m, d);
      ProbeLoss probe{random_matrix(rng, m, e), random_matrix(rng, m, e)};

      ForwardCache cache;
      MlpModel work = model;
      const Matrix Y = forward_train(work, X, cache);
      const Gradients grads = backward(work, cache, probe.grad(Y));
      const std::vector<double> flat = flatten(grads);

      MlpModel probe_model = model;
      std::vector<double*> params = trainables(probe_model);
      REQUIRE(static_cast<Index>(params.size()) == model.parameter_count());
      double worst = 0.0;
      for (size_t p = 0; p < params.size(); ++p) {
        const double saved = *params[p];
        *params[p] = saved + h;
        MlpModel plus = probe_model;
        ForwardCache fc;
        const double lp = probe.value(forward_train(plus, X, fc));
        *params[p] = saved - h;
        MlpModel minus = probe_model;
        const double lm = probe.value(forward_train(minus, X, fc));
        *params[p] = saved;
        worst = std::max(worst, testutil::fd_err(flat[p], (lp - lm) / (2.0 * h)));
      }
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("adam_step behaviors") {
  MlpModel model = init_model(3, {4}, 2, 12);
  const MlpModel before = model;
  AdamState state = AdamState::zeros_like(model);

  SUBCASE("zero gradients leave parameters unchanged") {
    Gradients zero;
    zero.layers.resize(model.layers.size());
    for (size_t l = 0; l < model.layers.size(); ++l) {
      zero.layers[l].dW = Matrix::Zero(model.layers[l].W.rows(), model.layers[l].W.cols());
      zero.layers[l].db = RowVector::Zero(model.layers[l].b.size());
      zero.layers[l].dgamma = RowVector::Zero(model.layers[l].gamma.size());
      zero.layers[l].dbeta = RowVector::Zero(model.layers[l].beta.size());
    }
    adam_step(model, state, zero, AdamConfig{}, 1);
    CHECK(model.layers[0].W == before.layers[0].W);
    CHECK(model.layers[1].W == before.layers[1].W);
  }

  SUBCASE("lr = 0 leaves parameters unchanged") {
    Gradients g;
    g.layers.resize(model.layers.size());
    for (size_t l = 0; l < model.layers.size(); ++l) {
      g.layers[l].dW = Matrix::Constant(model.layers[l].W.rows(), model.layers[l].W.cols(), 0.3);
      g.layers[l].db = RowVector::Constant(model.layers[l].b.size(), 0.3);
      g.layers[l].dgamma = RowVector::Constant(model.layers[l].gamma.size(), 0.3);
      g.layers[l].dbeta = RowVector::Constant(model.layers[l].beta.size(), 0.3);
    }
    AdamConfig cfg;
    cfg.lr = 0.0;
    adam_step(model, state, g, cfg, 1);
    CHECK(model.layers[0].W == before.layers[0].W);
  }

  SUBCASE("constant gradient drives the step size toward lr") {
    // Adam's scale invariance: with g constant, m_hat/sqrt(v_hat) -> sign(g).
    MlpModel tiny = init_model(1, {}, 1, 0);
    AdamState st = AdamState::zeros_like(tiny);
    Gradients g;
    g.layers.resize(1);
    g.layers[0].dW = Matrix::Constant(1, 1, 2.5);
    g.layers[0].db = RowVector::Zero(1);
    AdamConfig cfg;
    double prev = tiny.layers[0].W(0, 0);
    double step_size = 0.0;
    for (int t = 1; t <= 500; ++t) {
      adam_step(tiny, st, g, cfg, t);
      step_size = prev - tiny.layers[0].W(0, 0);
      prev = tiny.layers[0].W(0, 0);
    }
    CHECK(step_size == doctest::Approx(cfg.lr).epsilon(1e-3));
  }

  SUBCASE("non-finite gradients abort") {
    Gradients g;
    g.layers.resize(model.layers.size());
    for (size_t l = 0; l < model.layers.size(); ++l) {
      g.layers[l].dW = Matrix::Zero(model.layers[l].W.rows(), model.layers[l].W.cols());
      g.layers[l].db = RowVector::Zero(model.layers[l].b.size());
      g.layers[l].dgamma = RowVector::Zero(model.layers[l].gamma.size());
      g.layers[l].dbeta = RowVector::Zero(model.layers[l].beta.size());
    }
    g.layers[0].dW(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(model, state, g, AdamConfig{}, 1), TrainingError);
  }
}

TEST_CASE("model persistence round-trips bit-exactly") {
  testutil::TempDir dir("model");
  MlpModel model = init_model(7, {9, 5}, 3, 77);
  // push the running stats away from the init values
  Rng rng(8);
  ForwardCache cache;
  forward_train(model, random_matrix(rng, 16, 7), cache);

  save_model(model, (dir / "m.bin").string());
  const MlpModel back = load_model((dir / "m.bin").string());
  REQUIRE(back.layers.size() == model.layers.size());
  for (size_t l = 0; l < model.layers.size(); ++l) {
    CHECK(back.layers[l].W == model.layers[l].W);
    CHECK(back.layers[l].b == model.layers[l].b);
    if (model.layers[l].spec.batch_norm) {
      CHECK(back.layers[l].gamma == model.layers[l].gamma);
      CHECK(back.layers[l].beta == model.layers[l].beta);
      CHECK(back.layers[l].running_mean == model.layers[l].running_mean);
      CHECK(back.layers[l].running_var == model.layers[l].running_var);
    }
  }
  // byte-identical second save
  save_model(back, (dir / "m2.bin").string());
  CHECK(testutil::read_file(dir / "m.bin") == testutil::read_file(dir / "m2.bin"));
}
