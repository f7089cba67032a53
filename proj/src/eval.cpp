#include "letsne/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "letsne/rng.hpp"

namespace letsne {

namespace {

int count_classes(const std::vector<int>& labels) {
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw UsageError("evaluation requires every sample to be labelled");
    max_label = std::max(max_label, l);
  }
  return max_label + 1;
}

}  // namespace

LinearSvm linear_svm_train(const Matrix& X, const std::vector<int>& labels,
                           const std::vector<uint8_t>& train_mask, double c, int epochs,
                           uint64_t seed) {
  if (static_cast<Index>(labels.size()) != X.rows() ||
      static_cast<Index>(train_mask.size()) != X.rows()) {
    throw UsageError("linear_svm_train: labels/mask must match the rows");
  }
  if (c < 0.0) throw UsageError("linear_svm_train: c must be >= 0");
  if (c == 0.0) std::cerr << "linear_svm_train: c = 0, training unregularized\n";

  std::vector<int> train_rows;
  for (size_t i = 0; i < train_mask.size(); ++i) {
    if (train_mask[i]) train_rows.push_back(static_cast<int>(i));
  }
  const Index n = static_cast<Index>(train_rows.size());
  if (n < 2) throw UsageError("linear_svm_train: need at least 2 training samples");

  std::vector<int> train_labels(train_rows.size());
  for (size_t i = 0; i < train_rows.size(); ++i) train_labels[i] = labels[static_cast<size_t>(train_rows[i])];
  const int n_classes = count_classes(train_labels);
  {
    std::vector<char> seen(static_cast<size_t>(n_classes), 0);
    int distinct = 0;
    for (int l : train_labels) {
      if (!seen[static_cast<size_t>(l)]) {
        seen[static_cast<size_t>(l)] = 1;
        ++distinct;
      }
    }
    if (distinct < 2) throw UsageError("linear_svm_train: training split has a single class");
  }

  const Index d = X.cols();
  LinearSvm svm;
  svm.feat_mean = Vector::Zero(d);
  svm.feat_inv_std = Vector::Ones(d);
  Matrix Xt(n, d);
  for (Index i = 0; i < n; ++i) Xt.row(i) = X.row(train_rows[static_cast<size_t>(i)]);
  for (Index j = 0; j < d; ++j) {
    svm.feat_mean(j) = Xt.col(j).mean();
    const double var = (Xt.col(j).array() - svm.feat_mean(j)).square().sum() / static_cast<double>(n);
    svm.feat_inv_std(j) = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    Xt.col(j) = (Xt.col(j).array() - svm.feat_mean(j)) * svm.feat_inv_std(j);
  }

  // lambda = 1/(c n) keeps SVM-C semantics; c == 0 drops regularization.
  const double lambda = c > 0.0 ? 1.0 / (c * static_cast<double>(n)) : 0.0;
  svm.W = Matrix::Zero(d, n_classes);
  svm.b = RowVector::Zero(n_classes);

  Rng rng(mix_seed(seed, 0x53564d21));  // "SVM!"
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  int t = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (int idx : order) {
      ++t;
      const double eta = lambda > 0.0 ? 1.0 / (lambda * t) : 1.0 / std::sqrt(static_cast<double>(t));
      const Vector x = Xt.row(idx).transpose();
      for (int cls = 0; cls < n_classes; ++cls) {
        const double y = train_labels[static_cast<size_t>(idx)] == cls ? 1.0 : -1.0;
        const double margin = y * (svm.W.col(cls).dot(x) + svm.b(cls));
        svm.W.col(cls) *= (1.0 - eta * lambda);
        if (margin < 1.0) {
          svm.W.col(cls) += eta * y * x;
          svm.b(cls) += eta * y;
        }
      }
    }
  }
  return svm;
}

std::vector<int> svm_predict(const LinearSvm& svm, const Matrix& X) {
  std::vector<int> pred(static_cast<size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) {
    const Vector x =
        ((X.row(i).transpose() - svm.feat_mean).array() * svm.feat_inv_std.array()).matrix();
    const RowVector scores = (x.transpose() * svm.W) + svm.b;
    Index best = 0;
    scores.maxCoeff(&best);  // first maximum = smallest class id on ties
    pred[static_cast<size_t>(i)] = static_cast<int>(best);
  }
  return pred;
}

double cohen_kappa(const Eigen::MatrixXi& confusion) {
  const double total = confusion.sum();
  if (total <= 0.0) throw UsageError("cohen_kappa: empty confusion matrix");
  const double observed = confusion.diagonal().sum() / total;
  double expected = 0.0;
  for (Index c = 0; c < confusion.rows(); ++c) {
    expected += (confusion.row(c).sum() / total) * (confusion.col(c).sum() / total);
  }
  if (expected >= 1.0) return observed >= 1.0 ? 1.0 : 0.0;  // degenerate marginals
  return (observed - expected) / (1.0 - expected);
}

EvalReport evaluate(const Matrix& embeddings, const std::vector<int>& labels,
                    double train_fraction, uint64_t seed) {
  if (static_cast<Index>(labels.size()) != embeddings.rows()) {
    throw UsageError("evaluate: labels must match the rows");
  }
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    throw UsageError("evaluate: train_fraction must lie in (0, 1)");
  }
  const int n_classes = count_classes(labels);
  if (n_classes < 2) throw UsageError("evaluate: need at least 2 classes");

  // Stratified split: per class, shuffle and cut, keeping at least one sample
  // on each side.
  std::vector<std::vector<int>> by_class(static_cast<size_t>(n_classes));
  for (size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));
  }
  Rng rng(mix_seed(seed, 0x53504c49));  // "SPLI"
  std::vector<uint8_t> train_mask(labels.size(), 0);
  for (int cls = 0; cls < n_classes; ++cls) {
    auto& members = by_class[static_cast<size_t>(cls)];
    if (members.size() < 2) {
      throw UsageError("evaluate: class " + std::to_string(cls) +
                       " has fewer than 2 samples, cannot stratify");
    }
    rng.shuffle(members);
    const auto n_train = std::clamp<size_t>(
        static_cast<size_t>(std::lround(train_fraction * static_cast<double>(members.size()))), 1,
        members.size() - 1);
    for (size_t i = 0; i < n_train; ++i) train_mask[static_cast<size_t>(members[i])] = 1;
  }

  const LinearSvm svm = linear_svm_train(embeddings, labels, train_mask, 1.0, 200, seed);
  const std::vector<int> pred = svm_predict(svm, embeddings);

  EvalReport report;
  report.train_fraction = train_fraction;
  report.seed = seed;
  report.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (train_mask[i]) continue;
    report.confusion(labels[i], pred[i]) += 1;
  }
  const double test_total = report.confusion.sum();
  report.accuracy = report.confusion.diagonal().sum() / test_total;
  report.kappa = cohen_kappa(report.confusion);
  report.per_class_accuracy.resize(static_cast<size_t>(n_classes));
  for (int cls = 0; cls < n_classes; ++cls) {
    const double row_total = report.confusion.row(cls).sum();
    report.per_class_accuracy[static_cast<size_t>(cls)] =
        row_total > 0.0 ? report.confusion(cls, cls) / row_total : 0.0;
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy;
  j["kappa"] = report.kappa;
  j["per_class"] = report.per_class_accuracy;
  std::vector<std::vector<int>> confusion(static_cast<size_t>(report.confusion.rows()));
  for (Index r = 0; r < report.confusion.rows(); ++r) {
    confusion[static_cast<size_t>(r)].resize(static_cast<size_t>(report.confusion.cols()));
    for (Index c = 0; c < report.confusion.cols(); ++c) {
      confusion[static_cast<size_t>(r)][static_cast<size_t>(c)] = report.confusion(r, c);
    }
  }
  j["confusion"] = confusion;
  j["split"] = {{"train_fraction", report.train_fraction}, {"seed", report.seed}};
  return j.dump(2);
}

PcaResult pca_fit(const Matrix& data, int e) {
  const Index d = data.cols();
  if (e < 1 || e > d) throw UsageError("pca: target dim must lie in [1, d]");

  PcaResult result;
  result.mean = data.colwise().mean();
  Matrix centered = data.rowwise() - result.mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(data.rows());

  // Orthogonal (subspace) iteration with a Rayleigh-Ritz rotation at the end.
  Rng rng(1234577);
  Matrix Q(d, e);
  for (Index i = 0; i < d; ++i) {
    for (int j = 0; j < e; ++j) Q(i, j) = rng.normal();
  }
  Q = Eigen::HouseholderQR<Matrix>(Q).householderQ() * Matrix::Identity(d, e);
  for (int it = 0; it < 1000; ++it) {
    const Matrix Z = cov * Q;
    Matrix Q_next = Eigen::HouseholderQR<Matrix>(Z).householderQ() * Matrix::Identity(d, e);
    // Fix the QR sign ambiguity so convergence is measurable.
    for (int j = 0; j < e; ++j) {
      if (Q_next.col(j).dot(Q.col(j)) < 0.0) Q_next.col(j) = -Q_next.col(j);
    }
    const double drift = (Q_next - Q).norm();
    Q = Q_next;
    if (drift < 1e-13) break;
  }
  const Matrix small = Q.transpose() * cov * Q;
  Eigen::SelfAdjointEigenSolver<Matrix> ritz(small);
  // Ascending eigenvalues from the solver; flip to descending.
  Matrix rotation(e, e);
  result.eigenvalues.resize(e);
  for (int j = 0; j < e; ++j) {
    rotation.col(j) = ritz.eigenvectors().col(e - 1 - j);
    result.eigenvalues(j) = ritz.eigenvalues()(e - 1 - j);
  }
  result.components = Q * rotation;

  // Sign convention: largest-magnitude loading positive.
  for (int j = 0; j < e; ++j) {
    Index arg = 0;
    result.components.col(j).cwiseAbs().maxCoeff(&arg);
    if (result.components(arg, j) < 0.0) result.components.col(j) = -result.components.col(j);
  }
  result.projected = centered * result.components;
  return result;
}

Matrix pca_project(const Matrix& data, int e) { return pca_fit(data, e).projected; }

double knn_classify_accuracy(const Matrix& embeddings, const std::vector<int>& labels, int k) {
  const Index n = embeddings.rows();
  if (static_cast<Index>(labels.size()) != n) {
    throw UsageError("knn_classify_accuracy: labels must match the rows");
  }
  if (k < 1 || k > n - 1) throw UsageError("knn_classify_accuracy: k must lie in [1, n-1]");
  const int n_classes = count_classes(labels);

  Index correct = 0;
  std::vector<std::pair<double, int>> cand(static_cast<size_t>(n - 1));
  std::vector<int> votes(static_cast<size_t>(n_classes));
  for (Index i = 0; i < n; ++i) {
    size_t c = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      cand[c++] = {(embeddings.row(i) - embeddings.row(j)).squaredNorm(), static_cast<int>(j)};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (int s = 0; s < k; ++s) ++votes[static_cast<size_t>(labels[static_cast<size_t>(cand[static_cast<size_t>(s)].second)])];
    const int winner = static_cast<int>(
        std::max_element(votes.begin(), votes.end()) - votes.begin());  // ties: smaller class id
    if (winner == labels[static_cast<size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace letsne
