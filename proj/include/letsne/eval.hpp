#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "letsne/common.hpp"

namespace letsne {

/// One-vs-rest linear SVM trained by subgradient descent on L2-regularized
/// hinge loss. Features are standardized internally; the scaler is stored so
/// prediction sees the same space.
struct LinearSvm {
  Matrix W;  // d x C, one column of weights per class
  RowVector b;
  Vector feat_mean, feat_inv_std;
};

/// `train_mask[i]` selects the rows used for fitting. `c` is the usual SVM
/// cost (larger = less regularization); c == 0 trains unregularized.
LinearSvm linear_svm_train(const Matrix& X, const std::vector<int>& labels,
                           const std::vector<uint8_t>& train_mask, double c, int epochs,
                           uint64_t seed);

/// Argmax of the per-class scores, ties toward the smaller class id.
std::vector<int> svm_predict(const LinearSvm& svm, const Matrix& X);

struct EvalReport {
  double accuracy = 0.0;
  double kappa = 0.0;
  std::vector<double> per_class_accuracy;
  Eigen::MatrixXi confusion;  // rows = truth, cols = prediction
  double train_fraction = 0.0;
  uint64_t seed = 0;
};

/// Stratified seeded split, SVM fit on the train part, report on the test
/// part. Every class needs at least 2 samples.
EvalReport evaluate(const Matrix& embeddings, const std::vector<int>& labels,
                    double train_fraction, uint64_t seed);

/// Chance-corrected agreement from a confusion matrix.
double cohen_kappa(const Eigen::MatrixXi& confusion);

/// JSON with keys accuracy, kappa, per_class, confusion, split.
std::string report_to_json(const EvalReport& report);

struct PcaResult {
  Matrix components;  // d x e, orthonormal columns, descending variance
  Vector mean;
  Vector eigenvalues;  // length e
  Matrix projected;    // n x e
};

/// Top-e principal components by orthogonal iteration on the covariance
/// matrix. Components are sign-fixed so the largest-magnitude loading of each
/// is positive.
PcaResult pca_fit(const Matrix& data, int e);
Matrix pca_project(const Matrix& data, int e);

/// Leave-one-out k-nearest-neighbor accuracy. Neighbor distance ties break
/// toward the smaller sample index, vote ties toward the smaller class id.
double knn_classify_accuracy(const Matrix& embeddings, const std::vector<int>& labels, int k);

}  // namespace letsne
