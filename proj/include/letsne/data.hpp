#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "letsne/common.hpp"

namespace letsne {

/// A sample table: one row per sample, one column per feature.
///
/// `labels` is empty when the dataset is unlabelled. A label of -1 marks an
/// unlabelled sample (cube files use 0 for "background"; it is mapped to -1 on
/// load). Real class ids are contiguous 0..C-1. `grid` is set when the rows
/// are the row-major pixels of a height x width image.
struct DataMatrix {
  Matrix values;
  std::vector<int> labels;
  std::optional<std::pair<int, int>> grid;  // (height, width), height*width == rows()
  Vector feature_means;                     // filled by standardize()
  Vector feature_stds;
  std::vector<double> color_proxy;  // real-valued per-sample scalar for plot coloring

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  bool has_labels() const { return !labels.empty(); }

  /// Number of distinct real classes (ignores -1 sentinels).
  int num_classes() const;
  /// Row indices with a real label (label >= 0).
  std::vector<int> labelled_rows() const;
};

/// Parse a CSV file (header line, '.' decimals). When `label_column` names a
/// header, that column becomes class labels, remapped to 0..C-1 in sorted
/// order of the original tokens (numeric order when all tokens are numbers).
DataMatrix load_tabular(const std::string& path,
                        const std::optional<std::string>& label_column = std::nullopt);

/// Read an HSC cube file: magic "HSCUBE01", one JSON header line
/// {height, width, bands, dtype: "f32"|"f64", has_labels}, then the
/// band-interleaved-by-pixel little-endian payload, then (if has_labels) one
/// u16 label per pixel where 0 means unlabelled.
DataMatrix load_cube(const std::string& path);

/// Inverse of load_cube for grid-shaped data. dtype is "f32" or "f64".
void save_cube(const DataMatrix& data, const std::string& path,
               const std::string& dtype = "f64");

/// Z-score every column with the population standard deviation. Constant
/// columns divide by 1 and come out all-zero. Recorded means/stds overwrite
/// any previous ones.
DataMatrix standardize(const DataMatrix& data);

/// Isotropic Gaussian class clusters. Class centers are standard normal draws
/// scaled by unit distance; samples add `spread`-scaled noise. Pure function
/// of the arguments.
DataMatrix make_blobs(int n_per_class, int classes, int d, double spread, uint64_t seed);

/// Classic 3-D swiss roll. The unrolled arc coordinate t of each sample is
/// stored in `color_proxy`; with noise == 0 every row is exactly
/// (t cos t, height, t sin t).
DataMatrix make_swiss_roll(int n, double noise, uint64_t seed);

}  // namespace letsne
