#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace letsne {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Malformed text input (CSV rows, region grids). Message carries the line number.
class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structural violation in a binary or structured file (cube payloads, model containers).
class FormatError : public std::runtime_error {
public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid parameter, configuration, or mode/input mismatch. The CLI maps this to exit 2.
class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure while optimizing (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace letsne
