#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace midl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// All stochastic code takes this engine explicitly; nothing seeds itself.
using Rng = std::mt19937_64;

enum class ErrorCode {
  Domain,
  Shape,
  NonFinite,
  Dataset,
  Io,
  Config,
  Argument,
  State,
  Unsatisfiable,
  UndefinedPenalty,
};

/// Stable machine-readable tag, used as the CLI error prefix.
const char* error_tag(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Throws ErrorCode::NonFinite when `value` is NaN or infinite.
void require_finite(double value, const char* what);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);

}  // namespace midl
