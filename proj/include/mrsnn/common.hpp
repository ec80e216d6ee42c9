#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace mrsnn {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXf;

inline constexpr int kNumClasses = 10;

// Error taxonomy. Each kind maps to one failure class callers may want to
// distinguish (bad input data vs. bad configuration vs. numeric blow-up).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct NumericFault : Error {
  using Error::Error;
};
struct TrainingFault : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct UnsupportedFormat : ParseError {
  using ParseError::ParseError;
};

}  // namespace mrsnn
