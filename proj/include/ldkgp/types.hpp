#ifndef LDKGP_TYPES_HPP
#define LDKGP_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ldkgp {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Error hierarchy. The CLI maps each family to a stable exit code:
// config -> 2, data -> 3, numeric -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

struct InvalidConfig : ConfigError {
  using ConfigError::ConfigError;
};
struct InvalidFractions : ConfigError {
  using ConfigError::ConfigError;
};
struct InvalidSpec : ConfigError {
  using ConfigError::ConfigError;
};

struct ParseError : DataError {
  using DataError::DataError;
};
struct MissingColumn : DataError {
  using DataError::DataError;
};
struct UnknownEntity : DataError {
  using DataError::DataError;
};
struct ShapeMismatch : DataError {
  using DataError::DataError;
};
struct DegenerateTarget : DataError {
  using DataError::DataError;
};
struct SizeCapExceeded : DataError {
  using DataError::DataError;
};

struct NotPositiveDefinite : NumericError {
  using NumericError::NumericError;
};
struct SingularFactor : NumericError {
  using NumericError::NumericError;
};
struct NonFiniteValue : NumericError {
  using NumericError::NumericError;
};

}  // namespace ldkgp

#endif
