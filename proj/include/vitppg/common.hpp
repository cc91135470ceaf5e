#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace vitppg {

using Scalar = double;

using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskGrid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using MaskVector = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;

// Error hierarchy. The CLI maps each kind onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

class EmptyPoolError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace vitppg
