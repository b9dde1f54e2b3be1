#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace mvlatent::nn {

/// Dense row-major tensor of 64-bit floats. Rank 1 (vectors) and rank 2
/// (matrices, rows = samples) cover everything in this library.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);
  /// Validating constructor: rejects NaN/Inf entries (checked mode).
  static Tensor checked(std::vector<std::size_t> shape, std::vector<double> data);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool empty() const { return data.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  /// Same data, new shape; element count must match.
  Tensor reshaped(std::vector<std::size_t> new_shape) const;
  /// View a rank-1 tensor of length d as a [1, d] matrix.
  Tensor as_row() const;
  Tensor row(std::size_t i) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  /// Throws NumericError naming `what` if any entry is NaN/Inf.
  void require_finite(const std::string& what) const;
};

bool bitwise_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// "[2, 3]" -- for error messages.
std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace mvlatent::nn
