#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sacd {

// Dense row-major tensor of 64-bit floats. Shape metadata plus a flat
// data array; product(shape) == data.size() always holds.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_in, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape_in, std::vector<double> data_in);

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at2(std::size_t r, std::size_t c);
  double at2(std::size_t r, std::size_t c) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  // Value of a single-element tensor; throws otherwise.
  double item() const;
};

std::string shape_str(const std::vector<std::size_t>& shape);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Numerically stable softmax / log-softmax over a contiguous row.
void softmax_row(const double* in, double* out, std::size_t n);
void log_softmax_row(const double* in, double* out, std::size_t n);

// Stable log(sum(exp(x))) over n entries.
double logsumexp(const double* x, std::size_t n);

// Row-wise softmax over the last axis of a rank-1 or rank-2 tensor.
Tensor softmax_last_axis(const Tensor& t);
Tensor log_softmax_last_axis(const Tensor& t);

// Entropy -sum(p log p) of one probability row; 0 log 0 := 0.
double entropy(const double* p, std::size_t n);

}  // namespace sacd
