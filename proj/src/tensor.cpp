#include "sacd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sacd {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_in, double fill)
    : shape(std::move(shape_in)), data(shape_numel(shape), fill) {
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("Tensor: zero dimension in shape " + shape_str(shape));
  }
}

Tensor::Tensor(std::vector<std::size_t> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_str(shape) + " does not match data length " +
                                std::to_string(data.size()));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

Tensor Tensor::vec(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("Tensor::rows: tensor is not rank-2, shape " + shape_str(shape));
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("Tensor::cols: tensor is not rank-2, shape " + shape_str(shape));
  return shape[1];
}

double& Tensor::at2(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
double Tensor::at2(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("Tensor::item: tensor has " + std::to_string(numel()) + " elements");
  return data[0];
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0]) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape) + " and " + shape_str(b.shape));
  }
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor out({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data.data() + i * k;
    double* orow = out.data.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;  // one-hot observations and dead relus
      const double* brow = b.data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

void softmax_row(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(in[i] - mx);
    sum += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
}

void log_softmax_row(const double* in, double* out, std::size_t n) {
  const double lse = logsumexp(in, n);
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] - lse;
}

double logsumexp(const double* x, std::size_t n) {
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(x[i] - mx);
  return mx + std::log(sum);
}

namespace {

Tensor map_rows(const Tensor& t, void (*fn)(const double*, double*, std::size_t)) {
  if (t.rank() != 1 && t.rank() != 2) {
    throw std::invalid_argument("softmax: expects rank-1 or rank-2 tensor, got " + shape_str(t.shape));
  }
  const std::size_t n = t.shape.back();
  const std::size_t rows = t.numel() / n;
  Tensor out(t.shape, 0.0);
  for (std::size_t r = 0; r < rows; ++r) fn(t.data.data() + r * n, out.data.data() + r * n, n);
  return out;
}

}  // namespace

Tensor softmax_last_axis(const Tensor& t) { return map_rows(t, &softmax_row); }
Tensor log_softmax_last_axis(const Tensor& t) { return map_rows(t, &log_softmax_row); }

double entropy(const double* p, std::size_t n) {
  double h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

}  // namespace sacd
