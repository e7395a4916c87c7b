#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sacd/rng.hpp"
#include "sacd/tape.hpp"
#include "sacd/tensor.hpp"

namespace sacd {

// Bias-corrected Adam moments for one parameter tensor.
struct AdamState {
  Tensor m;
  Tensor v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(const std::vector<std::size_t>& shape) : m(shape, 0.0), v(shape, 0.0) {}
  AdamState() = default;
};

// One in-place Adam update. `name` labels the parameter in error messages.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr,
               const std::string& name = "param");

// He initialization: rank >= 2 shapes draw N(0, sqrt(2/fan_in)) with
// fan_in = shape[0]; rank-1 shapes are biases and come back zero-filled.
Tensor he_init(const std::vector<std::size_t>& shape, Rng& rng);

// Builds a scalar loss on the tape from parameter nodes supplied in the
// same order as the tensors handed to gradient_check.
using LossBuilder = std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>;

// Compares the tape gradient of build_loss against central finite
// differences with step eps. Returns the max over coordinates of
// |autodiff - central| / max(1, |central|).
double gradient_check(const LossBuilder& build_loss, const std::vector<Tensor>& params, double eps);

}  // namespace sacd
