#include "sacd/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace sacd {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr, const std::string& name) {
  if (!param.same_shape(grad)) {
    throw std::invalid_argument("adam_step: parameter '" + name + "' shape " + shape_str(param.shape) +
                                " does not match gradient shape " + shape_str(grad.shape));
  }
  if (!state.m.same_shape(param)) {
    throw std::invalid_argument("adam_step: state for '" + name + "' tracks shape " + shape_str(state.m.shape) +
                                ", parameter has " + shape_str(param.shape));
  }
  for (std::size_t i = 0; i < grad.numel(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw std::runtime_error("adam_step: non-finite gradient entry for parameter '" + name + "' at flat index " +
                               std::to_string(i));
    }
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.numel(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

Tensor he_init(const std::vector<std::size_t>& shape, Rng& rng) {
  if (shape.empty()) throw std::invalid_argument("he_init: shape must have at least one dimension");
  if (shape[0] == 0) throw std::invalid_argument("he_init: zero fan_in");
  if (shape.size() == 1) return Tensor(shape, 0.0);  // bias

  const double stddev = std::sqrt(2.0 / static_cast<double>(shape[0]));
  Tensor out(shape, 0.0);
  for (double& v : out.data) v = stddev * draw_normal(rng);
  return out;
}

namespace {

double eval_loss(const LossBuilder& build_loss, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Tape::NodeId> ids;
  ids.reserve(params.size());
  for (const Tensor& p : params) ids.push_back(tape.leaf(p));
  const double value = tape.value(build_loss(tape, ids)).item();
  if (!std::isfinite(value)) throw std::runtime_error("gradient_check: loss evaluated to a non-finite value");
  return value;
}

}  // namespace

double gradient_check(const LossBuilder& build_loss, const std::vector<Tensor>& params, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("gradient_check: eps must be positive");

  Tape tape;
  std::vector<Tape::NodeId> ids;
  ids.reserve(params.size());
  for (const Tensor& p : params) ids.push_back(tape.param(p));
  const Tape::NodeId loss = build_loss(tape, ids);
  if (!std::isfinite(tape.value(loss).item())) {
    throw std::runtime_error("gradient_check: loss evaluated to a non-finite value");
  }
  const Tape::Gradients grads = tape.backward(loss);

  double max_err = 0.0;
  std::vector<Tensor> work = params;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const Tensor& ad = grads.at(ids[pi]);
    for (std::size_t i = 0; i < params[pi].numel(); ++i) {
      const double orig = work[pi][i];
      work[pi][i] = orig + eps;
      const double f_plus = eval_loss(build_loss, work);
      work[pi][i] = orig - eps;
      const double f_minus = eval_loss(build_loss, work);
      work[pi][i] = orig;
      const double fd = (f_plus - f_minus) / (2.0 * eps);
      const double err = std::abs(ad[i] - fd) / std::max(1.0, std::abs(fd));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace sacd
