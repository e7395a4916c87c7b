#include "sacd/network.hpp"

#include <stdexcept>

namespace sacd {

MlpArch::MlpArch(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output) {
  sizes.push_back(input);
  for (std::size_t h : hidden) sizes.push_back(h);
  sizes.push_back(output);
  for (std::size_t s : sizes) {
    if (s == 0) throw std::invalid_argument("MlpArch: zero-width layer");
  }
}

MlpParams MlpParams::he_initialized(const MlpArch& arch, Rng& rng) {
  MlpParams params;
  for (std::size_t layer = 0; layer < arch.n_layers(); ++layer) {
    params.tensors.push_back(he_init({arch.sizes[layer], arch.sizes[layer + 1]}, rng));
    params.tensors.push_back(he_init({arch.sizes[layer + 1]}, rng));  // bias, zero-filled
  }
  return params;
}

MlpAdam::MlpAdam(const MlpParams& params) {
  states.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) states.emplace_back(t.shape);
}

Tensor mlp_forward(const MlpArch& arch, const MlpParams& params, const Tensor& input) {
  if (input.rank() != 2 || input.shape[1] != arch.input_dim()) {
    throw std::invalid_argument("mlp_forward: input shape " + shape_str(input.shape) + " does not match input dim " +
                                std::to_string(arch.input_dim()));
  }
  Tensor h = input;
  for (std::size_t layer = 0; layer < arch.n_layers(); ++layer) {
    Tensor z = matmul(h, params.tensors[2 * layer]);
    const Tensor& b = params.tensors[2 * layer + 1];
    for (std::size_t r = 0; r < z.shape[0]; ++r)
      for (std::size_t c = 0; c < z.shape[1]; ++c) z[r * z.shape[1] + c] += b[c];
    if (layer + 1 < arch.n_layers()) {
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    h = std::move(z);
  }
  return h;
}

Tape::NodeId mlp_forward(Tape& tape, const MlpArch& arch, const std::vector<Tape::NodeId>& params,
                         Tape::NodeId input) {
  if (params.size() != 2 * arch.n_layers()) {
    throw std::invalid_argument("mlp_forward: expected " + std::to_string(2 * arch.n_layers()) +
                                " parameter nodes, got " + std::to_string(params.size()));
  }
  Tape::NodeId h = input;
  for (std::size_t layer = 0; layer < arch.n_layers(); ++layer) {
    Tape::NodeId z = tape.add(tape.matmul(h, params[2 * layer]), params[2 * layer + 1]);
    h = layer + 1 < arch.n_layers() ? tape.relu(z) : z;
  }
  return h;
}

std::vector<Tape::NodeId> register_params(Tape& tape, const MlpParams& params) {
  std::vector<Tape::NodeId> ids;
  ids.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) ids.push_back(tape.param(t));
  return ids;
}

void adam_step_all(MlpParams& params, const std::vector<Tensor>& grads, MlpAdam& adam, double lr,
                   const std::string& label) {
  if (grads.size() != params.tensors.size()) {
    throw std::invalid_argument("adam_step_all: gradient count mismatch for " + label);
  }
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    adam_step(params.tensors[i], grads[i], adam.states[i], lr, label + ".t" + std::to_string(i));
  }
}

}  // namespace sacd
