#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sacd/optim.hpp"
#include "sacd/rng.hpp"
#include "sacd/tape.hpp"
#include "sacd/tensor.hpp"

namespace sacd {

// Fully connected net: linear layers with ReLU between them, linear output.
struct MlpArch {
  std::vector<std::size_t> sizes;  // input, hidden..., output

  MlpArch() = default;
  MlpArch(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output);

  std::size_t n_layers() const { return sizes.size() - 1; }
  std::size_t input_dim() const { return sizes.front(); }
  std::size_t output_dim() const { return sizes.back(); }
};

// Weights and biases interleaved: W0, b0, W1, b1, ...
struct MlpParams {
  std::vector<Tensor> tensors;

  static MlpParams he_initialized(const MlpArch& arch, Rng& rng);
};

// Adam moments for every tensor of an MlpParams.
struct MlpAdam {
  std::vector<AdamState> states;

  explicit MlpAdam(const MlpParams& params);
  MlpAdam() = default;
};

// Plain forward pass, no gradient bookkeeping. Input is [batch, in].
Tensor mlp_forward(const MlpArch& arch, const MlpParams& params, const Tensor& input);

// Tape forward pass from already-created parameter nodes.
Tape::NodeId mlp_forward(Tape& tape, const MlpArch& arch, const std::vector<Tape::NodeId>& params,
                         Tape::NodeId input);

// Registers every tensor as a tape parameter, in order.
std::vector<Tape::NodeId> register_params(Tape& tape, const MlpParams& params);

// One Adam step over every tensor; `label` prefixes error messages.
void adam_step_all(MlpParams& params, const std::vector<Tensor>& grads, MlpAdam& adam, double lr,
                   const std::string& label);

}  // namespace sacd
