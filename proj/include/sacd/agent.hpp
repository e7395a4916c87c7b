#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sacd/network.hpp"
#include "sacd/replay.hpp"
#include "sacd/rng.hpp"
#include "sacd/tape.hpp"
#include "sacd/tensor.hpp"

namespace sacd {

// A sampled minibatch laid out as tensors. `done` carries 1.0 only for
// true terminals, so truncated episodes keep their bootstrap term.
struct Batch {
  Tensor obs;        // [B, obs_dim]
  std::vector<std::size_t> actions;
  Tensor rewards;    // [B]
  Tensor next_obs;   // [B, obs_dim]
  Tensor done;       // [B], 1.0 = terminal

  std::size_t size() const { return actions.size(); }
  static Batch from_transitions(const std::vector<Transition>& transitions);
};

struct TargetUpdate {
  enum class Mode { kHard, kPolyak };
  Mode mode = Mode::kHard;
  std::size_t interval = 1000;  // hard copies, counted in gradient steps
  double tau = 0.005;           // polyak blend per gradient step

  static TargetUpdate hard(std::size_t interval);
  static TargetUpdate polyak(double tau);
};

struct AgentConfig {
  std::size_t obs_dim = 0;
  std::size_t n_actions = 0;
  std::vector<std::size_t> hidden = {64, 64};
  double gamma = 0.99;
  double learning_rate = 3e-4;
  bool alpha_autotune = true;
  double alpha_initial = 1.0;  // the fixed value when autotune is off
  double target_entropy = 0.0;
  TargetUpdate target_update;
  // Which critic pair feeds the policy loss: the freshly updated locals
  // (default) or the slow target copies.
  bool policy_loss_uses_target_critics = false;
};

struct StepMetrics {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double policy_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;           // after this step's temperature update
  double policy_entropy = 0.0;  // batch mean, from the pre-update policy
};

struct PolicyEval {
  std::vector<double> probs;
  std::vector<double> log_probs;  // via log-softmax, never log(prob)
};

// Categorical draw; validates that probs is a distribution.
std::size_t sample_action(const std::vector<double>& probs, Rng& rng);
// Argmax with lowest-index tie-break.
std::size_t greedy_action(const std::vector<double>& probs);

// Exact expectation V = p . (q - alpha * log p); p = 0 entries contribute 0.
double soft_state_value(const std::vector<double>& probs, const std::vector<double>& q, double alpha);

// log pi floor before alpha * log pi products; saturated softmax rows
// would otherwise feed -inf into a 0 * inf product.
inline constexpr double kLogProbFloor = -30.0;

// The three loss graphs, shared by training and gradient checking.
Tape::NodeId critic_loss_graph(Tape& tape, const MlpArch& arch, const std::vector<Tape::NodeId>& critic_params,
                               const Tensor& obs, const std::vector<std::size_t>& actions, const Tensor& targets);
Tape::NodeId policy_loss_graph(Tape& tape, const MlpArch& arch, const std::vector<Tape::NodeId>& policy_params,
                               const Tensor& obs, const Tensor& q_min, double alpha);
Tape::NodeId temperature_loss_graph(Tape& tape, Tape::NodeId log_alpha, const Tensor& entropies,
                                    double target_entropy);

// Value of the temperature objective as a pure function of alpha.
double temperature_loss_value(double alpha, double mean_entropy, double target_entropy);

// SAC-Discrete: softmax policy, twin critics with target copies, learned
// or fixed temperature.
class SacAgent {
 public:
  SacAgent(AgentConfig config, Rng& init_rng);

  const AgentConfig& config() const { return config_; }
  double alpha() const;
  double log_alpha() const { return log_alpha_[0]; }
  std::size_t update_count() const { return update_count_; }

  PolicyEval policy_distribution(const std::vector<double>& obs) const;
  // Row-wise distributions for a whole observation batch.
  Tensor policy_probs(const Tensor& obs_batch) const;

  // Per-element y = r + gamma * (1 - terminal) * V(s'), with V from the
  // elementwise min of the two target critics and the current policy.
  Tensor critic_targets(const Batch& batch) const;

  // Elementwise min over the two local critics.
  Tensor min_local_q(const Tensor& obs_batch) const;
  // Elementwise min over the two target critics.
  Tensor min_target_q(const Tensor& obs_batch) const;

  // Critics -> policy -> temperature -> target update, in that order.
  StepMetrics update(const Batch& batch);

  // Hard copy on schedule or polyak blend, per config.
  void update_targets();

  std::string checkpoint_json() const;
  static SacAgent from_checkpoint_json(const std::string& text);

  const MlpArch& arch() const { return arch_; }
  const MlpParams& policy_params() const { return policy_; }
  const MlpParams& q1_params() const { return q1_; }
  const MlpParams& q2_params() const { return q2_; }
  const MlpParams& q1_target_params() const { return q1_target_; }
  const MlpParams& q2_target_params() const { return q2_target_; }

 private:
  SacAgent() = default;

  AgentConfig config_;
  MlpArch arch_;
  MlpParams policy_, q1_, q2_, q1_target_, q2_target_;
  MlpAdam policy_adam_, q1_adam_, q2_adam_;
  Tensor log_alpha_;
  AdamState log_alpha_adam_;
  std::size_t update_count_ = 0;
};

}  // namespace sacd
