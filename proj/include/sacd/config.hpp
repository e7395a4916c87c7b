#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sacd/agent.hpp"

namespace sacd {

// Full experiment description. gamma < 0 keeps the environment's
// canonical discount; everything else carries desk-scale defaults.
struct RunConfig {
  std::string env = "twostate";
  std::string mdp_file;  // when set, wins over the env name
  std::uint64_t seed = 0;
  std::size_t total_env_steps = 30000;
  double gamma = -1.0;
  double learning_rate = 3e-4;  // all three optimizers
  std::size_t batch_size = 64;
  std::size_t buffer_capacity = 100000;
  std::size_t initial_random_steps = 1000;
  std::size_t steps_per_learning_update = 4;
  std::size_t learning_iterations_per_round = 1;
  TargetUpdate target_update = TargetUpdate::hard(1000);
  double entropy_target_coefficient = 0.98;
  bool alpha_autotune = true;
  double alpha_initial = 1.0;  // the fixed temperature when autotune is off
  bool policy_loss_uses_target_critics = false;
  std::vector<std::size_t> hidden_layer_sizes = {64, 64};
  std::size_t eval_interval = 1000;  // 0 disables evaluation
  std::size_t eval_episodes = 10;
  bool reward_clip = false;
  std::size_t episode_step_limit = 200;

  void validate() const;
};

// Parses a config file body (JSON, keys named after the fields above).
// Unknown keys are rejected so typos fail loudly.
RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path);

}  // namespace sacd
