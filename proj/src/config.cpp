#include "sacd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sacd {

void RunConfig::validate() const {
  if (env.empty() && mdp_file.empty()) throw std::invalid_argument("RunConfig: no environment given");
  if (total_env_steps == 0) throw std::invalid_argument("RunConfig: total_env_steps must be positive");
  if (gamma >= 1.0) throw std::invalid_argument("RunConfig: gamma must be < 1");
  if (learning_rate < 0.0) throw std::invalid_argument("RunConfig: negative learning rate");
  if (batch_size == 0) throw std::invalid_argument("RunConfig: batch_size must be positive");
  if (buffer_capacity < batch_size) throw std::invalid_argument("RunConfig: buffer smaller than one batch");
  if (steps_per_learning_update == 0) throw std::invalid_argument("RunConfig: steps_per_learning_update must be positive");
  if (learning_iterations_per_round == 0) throw std::invalid_argument("RunConfig: learning_iterations_per_round must be positive");
  if (!(entropy_target_coefficient > 0.0 && entropy_target_coefficient <= 1.0)) {
    throw std::invalid_argument("RunConfig: entropy_target_coefficient must lie in (0, 1]");
  }
  if (alpha_initial <= 0.0) throw std::invalid_argument("RunConfig: alpha_initial must be positive");
  if (episode_step_limit == 0) throw std::invalid_argument("RunConfig: episode_step_limit must be positive");
  if (eval_interval > 0 && eval_episodes == 0) throw std::invalid_argument("RunConfig: eval_episodes must be positive");
}

RunConfig config_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  static const std::set<std::string> known = {
      "env", "mdp_file", "seed", "total_env_steps", "gamma", "learning_rate", "batch_size",
      "buffer_capacity", "initial_random_steps", "steps_per_learning_update",
      "learning_iterations_per_round", "target_update", "entropy_target_coefficient",
      "alpha_autotune", "alpha_initial", "policy_loss_uses_target_critics", "hidden_layer_sizes",
      "eval_interval", "eval_episodes",
      "reward_clip", "episode_step_limit"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::runtime_error("config: unknown key '" + key + "'");
  }

  RunConfig c;
  c.env = j.value("env", c.env);
  c.mdp_file = j.value("mdp_file", c.mdp_file);
  c.seed = j.value("seed", c.seed);
  c.total_env_steps = j.value("total_env_steps", c.total_env_steps);
  c.gamma = j.value("gamma", c.gamma);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.initial_random_steps = j.value("initial_random_steps", c.initial_random_steps);
  c.steps_per_learning_update = j.value("steps_per_learning_update", c.steps_per_learning_update);
  c.learning_iterations_per_round = j.value("learning_iterations_per_round", c.learning_iterations_per_round);
  if (j.contains("target_update")) {
    const auto& t = j.at("target_update");
    const std::string mode = t.at("mode").get<std::string>();
    if (mode == "hard") {
      c.target_update = TargetUpdate::hard(t.value("interval", std::size_t{1000}));
    } else if (mode == "polyak") {
      c.target_update = TargetUpdate::polyak(t.value("tau", 0.005));
    } else {
      throw std::runtime_error("config: target_update.mode must be 'hard' or 'polyak'");
    }
  }
  c.entropy_target_coefficient = j.value("entropy_target_coefficient", c.entropy_target_coefficient);
  c.alpha_autotune = j.value("alpha_autotune", c.alpha_autotune);
  c.alpha_initial = j.value("alpha_initial", c.alpha_initial);
  c.policy_loss_uses_target_critics = j.value("policy_loss_uses_target_critics", c.policy_loss_uses_target_critics);
  c.hidden_layer_sizes = j.value("hidden_layer_sizes", c.hidden_layer_sizes);
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.reward_clip = j.value("reward_clip", c.reward_clip);
  c.episode_step_limit = j.value("episode_step_limit", c.episode_step_limit);
  c.validate();
  return c;
}

std::string config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["env"] = c.env;
  if (!c.mdp_file.empty()) j["mdp_file"] = c.mdp_file;
  j["seed"] = c.seed;
  j["total_env_steps"] = c.total_env_steps;
  j["gamma"] = c.gamma;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["buffer_capacity"] = c.buffer_capacity;
  j["initial_random_steps"] = c.initial_random_steps;
  j["steps_per_learning_update"] = c.steps_per_learning_update;
  j["learning_iterations_per_round"] = c.learning_iterations_per_round;
  if (c.target_update.mode == TargetUpdate::Mode::kHard) {
    j["target_update"] = {{"mode", "hard"}, {"interval", c.target_update.interval}};
  } else {
    j["target_update"] = {{"mode", "polyak"}, {"tau", c.target_update.tau}};
  }
  j["entropy_target_coefficient"] = c.entropy_target_coefficient;
  j["alpha_autotune"] = c.alpha_autotune;
  j["alpha_initial"] = c.alpha_initial;
  j["policy_loss_uses_target_critics"] = c.policy_loss_uses_target_critics;
  j["hidden_layer_sizes"] = c.hidden_layer_sizes;
  j["eval_interval"] = c.eval_interval;
  j["eval_episodes"] = c.eval_episodes;
  j["reward_clip"] = c.reward_clip;
  j["episode_step_limit"] = c.episode_step_limit;
  return j.dump(2);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

}  // namespace sacd
