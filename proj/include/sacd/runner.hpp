#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sacd/agent.hpp"
#include "sacd/config.hpp"
#include "sacd/env.hpp"
#include "sacd/mdp.hpp"
#include "sacd/oracle.hpp"

namespace sacd {

// Target entropy: coefficient * ln(n_actions), a fraction of the maximum.
double compute_entropy_target(std::size_t n_actions, double coefficient);

// Resolves the config's environment: mdp_file wins over the name; an
// explicit config gamma overrides the file's discount.
MdpSpec resolve_mdp(const RunConfig& config);

struct MetricsRow {
  std::size_t step = 0;
  std::optional<double> episode_return;  // last completed episode
  std::optional<double> eval_return;
  std::optional<double> q1_loss, q2_loss, policy_loss, alpha_loss;
  double alpha = 0.0;
  std::optional<double> policy_entropy;
  std::size_t buffer_size = 0;
};

struct RunMetrics {
  std::vector<MetricsRow> rows;

  // Frozen schema:
  // step,episode_return,eval_return,q1_loss,q2_loss,policy_loss,alpha_loss,alpha,policy_entropy,buffer_size
  static const char* csv_header();
  std::string to_csv() const;
  static RunMetrics from_csv(const std::string& text);
};

struct RunResult {
  std::string checkpoint;  // run checkpoint (agent + run state), JSON
  RunMetrics metrics;      // resumed runs report only their own rows
  std::size_t gradient_steps = 0;
  bool aborted = false;
  std::string abort_reason;
};

struct RunHooks {
  // capture the run checkpoint after this env step (0 = never)
  std::size_t save_at_step = 0;
  std::string* saved_checkpoint = nullptr;
};

// Off-policy training; deterministic byte-for-byte in (config, seed).
RunResult run_training(const RunConfig& config);
RunResult run_training(const RunConfig& config, const RunHooks& hooks);
// Continues a run captured by RunHooks; the tail metrics equal the
// uninterrupted run's rows past the save point.
RunResult resume_training(const RunConfig& config, const std::string& run_checkpoint_json);

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> returns;  // undiscounted, per episode
};

// Greedy or sampled rollouts; never touches the agent or any buffer.
EvalResult evaluate(const SacAgent& agent, const MdpSpec& mdp, std::size_t step_limit, std::size_t episodes,
                    bool greedy, Rng& rng);

struct CompareReport {
  std::vector<double> tv_per_state;  // total variation agent vs oracle
  double max_tv = 0.0;
  double mean_tv = 0.0;
  double agent_objective = 0.0;
  double oracle_objective = 0.0;
  double objective_gap = 0.0;  // oracle - agent, >= 0 up to solver slack
  double alpha = 0.0;

  std::string to_json() const;
};

// Tabulates the agent's policy over all states and measures it against
// the exact soft-optimal solution at the given temperature.
CompareReport compare_to_oracle(const SacAgent& agent, const MdpSpec& mdp, double alpha);

// Tabulates the agent policy into an oracle::TabularPolicy (tabular envs
// only: the agent must have been trained on one-hot encodings of mdp).
oracle::TabularPolicy tabulate_policy(const SacAgent& agent, const MdpSpec& mdp);

SacAgent agent_from_run_checkpoint(const std::string& run_checkpoint_json);

struct GradCheckReport {
  double critic_max = 0.0;
  double policy_max = 0.0;
  double temperature_max = 0.0;

  double worst() const;
};

// Central-difference check of the critic, policy and temperature losses
// on freshly drawn networks and batches.
GradCheckReport run_sac_gradcheck(std::size_t batches, std::uint64_t seed);

}  // namespace sacd
