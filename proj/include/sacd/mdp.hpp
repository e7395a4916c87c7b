#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sacd/rng.hpp"

namespace sacd {

// Explicit finite MDP: the ground-truth world model shared by the
// simulator and the tabular solver.
struct MdpSpec {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transition;  // P[s][a][s'], row-major [S*A*S]
  std::vector<double> reward;      // R[s][a], row-major [S*A]
  std::vector<bool> terminal;      // per state
  std::vector<double> start_distribution;
  double gamma = 0.99;

  double p(std::size_t s, std::size_t a, std::size_t s2) const {
    return transition[(s * n_actions + a) * n_states + s2];
  }
  double r(std::size_t s, std::size_t a) const { return reward[s * n_actions + a]; }

  // Throws if any invariant fails: row-stochastic transitions (1e-12),
  // terminal states self-looping with reward 0, valid start distribution,
  // gamma in [0, 1).
  void validate() const;
};

MdpSpec make_bandit(std::vector<double> arm_rewards);
// Two-state, two-action MDP with mixing transitions; the fixed benchmark
// world for agent-vs-oracle comparisons.
MdpSpec make_two_state(double gamma = 0.9);
// Chain of n states; action 1 walks toward a terminal goal worth +1,
// action 0 falls back to the start for a small consolation reward.
MdpSpec make_chain(std::size_t n_states = 6, double gamma = 0.99);
// Deterministic gridworld: 4 actions (up/down/left/right), wall bumps
// keep position, goal pays +1 and terminates, traps pay -1 and terminate,
// step_penalty is added to every move out of a non-terminal cell.
// Cells are indexed row-major; the start is cell 0.
MdpSpec make_gridworld(std::size_t width, std::size_t height, std::size_t goal,
                       const std::vector<std::size_t>& traps, double step_penalty, double gamma = 0.99);
// Dirichlet(1) transition rows, rewards uniform in [-reward_scale, reward_scale],
// no terminal states, uniform start.
MdpSpec make_random_mdp(std::size_t n_states, std::size_t n_actions, Rng& rng, double reward_scale = 1.0,
                        double gamma = 0.9);

// Named desk-scale environments: "bandit", "twostate", "chain", "gridworld5".
// gamma < 0 keeps each environment's canonical discount.
MdpSpec make_named_mdp(const std::string& name, double gamma = -1.0);

double clip_reward(double r);

std::string mdp_to_json(const MdpSpec& mdp);
MdpSpec mdp_from_json(const std::string& text);
void save_mdp(const MdpSpec& mdp, const std::string& path);
MdpSpec load_mdp(const std::string& path);

}  // namespace sacd
