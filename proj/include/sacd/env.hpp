#pragma once

#include <cstddef>
#include <vector>

#include "sacd/mdp.hpp"
#include "sacd/rng.hpp"

namespace sacd {

// One simulated step. `terminal` means the MDP entered an absorbing state;
// `truncated` means the episode hit the step limit. Bootstrapping must be
// cut only on `terminal`.
struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;

  bool done() const { return terminal || truncated; }
};

// Simulator over an explicit MdpSpec. Observations are one-hot state
// encodings so every environment feeds the same network architecture.
class EnvHandle {
 public:
  EnvHandle(MdpSpec mdp, std::size_t episode_step_limit = 200);

  const MdpSpec& mdp() const { return mdp_; }
  std::size_t n_actions() const { return mdp_.n_actions; }
  std::size_t obs_dim() const { return mdp_.n_states; }
  std::size_t state() const { return state_; }
  std::size_t steps_in_episode() const { return steps_; }
  std::size_t step_limit() const { return step_limit_; }
  bool done() const { return done_; }

  std::vector<double> reset(Rng& rng);
  StepResult step(std::size_t action, Rng& rng);

  std::vector<double> observation() const { return one_hot(state_); }
  std::vector<double> one_hot(std::size_t state) const;

  // Resume support: restore mid-episode simulator state.
  void restore(std::size_t state, std::size_t steps_in_episode, bool done);

 private:
  MdpSpec mdp_;
  std::size_t step_limit_;
  std::size_t state_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;  // must reset before stepping
};

}  // namespace sacd
