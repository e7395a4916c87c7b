#include "sacd/env.hpp"

#include <stdexcept>

namespace sacd {

EnvHandle::EnvHandle(MdpSpec mdp, std::size_t episode_step_limit)
    : mdp_(std::move(mdp)), step_limit_(episode_step_limit) {
  mdp_.validate();
  if (step_limit_ == 0) throw std::invalid_argument("EnvHandle: episode step limit must be positive");
}

std::vector<double> EnvHandle::one_hot(std::size_t state) const {
  std::vector<double> obs(mdp_.n_states, 0.0);
  obs[state] = 1.0;
  return obs;
}

std::vector<double> EnvHandle::reset(Rng& rng) {
  state_ = draw_categorical(rng, mdp_.start_distribution);
  steps_ = 0;
  done_ = false;
  return one_hot(state_);
}

StepResult EnvHandle::step(std::size_t action, Rng& rng) {
  if (done_) throw std::logic_error("EnvHandle::step: episode is already done, call reset");
  if (action >= mdp_.n_actions) {
    throw std::out_of_range("EnvHandle::step: action " + std::to_string(action) + " out of range [0, " +
                            std::to_string(mdp_.n_actions) + ")");
  }

  StepResult result;
  result.reward = mdp_.r(state_, action);

  // inverse-CDF draw; rounding residue falls back to the last reachable state
  const std::size_t base = (state_ * mdp_.n_actions + action) * mdp_.n_states;
  const double u = draw_uniform(rng);
  double acc = 0.0;
  std::size_t next = state_;
  for (std::size_t s2 = 0; s2 < mdp_.n_states; ++s2) {
    const double prob = mdp_.transition[base + s2];
    if (prob > 0.0) next = s2;
    acc += prob;
    if (u < acc) {
      next = s2;
      break;
    }
  }

  state_ = next;
  steps_ += 1;
  result.observation = one_hot(state_);
  result.terminal = mdp_.terminal[state_];
  result.truncated = !result.terminal && steps_ >= step_limit_;
  done_ = result.done();
  return result;
}

void EnvHandle::restore(std::size_t state, std::size_t steps_in_episode, bool done) {
  if (state >= mdp_.n_states) throw std::out_of_range("EnvHandle::restore: state out of range");
  if (steps_in_episode > step_limit_) throw std::invalid_argument("EnvHandle::restore: step counter beyond limit");
  state_ = state;
  steps_ = steps_in_episode;
  done_ = done;
}

}  // namespace sacd
