#pragma once

// Shared test-side oracles and fixtures, independent of the library's
// solver path.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "json.hpp"
#include "sacd/agent.hpp"
#include "sacd/mdp.hpp"
#include "sacd/oracle.hpp"

namespace test_support {

// Agent whose networks are single linear layers with pinned weights, so
// policies and Q-values have closed forms. Weight rows map one-hot
// states straight to logits.
inline sacd::SacAgent crafted_linear_agent(std::size_t obs_dim, std::size_t n_actions, double gamma, double alpha,
                                           const std::vector<double>& policy_w,
                                           const std::vector<double>& policy_b,
                                           const std::vector<double>& q_b) {
  sacd::AgentConfig config;
  config.obs_dim = obs_dim;
  config.n_actions = n_actions;
  config.hidden = {};
  config.gamma = gamma;
  config.alpha_autotune = false;
  config.alpha_initial = alpha;
  sacd::Rng rng(1);
  sacd::SacAgent agent(config, rng);

  nlohmann::json j = nlohmann::json::parse(agent.checkpoint_json());
  auto set_net = [&](const char* name, const std::vector<double>& w, const std::vector<double>& b) {
    j["networks"][name][0]["data"] = w;
    j["networks"][name][1]["data"] = b;
  };
  const std::vector<double> zero_w(obs_dim * n_actions, 0.0);
  set_net("policy", policy_w.empty() ? zero_w : policy_w, policy_b);
  set_net("q1", zero_w, q_b);
  set_net("q2", zero_w, q_b);
  set_net("q1_target", zero_w, q_b);
  set_net("q2_target", zero_w, q_b);
  return sacd::SacAgent::from_checkpoint_json(j.dump());
}

// Standard (hard-max) value iteration; the alpha -> 0 reference.
inline sacd::oracle::TabularQ hard_value_iteration(const sacd::MdpSpec& mdp, double tol = 1e-12,
                                                   std::size_t max_iters = 1000000) {
  using sacd::oracle::TabularQ;
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  TabularQ q = TabularQ::zeros(S, A);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    std::vector<double> v(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      if (mdp.terminal[s]) continue;
      v[s] = *std::max_element(q.row(s), q.row(s) + A);
    }
    TabularQ next = TabularQ::zeros(S, A);
    double residual = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        double nv = 0.0;
        for (std::size_t s2 = 0; s2 < S; ++s2) nv += mdp.p(s, a, s2) * v[s2];
        next.at(s, a) = mdp.r(s, a) + mdp.gamma * nv;
        residual = std::max(residual, std::abs(next.at(s, a) - q.at(s, a)));
      }
    }
    q = std::move(next);
    if (residual < tol) break;
  }
  return q;
}

// Smallest gap between the best and second-best action across states.
inline double min_action_gap(const sacd::oracle::TabularQ& q, const sacd::MdpSpec& mdp) {
  double gap = 1e300;
  for (std::size_t s = 0; s < q.n_states; ++s) {
    if (mdp.terminal[s]) continue;
    double best = -1e300, second = -1e300;
    for (std::size_t a = 0; a < q.n_actions; ++a) {
      const double v = q.at(s, a);
      if (v > best) {
        second = best;
        best = v;
      } else if (v > second) {
        second = v;
      }
    }
    gap = std::min(gap, best - second);
  }
  return gap;
}

inline std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

}  // namespace test_support
