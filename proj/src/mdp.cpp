#include "sacd/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sacd {

void MdpSpec::validate() const {
  if (n_states == 0 || n_actions == 0) throw std::invalid_argument("MdpSpec: empty state or action set");
  if (transition.size() != n_states * n_actions * n_states) {
    throw std::invalid_argument("MdpSpec: transition tensor has wrong length");
  }
  if (reward.size() != n_states * n_actions) throw std::invalid_argument("MdpSpec: reward tensor has wrong length");
  if (terminal.size() != n_states) throw std::invalid_argument("MdpSpec: terminal flags have wrong length");
  if (start_distribution.size() != n_states) throw std::invalid_argument("MdpSpec: start distribution has wrong length");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("MdpSpec: gamma must lie in [0, 1)");

  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double row = 0.0;
      for (std::size_t s2 = 0; s2 < n_states; ++s2) {
        const double prob = p(s, a, s2);
        if (prob < 0.0 || !std::isfinite(prob)) {
          throw std::invalid_argument("MdpSpec: negative or non-finite transition probability");
        }
        row += prob;
      }
      if (std::abs(row - 1.0) > 1e-12) {
        throw std::invalid_argument("MdpSpec: transition row (s=" + std::to_string(s) + ", a=" + std::to_string(a) +
                                    ") sums to " + std::to_string(row));
      }
      if (!std::isfinite(r(s, a))) throw std::invalid_argument("MdpSpec: non-finite reward");
      if (terminal[s]) {
        if (r(s, a) != 0.0) throw std::invalid_argument("MdpSpec: terminal state has nonzero reward");
        if (p(s, a, s) != 1.0) throw std::invalid_argument("MdpSpec: terminal state must self-loop");
      }
    }
  }

  double start_sum = 0.0;
  for (double w : start_distribution) {
    if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("MdpSpec: invalid start distribution entry");
    start_sum += w;
  }
  if (std::abs(start_sum - 1.0) > 1e-12) throw std::invalid_argument("MdpSpec: start distribution does not sum to 1");
}

MdpSpec make_bandit(std::vector<double> arm_rewards) {
  if (arm_rewards.size() < 2) throw std::invalid_argument("make_bandit: need at least two arms");
  MdpSpec mdp;
  mdp.n_states = 1;
  mdp.n_actions = arm_rewards.size();
  mdp.transition.assign(mdp.n_actions, 1.0);  // self-loop for every arm
  mdp.reward = std::move(arm_rewards);
  mdp.terminal = {false};
  mdp.start_distribution = {1.0};
  mdp.gamma = 0.0;
  mdp.validate();
  return mdp;
}

MdpSpec make_two_state(double gamma) {
  MdpSpec mdp;
  mdp.n_states = 2;
  mdp.n_actions = 2;
  mdp.transition = {
      // s=0
      0.9, 0.1,    // a=0
      0.2, 0.8,    // a=1
      // s=1
      0.7, 0.3,    // a=0
      0.05, 0.95,  // a=1
  };
  mdp.reward = {
      0.1, 0.0,    // s=0
      0.05, 0.25,  // s=1
  };
  mdp.terminal = {false, false};
  mdp.start_distribution = {0.5, 0.5};
  mdp.gamma = gamma;
  mdp.validate();
  return mdp;
}

MdpSpec make_chain(std::size_t n_states, double gamma) {
  if (n_states < 3) throw std::invalid_argument("make_chain: need at least three states");
  MdpSpec mdp;
  mdp.n_states = n_states;
  mdp.n_actions = 2;
  mdp.transition.assign(n_states * 2 * n_states, 0.0);
  mdp.reward.assign(n_states * 2, 0.0);
  mdp.terminal.assign(n_states, false);
  mdp.terminal[n_states - 1] = true;
  mdp.start_distribution.assign(n_states, 0.0);
  mdp.start_distribution[0] = 1.0;
  mdp.gamma = gamma;

  auto set_p = [&](std::size_t s, std::size_t a, std::size_t s2) {
    mdp.transition[(s * 2 + a) * n_states + s2] = 1.0;
  };
  for (std::size_t s = 0; s + 1 < n_states; ++s) {
    set_p(s, 0, 0);  // retreat to the start
    mdp.reward[s * 2 + 0] = 0.05;
    set_p(s, 1, s + 1);  // advance
    mdp.reward[s * 2 + 1] = (s + 2 == n_states) ? 1.0 : 0.0;
  }
  set_p(n_states - 1, 0, n_states - 1);
  set_p(n_states - 1, 1, n_states - 1);
  mdp.validate();
  return mdp;
}

MdpSpec make_gridworld(std::size_t width, std::size_t height, std::size_t goal,
                       const std::vector<std::size_t>& traps, double step_penalty, double gamma) {
  const std::size_t n = width * height;
  if (n < 2) throw std::invalid_argument("make_gridworld: grid needs at least two cells");
  if (goal >= n) throw std::invalid_argument("make_gridworld: goal cell out of bounds");
  for (std::size_t t : traps) {
    if (t >= n) throw std::invalid_argument("make_gridworld: trap cell out of bounds");
    if (t == goal) throw std::invalid_argument("make_gridworld: trap coincides with goal");
  }

  MdpSpec mdp;
  mdp.n_states = n;
  mdp.n_actions = 4;  // up, down, left, right
  mdp.transition.assign(n * 4 * n, 0.0);
  mdp.reward.assign(n * 4, 0.0);
  mdp.terminal.assign(n, false);
  mdp.terminal[goal] = true;
  for (std::size_t t : traps) mdp.terminal[t] = true;

  auto is_trap = [&](std::size_t cell) { return std::find(traps.begin(), traps.end(), cell) != traps.end(); };

  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t row = s / width, col = s % width;
    for (std::size_t a = 0; a < 4; ++a) {
      std::size_t next = s;
      if (mdp.terminal[s]) {
        mdp.transition[(s * 4 + a) * n + s] = 1.0;
        continue;
      }
      if (a == 0 && row > 0) next = s - width;
      if (a == 1 && row + 1 < height) next = s + width;
      if (a == 2 && col > 0) next = s - 1;
      if (a == 3 && col + 1 < width) next = s + 1;
      mdp.transition[(s * 4 + a) * n + next] = 1.0;
      double reward = step_penalty;
      if (next == goal) reward += 1.0;
      if (is_trap(next)) reward -= 1.0;
      mdp.reward[s * 4 + a] = reward;
    }
  }

  mdp.start_distribution.assign(n, 0.0);
  if (!mdp.terminal[0]) {
    mdp.start_distribution[0] = 1.0;
  } else {
    std::size_t live = 0;
    for (std::size_t s = 0; s < n; ++s) live += mdp.terminal[s] ? 0 : 1;
    for (std::size_t s = 0; s < n; ++s)
      if (!mdp.terminal[s]) mdp.start_distribution[s] = 1.0 / static_cast<double>(live);
  }
  mdp.gamma = gamma;
  mdp.validate();
  return mdp;
}

MdpSpec make_random_mdp(std::size_t n_states, std::size_t n_actions, Rng& rng, double reward_scale, double gamma) {
  if (n_states < 2 || n_actions < 2) throw std::invalid_argument("make_random_mdp: need >= 2 states and actions");
  MdpSpec mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.transition.assign(n_states * n_actions * n_states, 0.0);
  mdp.reward.assign(n_states * n_actions, 0.0);
  mdp.terminal.assign(n_states, false);
  mdp.start_distribution.assign(n_states, 1.0 / static_cast<double>(n_states));
  mdp.gamma = gamma;

  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      // Dirichlet(1,...,1) row via normalized Exp(1) draws
      double total = 0.0;
      const std::size_t base = (s * n_actions + a) * n_states;
      for (std::size_t s2 = 0; s2 < n_states; ++s2) {
        const double e = -std::log(draw_uniform(rng, 1e-300, 1.0));
        mdp.transition[base + s2] = e;
        total += e;
      }
      for (std::size_t s2 = 0; s2 < n_states; ++s2) mdp.transition[base + s2] /= total;
      // push the rounding residue into the largest entry so the row sums
      // to 1 under the 1e-12 invariant without going negative
      double row = 0.0;
      std::size_t largest = 0;
      for (std::size_t s2 = 0; s2 < n_states; ++s2) {
        row += mdp.transition[base + s2];
        if (mdp.transition[base + s2] > mdp.transition[base + largest]) largest = s2;
      }
      mdp.transition[base + largest] += 1.0 - row;
      mdp.reward[s * n_actions + a] = draw_uniform(rng, -reward_scale, reward_scale);
    }
  }
  mdp.validate();
  return mdp;
}

MdpSpec make_named_mdp(const std::string& name, double gamma) {
  if (name == "bandit") {
    MdpSpec mdp = make_bandit({1.0, 0.0});
    if (gamma >= 0.0) mdp.gamma = gamma;
    return mdp;
  }
  if (name == "twostate") return make_two_state(gamma >= 0.0 ? gamma : 0.9);
  if (name == "chain") return make_chain(6, gamma >= 0.0 ? gamma : 0.99);
  if (name == "gridworld5") {
    // trap in the far corner of the top row: random walks still reach the
    // goal often enough to learn from, and the uniform baseline stays low
    return make_gridworld(5, 5, /*goal=*/24, /*traps=*/{4}, /*step_penalty=*/-0.01,
                          gamma >= 0.0 ? gamma : 0.9);
  }
  throw std::invalid_argument("unknown environment name '" + name +
                              "' (expected bandit, twostate, chain or gridworld5)");
}

double clip_reward(double r) {
  if (!std::isfinite(r)) throw std::invalid_argument("clip_reward: non-finite reward");
  return std::min(std::max(r, -1.0), 1.0);
}

std::string mdp_to_json(const MdpSpec& mdp) {
  nlohmann::json j;
  j["format"] = "sacd-mdp";
  j["version"] = 1;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["gamma"] = mdp.gamma;
  j["transition"] = mdp.transition;
  j["reward"] = mdp.reward;
  j["terminal"] = mdp.terminal;
  j["start_distribution"] = mdp.start_distribution;
  return j.dump(2);
}

MdpSpec mdp_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "sacd-mdp") throw std::runtime_error("mdp_from_json: not a sacd-mdp file");
  MdpSpec mdp;
  mdp.n_states = j.at("n_states").get<std::size_t>();
  mdp.n_actions = j.at("n_actions").get<std::size_t>();
  mdp.gamma = j.at("gamma").get<double>();
  mdp.transition = j.at("transition").get<std::vector<double>>();
  mdp.reward = j.at("reward").get<std::vector<double>>();
  mdp.terminal = j.at("terminal").get<std::vector<bool>>();
  mdp.start_distribution = j.at("start_distribution").get<std::vector<double>>();
  mdp.validate();
  return mdp;
}

void save_mdp(const MdpSpec& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mdp: cannot open '" + path + "' for writing");
  out << mdp_to_json(mdp) << '\n';
}

MdpSpec load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mdp: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return mdp_from_json(buf.str());
}

}  // namespace sacd
