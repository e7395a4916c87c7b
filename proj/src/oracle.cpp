#include "sacd/oracle.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sacd/tensor.hpp"

namespace sacd::oracle {

void TabularPolicy::validate() const {
  if (probs.size() != n_states * n_actions) throw std::invalid_argument("TabularPolicy: wrong matrix size");
  for (std::size_t s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) {
      if (at(s, a) < 0.0) throw std::invalid_argument("TabularPolicy: negative probability");
      sum += at(s, a);
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw std::invalid_argument("TabularPolicy: row " + std::to_string(s) + " sums to " + std::to_string(sum));
    }
  }
}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  TabularPolicy pi;
  pi.n_states = n_states;
  pi.n_actions = n_actions;
  pi.probs.assign(n_states * n_actions, 1.0 / static_cast<double>(n_actions));
  return pi;
}

TabularQ TabularQ::zeros(std::size_t n_states, std::size_t n_actions) {
  TabularQ q;
  q.n_states = n_states;
  q.n_actions = n_actions;
  q.values.assign(n_states * n_actions, 0.0);
  return q;
}

double soft_row_value(const double* q, std::size_t n, double alpha) {
  // alpha * log sum exp(q / alpha), max-subtracted so alpha down to 1e-4
  // cannot overflow
  double mx = q[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, q[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp((q[i] - mx) / alpha);
  return mx + alpha * std::log(sum);
}

TabularQ soft_backup(const TabularQ& q, const MdpSpec& mdp, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("soft_backup: alpha must be positive");
  const std::size_t S = mdp.n_states, A = mdp.n_actions;

  std::vector<double> v(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    if (!mdp.terminal[s]) v[s] = soft_row_value(q.row(s), A, alpha);
  }

  TabularQ out = TabularQ::zeros(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      double next_value = 0.0;
      for (std::size_t s2 = 0; s2 < S; ++s2) next_value += mdp.p(s, a, s2) * v[s2];
      out.at(s, a) = mdp.r(s, a) + mdp.gamma * next_value;
    }
  }
  return out;
}

ValueIterationResult soft_value_iteration(const MdpSpec& mdp, double alpha, double tol, std::size_t max_iters) {
  if (!(mdp.gamma < 1.0)) throw std::invalid_argument("soft_value_iteration: gamma must be < 1");
  if (tol <= 0.0) throw std::invalid_argument("soft_value_iteration: tol must be positive");

  TabularQ q = TabularQ::zeros(mdp.n_states, mdp.n_actions);
  double residual = 0.0;
  for (std::size_t iter = 1; iter <= max_iters; ++iter) {
    TabularQ next = soft_backup(q, mdp, alpha);
    residual = 0.0;
    for (std::size_t i = 0; i < q.values.size(); ++i) {
      residual = std::max(residual, std::abs(next.values[i] - q.values[i]));
    }
    q = std::move(next);
    if (residual < tol) return {std::move(q), iter, residual};
  }
  std::ostringstream os;
  os << "soft_value_iteration: no convergence in " << max_iters << " iterations, last residual " << residual;
  throw std::runtime_error(os.str());
}

TabularPolicy policy_improvement(const TabularQ& q, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("policy_improvement: alpha must be positive");
  TabularPolicy pi;
  pi.n_states = q.n_states;
  pi.n_actions = q.n_actions;
  pi.probs.assign(q.values.size(), 0.0);
  std::vector<double> scaled(q.n_actions);
  for (std::size_t s = 0; s < q.n_states; ++s) {
    for (std::size_t a = 0; a < q.n_actions; ++a) scaled[a] = q.at(s, a) / alpha;
    softmax_row(scaled.data(), pi.probs.data() + s * q.n_actions, q.n_actions);
  }
  return pi;
}

namespace {

// Solves M x = b in place by Gaussian elimination with partial pivoting.
std::vector<double> solve_linear(std::vector<double> m, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row) {
      if (std::abs(m[row * n + col]) > std::abs(m[pivot * n + col])) pivot = row;
    }
    if (std::abs(m[pivot * n + col]) < 1e-12) {
      throw std::runtime_error("exact_policy_evaluation: singular linear system");
    }
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m[col * n + j], m[pivot * n + j]);
      std::swap(b[col], b[pivot]);
    }
    const double diag = m[col * n + col];
    for (std::size_t row = col + 1; row < n; ++row) {
      const double factor = m[row * n + col] / diag;
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) m[row * n + j] -= factor * m[col * n + j];
      b[row] -= factor * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t row = n; row-- > 0;) {
    double acc = b[row];
    for (std::size_t j = row + 1; j < n; ++j) acc -= m[row * n + j] * x[j];
    x[row] = acc / m[row * n + row];
  }
  return x;
}

}  // namespace

EvaluationResult exact_policy_evaluation(const TabularPolicy& pi, const MdpSpec& mdp, double alpha) {
  if (!(mdp.gamma < 1.0)) throw std::invalid_argument("exact_policy_evaluation: gamma must be < 1");
  if (alpha < 0.0) throw std::invalid_argument("exact_policy_evaluation: alpha must be >= 0");
  pi.validate();
  const std::size_t S = mdp.n_states, A = mdp.n_actions;

  // V solves (I - gamma * P_pi) V = r_pi + alpha * H_pi, with V = 0 pinned
  // at terminal states.
  std::vector<double> m(S * S, 0.0);
  std::vector<double> b(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    if (mdp.terminal[s]) {
      m[s * S + s] = 1.0;
      b[s] = 0.0;
      continue;
    }
    m[s * S + s] = 1.0;
    double reward = 0.0, ent = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      const double pa = pi.at(s, a);
      if (pa == 0.0) continue;
      reward += pa * mdp.r(s, a);
      if (alpha > 0.0) ent -= pa * std::log(pa);
      for (std::size_t s2 = 0; s2 < S; ++s2) {
        m[s * S + s2] -= mdp.gamma * pa * mdp.p(s, a, s2);
      }
    }
    b[s] = reward + alpha * ent;
  }

  EvaluationResult out;
  out.v = solve_linear(std::move(m), std::move(b));
  out.q = TabularQ::zeros(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      if (mdp.terminal[s]) continue;
      double next_value = 0.0;
      for (std::size_t s2 = 0; s2 < S; ++s2) next_value += mdp.p(s, a, s2) * out.v[s2];
      out.q.at(s, a) = mdp.r(s, a) + mdp.gamma * next_value;
    }
  }
  out.objective = 0.0;
  for (std::size_t s = 0; s < S; ++s) out.objective += mdp.start_distribution[s] * out.v[s];
  return out;
}

PolicyIterationResult soft_policy_iteration(const MdpSpec& mdp, double alpha, double tol, std::size_t max_rounds) {
  if (alpha <= 0.0) throw std::invalid_argument("soft_policy_iteration: alpha must be positive");
  if (tol <= 0.0) throw std::invalid_argument("soft_policy_iteration: tol must be positive");

  PolicyIterationResult out;
  out.policy = TabularPolicy::uniform(mdp.n_states, mdp.n_actions);
  for (std::size_t round = 1; round <= max_rounds; ++round) {
    EvaluationResult eval = exact_policy_evaluation(out.policy, mdp, alpha);
    out.objectives.push_back(eval.objective);
    TabularPolicy improved = policy_improvement(eval.q, alpha);
    double change = 0.0;
    for (std::size_t i = 0; i < improved.probs.size(); ++i) {
      change = std::max(change, std::abs(improved.probs[i] - out.policy.probs[i]));
    }
    out.policy = std::move(improved);
    out.q = std::move(eval.q);
    out.rounds = round;
    if (change < tol) {
      EvaluationResult final_eval = exact_policy_evaluation(out.policy, mdp, alpha);
      out.objectives.push_back(final_eval.objective);
      out.q = std::move(final_eval.q);
      return out;
    }
  }
  throw std::runtime_error("soft_policy_iteration: no convergence in " + std::to_string(max_rounds) + " rounds");
}

double total_variation(const double* p, const double* q, std::size_t n) {
  double l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) l1 += std::abs(p[i] - q[i]);
  return 0.5 * l1;
}

std::string solution_to_json(const TabularPolicy& pi, const TabularQ& q, double objective, double alpha,
                             double residual) {
  nlohmann::json j;
  j["format"] = "sacd-oracle-solution";
  j["version"] = 1;
  j["n_states"] = pi.n_states;
  j["n_actions"] = pi.n_actions;
  j["alpha"] = alpha;
  j["policy"] = pi.probs;
  j["q"] = q.values;
  j["objective"] = objective;
  j["residual"] = residual;
  return j.dump(2);
}

void save_solution(const std::string& path, const TabularPolicy& pi, const TabularQ& q, double objective,
                   double alpha, double residual) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_solution: cannot open '" + path + "' for writing");
  out << solution_to_json(pi, q, objective, alpha, residual) << '\n';
}

}  // namespace sacd::oracle
