#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sacd/mdp.hpp"

namespace sacd::oracle {

// Row-stochastic policy matrix pi[s][a].
struct TabularPolicy {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> probs;  // row-major [S*A]

  double at(std::size_t s, std::size_t a) const { return probs[s * n_actions + a]; }
  double& at(std::size_t s, std::size_t a) { return probs[s * n_actions + a]; }
  const double* row(std::size_t s) const { return probs.data() + s * n_actions; }
  void validate() const;

  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);
};

struct TabularQ {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> values;  // row-major [S*A]

  double at(std::size_t s, std::size_t a) const { return values[s * n_actions + a]; }
  double& at(std::size_t s, std::size_t a) { return values[s * n_actions + a]; }
  const double* row(std::size_t s) const { return values.data() + s * n_actions; }

  static TabularQ zeros(std::size_t n_states, std::size_t n_actions);
};

// Soft value of one Q row at the softmax policy: alpha * logsumexp(q / alpha).
double soft_row_value(const double* q, std::size_t n, double alpha);

// One application of the soft Bellman backup operator. Terminal next
// states contribute zero value.
TabularQ soft_backup(const TabularQ& q, const MdpSpec& mdp, double alpha);

struct ValueIterationResult {
  TabularQ q;
  std::size_t iterations = 0;
  double residual = 0.0;
};

// Iterates the soft backup until the sup-norm residual drops below tol.
ValueIterationResult soft_value_iteration(const MdpSpec& mdp, double alpha, double tol = 1e-10,
                                          std::size_t max_iters = 1000000);

// Closed-form information projection: each row becomes softmax(Q[s] / alpha).
TabularPolicy policy_improvement(const TabularQ& q, double alpha);

struct EvaluationResult {
  TabularQ q;
  std::vector<double> v;
  double objective = 0.0;  // start-weighted soft value
};

// Exact soft policy evaluation by direct linear solve (Gaussian
// elimination with partial pivoting). alpha = 0 gives plain evaluation.
EvaluationResult exact_policy_evaluation(const TabularPolicy& pi, const MdpSpec& mdp, double alpha);

struct PolicyIterationResult {
  TabularPolicy policy;
  TabularQ q;
  std::size_t rounds = 0;
  std::vector<double> objectives;  // objective after each evaluation
};

// Alternates exact evaluation and improvement until the max-norm policy
// change drops below tol.
PolicyIterationResult soft_policy_iteration(const MdpSpec& mdp, double alpha, double tol = 1e-10,
                                            std::size_t max_rounds = 10000);

// Half the L1 distance between two rows of length n.
double total_variation(const double* p, const double* q, std::size_t n);

std::string solution_to_json(const TabularPolicy& pi, const TabularQ& q, double objective, double alpha,
                             double residual);
void save_solution(const std::string& path, const TabularPolicy& pi, const TabularQ& q, double objective,
                   double alpha, double residual);

}  // namespace sacd::oracle
