#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "sacd/mdp.hpp"
#include "sacd/oracle.hpp"
#include "sacd/rng.hpp"
#include "test_support.hpp"

using namespace sacd::oracle;
using sacd::MdpSpec;
using sacd::Rng;

namespace {

MdpSpec bandit() { return sacd::make_bandit({1.0, 0.0}); }

// s0 -> s1 (reward 1), s1 -> s0 (reward 0.5), single action, gamma 0.9
MdpSpec two_state_cycle() {
  MdpSpec mdp;
  mdp.n_states = 2;
  mdp.n_actions = 2;
  mdp.transition = {0, 1, 0, 1, 1, 0, 1, 0};
  mdp.reward = {1.0, 1.0, 0.5, 0.5};
  mdp.terminal = {false, false};
  mdp.start_distribution = {1.0, 0.0};
  mdp.gamma = 0.9;
  mdp.validate();
  return mdp;
}

}  // namespace

TEST_CASE("soft_backup") {
  SUBCASE("gamma = 0 reduces to the reward tensor exactly") {
    Rng rng(5);
    const MdpSpec mdp = sacd::make_random_mdp(4, 3, rng, 1.0, 0.0);
    TabularQ q = TabularQ::zeros(4, 3);
    for (double& v : q.values) v = sacd::draw_uniform(rng, -2, 2);
    const TabularQ backed = soft_backup(q, mdp, 1.0);
    CHECK(backed.values == mdp.reward);
  }

  SUBCASE("bandit fixed point is Q = R with V = ln(1 + e)") {
    const MdpSpec mdp = bandit();
    TabularQ q = TabularQ::zeros(1, 2);
    const TabularQ once = soft_backup(q, mdp, 1.0);
    CHECK(once.values == std::vector<double>{1.0, 0.0});
    // one application reaches the fixed point
    CHECK(soft_backup(once, mdp, 1.0).values == once.values);
    CHECK(soft_row_value(once.row(0), 2, 1.0) == doctest::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-12));
  }

  SUBCASE("alpha -> 0 approaches the hard-max Bellman backup") {
    Rng rng(17);
    const MdpSpec mdp = sacd::make_random_mdp(5, 3, rng, 1.0, 0.9);
    const TabularQ hard = test_support::hard_value_iteration(mdp);
    const TabularQ soft = soft_value_iteration(mdp, 1e-4, 1e-10).q;
    for (std::size_t i = 0; i < hard.values.size(); ++i) {
      CHECK(std::abs(soft.values[i] - hard.values[i]) < 1e-3);
    }
  }

  SUBCASE("alpha must be positive") {
    CHECK_THROWS_AS(soft_backup(TabularQ::zeros(1, 2), bandit(), 0.0), std::invalid_argument);
  }
}

TEST_CASE("soft_value_iteration") {
  SUBCASE("residuals contract with ratio at most gamma") {
    Rng rng(23);
    const MdpSpec mdp = sacd::make_random_mdp(6, 3, rng, 1.0, 0.9);
    TabularQ q = TabularQ::zeros(6, 3);
    double prev_residual = -1.0;
    for (int iter = 0; iter < 60; ++iter) {
      TabularQ next = soft_backup(q, mdp, 0.5);
      double residual = 0.0;
      for (std::size_t i = 0; i < q.values.size(); ++i) {
        residual = std::max(residual, std::abs(next.values[i] - q.values[i]));
      }
      if (prev_residual > 1e-14) CHECK(residual <= 0.9 * prev_residual + 1e-9);
      prev_residual = residual;
      q = std::move(next);
    }
  }

  SUBCASE("bandit converges immediately") {
    const auto result = soft_value_iteration(bandit(), 1.0, 1e-10);
    CHECK(result.iterations <= 2);
    CHECK(result.q.values == std::vector<double>{1.0, 0.0});
    CHECK(result.residual < 1e-10);
  }

  SUBCASE("fixed point agrees with exact evaluation of its softmax policy") {
    Rng rng(41);
    const MdpSpec mdp = sacd::make_random_mdp(8, 3, rng, 1.0, 0.9);
    const auto vi = soft_value_iteration(mdp, 0.7, 1e-10);
    const TabularPolicy pi = policy_improvement(vi.q, 0.7);
    const EvaluationResult eval = exact_policy_evaluation(pi, mdp, 0.7);
    for (std::size_t i = 0; i < vi.q.values.size(); ++i) {
      CHECK(std::abs(vi.q.values[i] - eval.q.values[i]) < 1e-8);
    }
  }

  SUBCASE("iteration cap errors and reports the last residual") {
    Rng rng(2);
    const MdpSpec mdp = sacd::make_random_mdp(4, 2, rng, 1.0, 0.95);
    CHECK_THROWS_WITH_AS(soft_value_iteration(mdp, 1.0, 1e-12, 3),
                         doctest::Contains("last residual"), std::runtime_error);
  }
}

TEST_CASE("policy_improvement") {
  SUBCASE("Q row [1, 0] at alpha 1 becomes [0.7311, 0.2689]") {
    TabularQ q{1, 2, {1.0, 0.0}};
    const TabularPolicy pi = policy_improvement(q, 1.0);
    CHECK(pi.at(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(pi.at(0, 1) == doctest::Approx(0.2689).epsilon(1e-4));
  }

  SUBCASE("huge temperature flattens to uniform") {
    TabularQ q{2, 3, {1.7, -0.3, 0.9, 0.0, 2.0, -2.0}};
    const TabularPolicy pi = policy_improvement(q, 1000.0);
    for (double p : pi.probs) CHECK(std::abs(p - 1.0 / 3.0) < 1e-3);
  }

  SUBCASE("constant row is exactly uniform") {
    TabularQ q{1, 4, {0.37, 0.37, 0.37, 0.37}};
    const TabularPolicy pi = policy_improvement(q, 0.31);
    for (double p : pi.probs) CHECK(p == 0.25);
  }
}

TEST_CASE("exact_policy_evaluation") {
  SUBCASE("alpha = 0 on a deterministic cycle matches the geometric sum") {
    const MdpSpec mdp = two_state_cycle();
    TabularPolicy pi = TabularPolicy::uniform(2, 2);  // both actions identical
    const EvaluationResult eval = exact_policy_evaluation(pi, mdp, 0.0);
    // V0 = 1 + g * V1, V1 = 0.5 + g * V0  =>  V0 = (1 + 0.5 g) / (1 - g^2)
    const double v0 = (1.0 + 0.5 * 0.9) / (1.0 - 0.81);
    const double v1 = (0.5 + 1.0 * 0.9) / (1.0 - 0.81);
    CHECK(std::abs(eval.v[0] - v0) < 1e-10);
    CHECK(std::abs(eval.v[1] - v1) < 1e-10);
    CHECK(std::abs(eval.objective - v0) < 1e-10);
  }

  SUBCASE("uniform policy on the bandit at alpha 1 is strictly suboptimal") {
    const EvaluationResult eval = exact_policy_evaluation(TabularPolicy::uniform(1, 2), bandit(), 1.0);
    CHECK(eval.objective == doctest::Approx(0.5 + std::log(2.0)).epsilon(1e-12));
    CHECK(eval.objective < std::log(1.0 + std::exp(1.0)));
  }

  SUBCASE("rejects invalid policies") {
    TabularPolicy pi = TabularPolicy::uniform(1, 2);
    pi.probs[0] = 0.7;
    CHECK_THROWS_AS(exact_policy_evaluation(pi, bandit(), 1.0), std::invalid_argument);
  }
}

TEST_CASE("soft_policy_iteration") {
  SUBCASE("bandit: one improvement step reaches softmax([1, 0])") {
    const auto result = soft_policy_iteration(bandit(), 1.0, 1e-10);
    const double e = std::exp(1.0);
    CHECK(result.policy.at(0, 0) == doctest::Approx(e / (1.0 + e)).epsilon(1e-12));
    CHECK(result.policy.at(0, 1) == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-12));
    CHECK(result.rounds <= 3);
  }

  SUBCASE("agrees with value iteration and improves monotonically on random MDPs") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t S = 2 + sacd::draw_index(rng, 9);   // up to 10
      const std::size_t A = 2 + sacd::draw_index(rng, 3);   // up to 4
      const MdpSpec mdp = sacd::make_random_mdp(S, A, rng, 1.0, 0.9);
      const double alpha = 0.2 + 0.8 * sacd::draw_uniform(rng);

      const auto pi_result = soft_policy_iteration(mdp, alpha, 1e-10);
      const auto vi_result = soft_value_iteration(mdp, alpha, 1e-10);
      for (std::size_t i = 0; i < vi_result.q.values.size(); ++i) {
        CHECK(std::abs(pi_result.q.values[i] - vi_result.q.values[i]) < 1e-6);
      }
      for (std::size_t k = 1; k < pi_result.objectives.size(); ++k) {
        CHECK(pi_result.objectives[k] >= pi_result.objectives[k - 1] - 1e-10);
      }
    }
  }

  SUBCASE("optimal policy beats random perturbations") {
    Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
      const MdpSpec mdp = sacd::make_random_mdp(4, 3, rng, 1.0, 0.9);
      const double alpha = 0.5;
      const auto solved = soft_policy_iteration(mdp, alpha, 1e-10);
      const double best = exact_policy_evaluation(solved.policy, mdp, alpha).objective;
      for (int k = 0; k < 50; ++k) {
        TabularPolicy perturbed = solved.policy;
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
          double sum = 0.0;
          for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            perturbed.at(s, a) = std::max(1e-9, perturbed.at(s, a) + sacd::draw_uniform(rng, -0.2, 0.2));
            sum += perturbed.at(s, a);
          }
          for (std::size_t a = 0; a < mdp.n_actions; ++a) perturbed.at(s, a) /= sum;
          // tighten the row sum to the validator's 1e-12
          double row = 0.0;
          for (std::size_t a = 0; a < mdp.n_actions; ++a) row += perturbed.at(s, a);
          perturbed.at(s, mdp.n_actions - 1) += 1.0 - row;
        }
        const double objective = exact_policy_evaluation(perturbed, mdp, alpha).objective;
        CHECK(best >= objective - 1e-12);
      }
    }
  }
}

TEST_CASE("contraction property of the soft backup") {
  Rng rng(31337);
  for (int trial = 0; trial < 100; ++trial) {
    const MdpSpec mdp = sacd::make_random_mdp(5, 3, rng, 1.0, 0.9);
    TabularQ q1 = TabularQ::zeros(5, 3), q2 = TabularQ::zeros(5, 3);
    for (double& v : q1.values) v = sacd::draw_uniform(rng, -5, 5);
    for (double& v : q2.values) v = sacd::draw_uniform(rng, -5, 5);
    const double alpha = 0.1 + sacd::draw_uniform(rng);

    double dist = 0.0;
    for (std::size_t i = 0; i < q1.values.size(); ++i) dist = std::max(dist, std::abs(q1.values[i] - q2.values[i]));
    const TabularQ t1 = soft_backup(q1, mdp, alpha);
    const TabularQ t2 = soft_backup(q2, mdp, alpha);
    double tdist = 0.0;
    for (std::size_t i = 0; i < q1.values.size(); ++i) tdist = std::max(tdist, std::abs(t1.values[i] - t2.values[i]));
    CHECK(tdist <= 0.9 * dist + 1e-12);
  }
}

TEST_CASE("alpha -> 0 argmax consistency with standard value iteration") {
  Rng rng(555);
  std::size_t matched = 0, total = 0;
  int built = 0;
  while (built < 8) {
    const MdpSpec mdp = sacd::make_random_mdp(6, 3, rng, 1.0, 0.9);
    const TabularQ hard = test_support::hard_value_iteration(mdp);
    if (test_support::min_action_gap(hard, mdp) <= 0.01) continue;  // resample: gaps too small
    ++built;
    const TabularQ soft = soft_value_iteration(mdp, 1e-4, 1e-10).q;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      total += 1;
      if (test_support::argmax_row(soft.row(s), 3) == test_support::argmax_row(hard.row(s), 3)) matched += 1;
    }
  }
  CHECK(static_cast<double>(matched) >= 0.95 * static_cast<double>(total));
}

TEST_CASE("total_variation") {
  const std::vector<double> p = {0.5, 0.5}, q = {1.0, 0.0};
  CHECK(total_variation(p.data(), q.data(), 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(total_variation(p.data(), p.data(), 2) == 0.0);
}

TEST_CASE("solution files are well-formed") {
  const auto solved = soft_policy_iteration(bandit(), 1.0, 1e-10);
  const std::string text =
      solution_to_json(solved.policy, solved.q, solved.objectives.back(), 1.0, 0.0);
  CHECK(text.find("sacd-oracle-solution") != std::string::npos);
  CHECK(text.find("\"objective\"") != std::string::npos);
}
