// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the binary exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "sacd/oracle.hpp"
#include "sacd/runner.hpp"
#include "test_support.hpp"

using namespace sacd;

namespace {

struct Failure {
  std::string detail;
};

void expect(bool ok, const std::string& detail) {
  if (!ok) throw Failure{detail};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity of the three losses against central differences
// ---------------------------------------------------------------------------
void criterion_gradient_fidelity() {
  const GradCheckReport report = run_sac_gradcheck(20, 20240817);
  expect(report.critic_max < 1e-5, "critic loss max err " + fmt(report.critic_max));
  expect(report.policy_max < 1e-5, "policy loss max err " + fmt(report.policy_max));
  expect(report.temperature_max < 1e-5, "temperature loss max err " + fmt(report.temperature_max));
  std::printf("      (critic %.3g, policy %.3g, temperature %.3g)\n", report.critic_max, report.policy_max,
              report.temperature_max);
}

// ---------------------------------------------------------------------------
// 2. Soft value at the softmax policy equals alpha * logsumexp(Q / alpha)
// ---------------------------------------------------------------------------
void criterion_value_identity() {
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double listed[] = {0.1, 1.0, 10.0};
    const double alpha = trial % 2 == 0 ? listed[(trial / 2) % 3] : std::exp(draw_uniform(rng, std::log(0.05), std::log(20.0)));
    const std::size_t n = 2 + draw_index(rng, 7);
    std::vector<double> q(n), scaled(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = draw_uniform(rng, -3, 3);
      scaled[i] = q[i] / alpha;
    }
    softmax_row(scaled.data(), p.data(), n);
    const double lhs = soft_state_value(p, q, alpha);
    const double rhs = oracle::soft_row_value(q.data(), n, alpha);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  expect(worst < 1e-9, "worst |V - alpha*lse| = " + fmt(worst));
  std::printf("      (worst deviation %.3g over 1000 pairs)\n", worst);
}

// ---------------------------------------------------------------------------
// 3. Oracle self-consistency: value iteration vs policy iteration
// ---------------------------------------------------------------------------
void criterion_oracle_consistency() {
  Rng rng(99);
  double worst_diff = 0.0, worst_residual = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t S = 2 + draw_index(rng, 9);  // <= 10 states
    const std::size_t A = 2 + draw_index(rng, 3);  // <= 4 actions
    const MdpSpec mdp = make_random_mdp(S, A, rng, 1.0, 0.9);
    const double alpha = 0.1 + draw_uniform(rng);

    const auto vi = oracle::soft_value_iteration(mdp, alpha, 1e-10);
    worst_residual = std::max(worst_residual, vi.residual);
    expect(vi.residual < 1e-10, "Bellman residual " + fmt(vi.residual));

    const auto pi = oracle::soft_policy_iteration(mdp, alpha, 1e-10);
    for (std::size_t i = 0; i < vi.q.values.size(); ++i) {
      worst_diff = std::max(worst_diff, std::abs(vi.q.values[i] - pi.q.values[i]));
    }
    for (std::size_t k = 1; k < pi.objectives.size(); ++k) {
      expect(pi.objectives[k] >= pi.objectives[k - 1] - 1e-10,
             "objective decreased at improvement round " + std::to_string(k));
    }
  }
  expect(worst_diff < 1e-6, "max |Q_vi - Q_pi| = " + fmt(worst_diff));
  std::printf("      (max |Q_vi - Q_pi| %.3g, max residual %.3g over 20 MDPs)\n", worst_diff, worst_residual);
}

// ---------------------------------------------------------------------------
// 4. alpha -> 0: soft argmax matches standard value iteration
// ---------------------------------------------------------------------------
void criterion_alpha_zero_consistency() {
  Rng rng(555);
  std::size_t matched = 0, total = 0;
  int built = 0;
  while (built < 20) {
    const MdpSpec mdp = make_random_mdp(4 + draw_index(rng, 5), 2 + draw_index(rng, 3), rng, 1.0, 0.9);
    const auto hard = test_support::hard_value_iteration(mdp);
    if (test_support::min_action_gap(hard, mdp) <= 0.01) continue;  // resample until gaps exceed 0.01
    ++built;
    const auto soft = oracle::soft_value_iteration(mdp, 1e-4, 1e-10).q;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      total += 1;
      if (test_support::argmax_row(soft.row(s), mdp.n_actions) ==
          test_support::argmax_row(hard.row(s), mdp.n_actions)) {
        matched += 1;
      }
    }
  }
  const double rate = static_cast<double>(matched) / static_cast<double>(total);
  expect(rate >= 0.95, "argmax agreement " + fmt(rate));
  std::printf("      (argmax agreement %.1f%% over %zu states)\n", 100.0 * rate, total);
}

// ---------------------------------------------------------------------------
// 5. End-to-end learning on the fixed 2-state MDP, fixed alpha = 0.2
// ---------------------------------------------------------------------------
void criterion_end_to_end_twostate() {
  RunConfig config;
  config.env = "twostate";
  config.gamma = 0.9;
  config.total_env_steps = 30000;
  config.initial_random_steps = 1000;
  config.batch_size = 64;
  config.learning_rate = 3e-4;
  config.alpha_autotune = false;
  config.alpha_initial = 0.2;
  config.target_update = TargetUpdate::hard(100);
  config.hidden_layer_sizes = {64, 64};
  config.eval_interval = 0;
  config.episode_step_limit = 200;

  const MdpSpec mdp = make_two_state(0.9);
  std::vector<std::future<CompareReport>> futures;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    futures.push_back(std::async(std::launch::async, [config, mdp, seed] {
      RunConfig c = config;
      c.seed = seed;
      const RunResult result = run_training(c);
      const SacAgent agent = agent_from_run_checkpoint(result.checkpoint);
      return compare_to_oracle(agent, mdp, 0.2);
    }));
  }
  std::vector<double> tvs, gaps;
  for (auto& f : futures) {
    const CompareReport report = f.get();
    tvs.push_back(report.max_tv);
    gaps.push_back(report.objective_gap);
  }
  std::sort(tvs.begin(), tvs.end());
  std::sort(gaps.begin(), gaps.end());
  const double median_tv = tvs[2], median_gap = gaps[2];
  expect(median_tv <= 0.05, "median max-state TV " + fmt(median_tv));
  expect(median_gap <= 0.02, "median objective gap " + fmt(median_gap));
  std::printf("      (median TV %.4f, median objective gap %.5f over seeds 0..4)\n", median_tv, median_gap);
}

// ---------------------------------------------------------------------------
// 6. Temperature autotuning holds the entropy target on the bandit
// ---------------------------------------------------------------------------
void criterion_temperature_autotuning() {
  RunConfig config;
  config.env = "bandit";
  config.total_env_steps = 20000;
  config.initial_random_steps = 200;
  config.steps_per_learning_update = 1;
  config.alpha_autotune = true;
  config.alpha_initial = 1.0;
  config.entropy_target_coefficient = 0.98;
  config.target_update = TargetUpdate::hard(100);
  config.hidden_layer_sizes = {32, 32};
  config.eval_interval = 0;
  config.episode_step_limit = 200;

  const double target = compute_entropy_target(2, 0.98);
  std::vector<std::future<double>> futures;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    futures.push_back(std::async(std::launch::async, [config, seed] {
      RunConfig c = config;
      c.seed = seed;
      const RunResult result = run_training(c);
      double worst = 0.0;
      for (const MetricsRow& row : result.metrics.rows) {
        if (row.step <= c.total_env_steps * 3 / 4 || !row.policy_entropy) continue;
        worst = std::max(worst, std::abs(*row.policy_entropy - compute_entropy_target(2, 0.98)));
      }
      return worst;
    }));
  }
  std::size_t good = 0;
  double best_worst = 1e300;
  for (auto& f : futures) {
    const double worst = f.get();
    best_worst = std::min(best_worst, worst);
    if (worst <= 0.05) good += 1;
  }
  expect(good >= 4, "only " + std::to_string(good) + "/5 seeds held |H - target| <= 0.05");
  std::printf("      (%zu/5 seeds inside the 0.05 band around H=%.4f)\n", good, target);
}

// ---------------------------------------------------------------------------
// 7. Gridworld progress over the exact uniform-random baseline
// ---------------------------------------------------------------------------
void criterion_gridworld_progress() {
  RunConfig config;
  config.env = "gridworld5";  // canonical gamma 0.9
  config.total_env_steps = 50000;
  config.initial_random_steps = 1000;
  config.learning_rate = 3e-4;
  config.alpha_autotune = false;
  config.alpha_initial = 0.05;
  config.target_update = TargetUpdate::hard(200);
  config.hidden_layer_sizes = {64, 64};
  config.eval_interval = 0;
  config.episode_step_limit = 100;

  const MdpSpec mdp = make_named_mdp("gridworld5");
  const double baseline =
      oracle::exact_policy_evaluation(oracle::TabularPolicy::uniform(mdp.n_states, mdp.n_actions), mdp, 0.0)
          .objective;

  std::vector<std::future<double>> futures;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    futures.push_back(std::async(std::launch::async, [config, mdp, seed] {
      RunConfig c = config;
      c.seed = seed;
      const RunResult result = run_training(c);
      const SacAgent agent = agent_from_run_checkpoint(result.checkpoint);
      Rng eval_rng = make_stream(seed, 777);
      return evaluate(agent, mdp, c.episode_step_limit, 20, true, eval_rng).mean;
    }));
  }
  double mean = 0.0;
  for (auto& f : futures) mean += f.get();
  mean /= 5.0;
  expect(mean >= baseline + 0.5,
         "mean eval " + fmt(mean) + " vs uniform baseline " + fmt(baseline) + " (margin < 0.5)");
  std::printf("      (mean eval return %.3f vs exact uniform baseline %.3f, margin %.3f)\n", mean, baseline,
              mean - baseline);
}

// ---------------------------------------------------------------------------
// 8. Determinism and checkpoint round-trip
// ---------------------------------------------------------------------------
void criterion_determinism_roundtrip() {
  RunConfig config;
  config.env = "twostate";
  config.gamma = 0.9;
  config.seed = 11;
  config.total_env_steps = 4000;
  config.initial_random_steps = 200;
  config.batch_size = 32;
  config.hidden_layer_sizes = {32, 32};
  config.alpha_autotune = true;
  config.target_update = TargetUpdate::hard(50);
  config.eval_interval = 500;
  config.eval_episodes = 3;
  config.episode_step_limit = 100;

  std::string mid_a, mid_b;
  RunHooks hooks_a{2000, &mid_a}, hooks_b{2000, &mid_b};
  const RunResult a = run_training(config, hooks_a);
  const RunResult b = run_training(config, hooks_b);
  expect(a.metrics.to_csv() == b.metrics.to_csv(), "identical (config, seed) produced different metrics bytes");
  expect(a.checkpoint == b.checkpoint, "identical (config, seed) produced different checkpoints");
  expect(mid_a == mid_b, "identical (config, seed) produced different mid-run checkpoints");

  const RunResult resumed = resume_training(config, mid_a);
  RunMetrics tail;
  for (const MetricsRow& row : a.metrics.rows) {
    if (row.step > 2000) tail.rows.push_back(row);
  }
  expect(!tail.rows.empty(), "expected metrics rows past the save point");
  expect(resumed.metrics.to_csv() == tail.to_csv(), "resumed metrics differ from the uninterrupted tail");
  expect(resumed.checkpoint == a.checkpoint, "resumed final checkpoint differs from the uninterrupted run");
  std::printf("      (metrics %zu rows byte-identical; resume from step 2000 matches)\n", a.metrics.rows.size());
}

// ---------------------------------------------------------------------------
// 9. Entropy-target formula
// ---------------------------------------------------------------------------
void criterion_entropy_target_formula() {
  for (std::size_t n : {std::size_t{2}, std::size_t{4}, std::size_t{6}, std::size_t{18}}) {
    const double reference = 0.98 * (-std::log(1.0 / static_cast<double>(n)));
    const double got = compute_entropy_target(n, 0.98);
    expect(std::abs(got - reference) < 1e-12,
           "|A| = " + std::to_string(n) + ": " + fmt(got) + " vs " + fmt(reference));
  }
  std::printf("      (matches 0.98 * (-log(1/|A|)) to 1e-12 for |A| in {2, 4, 6, 18})\n");
}

struct Criterion {
  int id;
  const char* name;
  std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient fidelity of the three losses (< 1e-5)", criterion_gradient_fidelity},
      {2, "soft value identity against alpha*logsumexp (< 1e-9)", criterion_value_identity},
      {3, "oracle self-consistency (VI vs PI, 1e-6; residual 1e-10; monotone objective)",
       criterion_oracle_consistency},
      {4, "alpha->0 argmax consistency with standard value iteration (>= 95%)", criterion_alpha_zero_consistency},
      {5, "end-to-end learning on the two-state MDP (median TV <= 0.05, gap <= 0.02)",
       criterion_end_to_end_twostate},
      {6, "temperature autotuning holds the entropy target on the bandit (4/5 seeds)",
       criterion_temperature_autotuning},
      {7, "gridworld progress over the exact uniform baseline (>= 0.5)", criterion_gridworld_progress},
      {8, "determinism and checkpoint round-trip", criterion_determinism_roundtrip},
      {9, "entropy-target formula for |A| in {2, 4, 6, 18} (1e-12)", criterion_entropy_target_formula},
  };

  int only = 0;
  if (argc == 3 && std::string(argv[1]) == "--only") only = std::atoi(argv[2]);

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    if (only != 0 && criterion.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    try {
      criterion.run();
    } catch (const Failure& f) {
      detail = f.detail;
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (detail.empty()) {
      std::printf("PASS  criterion %d: %s  [%.1fs]\n", criterion.id, criterion.name, seconds);
    } else {
      std::printf("FAIL  criterion %d: %s  [%.1fs]  -- %s\n", criterion.id, criterion.name, seconds, detail.c_str());
      failures += 1;
    }
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
