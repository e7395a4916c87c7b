#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sacd/config.hpp"
#include "sacd/mdp.hpp"
#include "sacd/oracle.hpp"
#include "sacd/plot.hpp"
#include "sacd/runner.hpp"

namespace {

namespace fs = std::filesystem;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

sacd::MdpSpec mdp_from_flags(const std::string& mdp_file, const std::string& env, double gamma) {
  if (!mdp_file.empty()) {
    sacd::MdpSpec mdp = sacd::load_mdp(mdp_file);
    if (gamma >= 0.0) {
      mdp.gamma = gamma;
      mdp.validate();
    }
    return mdp;
  }
  if (!env.empty()) return sacd::make_named_mdp(env, gamma);
  throw std::runtime_error("give an environment with --env <name> or --mdp <file>");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, ',')) {
    if (part.empty()) continue;
    seeds.push_back(std::stoull(part));
  }
  if (seeds.empty()) throw std::runtime_error("--seeds needs a comma-separated list");
  return seeds;
}

int cmd_train(const std::string& config_path, bool seed_set, std::uint64_t seed, const std::string& seeds_text,
              const std::string& out_dir, std::size_t save_at, const std::string& resume_path) {
  sacd::RunConfig base = sacd::load_config(config_path);
  fs::create_directories(out_dir);

  std::vector<std::uint64_t> seeds;
  if (!seeds_text.empty()) {
    seeds = parse_seed_list(seeds_text);
  } else {
    seeds = {seed_set ? seed : base.seed};
  }
  const bool fan_out = seeds.size() > 1;

  std::ostringstream merged;
  merged << "seed," << sacd::RunMetrics::csv_header() << '\n';
  int exit_code = 0;

  // seeds run in parallel: each owns its env, buffer, agent and rng streams
  struct SeedRun {
    std::string mid_checkpoint;
    std::future<sacd::RunResult> future;
  };
  std::vector<SeedRun> jobs(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    sacd::RunConfig config = base;
    config.seed = seeds[i];
    SeedRun& job = jobs[i];
    job.future = std::async(std::launch::async, [config, resume_path, save_at, &job] {
      if (!resume_path.empty()) return sacd::resume_training(config, read_file(resume_path));
      sacd::RunHooks hooks;
      hooks.save_at_step = save_at;
      hooks.saved_checkpoint = &job.mid_checkpoint;
      return sacd::run_training(config, hooks);
    });
  }

  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::uint64_t s = seeds[i];
    const sacd::RunResult result = jobs[i].future.get();
    if (save_at > 0 && !jobs[i].mid_checkpoint.empty()) {
      write_file(out_dir + "/checkpoint_step" + std::to_string(save_at) +
                     (fan_out ? "_seed" + std::to_string(s) : "") + ".ckpt",
                 jobs[i].mid_checkpoint);
    }

    const std::string suffix = fan_out ? "_seed" + std::to_string(s) : "";
    write_file(out_dir + "/metrics" + suffix + ".csv", result.metrics.to_csv());
    write_file(out_dir + "/final" + suffix + ".ckpt", result.checkpoint);

    const std::string csv = result.metrics.to_csv();
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      if (!line.empty()) merged << s << ',' << line << '\n';
    }

    if (result.aborted) {
      std::cerr << "seed " << s << ": run aborted: " << result.abort_reason
                << " (checkpoint of last good state written)\n";
      exit_code = 1;
    } else {
      std::cout << "seed " << s << ": " << result.gradient_steps << " gradient steps, metrics and checkpoint in "
                << out_dir << "\n";
    }
  }
  if (fan_out) write_file(out_dir + "/merged_metrics.csv", merged.str());
  return exit_code;
}

int cmd_eval(const std::string& ckpt, const std::string& mdp_file, const std::string& env, double gamma,
             std::size_t episodes, const std::string& mode, std::uint64_t seed, std::size_t step_limit) {
  const sacd::SacAgent agent = sacd::agent_from_run_checkpoint(read_file(ckpt));
  const sacd::MdpSpec mdp = mdp_from_flags(mdp_file, env, gamma);
  sacd::Rng rng = sacd::make_stream(seed, 9000);
  const sacd::EvalResult result = sacd::evaluate(agent, mdp, step_limit, episodes, mode == "greedy", rng);
  std::cout << "episodes: " << episodes << "\nmean return: " << result.mean << "\nstd: " << result.stddev << "\n";
  return 0;
}

int cmd_oracle_solve(const std::string& mdp_file, const std::string& env, double gamma, double alpha, double tol,
                     const std::string& out_path) {
  const sacd::MdpSpec mdp = mdp_from_flags(mdp_file, env, gamma);
  const auto vi = sacd::oracle::soft_value_iteration(mdp, alpha, tol);
  const auto pi = sacd::oracle::policy_improvement(vi.q, alpha);
  const auto eval = sacd::oracle::exact_policy_evaluation(pi, mdp, alpha);
  std::cout << "iterations: " << vi.iterations << "\nresidual: " << vi.residual << "\nobjective: " << eval.objective
            << "\n";
  if (!out_path.empty()) {
    sacd::oracle::save_solution(out_path, pi, vi.q, eval.objective, alpha, vi.residual);
    std::cout << "solution written to " << out_path << "\n";
  }
  return 0;
}

int cmd_compare(const std::string& ckpt, const std::string& mdp_file, const std::string& env, double gamma,
                double alpha, const std::string& out_path) {
  const sacd::SacAgent agent = sacd::agent_from_run_checkpoint(read_file(ckpt));
  const sacd::MdpSpec mdp = mdp_from_flags(mdp_file, env, gamma);
  const double a = alpha > 0.0 ? alpha : agent.alpha();
  const sacd::CompareReport report = sacd::compare_to_oracle(agent, mdp, a);
  std::cout << "alpha: " << report.alpha << "\nmax TV: " << report.max_tv << "\nmean TV: " << report.mean_tv
            << "\nagent objective: " << report.agent_objective << "\noracle objective: " << report.oracle_objective
            << "\nobjective gap: " << report.objective_gap << "\n";
  if (!out_path.empty()) {
    write_file(out_path, report.to_json() + "\n");
    std::cout << "report written to " << out_path << "\n";
  }
  return 0;
}

int cmd_gradcheck(std::size_t batches, std::uint64_t seed) {
  const sacd::GradCheckReport report = sacd::run_sac_gradcheck(batches, seed);
  std::cout << "critic loss      max relative error: " << report.critic_max << "\n"
            << "policy loss      max relative error: " << report.policy_max << "\n"
            << "temperature loss max relative error: " << report.temperature_max << "\n";
  const bool ok = report.critic_max < 1e-5 && report.policy_max < 1e-5 && report.temperature_max < 1e-5;
  std::cout << (ok ? "all gradients match central differences within 1e-5\n"
                   : "FAILED: a loss gradient exceeds the 1e-5 bound\n");
  return ok ? 0 : 1;
}

int cmd_plot(const std::vector<std::string>& inputs, const std::string& out_path) {
  std::vector<std::pair<std::string, sacd::RunMetrics>> series;
  for (const std::string& path : inputs) {
    series.emplace_back(fs::path(path).stem().string(), sacd::RunMetrics::from_csv(read_file(path)));
  }
  write_file(out_path, sacd::render_learning_curve_svg(series));
  std::cout << "plot written to " << out_path << "\n";
  return 0;
}

}  // namespace

int sacd_cli_main(const std::vector<std::string>& args) {
  CLI::App app{"SAC-Discrete training toolkit with an exact tabular oracle"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run a training experiment from a config file");
  std::string config_path, seeds_text, out_dir = "runs", resume_path;
  std::uint64_t seed = 0;
  std::size_t save_at = 0;
  train->add_option("--config", config_path, "config file (JSON)")->required()->check(CLI::ExistingFile);
  auto* seed_opt = train->add_option("--seed", seed, "seed override");
  train->add_option("--seeds", seeds_text, "comma-separated seed fan-out, e.g. 0,1,2");
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--save-at", save_at, "also write a resumable checkpoint after this env step");
  train->add_option("--resume", resume_path, "continue from a run checkpoint")->check(CLI::ExistingFile);

  // eval
  auto* eval = app.add_subcommand("eval", "roll out a checkpoint without learning");
  std::string eval_ckpt, eval_mdp, eval_env, eval_mode = "greedy";
  double eval_gamma = -1.0;
  std::size_t eval_episodes = 20, eval_limit = 200;
  std::uint64_t eval_seed = 0;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--mdp", eval_mdp, "MdpSpec file")->check(CLI::ExistingFile);
  eval->add_option("--env", eval_env, "named environment");
  eval->add_option("--gamma", eval_gamma, "discount override for named environments");
  eval->add_option("--episodes", eval_episodes, "episodes to run");
  eval->add_option("--mode", eval_mode, "greedy or sampled")->check(CLI::IsMember({"greedy", "sampled"}));
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--step-limit", eval_limit, "episode step limit");

  // oracle-solve
  auto* solve = app.add_subcommand("oracle-solve", "exact soft-optimal policy of a tabular MDP");
  std::string solve_mdp, solve_env, solve_out;
  double solve_gamma = -1.0, solve_alpha = 0.0, solve_tol = 1e-10;
  solve->add_option("--mdp", solve_mdp, "MdpSpec file")->check(CLI::ExistingFile);
  solve->add_option("--env", solve_env, "named environment");
  solve->add_option("--gamma", solve_gamma, "discount override for named environments");
  solve->add_option("--alpha", solve_alpha, "temperature")->required()->check(CLI::PositiveNumber);
  solve->add_option("--tol", solve_tol, "fixed-point tolerance");
  solve->add_option("--out", solve_out, "write the solution to this file");

  // compare
  auto* compare = app.add_subcommand("compare", "measure a checkpoint against the exact oracle");
  std::string cmp_ckpt, cmp_mdp, cmp_env, cmp_out;
  double cmp_gamma = -1.0, cmp_alpha = 0.0;
  compare->add_option("--ckpt", cmp_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  compare->add_option("--mdp", cmp_mdp, "MdpSpec file")->check(CLI::ExistingFile);
  compare->add_option("--env", cmp_env, "named environment");
  compare->add_option("--gamma", cmp_gamma, "discount override for named environments");
  compare->add_option("--alpha", cmp_alpha, "temperature (default: the checkpoint's alpha)");
  compare->add_option("--out", cmp_out, "write the report to this file");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the three losses");
  std::size_t gc_batches = 20;
  std::uint64_t gc_seed = 12345;
  gradcheck->add_option("--batches", gc_batches, "random batches per loss");
  gradcheck->add_option("--seed", gc_seed, "seed");

  // plot
  auto* plot = app.add_subcommand("plot", "render metrics CSVs to an SVG learning curve");
  std::vector<std::string> plot_inputs;
  std::string plot_out;
  plot->add_option("--in", plot_inputs, "metrics CSV (repeatable)")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "output SVG path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (app.got_subcommand(train)) {
      return cmd_train(config_path, seed_opt->count() > 0, seed, seeds_text, out_dir, save_at, resume_path);
    }
    if (app.got_subcommand(eval)) {
      return cmd_eval(eval_ckpt, eval_mdp, eval_env, eval_gamma, eval_episodes, eval_mode, eval_seed, eval_limit);
    }
    if (app.got_subcommand(solve)) {
      return cmd_oracle_solve(solve_mdp, solve_env, solve_gamma, solve_alpha, solve_tol, solve_out);
    }
    if (app.got_subcommand(compare)) {
      return cmd_compare(cmp_ckpt, cmp_mdp, cmp_env, cmp_gamma, cmp_alpha, cmp_out);
    }
    if (app.got_subcommand(gradcheck)) return cmd_gradcheck(gc_batches, gc_seed);
    if (app.got_subcommand(plot)) return cmd_plot(plot_inputs, plot_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
