#include "sacd/runner.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sacd {

double compute_entropy_target(std::size_t n_actions, double coefficient) {
  if (n_actions < 2) throw std::invalid_argument("compute_entropy_target: need at least two actions");
  if (!(coefficient > 0.0 && coefficient <= 1.0)) {
    throw std::invalid_argument("compute_entropy_target: coefficient must lie in (0, 1]");
  }
  return coefficient * std::log(static_cast<double>(n_actions));
}

MdpSpec resolve_mdp(const RunConfig& config) {
  if (!config.mdp_file.empty()) {
    MdpSpec mdp = load_mdp(config.mdp_file);
    if (config.gamma >= 0.0) {
      mdp.gamma = config.gamma;
      mdp.validate();
    }
    return mdp;
  }
  return make_named_mdp(config.env, config.gamma);
}

const char* RunMetrics::csv_header() {
  return "step,episode_return,eval_return,q1_loss,q2_loss,policy_loss,alpha_loss,alpha,policy_entropy,buffer_size";
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); }

std::optional<double> parse_opt(const std::string& field) {
  if (field.empty()) return std::nullopt;
  return std::stod(field);
}

}  // namespace

std::string RunMetrics::to_csv() const {
  std::ostringstream os;
  os << csv_header() << '\n';
  for (const MetricsRow& r : rows) {
    os << r.step << ',' << fmt_opt(r.episode_return) << ',' << fmt_opt(r.eval_return) << ',' << fmt_opt(r.q1_loss)
       << ',' << fmt_opt(r.q2_loss) << ',' << fmt_opt(r.policy_loss) << ',' << fmt_opt(r.alpha_loss) << ','
       << fmt_double(r.alpha) << ',' << fmt_opt(r.policy_entropy) << ',' << r.buffer_size << '\n';
  }
  return os.str();
}

RunMetrics RunMetrics::from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != csv_header()) {
    throw std::runtime_error("RunMetrics: bad or missing CSV header");
  }
  RunMetrics metrics;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    while (fields.size() < 10) fields.emplace_back();
    MetricsRow r;
    r.step = std::stoul(fields[0]);
    r.episode_return = parse_opt(fields[1]);
    r.eval_return = parse_opt(fields[2]);
    r.q1_loss = parse_opt(fields[3]);
    r.q2_loss = parse_opt(fields[4]);
    r.policy_loss = parse_opt(fields[5]);
    r.alpha_loss = parse_opt(fields[6]);
    r.alpha = std::stod(fields[7]);
    r.policy_entropy = parse_opt(fields[8]);
    r.buffer_size = std::stoul(fields[9]);
    metrics.rows.push_back(std::move(r));
  }
  return metrics;
}

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kEnvStream = 1;
constexpr std::uint64_t kActionStream = 2;
constexpr std::uint64_t kReplayStream = 3;
constexpr std::uint64_t kEvalStreamBase = 1000;

std::size_t obs_to_state(const std::vector<double>& obs) {
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i] == 1.0) return i;
  }
  throw std::runtime_error("expected a one-hot observation");
}

struct RunnerState {
  MdpSpec mdp;
  SacAgent agent;
  ReplayBuffer buffer;
  EnvHandle env;
  Rng env_rng, action_rng, replay_rng;
  std::size_t env_steps = 0;
  std::size_t gradient_steps = 0;
  std::size_t eval_count = 0;
  std::vector<double> obs;
  double episode_acc = 0.0;
  std::optional<double> last_episode_return;

  RunnerState(MdpSpec mdp_in, SacAgent agent_in, std::size_t buffer_capacity, std::size_t step_limit,
              std::uint64_t seed)
      : mdp(std::move(mdp_in)),
        agent(std::move(agent_in)),
        buffer(buffer_capacity),
        env(mdp, step_limit),
        env_rng(make_stream(seed, kEnvStream)),
        action_rng(make_stream(seed, kActionStream)),
        replay_rng(make_stream(seed, kReplayStream)) {}
};

SacAgent build_agent(const RunConfig& config, const MdpSpec& mdp) {
  AgentConfig agent_config;
  agent_config.obs_dim = mdp.n_states;
  agent_config.n_actions = mdp.n_actions;
  agent_config.hidden = config.hidden_layer_sizes;
  agent_config.gamma = mdp.gamma;
  agent_config.learning_rate = config.learning_rate;
  agent_config.alpha_autotune = config.alpha_autotune;
  agent_config.alpha_initial = config.alpha_initial;
  agent_config.target_entropy = compute_entropy_target(mdp.n_actions, config.entropy_target_coefficient);
  agent_config.target_update = config.target_update;
  agent_config.policy_loss_uses_target_critics = config.policy_loss_uses_target_critics;
  Rng init_rng = make_stream(config.seed, kInitStream);
  return SacAgent(agent_config, init_rng);
}

std::string run_checkpoint(const RunnerState& state) {
  nlohmann::json j = nlohmann::json::parse(state.agent.checkpoint_json());
  nlohmann::json rs;
  rs["version"] = 1;
  rs["env_steps"] = state.env_steps;
  rs["gradient_steps"] = state.gradient_steps;
  rs["eval_count"] = state.eval_count;
  rs["env_state"] = state.env.state();
  rs["episode_steps"] = state.env.steps_in_episode();
  rs["episode_acc"] = state.episode_acc;
  rs["has_last_episode"] = state.last_episode_return.has_value();
  rs["last_episode_return"] = state.last_episode_return.value_or(0.0);
  rs["env_rng"] = rng_state_string(state.env_rng);
  rs["action_rng"] = rng_state_string(state.action_rng);
  rs["replay_rng"] = rng_state_string(state.replay_rng);
  // transitions as state indices; tabular observations are one-hot
  nlohmann::json buf = nlohmann::json::array();
  for (std::size_t i = 0; i < state.buffer.size(); ++i) {
    const Transition& t = state.buffer.storage()[i];
    buf.push_back({obs_to_state(t.state), t.action, t.reward, obs_to_state(t.next_state), t.done});
  }
  rs["buffer"] = std::move(buf);
  rs["buffer_cursor"] = state.buffer.cursor();
  j["run_state"] = std::move(rs);
  return j.dump();
}

void emit_row(RunMetrics& metrics, const RunnerState& state, std::size_t step,
              const std::optional<StepMetrics>& update, const std::optional<double>& eval_return) {
  MetricsRow row;
  row.step = step;
  row.episode_return = state.last_episode_return;
  row.eval_return = eval_return;
  if (update) {
    row.q1_loss = update->q1_loss;
    row.q2_loss = update->q2_loss;
    row.policy_loss = update->policy_loss;
    row.alpha_loss = update->alpha_loss;
    row.policy_entropy = update->policy_entropy;
  }
  row.alpha = state.agent.alpha();
  row.buffer_size = state.buffer.size();
  metrics.rows.push_back(row);
}

RunResult run_loop(const RunConfig& config, RunnerState state, const RunHooks& hooks) {
  RunResult result;
  const std::size_t n_actions = state.mdp.n_actions;

  for (std::size_t t = state.env_steps + 1; t <= config.total_env_steps; ++t) {
    const std::size_t action = t <= config.initial_random_steps
                                   ? draw_index(state.action_rng, n_actions)
                                   : sample_action(state.agent.policy_distribution(state.obs).probs, state.action_rng);
    const StepResult sr = state.env.step(action, state.env_rng);

    Transition transition;
    transition.state = state.obs;
    transition.action = action;
    transition.reward = config.reward_clip ? clip_reward(sr.reward) : sr.reward;
    transition.next_state = sr.observation;
    transition.done = sr.terminal;  // truncation keeps the bootstrap
    state.buffer.push(std::move(transition));

    state.episode_acc += sr.reward;
    if (sr.done()) {
      state.last_episode_return = state.episode_acc;
      state.episode_acc = 0.0;
      state.obs = state.env.reset(state.env_rng);
    } else {
      state.obs = sr.observation;
    }
    state.env_steps = t;

    std::optional<StepMetrics> update;
    if (t > config.initial_random_steps && t % config.steps_per_learning_update == 0 &&
        state.buffer.size() >= config.batch_size) {
      try {
        for (std::size_t i = 0; i < config.learning_iterations_per_round; ++i) {
          update = state.agent.update(
              Batch::from_transitions(state.buffer.sample(config.batch_size, state.replay_rng)));
          state.gradient_steps += 1;
        }
      } catch (const std::exception& e) {
        // abort with the last state whose parameters are all finite
        result.aborted = true;
        result.abort_reason = e.what();
        result.checkpoint = run_checkpoint(state);
        result.gradient_steps = state.gradient_steps;
        return result;
      }
    }

    std::optional<double> eval_return;
    if (config.eval_interval > 0 && t % config.eval_interval == 0) {
      Rng eval_rng = make_stream(config.seed, kEvalStreamBase + state.eval_count);
      state.eval_count += 1;
      eval_return =
          evaluate(state.agent, state.mdp, config.episode_step_limit, config.eval_episodes, true, eval_rng).mean;
    }

    if (update || eval_return) emit_row(result.metrics, state, t, update, eval_return);

    if (hooks.save_at_step == t && hooks.saved_checkpoint) {
      *hooks.saved_checkpoint = run_checkpoint(state);
    }
  }

  result.checkpoint = run_checkpoint(state);
  result.gradient_steps = state.gradient_steps;
  return result;
}

}  // namespace

RunResult run_training(const RunConfig& config) { return run_training(config, RunHooks{}); }

RunResult run_training(const RunConfig& config, const RunHooks& hooks) {
  config.validate();
  MdpSpec mdp = resolve_mdp(config);
  SacAgent agent = build_agent(config, mdp);
  RunnerState state(std::move(mdp), std::move(agent), config.buffer_capacity, config.episode_step_limit,
                    config.seed);
  state.obs = state.env.reset(state.env_rng);
  return run_loop(config, std::move(state), hooks);
}

RunResult resume_training(const RunConfig& config, const std::string& run_checkpoint_json) {
  config.validate();
  const nlohmann::json j = nlohmann::json::parse(run_checkpoint_json);
  if (!j.contains("run_state")) throw std::runtime_error("resume_training: checkpoint has no run state");
  const auto& rs = j.at("run_state");

  MdpSpec mdp = resolve_mdp(config);
  SacAgent agent = SacAgent::from_checkpoint_json(run_checkpoint_json);
  if (agent.config().obs_dim != mdp.n_states || agent.config().n_actions != mdp.n_actions) {
    throw std::runtime_error("resume_training: checkpoint does not match the configured environment");
  }

  RunnerState state(std::move(mdp), std::move(agent), config.buffer_capacity, config.episode_step_limit,
                    config.seed);
  state.env_steps = rs.at("env_steps").get<std::size_t>();
  state.gradient_steps = rs.at("gradient_steps").get<std::size_t>();
  state.eval_count = rs.at("eval_count").get<std::size_t>();
  state.env.restore(rs.at("env_state").get<std::size_t>(), rs.at("episode_steps").get<std::size_t>(), false);
  state.obs = state.env.observation();
  state.episode_acc = rs.at("episode_acc").get<double>();
  if (rs.at("has_last_episode").get<bool>()) state.last_episode_return = rs.at("last_episode_return").get<double>();
  state.env_rng = rng_from_state_string(rs.at("env_rng").get<std::string>());
  state.action_rng = rng_from_state_string(rs.at("action_rng").get<std::string>());
  state.replay_rng = rng_from_state_string(rs.at("replay_rng").get<std::string>());

  std::vector<Transition> storage;
  for (const auto& item : rs.at("buffer")) {
    Transition t;
    t.state.assign(state.mdp.n_states, 0.0);
    t.state[item.at(0).get<std::size_t>()] = 1.0;
    t.action = item.at(1).get<std::size_t>();
    t.reward = item.at(2).get<double>();
    t.next_state.assign(state.mdp.n_states, 0.0);
    t.next_state[item.at(3).get<std::size_t>()] = 1.0;
    t.done = item.at(4).get<bool>();
    storage.push_back(std::move(t));
  }
  state.buffer = ReplayBuffer::restore(config.buffer_capacity, std::move(storage),
                                       rs.at("buffer_cursor").get<std::size_t>());

  return run_loop(config, std::move(state), RunHooks{});
}

EvalResult evaluate(const SacAgent& agent, const MdpSpec& mdp, std::size_t step_limit, std::size_t episodes,
                    bool greedy, Rng& rng) {
  if (episodes == 0) throw std::invalid_argument("evaluate: need at least one episode");
  EvalResult result;
  EnvHandle env(mdp, step_limit);
  for (std::size_t e = 0; e < episodes; ++e) {
    std::vector<double> obs = env.reset(rng);
    double ret = 0.0;
    while (!env.done()) {
      const PolicyEval eval = agent.policy_distribution(obs);
      const std::size_t action = greedy ? greedy_action(eval.probs) : sample_action(eval.probs, rng);
      const StepResult sr = env.step(action, rng);
      ret += sr.reward;
      obs = sr.observation;
    }
    result.returns.push_back(ret);
  }
  double mean = 0.0;
  for (double r : result.returns) mean += r;
  mean /= static_cast<double>(episodes);
  double var = 0.0;
  for (double r : result.returns) var += (r - mean) * (r - mean);
  result.mean = mean;
  result.stddev = std::sqrt(var / static_cast<double>(episodes));
  return result;
}

oracle::TabularPolicy tabulate_policy(const SacAgent& agent, const MdpSpec& mdp) {
  if (agent.config().obs_dim != mdp.n_states || agent.config().n_actions != mdp.n_actions) {
    throw std::invalid_argument("tabulate_policy: agent was not trained on this tabular MDP");
  }
  oracle::TabularPolicy pi;
  pi.n_states = mdp.n_states;
  pi.n_actions = mdp.n_actions;
  pi.probs.assign(mdp.n_states * mdp.n_actions, 0.0);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    std::vector<double> obs(mdp.n_states, 0.0);
    obs[s] = 1.0;
    const PolicyEval eval = agent.policy_distribution(obs);
    double row = 0.0;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      pi.at(s, a) = eval.probs[a];
      row += eval.probs[a];
    }
    // softmax rows sum to 1 within 1e-9; tighten for the 1e-12 validator,
    // steering the residue into the largest entry (saturated rows can
    // hold probabilities smaller than the residue itself)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) pi.at(s, a) /= row;
    double tightened = 0.0;
    std::size_t largest = 0;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      tightened += pi.at(s, a);
      if (pi.at(s, a) > pi.at(s, largest)) largest = a;
    }
    pi.at(s, largest) += 1.0 - tightened;
  }
  pi.validate();
  return pi;
}

CompareReport compare_to_oracle(const SacAgent& agent, const MdpSpec& mdp, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("compare_to_oracle: alpha must be positive");
  const oracle::TabularPolicy agent_pi = tabulate_policy(agent, mdp);
  const auto solved = oracle::soft_policy_iteration(mdp, alpha, 1e-10);

  CompareReport report;
  report.alpha = alpha;
  report.tv_per_state.resize(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    report.tv_per_state[s] = oracle::total_variation(agent_pi.row(s), solved.policy.row(s), mdp.n_actions);
    report.max_tv = std::max(report.max_tv, report.tv_per_state[s]);
    report.mean_tv += report.tv_per_state[s];
  }
  report.mean_tv /= static_cast<double>(mdp.n_states);
  report.agent_objective = oracle::exact_policy_evaluation(agent_pi, mdp, alpha).objective;
  report.oracle_objective = oracle::exact_policy_evaluation(solved.policy, mdp, alpha).objective;
  report.objective_gap = report.oracle_objective - report.agent_objective;
  return report;
}

std::string CompareReport::to_json() const {
  nlohmann::json j;
  j["format"] = "sacd-compare-report";
  j["version"] = 1;
  j["alpha"] = alpha;
  j["tv_per_state"] = tv_per_state;
  j["max_tv"] = max_tv;
  j["mean_tv"] = mean_tv;
  j["agent_objective"] = agent_objective;
  j["oracle_objective"] = oracle_objective;
  j["objective_gap"] = objective_gap;
  return j.dump(2);
}

SacAgent agent_from_run_checkpoint(const std::string& run_checkpoint_json) {
  return SacAgent::from_checkpoint_json(run_checkpoint_json);
}

double GradCheckReport::worst() const { return std::max(critic_max, std::max(policy_max, temperature_max)); }

namespace {

// Central differences are only valid away from relu kinks. He biases are
// zero, which can park whole preactivation rows exactly at the kink
// (a fully dead unit row feeds 0 * W into the next layer), so the check
// networks get small random biases and a margin filter.
MlpParams sample_smooth_mlp(const MlpArch& arch, const Tensor& obs, Rng& rng) {
  constexpr double kKinkMargin = 1e-3;  // >> the 1e-5 difference step
  for (int attempt = 0; attempt < 200; ++attempt) {
    MlpParams params = MlpParams::he_initialized(arch, rng);
    for (Tensor& t : params.tensors) {
      if (t.rank() == 1) {
        for (double& v : t.data) v = 0.3 * draw_normal(rng);
      }
    }
    bool smooth = true;
    Tensor h = obs;
    for (std::size_t layer = 0; layer + 1 < arch.n_layers() && smooth; ++layer) {
      Tensor z = matmul(h, params.tensors[2 * layer]);
      const Tensor& b = params.tensors[2 * layer + 1];
      for (std::size_t r = 0; r < z.shape[0]; ++r) {
        for (std::size_t c = 0; c < z.shape[1]; ++c) {
          double& v = z[r * z.shape[1] + c];
          v += b[c];
          if (std::abs(v) < kKinkMargin) smooth = false;
          v = v > 0.0 ? v : 0.0;
        }
      }
      h = std::move(z);
    }
    if (smooth) return params;
  }
  throw std::runtime_error("run_sac_gradcheck: could not sample a network away from relu kinks");
}

}  // namespace

GradCheckReport run_sac_gradcheck(std::size_t batches, std::uint64_t seed) {
  GradCheckReport report;
  Rng rng = make_stream(seed, 42);
  const std::size_t obs_dim = 4, n_actions = 3, B = 8;
  const MlpArch arch(obs_dim, {8, 8}, n_actions);
  const double target_entropy = compute_entropy_target(n_actions, 0.98);

  for (std::size_t batch_idx = 0; batch_idx < batches; ++batch_idx) {
    std::vector<Transition> ts(B);
    for (auto& t : ts) {
      t.state.assign(obs_dim, 0.0);
      t.state[draw_index(rng, obs_dim)] = 1.0;
      t.next_state.assign(obs_dim, 0.0);
      t.next_state[draw_index(rng, obs_dim)] = 1.0;
      t.action = draw_index(rng, n_actions);
      t.reward = draw_uniform(rng, -1, 1);
      t.done = draw_uniform(rng) < 0.1;
    }
    const Batch batch = Batch::from_transitions(ts);

    const MlpParams critic = sample_smooth_mlp(arch, batch.obs, rng);
    Tensor y({B}, 0.0);
    for (double& v : y.data) v = draw_uniform(rng, -1, 1);
    report.critic_max = std::max(
        report.critic_max,
        gradient_check(
            [&](Tape& tape, const std::vector<Tape::NodeId>& ids) {
              return critic_loss_graph(tape, arch, ids, batch.obs, batch.actions, y);
            },
            critic.tensors, 1e-5));

    const MlpParams policy = sample_smooth_mlp(arch, batch.obs, rng);
    Tensor q_min({B, n_actions}, 0.0);
    for (double& v : q_min.data) v = draw_uniform(rng, -1, 1);
    const double alpha = 0.1 + draw_uniform(rng);
    report.policy_max = std::max(
        report.policy_max,
        gradient_check(
            [&](Tape& tape, const std::vector<Tape::NodeId>& ids) {
              return policy_loss_graph(tape, arch, ids, batch.obs, q_min, alpha);
            },
            policy.tensors, 1e-5));

    Tensor entropies({B}, 0.0);
    for (double& h : entropies.data) h = draw_uniform(rng, 0.0, std::log(3.0));
    const Tensor log_alpha = Tensor::scalar(draw_uniform(rng, -2.0, 1.0));
    report.temperature_max = std::max(
        report.temperature_max,
        gradient_check(
            [&](Tape& tape, const std::vector<Tape::NodeId>& ids) {
              return temperature_loss_graph(tape, ids[0], entropies, target_entropy);
            },
            {log_alpha}, 1e-5));
  }
  return report;
}

}  // namespace sacd
