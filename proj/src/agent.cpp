#include "sacd/agent.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace sacd {

Batch Batch::from_transitions(const std::vector<Transition>& transitions) {
  if (transitions.empty()) throw std::invalid_argument("Batch: empty transition list");
  const std::size_t B = transitions.size();
  const std::size_t obs_dim = transitions[0].state.size();

  Batch batch;
  batch.obs = Tensor({B, obs_dim}, 0.0);
  batch.next_obs = Tensor({B, obs_dim}, 0.0);
  batch.rewards = Tensor({B}, 0.0);
  batch.done = Tensor({B}, 0.0);
  batch.actions.resize(B);
  for (std::size_t i = 0; i < B; ++i) {
    const Transition& t = transitions[i];
    if (t.state.size() != obs_dim || t.next_state.size() != obs_dim) {
      throw std::invalid_argument("Batch: inconsistent observation dimensions");
    }
    for (std::size_t j = 0; j < obs_dim; ++j) {
      batch.obs[i * obs_dim + j] = t.state[j];
      batch.next_obs[i * obs_dim + j] = t.next_state[j];
    }
    batch.actions[i] = t.action;
    batch.rewards[i] = t.reward;
    batch.done[i] = t.done ? 1.0 : 0.0;
  }
  return batch;
}

TargetUpdate TargetUpdate::hard(std::size_t interval) {
  if (interval == 0) throw std::invalid_argument("TargetUpdate: hard interval must be positive");
  TargetUpdate t;
  t.mode = Mode::kHard;
  t.interval = interval;
  return t;
}

TargetUpdate TargetUpdate::polyak(double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("TargetUpdate: tau must lie in (0, 1]");
  TargetUpdate t;
  t.mode = Mode::kPolyak;
  t.tau = tau;
  return t;
}

namespace {

void check_prob_vector(const std::vector<double>& probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("not a probability vector: bad entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("not a probability vector: sum off by > 1e-9");
}

}  // namespace

std::size_t sample_action(const std::vector<double>& probs, Rng& rng) {
  check_prob_vector(probs);
  return draw_categorical(rng, probs);
}

std::size_t greedy_action(const std::vector<double>& probs) {
  check_prob_vector(probs);
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

double soft_state_value(const std::vector<double>& probs, const std::vector<double>& q, double alpha) {
  if (probs.size() != q.size()) throw std::invalid_argument("soft_state_value: length mismatch");
  if (alpha < 0.0) throw std::invalid_argument("soft_state_value: alpha must be >= 0");
  double v = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (probs[a] <= 0.0) continue;
    v += probs[a] * (q[a] - alpha * std::log(probs[a]));
  }
  return v;
}

Tape::NodeId critic_loss_graph(Tape& tape, const MlpArch& arch, const std::vector<Tape::NodeId>& critic_params,
                               const Tensor& obs, const std::vector<std::size_t>& actions, const Tensor& targets) {
  const auto q_all = mlp_forward(tape, arch, critic_params, tape.leaf(obs));
  const auto q_taken = tape.gather_cols(q_all, actions);
  const auto diff = tape.sub(q_taken, tape.leaf(targets));
  // mean over the batch of (1/2) * diff^2
  return tape.scale(tape.sum(tape.square(diff)), 0.5 / static_cast<double>(actions.size()));
}

Tape::NodeId policy_loss_graph(Tape& tape, const MlpArch& arch, const std::vector<Tape::NodeId>& policy_params,
                               const Tensor& obs, const Tensor& q_min, double alpha) {
  const auto logits = mlp_forward(tape, arch, policy_params, tape.leaf(obs));
  const auto probs = tape.softmax(logits);
  const auto log_probs = tape.clamp_min(tape.log_softmax(logits), kLogProbFloor);
  // pi . (alpha * log pi - Q), exact expectation over actions
  const auto inner = tape.sub(tape.scale(log_probs, alpha), tape.leaf(q_min));
  const auto weighted = tape.mul(probs, inner);
  return tape.scale(tape.sum(weighted), 1.0 / static_cast<double>(obs.shape[0]));
}

Tape::NodeId temperature_loss_graph(Tape& tape, Tape::NodeId log_alpha, const Tensor& entropies,
                                    double target_entropy) {
  const auto alpha = tape.exp(log_alpha);
  Tensor shifted = entropies;  // H(pi(s)) - target, constant w.r.t. log alpha
  for (double& h : shifted.data) h -= target_entropy;
  return tape.mean(tape.mul(alpha, tape.leaf(shifted)));
}

double temperature_loss_value(double alpha, double mean_entropy, double target_entropy) {
  return alpha * (mean_entropy - target_entropy);
}

SacAgent::SacAgent(AgentConfig config, Rng& init_rng)
    : config_(std::move(config)), arch_(config_.obs_dim, config_.hidden, config_.n_actions) {
  if (config_.n_actions < 2) throw std::invalid_argument("SacAgent: need at least two actions");
  if (!(config_.gamma >= 0.0 && config_.gamma < 1.0)) throw std::invalid_argument("SacAgent: gamma must be in [0, 1)");
  if (config_.alpha_initial <= 0.0) throw std::invalid_argument("SacAgent: alpha_initial must be positive");
  if (config_.target_entropy < 0.0) throw std::invalid_argument("SacAgent: target entropy must be >= 0");

  policy_ = MlpParams::he_initialized(arch_, init_rng);
  q1_ = MlpParams::he_initialized(arch_, init_rng);
  q2_ = MlpParams::he_initialized(arch_, init_rng);
  q1_target_ = q1_;  // equalize target and local weights
  q2_target_ = q2_;
  policy_adam_ = MlpAdam(policy_);
  q1_adam_ = MlpAdam(q1_);
  q2_adam_ = MlpAdam(q2_);
  log_alpha_ = Tensor::scalar(std::log(config_.alpha_initial));
  log_alpha_adam_ = AdamState(log_alpha_.shape);
}

double SacAgent::alpha() const { return std::exp(log_alpha_[0]); }

PolicyEval SacAgent::policy_distribution(const std::vector<double>& obs) const {
  if (obs.size() != config_.obs_dim) {
    throw std::invalid_argument("policy_distribution: observation has dimension " + std::to_string(obs.size()) +
                                ", expected " + std::to_string(config_.obs_dim));
  }
  for (double v : obs) {
    if (!std::isfinite(v)) throw std::invalid_argument("policy_distribution: non-finite observation");
  }
  const Tensor logits = mlp_forward(arch_, policy_, Tensor({1, obs.size()}, obs));
  PolicyEval eval;
  eval.probs.resize(config_.n_actions);
  eval.log_probs.resize(config_.n_actions);
  softmax_row(logits.data.data(), eval.probs.data(), config_.n_actions);
  log_softmax_row(logits.data.data(), eval.log_probs.data(), config_.n_actions);
  return eval;
}

Tensor SacAgent::policy_probs(const Tensor& obs_batch) const {
  return softmax_last_axis(mlp_forward(arch_, policy_, obs_batch));
}

Tensor SacAgent::min_local_q(const Tensor& obs_batch) const {
  Tensor q1 = mlp_forward(arch_, q1_, obs_batch);
  const Tensor q2 = mlp_forward(arch_, q2_, obs_batch);
  for (std::size_t i = 0; i < q1.numel(); ++i) q1[i] = std::min(q1[i], q2[i]);
  return q1;
}

Tensor SacAgent::min_target_q(const Tensor& obs_batch) const {
  Tensor q1 = mlp_forward(arch_, q1_target_, obs_batch);
  const Tensor q2 = mlp_forward(arch_, q2_target_, obs_batch);
  for (std::size_t i = 0; i < q1.numel(); ++i) q1[i] = std::min(q1[i], q2[i]);
  return q1;
}

Tensor SacAgent::critic_targets(const Batch& batch) const {
  const std::size_t B = batch.size(), A = config_.n_actions;
  const Tensor logits = mlp_forward(arch_, policy_, batch.next_obs);
  const Tensor probs = softmax_last_axis(logits);
  const Tensor log_probs = log_softmax_last_axis(logits);
  const Tensor q_min = min_target_q(batch.next_obs);
  const double a = alpha();

  Tensor y({B}, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j < A; ++j) {
      const double lp = std::max(log_probs[i * A + j], kLogProbFloor);
      v += probs[i * A + j] * (q_min[i * A + j] - a * lp);
    }
    y[i] = batch.rewards[i] + config_.gamma * (1.0 - batch.done[i]) * v;
  }
  return y;
}

StepMetrics SacAgent::update(const Batch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("SacAgent::update: empty batch");
  StepMetrics metrics;
  const std::size_t B = batch.size(), A = config_.n_actions;
  const double alpha_before = alpha();

  // targets from the target critics; constant for the critic losses
  const Tensor y = critic_targets(batch);

  auto critic_step = [&](MlpParams& params, MlpAdam& adam, const char* label) {
    Tape tape;
    const auto ids = register_params(tape, params);
    const auto loss = critic_loss_graph(tape, arch_, ids, batch.obs, batch.actions, y);
    const double value = tape.value(loss).item();
    if (!std::isfinite(value)) throw std::runtime_error(std::string(label) + " is non-finite");
    adam_step_all(params, tape.backward(loss).values, adam, config_.learning_rate, label);
    return value;
  };
  metrics.q1_loss = critic_step(q1_, q1_adam_, "critic_loss_1");
  metrics.q2_loss = critic_step(q2_, q2_adam_, "critic_loss_2");

  // policy step, Q treated as constant; locals are the default source
  const Tensor q_min =
      config_.policy_loss_uses_target_critics ? min_target_q(batch.obs) : min_local_q(batch.obs);
  Tensor entropies({B}, 0.0);
  {
    Tape tape;
    const auto ids = register_params(tape, policy_);
    const auto loss = policy_loss_graph(tape, arch_, ids, batch.obs, q_min, alpha_before);
    metrics.policy_loss = tape.value(loss).item();
    if (!std::isfinite(metrics.policy_loss)) throw std::runtime_error("policy_loss is non-finite");

    // batch entropies from the pre-update policy, reused by the
    // temperature loss and the metrics
    const Tensor probs = policy_probs(batch.obs);
    for (std::size_t i = 0; i < B; ++i) entropies[i] = entropy(probs.data.data() + i * A, A);

    adam_step_all(policy_, tape.backward(loss).values, policy_adam_, config_.learning_rate, "policy");
  }
  double entropy_sum = 0.0;
  for (double h : entropies.data) entropy_sum += h;
  metrics.policy_entropy = entropy_sum / static_cast<double>(B);

  if (config_.alpha_autotune) {
    Tape tape;
    const auto id = tape.param(log_alpha_);
    const auto loss = temperature_loss_graph(tape, id, entropies, config_.target_entropy);
    metrics.alpha_loss = tape.value(loss).item();
    if (!std::isfinite(metrics.alpha_loss)) throw std::runtime_error("alpha_loss is non-finite");
    adam_step(log_alpha_, tape.backward(loss).at(id), log_alpha_adam_, config_.learning_rate, "log_alpha");
  } else {
    metrics.alpha_loss = 0.0;
  }

  update_targets();
  metrics.alpha = alpha();
  return metrics;
}

void SacAgent::update_targets() {
  update_count_ += 1;
  if (config_.target_update.mode == TargetUpdate::Mode::kHard) {
    if (update_count_ % config_.target_update.interval == 0) {
      q1_target_ = q1_;
      q2_target_ = q2_;
    }
    return;
  }
  const double tau = config_.target_update.tau;
  for (std::size_t t = 0; t < q1_.tensors.size(); ++t) {
    for (std::size_t i = 0; i < q1_.tensors[t].numel(); ++i) {
      q1_target_.tensors[t][i] = tau * q1_.tensors[t][i] + (1.0 - tau) * q1_target_.tensors[t][i];
      q2_target_.tensors[t][i] = tau * q2_.tensors[t][i] + (1.0 - tau) * q2_target_.tensors[t][i];
    }
  }
}

namespace {

nlohmann::json params_to_json(const MlpParams& params) {
  nlohmann::json j = nlohmann::json::array();
  for (const Tensor& t : params.tensors) {
    j.push_back({{"shape", t.shape}, {"data", t.data}});
  }
  return j;
}

MlpParams params_from_json(const nlohmann::json& j) {
  MlpParams params;
  for (const auto& item : j) {
    params.tensors.emplace_back(item.at("shape").get<std::vector<std::size_t>>(),
                                item.at("data").get<std::vector<double>>());
  }
  return params;
}

nlohmann::json adam_to_json(const MlpAdam& adam) {
  nlohmann::json j = nlohmann::json::array();
  for (const AdamState& s : adam.states) {
    j.push_back({{"m", s.m.data}, {"v", s.v.data}, {"t", s.t}});
  }
  return j;
}

void adam_from_json(const nlohmann::json& j, MlpAdam& adam) {
  for (std::size_t i = 0; i < adam.states.size(); ++i) {
    adam.states[i].m.data = j.at(i).at("m").get<std::vector<double>>();
    adam.states[i].v.data = j.at(i).at("v").get<std::vector<double>>();
    adam.states[i].t = j.at(i).at("t").get<long>();
  }
}

}  // namespace

std::string SacAgent::checkpoint_json() const {
  nlohmann::json j;
  j["format"] = "sacd-checkpoint";
  j["version"] = 1;
  j["config"] = {{"obs_dim", config_.obs_dim},
                 {"n_actions", config_.n_actions},
                 {"hidden", config_.hidden},
                 {"gamma", config_.gamma},
                 {"learning_rate", config_.learning_rate},
                 {"alpha_autotune", config_.alpha_autotune},
                 {"alpha_initial", config_.alpha_initial},
                 {"target_entropy", config_.target_entropy},
                 {"target_mode", config_.target_update.mode == TargetUpdate::Mode::kHard ? "hard" : "polyak"},
                 {"target_interval", config_.target_update.interval},
                 {"target_tau", config_.target_update.tau},
                 {"policy_loss_uses_target_critics", config_.policy_loss_uses_target_critics}};
  j["networks"] = {{"policy", params_to_json(policy_)},
                   {"q1", params_to_json(q1_)},
                   {"q2", params_to_json(q2_)},
                   {"q1_target", params_to_json(q1_target_)},
                   {"q2_target", params_to_json(q2_target_)}};
  j["adam"] = {{"policy", adam_to_json(policy_adam_)},
               {"q1", adam_to_json(q1_adam_)},
               {"q2", adam_to_json(q2_adam_)},
               {"log_alpha", {{"m", log_alpha_adam_.m.data}, {"v", log_alpha_adam_.v.data}, {"t", log_alpha_adam_.t}}}};
  j["log_alpha"] = log_alpha_[0];
  j["update_count"] = update_count_;
  return j.dump();
}

SacAgent SacAgent::from_checkpoint_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "sacd-checkpoint") throw std::runtime_error("not a sacd-checkpoint file");

  const auto& c = j.at("config");
  AgentConfig config;
  config.obs_dim = c.at("obs_dim").get<std::size_t>();
  config.n_actions = c.at("n_actions").get<std::size_t>();
  config.hidden = c.at("hidden").get<std::vector<std::size_t>>();
  config.gamma = c.at("gamma").get<double>();
  config.learning_rate = c.at("learning_rate").get<double>();
  config.alpha_autotune = c.at("alpha_autotune").get<bool>();
  config.alpha_initial = c.at("alpha_initial").get<double>();
  config.target_entropy = c.at("target_entropy").get<double>();
  config.target_update = c.at("target_mode").get<std::string>() == "hard"
                             ? TargetUpdate::hard(c.at("target_interval").get<std::size_t>())
                             : TargetUpdate::polyak(c.at("target_tau").get<double>());
  config.policy_loss_uses_target_critics = c.value("policy_loss_uses_target_critics", false);

  SacAgent agent;
  agent.config_ = config;
  agent.arch_ = MlpArch(config.obs_dim, config.hidden, config.n_actions);
  const auto& nets = j.at("networks");
  agent.policy_ = params_from_json(nets.at("policy"));
  agent.q1_ = params_from_json(nets.at("q1"));
  agent.q2_ = params_from_json(nets.at("q2"));
  agent.q1_target_ = params_from_json(nets.at("q1_target"));
  agent.q2_target_ = params_from_json(nets.at("q2_target"));
  agent.policy_adam_ = MlpAdam(agent.policy_);
  agent.q1_adam_ = MlpAdam(agent.q1_);
  agent.q2_adam_ = MlpAdam(agent.q2_);
  const auto& adam = j.at("adam");
  adam_from_json(adam.at("policy"), agent.policy_adam_);
  adam_from_json(adam.at("q1"), agent.q1_adam_);
  adam_from_json(adam.at("q2"), agent.q2_adam_);
  agent.log_alpha_ = Tensor::scalar(j.at("log_alpha").get<double>());
  agent.log_alpha_adam_ = AdamState(agent.log_alpha_.shape);
  agent.log_alpha_adam_.m.data = adam.at("log_alpha").at("m").get<std::vector<double>>();
  agent.log_alpha_adam_.v.data = adam.at("log_alpha").at("v").get<std::vector<double>>();
  agent.log_alpha_adam_.t = adam.at("log_alpha").at("t").get<long>();
  agent.update_count_ = j.at("update_count").get<std::size_t>();
  return agent;
}

}  // namespace sacd
