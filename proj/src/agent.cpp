#include "starlight/agent.hpp"

#include <algorithm>
#include <fstream>

namespace starlight {

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) fail("config", "replay buffer capacity must be positive");
  data_.reserve(std::min<size_t>(capacity, 4096));
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<size_t> ReplayBuffer::sample_indices(Rng& rng, size_t n) const {
  if (n > data_.size()) fail("state", "replay buffer holds fewer transitions than requested");
  // Partial Fisher-Yates over the index range: distinct picks, uniform.
  std::vector<size_t> idx(data_.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (size_t i = 0; i < n; ++i) {
    size_t j = i + static_cast<size_t>(rng.uniform_below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

double EpsilonSchedule::value(std::int64_t step) const {
  if (decay_steps <= 0 || step >= decay_steps) return end;
  if (step <= 0) return start;
  double f = static_cast<double>(step) / static_cast<double>(decay_steps);
  return start + f * (end - start);
}

void AgentConfig::validate() const {
  net.validate();
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("config", "agent: gamma must lie in [0, 1]");
  if (!(lr > 0.0)) fail("config", "agent: lr must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) fail("config", "agent: tau must lie in (0, 1]");
  if (batch_size < 1) fail("config", "agent: batch_size must be positive");
  if (warmup < batch_size) fail("config", "agent: warmup must be at least batch_size");
  if (replay_capacity < static_cast<size_t>(warmup))
    fail("config", "agent: replay_capacity must be at least warmup");
  if (epsilon.start < epsilon.end) fail("config", "agent: epsilon must not grow");
  if (epsilon.decay_steps < 1) fail("config", "agent: epsilon decay_steps must be positive");
}

AgentConfig AgentConfig::from_json(const Json& j) {
  AgentConfig cfg;
  if (!j.contains("net")) fail("parse", "agent: 'net' section is required");
  cfg.net = NetConfig::from_json(j["net"]);
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.tau = j.value("tau", cfg.tau);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.warmup = j.value("warmup", cfg.warmup);
  cfg.replay_capacity = j.value("replay_capacity", cfg.replay_capacity);
  if (j.contains("epsilon")) {
    const Json& e = j["epsilon"];
    cfg.epsilon.start = e.value("start", cfg.epsilon.start);
    cfg.epsilon.end = e.value("end", cfg.epsilon.end);
    cfg.epsilon.decay_steps = e.value("decay_steps", cfg.epsilon.decay_steps);
  }
  cfg.adaptive = j.value("adaptive", cfg.adaptive);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

Json AgentConfig::to_json() const {
  return Json{{"net", net.to_json()},
              {"gamma", gamma},
              {"lr", lr},
              {"tau", tau},
              {"batch_size", batch_size},
              {"warmup", warmup},
              {"replay_capacity", replay_capacity},
              {"epsilon",
               Json{{"start", epsilon.start},
                    {"end", epsilon.end},
                    {"decay_steps", epsilon.decay_steps}}},
              {"adaptive", adaptive},
              {"seed", seed}};
}

std::vector<int> greedy_actions(const BranchingNet& net, const std::vector<double>& obs,
                                const std::vector<bool>& activated) {
  const NetConfig& cfg = net.config();
  if (static_cast<int>(activated.size()) != cfg.n_branches)
    fail("state", "activation mask does not match the branch count");
  BranchingNet::Output out = net.forward(obs);
  std::vector<int> actions(cfg.n_branches, 0);
  for (int k = 0; k < cfg.n_branches; ++k) {
    if (!activated[k]) continue;
    const double* q = out.q.data() + static_cast<size_t>(k) * cfg.n_actions;
    int best = 0;
    for (int a = 1; a < cfg.n_actions; ++a)
      if (q[a] > q[best]) best = a;
    actions[k] = best;
  }
  return actions;
}

namespace {

std::vector<double> widen(const std::vector<float>& x) {
  return std::vector<double>(x.begin(), x.end());
}

}  // namespace

std::vector<double> compute_targets(const BranchingNet& online, const BranchingNet& target,
                                    const std::vector<const Transition*>& batch, double gamma,
                                    bool adaptive) {
  const NetConfig& cfg = online.config();
  std::vector<double> ys;
  ys.reserve(batch.size());
  for (const Transition* t : batch) {
    if (t->done) {
      ys.push_back(t->reward);
      continue;
    }
    std::vector<double> next = widen(t->next_obs);
    BranchingNet::Output pick = online.forward(next);
    BranchingNet::Output eval = target.forward(next);
    double sum = 0.0;
    int n = 0;
    for (int k = 0; k < cfg.n_branches; ++k) {
      if (adaptive && !t->activated[k]) continue;
      const double* q = pick.q.data() + static_cast<size_t>(k) * cfg.n_actions;
      int best = 0;
      for (int a = 1; a < cfg.n_actions; ++a)
        if (q[a] > q[best]) best = a;
      sum += eval.q[static_cast<size_t>(k) * cfg.n_actions + best];
      ++n;
    }
    double bootstrap = n > 0 ? sum / n : 0.0;
    ys.push_back(t->reward + gamma * bootstrap);
  }
  return ys;
}

BranchingAgent::BranchingAgent(AgentConfig cfg)
    : cfg_(std::move(cfg)),
      online_(cfg_.net),
      target_(cfg_.net),
      replay_(cfg_.replay_capacity),
      act_rng_(mix_seed(cfg_.seed, 1)),
      sample_rng_(mix_seed(cfg_.seed, 2)) {
  cfg_.validate();
  Rng init(mix_seed(cfg_.seed, 0));
  online_.init_random(init);
  target_.params() = online_.params();  // start in lockstep
  adam_.lr = cfg_.lr;
}

std::vector<int> BranchingAgent::select_actions(const std::vector<double>& obs,
                                                const std::vector<bool>& activated,
                                                bool greedy) {
  std::vector<bool> mask = activated;
  if (!cfg_.adaptive) mask.assign(mask.size(), true);
  std::vector<int> actions = greedy_actions(online_, obs, mask);
  double eps = greedy ? 0.0 : epsilon();
  if (eps > 0.0) {
    // One coin per activated branch: a single slot can explore while the
    // rest keep exploiting, so the off-policy data stays near the policy.
    for (int k = 0; k < cfg_.net.n_branches; ++k)
      if (mask[k] && act_rng_.uniform() < eps)
        actions[k] = static_cast<int>(act_rng_.uniform_below(cfg_.net.n_actions));
  }
  return actions;
}

std::optional<double> BranchingAgent::learn_step() {
  if (replay_.size() < static_cast<size_t>(cfg_.warmup)) return std::nullopt;

  std::vector<size_t> picks = replay_.sample_indices(sample_rng_, cfg_.batch_size);
  std::vector<const Transition*> batch;
  batch.reserve(picks.size());
  for (size_t i : picks) batch.push_back(&replay_.at(i));

  std::vector<double> targets = compute_targets(online_, target_, batch, cfg_.gamma, cfg_.adaptive);

  std::vector<std::vector<double>> obs;
  std::vector<std::vector<int>> actions;
  std::vector<std::vector<bool>> mask;
  obs.reserve(batch.size());
  for (const Transition* t : batch) {
    obs.push_back(widen(t->obs));
    actions.emplace_back(t->actions.begin(), t->actions.end());
    if (cfg_.adaptive)
      mask.emplace_back(t->activated.begin(), t->activated.end());
    else
      mask.emplace_back(t->activated.size(), true);
  }

  std::vector<double> grad;
  double loss = online_.loss_and_gradients(obs, actions, mask, targets, grad);
  adam_step(adam_, online_.params(), grad);
  soft_update(target_.params(), online_.params(), cfg_.tau);
  ++learn_steps_;
  return loss;
}

void BranchingAgent::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot open '" + path + "' for writing");
  Json header{{"config", cfg_.to_json()},
              {"env_steps", env_steps_},
              {"learn_steps", learn_steps_}};
  out << header.dump() << '\n';
  online_.save(out);
  target_.save(out);
  adam_.save(out);
  if (!out) fail("io", "failed to write checkpoint '" + path + "'");
}

BranchingAgent BranchingAgent::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open checkpoint '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) fail("parse", "checkpoint '" + path + "': missing header");
  Json j;
  try {
    j = Json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail("parse", "checkpoint '" + path + "': " + e.what());
  }
  BranchingAgent agent(AgentConfig::from_json(j["config"]));
  agent.env_steps_ = j.value("env_steps", 0);
  agent.learn_steps_ = j.value("learn_steps", 0);
  agent.online_ = BranchingNet::load(in);
  agent.target_ = BranchingNet::load(in);
  agent.adam_ = AdamState::load(in);
  if (agent.online_.config() != agent.cfg_.net || agent.target_.config() != agent.cfg_.net)
    fail("parse", "checkpoint '" + path + "': network shape disagrees with its config");
  return agent;
}

std::vector<double> region_observation(const Region& region, const Simulator& sim) {
  std::vector<double> center = sim.observe(region.center);
  size_t dim = center.size();
  std::vector<double> obs;
  obs.reserve(5 * dim);
  obs.insert(obs.end(), center.begin(), center.end());
  for (int slot = 1; slot < 5; ++slot) {
    if (!region.mask[slot]) {
      obs.insert(obs.end(), dim, 0.0);
      continue;
    }
    std::vector<double> part = sim.observe(region.slots[slot]);
    if (part.size() != dim)
      fail("state", "intersection '" + region.slots[slot] +
                        "' observes a different dimension than '" + region.center +
                        "'; one shared network cannot serve both");
    obs.insert(obs.end(), part.begin(), part.end());
  }
  return obs;
}

double region_reward(const Region& region, const std::vector<double>& rewards,
                     const RoadNetwork& net) {
  if (rewards.size() != net.size()) fail("state", "reward vector does not match the network");
  double sum = 0.0;
  for (int slot = 0; slot < 5; ++slot) {
    if (!region.mask[slot]) continue;
    sum += rewards[net.index(region.slots[slot])];
  }
  return sum;
}

}  // namespace starlight
