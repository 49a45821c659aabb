#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "starlight/neural.hpp"
#include "starlight/partition.hpp"
#include "starlight/sim.hpp"

namespace starlight {

/// One region-level experience. Observations are stored as float32: they are
/// lane counts and one-hot bits, all exactly representable.
struct Transition {
  std::vector<float> obs;
  std::vector<std::uint8_t> actions;    // per branch
  std::vector<std::uint8_t> activated;  // per branch; idle branches learn nothing
  float reward = 0.0f;
  std::vector<float> next_obs;
  std::uint8_t done = 0;
};

/// Fixed-capacity ring; sampling is uniform without replacement.
class ReplayBuffer {
public:
  explicit ReplayBuffer(size_t capacity);

  void push(Transition t);
  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }
  const Transition& at(size_t idx) const { return data_[idx]; }

  std::vector<size_t> sample_indices(Rng& rng, size_t n) const;

private:
  size_t capacity_;
  size_t next_ = 0;
  std::vector<Transition> data_;
};

/// Linear decay from `start` to `end` over `decay_steps`, then flat.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.001;
  std::int64_t decay_steps = 20000;

  double value(std::int64_t step) const;
};

struct AgentConfig {
  NetConfig net;
  double gamma = 0.9;
  double lr = 1e-4;
  double tau = 0.001;      // target-network tracking rate
  int batch_size = 32;
  int warmup = 1000;       // transitions required before learning starts
  size_t replay_capacity = 200000;
  EpsilonSchedule epsilon;
  bool adaptive = true;    // false: every branch is treated as activated
  std::uint64_t seed = 0;

  void validate() const;
  static AgentConfig from_json(const Json& j);
  Json to_json() const;
};

/// Per-branch greedy actions: argmax over the four phases, first max wins.
/// Idle branches get action 0 (their output is ignored downstream anyway).
std::vector<int> greedy_actions(const BranchingNet& net, const std::vector<double>& obs,
                                const std::vector<bool>& activated);

/// Double-estimation targets: the online net picks each branch's best next
/// action, the target net evaluates it, and the per-sample bootstrap is the
/// mean of those values over activated branches (all branches when
/// `adaptive` is false). y = r + gamma * bootstrap, or just r when done.
std::vector<double> compute_targets(const BranchingNet& online, const BranchingNet& target,
                                    const std::vector<const Transition*>& batch, double gamma,
                                    bool adaptive);

/// Q-learner with one branch per region slot. A single instance is shared by
/// every region: all regions feed the same replay buffer and the same
/// parameters (centralized learning), while actions are computed per region
/// from its own observation (decentralized execution).
class BranchingAgent {
public:
  explicit BranchingAgent(AgentConfig cfg);

  /// One epsilon coin per activated branch: an exploring branch draws its
  /// action uniformly, the rest keep the greedy_actions choice. Idle
  /// branches always emit 0.
  std::vector<int> select_actions(const std::vector<double>& obs,
                                  const std::vector<bool>& activated, bool greedy);

  void store(Transition t) { replay_.push(std::move(t)); }

  /// One sampled gradient step plus a soft target update, once the buffer
  /// holds `warmup` transitions. Returns the batch loss, or nothing while
  /// still warming up.
  std::optional<double> learn_step();

  /// Environment steps drive the epsilon decay; call once per env step,
  /// however many regions were acted on.
  void advance_step() { ++env_steps_; }

  double epsilon() const { return cfg_.epsilon.value(env_steps_); }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t learn_steps() const { return learn_steps_; }
  const ReplayBuffer& replay() const { return replay_; }
  const BranchingNet& online() const { return online_; }
  const BranchingNet& target() const { return target_; }
  const AgentConfig& config() const { return cfg_; }

  void save(const std::string& path) const;
  static BranchingAgent load(const std::string& path);

private:
  AgentConfig cfg_;
  BranchingNet online_;
  BranchingNet target_;
  AdamState adam_;
  ReplayBuffer replay_;
  Rng act_rng_{0};
  Rng sample_rng_{0};
  std::int64_t env_steps_ = 0;
  std::int64_t learn_steps_ = 0;
};

/// Region observation: the five slot observations (center, N, E, S, W)
/// concatenated; fictitious slots contribute zero blocks. Every real
/// intersection must observe the same dimension, or sharing is impossible.
std::vector<double> region_observation(const Region& region, const Simulator& sim);

/// Sum of the member intersections' rewards (fictitious slots contribute 0).
/// `rewards` is aligned with net.ids(), as returned by Simulator::step.
double region_reward(const Region& region, const std::vector<double>& rewards,
                     const RoadNetwork& net);

}  // namespace starlight
