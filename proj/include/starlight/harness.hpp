#pragma once

#include <functional>
#include <string>
#include <vector>

#include "starlight/agent.hpp"

namespace starlight {

/// A fully resolved experiment: network, regions, demand, simulator and
/// learner settings. Derived quantities (observation size, branch count,
/// region centers) are filled in at load time so the echoed config is
/// self-contained.
struct Experiment {
  Json network_desc;  // how the network was specified (file / grid / cross)
  RoadNetwork net;
  std::vector<std::string> centers;
  RegionConfiguration regions;
  FlowSpec flow;
  SimConfig sim;
  AgentConfig agent;
  int episodes = 100;
  int eval_episodes = 10;    // greedy evaluation episodes after training
  int checkpoint_every = 0;  // 0: only the final checkpoint
  std::uint64_t seed = 0;

  /// Seed stream for post-training evaluation, disjoint from the training
  /// episode seeds by construction.
  std::uint64_t eval_seed() const { return mix_seed(seed, 999983); }

  /// `base_dir` anchors relative file references inside the config.
  static Experiment from_json(const Json& j, const std::string& base_dir);
  Json resolved_json() const;
};

Experiment load_experiment(const std::string& path);

/// Chooses one phase per intersection (aligned with net.ids()) for the next
/// interval.
using PhasePicker = std::function<std::vector<Phase>(const Simulator&, int interval)>;

/// Synchronized cycle: every intersection holds phase (interval mod 4).
PhasePicker fixed_time_picker();
/// Independent uniform phase per intersection per interval.
PhasePicker random_picker(Rng& rng);
/// Per-intersection argmax of Simulator::pressure, first max on ties.
PhasePicker max_pressure_picker();
/// Greedy per-region actions from one shared learner; each region's branch k
/// controls its slot-k intersection.
PhasePicker agent_picker(BranchingAgent& agent, const RegionConfiguration& regions);

struct EpisodeOutcome {
  Metrics metrics;
  double episode_reward = 0.0;  // (1/|nodes|) * sum over intervals and intersections
};

/// Runs one full episode on a freshly reset simulator.
EpisodeOutcome run_episode(Simulator& sim, const RegionConfiguration& regions,
                           const PhasePicker& pick);

/// Trains in place. Episode e replays flow seed mix(seed, e). Writes
/// config.json, regions.json, metrics.jsonl (deterministic), timings.jsonl
/// (wall clock, intentionally separate) and checkpoints under `out_dir`.
/// Returns the metrics lines in order; `on_episode` sees each line as it is
/// written.
std::vector<Json> train(const Experiment& exp, BranchingAgent& agent, const std::string& out_dir,
                        const std::function<void(const Json&)>& on_episode = {});

/// Fixed-policy evaluation over `episodes` episodes seeded mix(seed0, e);
/// returns per-episode metrics plus their means.
Json evaluate(const Experiment& exp, const PhasePicker& pick, int episodes, std::uint64_t seed0);

}  // namespace starlight
