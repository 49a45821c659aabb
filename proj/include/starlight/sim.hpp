#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "starlight/json_io.hpp"
#include "starlight/net.hpp"
#include "starlight/rng.hpp"

namespace starlight {

struct SimConfig {
  int tick_s = 1;                // internal tick
  int dt_s = 10;                 // action interval: phases are held this long
  int episode_s = 4000;
  int saturation_per_tick = 1;   // discharge rate, vehicles per tick per lane
  double speed_mps = 11.0;       // free-flow speed
  double spacing_m = 7.0;        // queued-vehicle spacing; capacity = floor(length/spacing)
  std::uint64_t seed = 0;

  void validate() const;
  static SimConfig from_json(const Json& j);
  Json to_json() const;
};

/// Synthetic arrival process: per action interval, a network-wide vehicle
/// count is drawn from round(max(0, Normal(mean*dt, std*sqrt(dt)))), then each
/// vehicle picks an entry arm (weighted) and a uniform tick in the interval.
struct GeneratorSpec {
  double mean = 0.0;  // vehicles per second, network total
  double std = 0.0;   // per-second standard deviation of the arrival rate
  std::map<std::string, double> arm_weights;           // empty = uniform over entry arms
  std::array<double, 3> turn_ratios = {0.1, 0.6, 0.3};  // left, straight, right
  std::map<std::string, std::array<double, 3>> turn_ratio_overrides;  // per intersection
};

struct ExplicitVehicle {
  int depart_s = 0;
  std::string origin;  // entry arm id
};

/// Either an explicit vehicle list or a generator; exactly one is active.
struct FlowSpec {
  std::vector<ExplicitVehicle> vehicles;
  std::optional<GeneratorSpec> generator;

  // Routing for explicit lists; generator mode carries its own copies.
  std::array<double, 3> turn_ratios = {0.1, 0.6, 0.3};
  std::map<std::string, std::array<double, 3>> turn_ratio_overrides;

  void validate() const;
  static FlowSpec from_json(const Json& j);
  Json to_json() const;
};

FlowSpec load_flow(const std::string& path);

struct Metrics {
  std::optional<double> att;  // mean travel time of completed vehicles, seconds
  double aql = 0.0;           // time-averaged mean queue length per lane
  std::int64_t tp = 0;        // completed vehicles
  std::int64_t in_network = 0;
  std::int64_t deferred = 0;  // waiting at a full boundary arm
};

/// Queue-based microsimulator: vehicles traverse links at free-flow speed,
/// then stack in per-lane vertical queues; permitted head-of-line vehicles
/// discharge at the saturation rate when the downstream lane has space.
/// Everything is deterministic given (network, flow, config, seed, phases).
class Simulator {
public:
  struct Vehicle {
    std::string vid;
    int depart_tick = 0;
    int origin_arm = -1;  // index into net.entries()
    Rng rng{0};           // personal turn-decision stream

    enum class Loc { Scheduled, Deferred, Link, Queue, Done };
    Loc loc = Loc::Scheduled;
    int approach = -1;
    int lane = -1;
    int link_enter_tick = -1;
    Turn pending_turn = Turn::Straight;  // decided on link entry, consumed at discharge
    std::optional<Turn> next_turn;       // cached across blocked discharge attempts
    int arrival_tick = -1;

    struct LinkStamp {
      int approach = -1;
      int enter_tick = -1;
      int queue_tick = -1;
      int exit_tick = -1;
    };
    std::vector<LinkStamp> route;
  };

  struct LaneState {
    std::deque<int> queue;     // vehicle indices; front = head of line
    std::deque<int> inflight;  // front = earliest entrant
    int capacity = 0;
  };

  Simulator(const RoadNetwork& net, FlowSpec flow, SimConfig cfg);

  /// Clears all state and (re)samples the arrival schedule from `seed`.
  void reset(std::uint64_t seed);
  void reset() { reset(cfg_.seed); }

  /// Holds the given phases for one action interval (dt_s) and returns
  /// per-intersection rewards, aligned with net.ids(), measured at the end of
  /// the interval.
  std::vector<double> step(const std::vector<Phase>& phases);
  std::vector<double> step(const std::map<std::string, Phase>& phases);

  /// [wait per entering lane, wave per entering lane, one-hot(4) phase].
  std::vector<double> observe(const std::string& u) const;
  int observation_dim(const std::string& u) const;

  /// Negative total queued count over the entering lanes.
  double intersection_reward(const std::string& u) const;

  /// Sum over movements permitted by `p` of (movement queue - mean per-lane
  /// queue of the downstream approach); downstream term 0 for exit arms.
  double pressure(const std::string& u, Phase p) const;

  Metrics metrics() const;

  const RoadNetwork& net() const { return *net_; }
  const SimConfig& config() const { return cfg_; }
  int clock_s() const { return clock_ticks_ * cfg_.tick_s; }
  int interval_index() const { return clock_ticks_ / dt_ticks_; }
  bool done() const { return clock_ticks_ >= episode_ticks_; }
  Phase phase(const std::string& u) const { return phase_[net_->index(u)]; }

  int wait_count(int approach, int lane) const { return static_cast<int>(lane_at(approach, lane).queue.size()); }
  int wave_count(int approach, int lane) const {
    const LaneState& l = lane_at(approach, lane);
    return static_cast<int>(l.queue.size() + l.inflight.size());
  }
  int lane_capacity(int approach) const { return lanes_[lane_offset_[approach]].capacity; }

  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  std::int64_t vehicles_due() const { return due_; }
  std::int64_t completed() const { return completed_; }
  std::int64_t in_network() const { return in_network_; }
  std::int64_t deferred_count() const { return deferred_total_; }

private:
  const LaneState& lane_at(int approach, int lane) const { return lanes_[lane_offset_[approach] + lane]; }
  LaneState& lane_at(int approach, int lane) { return lanes_[lane_offset_[approach] + lane]; }

  void build_static_tables();
  void sample_schedule(std::uint64_t seed);
  void process_tick();
  void inject_arrivals();
  void finish_traversals();
  void discharge();
  void check_conservation() const;

  const std::array<double, 3>& ratios_at(int node) const;
  Turn draw_turn(Vehicle& v, int node, Side incoming);
  void enter_link(int vid, int approach, int lane);

  const RoadNetwork* net_;
  FlowSpec flow_;
  SimConfig cfg_;
  int dt_ticks_ = 0;
  int episode_ticks_ = 0;

  // static geometry
  std::vector<int> lane_offset_;    // per approach, into lanes_
  std::vector<int> traversal_ticks_;
  std::vector<int> app_to_node_;    // index of `to`, or -1 for exit arms
  std::vector<Side> app_in_side_;   // side at `to` (valid when app_to_node_ >= 0)
  std::vector<std::array<double, 3>> node_ratios_;
  int n_lanes_total_ = 0;
  int n_entering_lanes_ = 0;        // across all intersections, for AQL

  // episode state
  std::vector<LaneState> lanes_;
  std::vector<Phase> phase_;
  std::vector<Vehicle> vehicles_;   // schedule order
  size_t schedule_pos_ = 0;
  std::vector<std::deque<int>> arm_deferred_;  // per entry arm
  int clock_ticks_ = 0;
  std::int64_t due_ = 0;
  std::int64_t in_network_ = 0;
  std::int64_t completed_ = 0;
  std::int64_t deferred_total_ = 0;
  double travel_sum_s_ = 0.0;
  double queue_tick_sum_ = 0.0;     // sum over ticks of total queued count
};

}  // namespace starlight
