#include "starlight/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace starlight {

void SimConfig::validate() const {
  if (tick_s < 1) fail("config", "tick_s must be >= 1");
  if (dt_s < tick_s || dt_s % tick_s != 0)
    fail("config", "dt_s must be a positive multiple of tick_s");
  if (episode_s < dt_s || episode_s % dt_s != 0)
    fail("config", "episode_s must be a positive multiple of dt_s");
  if (saturation_per_tick < 1) fail("config", "saturation_per_tick must be >= 1");
  if (!(speed_mps > 0.0)) fail("config", "speed_mps must be positive");
  if (!(spacing_m > 0.0)) fail("config", "spacing_m must be positive");
}

SimConfig SimConfig::from_json(const Json& j) {
  SimConfig cfg;
  cfg.tick_s = j.value("tick_s", cfg.tick_s);
  cfg.dt_s = j.value("dt_s", cfg.dt_s);
  cfg.episode_s = j.value("episode_s", cfg.episode_s);
  cfg.saturation_per_tick = j.value("saturation_per_tick", cfg.saturation_per_tick);
  cfg.speed_mps = j.value("speed_mps", cfg.speed_mps);
  cfg.spacing_m = j.value("spacing_m", cfg.spacing_m);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

Json SimConfig::to_json() const {
  return Json{{"tick_s", tick_s},
              {"dt_s", dt_s},
              {"episode_s", episode_s},
              {"saturation_per_tick", saturation_per_tick},
              {"speed_mps", speed_mps},
              {"spacing_m", spacing_m},
              {"seed", seed}};
}

namespace {

void validate_ratios(const std::array<double, 3>& r, const std::string& ctx) {
  double sum = r[0] + r[1] + r[2];
  for (double x : r)
    if (x < 0.0) fail("validate", ctx + ": turn ratios must be non-negative");
  if (std::abs(sum - 1.0) > 1e-6) fail("validate", ctx + ": turn ratios must sum to 1");
}

std::array<double, 3> ratios_from_json(const Json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3)
    fail("parse", ctx + ": turn ratios must be [left, straight, right]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void FlowSpec::validate() const {
  if (generator && !vehicles.empty())
    fail("validate", "flow: give either an explicit vehicle list or a generator, not both");
  if (generator) {
    if (generator->mean < 0.0 || generator->std < 0.0)
      fail("validate", "flow generator: mean and std must be non-negative");
    validate_ratios(generator->turn_ratios, "flow generator");
    for (const auto& [id, r] : generator->turn_ratio_overrides)
      validate_ratios(r, "flow generator, intersection '" + id + "'");
    for (const auto& [id, w] : generator->arm_weights)
      if (w < 0.0) fail("validate", "flow generator: negative weight for arm '" + id + "'");
  } else {
    validate_ratios(turn_ratios, "flow");
    for (const auto& [id, r] : turn_ratio_overrides)
      validate_ratios(r, "flow, intersection '" + id + "'");
  }
  for (const ExplicitVehicle& v : vehicles)
    if (v.depart_s < 0) fail("validate", "flow: negative depart time");
}

FlowSpec FlowSpec::from_json(const Json& j) {
  FlowSpec flow;
  bool has_vehicles = j.contains("vehicles");
  bool has_generator = j.contains("generator");
  if (has_vehicles == has_generator)
    fail("parse", "flow: exactly one of 'vehicles' or 'generator' is required");

  auto read_ratio_table = [](const Json& t, std::array<double, 3>& base,
                             std::map<std::string, std::array<double, 3>>& overrides) {
    if (t.is_array()) {
      base = ratios_from_json(t, "flow");
    } else if (t.is_object()) {
      for (auto it = t.begin(); it != t.end(); ++it) {
        if (it.key() == "default")
          base = ratios_from_json(it.value(), "flow");
        else
          overrides[it.key()] = ratios_from_json(it.value(), "flow");
      }
    } else {
      fail("parse", "flow: 'turn_ratios' must be an array or an object");
    }
  };

  if (has_generator) {
    const Json& g = j["generator"];
    GeneratorSpec gen;
    if (!g.contains("mean") || !g.contains("std"))
      fail("parse", "flow generator: 'mean' and 'std' are required");
    gen.mean = g["mean"].get<double>();
    gen.std = g["std"].get<double>();
    if (g.contains("rates"))
      for (auto it = g["rates"].begin(); it != g["rates"].end(); ++it)
        gen.arm_weights[it.key()] = it.value().get<double>();
    if (g.contains("turn_ratios"))
      read_ratio_table(g["turn_ratios"], gen.turn_ratios, gen.turn_ratio_overrides);
    flow.generator = std::move(gen);
  } else {
    for (size_t i = 0; i < j["vehicles"].size(); ++i) {
      const Json& vj = j["vehicles"][i];
      std::string ctx = "flow: vehicles[" + std::to_string(i) + "]";
      if (!vj.contains("depart") || !vj.contains("origin"))
        fail("parse", ctx + ": 'depart' and 'origin' are required");
      flow.vehicles.push_back({vj["depart"].get<int>(), vj["origin"].get<std::string>()});
    }
    // Explicit lists still route by random turns; ratios are configurable.
    if (j.contains("turn_ratios"))
      read_ratio_table(j["turn_ratios"], flow.turn_ratios, flow.turn_ratio_overrides);
  }
  flow.validate();
  return flow;
}

Json FlowSpec::to_json() const {
  Json j;
  if (generator) {
    Json g{{"mean", generator->mean}, {"std", generator->std}};
    if (!generator->arm_weights.empty()) {
      Json rates;
      for (const auto& [id, w] : generator->arm_weights) rates[id] = w;
      g["rates"] = rates;
    }
    Json ratios = Json::array({generator->turn_ratios[0], generator->turn_ratios[1],
                               generator->turn_ratios[2]});
    if (generator->turn_ratio_overrides.empty()) {
      g["turn_ratios"] = ratios;
    } else {
      Json table{{"default", ratios}};
      for (const auto& [id, r] : generator->turn_ratio_overrides)
        table[id] = Json::array({r[0], r[1], r[2]});
      g["turn_ratios"] = table;
    }
    j["generator"] = g;
  } else {
    Json list = Json::array();
    for (const ExplicitVehicle& v : vehicles)
      list.push_back({{"depart", v.depart_s}, {"origin", v.origin}});
    j["vehicles"] = list;
    Json ratios = Json::array({turn_ratios[0], turn_ratios[1], turn_ratios[2]});
    if (turn_ratio_overrides.empty()) {
      j["turn_ratios"] = ratios;
    } else {
      Json tbl{{"default", ratios}};
      for (const auto& [id, r] : turn_ratio_overrides) tbl[id] = Json::array({r[0], r[1], r[2]});
      j["turn_ratios"] = tbl;
    }
  }
  return j;
}

FlowSpec load_flow(const std::string& path) { return FlowSpec::from_json(read_json_file(path)); }

Simulator::Simulator(const RoadNetwork& net, FlowSpec flow, SimConfig cfg)
    : net_(&net), flow_(std::move(flow)), cfg_(cfg) {
  cfg_.validate();
  flow_.validate();
  build_static_tables();
  reset(cfg_.seed);
}

void Simulator::build_static_tables() {
  dt_ticks_ = cfg_.dt_s / cfg_.tick_s;
  episode_ticks_ = cfg_.episode_s / cfg_.tick_s;

  const auto& apps = net_->approaches();
  lane_offset_.resize(apps.size());
  traversal_ticks_.resize(apps.size());
  app_to_node_.assign(apps.size(), -1);
  app_in_side_.assign(apps.size(), Side::N);
  int total_lanes = 0;
  for (size_t a = 0; a < apps.size(); ++a) {
    lane_offset_[a] = total_lanes;
    total_lanes += apps[a].lanes;
    traversal_ticks_[a] =
        std::max(1, static_cast<int>(std::ceil(apps[a].length_m / (cfg_.speed_mps * cfg_.tick_s))));
    if (net_->has(apps[a].to)) {
      int to = net_->index(apps[a].to);
      app_to_node_[a] = to;
      for (Side s : all_sides)
        if (net_->incoming_approach(to, s) == static_cast<int>(a)) app_in_side_[a] = s;
    }
  }
  n_lanes_total_ = total_lanes;

  const auto& table =
      flow_.generator ? flow_.generator->turn_ratio_overrides : flow_.turn_ratio_overrides;
  std::array<double, 3> base = flow_.generator ? flow_.generator->turn_ratios : flow_.turn_ratios;
  node_ratios_.assign(net_->size(), base);
  for (const auto& [id, r] : table) node_ratios_[net_->index(id)] = r;
  if (flow_.generator)
    for (const auto& [id, w] : flow_.generator->arm_weights)
      if (!net_->is_entry_endpoint(id))
        fail("validate", "flow generator: '" + id + "' is not an entry arm of this network");

  n_entering_lanes_ = 0;
  for (size_t v = 0; v < net_->size(); ++v)
    n_entering_lanes_ += static_cast<int>(net_->entering_lanes(static_cast<int>(v)).size());
}

void Simulator::reset(std::uint64_t seed) {
  lanes_.assign(n_lanes_total_, LaneState{});
  const auto& apps = net_->approaches();
  for (size_t a = 0; a < apps.size(); ++a) {
    int cap = std::max(1, static_cast<int>(apps[a].length_m / cfg_.spacing_m));
    for (int l = 0; l < apps[a].lanes; ++l) lane_at(static_cast<int>(a), l).capacity = cap;
  }
  phase_.assign(net_->size(), Phase::NS);
  arm_deferred_.assign(net_->entries().size(), {});
  schedule_pos_ = 0;
  clock_ticks_ = 0;
  due_ = in_network_ = completed_ = deferred_total_ = 0;
  travel_sum_s_ = 0.0;
  queue_tick_sum_ = 0.0;
  sample_schedule(seed);
}

void Simulator::sample_schedule(std::uint64_t seed) {
  vehicles_.clear();
  struct Slot {
    int tick;
    int arm;
  };
  std::vector<Slot> slots;

  if (flow_.generator) {
    Rng rng(mix_seed(seed, 0));
    const GeneratorSpec& gen = *flow_.generator;
    const auto& entries = net_->entries();
    if (entries.empty() && gen.mean > 0.0)
      fail("validate", "flow generator needs a network with entry arms");

    std::vector<double> weights(entries.size(), 1.0);
    if (!gen.arm_weights.empty())
      for (size_t a = 0; a < entries.size(); ++a) {
        auto it = gen.arm_weights.find(entries[a].id);
        weights[a] = it == gen.arm_weights.end() ? 0.0 : it->second;
      }
    double total_w = 0.0;
    for (double w : weights) total_w += w;
    if (!entries.empty() && !(total_w > 0.0))
      fail("validate", "flow generator: arm weights sum to zero");

    int windows = episode_ticks_ / dt_ticks_;
    for (int w = 0; w < windows; ++w) {
      double raw = rng.normal(gen.mean * cfg_.dt_s, gen.std * std::sqrt(static_cast<double>(cfg_.dt_s)));
      long count = std::lround(std::max(0.0, raw));
      for (long i = 0; i < count; ++i) {
        double pick = rng.uniform() * total_w;
        int arm = 0;
        double cum = 0.0;
        for (size_t a = 0; a < weights.size(); ++a) {
          cum += weights[a];
          if (pick < cum) {
            arm = static_cast<int>(a);
            break;
          }
        }
        int offset = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(dt_ticks_)));
        slots.push_back({w * dt_ticks_ + offset, arm});
      }
    }
  } else {
    for (const ExplicitVehicle& v : flow_.vehicles) {
      if (v.depart_s % cfg_.tick_s != 0)
        fail("config", "flow: depart time " + std::to_string(v.depart_s) +
                           " is not a multiple of tick_s");
      if (!net_->is_entry_endpoint(v.origin))
        fail("validate", "flow: '" + v.origin + "' is not an entry arm of this network");
      int arm = -1;
      const auto& entries = net_->entries();
      for (size_t a = 0; a < entries.size(); ++a)
        if (entries[a].id == v.origin) arm = static_cast<int>(a);
      slots.push_back({v.depart_s / cfg_.tick_s, arm});
    }
  }

  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.tick < b.tick; });

  vehicles_.resize(slots.size());
  char vid[16];
  for (size_t i = 0; i < slots.size(); ++i) {
    std::snprintf(vid, sizeof vid, "v%06zu", i);
    Vehicle& v = vehicles_[i];
    v.vid = vid;
    v.depart_tick = slots[i].tick;
    v.origin_arm = slots[i].arm;
    v.rng = Rng(mix_seed(seed, hash_str(v.vid)));
  }
}

const std::array<double, 3>& Simulator::ratios_at(int node) const { return node_ratios_[node]; }

Turn Simulator::draw_turn(Vehicle& v, int node, Side incoming) {
  const auto& ratios = ratios_at(node);
  std::array<Turn, 3> options;
  std::array<double, 3> weight;
  int n = 0;
  double total = 0.0;
  for (Turn t : all_turns) {
    if (net_->outgoing_approach(node, exit_side(incoming, t)) < 0) continue;
    options[n] = t;
    weight[n] = ratios[static_cast<int>(t)];
    total += weight[n];
    ++n;
  }
  if (n == 0 || !(total > 0.0))
    fail("state", "no available turn at '" + net_->id(node) + "' from side " +
                      side_name(incoming));
  double pick = v.rng.uniform() * total;
  double cum = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += weight[i];
    if (pick < cum) return options[i];
  }
  return options[n - 1];
}

void Simulator::enter_link(int vid, int approach, int lane) {
  Vehicle& v = vehicles_[vid];
  v.loc = Vehicle::Loc::Link;
  v.approach = approach;
  v.lane = lane;
  v.link_enter_tick = clock_ticks_;
  v.route.push_back({approach, clock_ticks_, -1, -1});
  lane_at(approach, lane).inflight.push_back(vid);
}

void Simulator::inject_arrivals() {
  // Newly due vehicles enter their arm's feeder queue; the queue drains FIFO
  // while its head fits into the entry lane (the head blocks those behind it).
  while (schedule_pos_ < vehicles_.size() &&
         vehicles_[schedule_pos_].depart_tick <= clock_ticks_) {
    Vehicle& v = vehicles_[schedule_pos_];
    const BoundaryArm& arm = net_->entries()[v.origin_arm];
    v.pending_turn = draw_turn(v, net_->index(arm.at), arm.side);
    v.loc = Vehicle::Loc::Deferred;
    arm_deferred_[v.origin_arm].push_back(static_cast<int>(schedule_pos_));
    ++due_;
    ++deferred_total_;
    ++schedule_pos_;
  }

  for (size_t arm = 0; arm < arm_deferred_.size(); ++arm) {
    auto& q = arm_deferred_[arm];
    int app = net_->entry_approach(static_cast<int>(arm));
    while (!q.empty()) {
      Vehicle& v = vehicles_[q.front()];
      int lane = lane_for_turn(v.pending_turn, net_->approach(app).lanes);
      const LaneState& ls = lane_at(app, lane);
      if (static_cast<int>(ls.queue.size() + ls.inflight.size()) >= ls.capacity) break;
      enter_link(q.front(), app, lane);
      q.pop_front();
      --deferred_total_;
      ++in_network_;
    }
  }
}

void Simulator::finish_traversals() {
  for (size_t a = 0; a < net_->approaches().size(); ++a)
    for (int l = 0; l < net_->approach(static_cast<int>(a)).lanes; ++l) {
      LaneState& ls = lane_at(static_cast<int>(a), l);
      while (!ls.inflight.empty()) {
        Vehicle& v = vehicles_[ls.inflight.front()];
        if (clock_ticks_ - v.link_enter_tick < traversal_ticks_[a]) break;
        v.loc = Vehicle::Loc::Queue;
        v.route.back().queue_tick = clock_ticks_;
        ls.queue.push_back(ls.inflight.front());
        ls.inflight.pop_front();
      }
    }
}

void Simulator::discharge() {
  for (size_t node = 0; node < net_->size(); ++node) {
    Phase p = phase_[node];
    for (Side side : all_sides) {
      int app = net_->incoming_approach(static_cast<int>(node), side);
      if (app < 0) continue;
      for (int l = 0; l < net_->approach(app).lanes; ++l) {
        LaneState& ls = lane_at(app, l);
        for (int budget = cfg_.saturation_per_tick; budget > 0 && !ls.queue.empty(); --budget) {
          Vehicle& v = vehicles_[ls.queue.front()];
          if (!phase_permits(p, side, v.pending_turn)) break;  // head-of-line blocking
          int out = net_->outgoing_approach(static_cast<int>(node), exit_side(side, v.pending_turn));
          if (out < 0)
            fail("state", "vehicle " + v.vid + " drew a turn with no outgoing approach");

          if (app_to_node_[out] < 0) {  // exit arm: complete the trip
            v.loc = Vehicle::Loc::Done;
            v.arrival_tick = clock_ticks_;
            v.route.back().exit_tick = clock_ticks_;
            travel_sum_s_ += static_cast<double>(clock_ticks_ - v.depart_tick) * cfg_.tick_s;
            ++completed_;
            --in_network_;
            ls.queue.pop_front();
            continue;
          }

          if (!v.next_turn)  // decide the lane on the next link exactly once
            v.next_turn = draw_turn(v, app_to_node_[out], app_in_side_[out]);
          int out_lane = lane_for_turn(*v.next_turn, net_->approach(out).lanes);
          const LaneState& dls = lane_at(out, out_lane);
          if (static_cast<int>(dls.queue.size() + dls.inflight.size()) >= dls.capacity)
            break;  // downstream full: the head stays and blocks the lane

          int vid = ls.queue.front();
          ls.queue.pop_front();
          v.route.back().exit_tick = clock_ticks_;
          v.pending_turn = *v.next_turn;
          v.next_turn.reset();
          enter_link(vid, out, out_lane);
        }
      }
    }
  }
}

void Simulator::check_conservation() const {
  if (due_ != in_network_ + completed_ + deferred_total_)
    fail("state", "vehicle conservation broken at t=" + std::to_string(clock_s()) + ": due " +
                      std::to_string(due_) + " != in-network " + std::to_string(in_network_) +
                      " + completed " + std::to_string(completed_) + " + deferred " +
                      std::to_string(deferred_total_));
}

void Simulator::process_tick() {
  inject_arrivals();
  finish_traversals();
  discharge();
  ++clock_ticks_;
  std::int64_t queued = 0;
  for (const LaneState& ls : lanes_) queued += static_cast<std::int64_t>(ls.queue.size());
  queue_tick_sum_ += static_cast<double>(queued);
  check_conservation();
}

std::vector<double> Simulator::step(const std::vector<Phase>& phases) {
  if (phases.size() != net_->size())
    fail("validate", "phase vector must cover every intersection");
  phase_ = phases;
  for (int k = 0; k < dt_ticks_; ++k) process_tick();

  std::vector<double> rewards(net_->size());
  for (size_t v = 0; v < net_->size(); ++v)
    rewards[v] = intersection_reward(net_->id(static_cast<int>(v)));
  return rewards;
}

std::vector<double> Simulator::step(const std::map<std::string, Phase>& phases) {
  std::vector<Phase> vec(net_->size());
  for (size_t v = 0; v < net_->size(); ++v) {
    auto it = phases.find(net_->id(static_cast<int>(v)));
    if (it == phases.end())
      fail("validate", "phase map is missing intersection '" + net_->id(static_cast<int>(v)) + "'");
    vec[v] = it->second;
  }
  if (phases.size() != net_->size()) fail("validate", "phase map names an unknown intersection");
  return step(vec);
}

std::vector<double> Simulator::observe(const std::string& u) const {
  int idx = net_->index(u);
  const auto& lanes = net_->entering_lanes(idx);
  std::vector<double> obs;
  obs.reserve(2 * lanes.size() + 4);
  for (const auto& lr : lanes) obs.push_back(static_cast<double>(wait_count(lr.approach, lr.lane)));
  for (const auto& lr : lanes) obs.push_back(static_cast<double>(wave_count(lr.approach, lr.lane)));
  for (Phase p : all_phases) obs.push_back(p == phase_[idx] ? 1.0 : 0.0);
  return obs;
}

int Simulator::observation_dim(const std::string& u) const {
  return 2 * static_cast<int>(net_->entering_lanes(net_->index(u)).size()) + 4;
}

double Simulator::intersection_reward(const std::string& u) const {
  int idx = net_->index(u);
  double total = 0.0;
  for (const auto& lr : net_->entering_lanes(idx)) total += wait_count(lr.approach, lr.lane);
  return -total;
}

double Simulator::pressure(const std::string& u, Phase p) const {
  int idx = net_->index(u);
  double total = 0.0;
  for (Side side : all_sides) {
    int app = net_->incoming_approach(idx, side);
    if (app < 0) continue;
    for (Turn t : all_turns) {
      if (!phase_permits(p, side, t)) continue;
      int out = net_->outgoing_approach(idx, exit_side(side, t));
      if (out < 0) continue;  // movement does not exist here

      int lane = lane_for_turn(t, net_->approach(app).lanes);
      int upstream = 0;
      for (int vid : lane_at(app, lane).queue)
        if (vehicles_[vid].pending_turn == t) ++upstream;

      double downstream = 0.0;
      if (app_to_node_[out] >= 0) {
        int q = 0;
        for (int l = 0; l < net_->approach(out).lanes; ++l)
          q += static_cast<int>(lane_at(out, l).queue.size());
        downstream = static_cast<double>(q) / net_->approach(out).lanes;
      }
      total += upstream - downstream;
    }
  }
  return total;
}

Metrics Simulator::metrics() const {
  Metrics m;
  if (completed_ > 0) m.att = travel_sum_s_ / static_cast<double>(completed_);
  if (clock_ticks_ > 0 && n_entering_lanes_ > 0)
    m.aql = queue_tick_sum_ / (static_cast<double>(clock_ticks_) * n_entering_lanes_);
  m.tp = completed_;
  m.in_network = in_network_;
  m.deferred = deferred_total_;
  return m;
}

}  // namespace starlight
