#pragma once

#include <array>
#include <climits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "starlight/error.hpp"

namespace starlight {

/// Compass sides in slot order. The numeric order (N, E, S, W) is load-bearing:
/// region slots, lane ordering, and turn geometry all index by it.
enum class Side : int { N = 0, E = 1, S = 2, W = 3 };

/// Signal phases. Each phase greens the straight or left movements of one axis;
/// right turns are permitted under every phase.
enum class Phase : int { NS = 0, NSL = 1, EW = 2, EWL = 3 };

enum class Turn : int { Left = 0, Straight = 1, Right = 2 };

inline constexpr std::array<Side, 4> all_sides = {Side::N, Side::E, Side::S, Side::W};
inline constexpr std::array<Phase, 4> all_phases = {Phase::NS, Phase::NSL, Phase::EW, Phase::EWL};
inline constexpr std::array<Turn, 3> all_turns = {Turn::Left, Turn::Straight, Turn::Right};

const char* side_name(Side s);
const char* phase_name(Phase p);
const char* turn_name(Turn t);
Side parse_side(const std::string& name);
Phase parse_phase(const std::string& name);

inline Side opposite(Side s) { return static_cast<Side>((static_cast<int>(s) + 2) % 4); }

/// Exit side for a vehicle entering from `incoming` and turning `t`.
/// A vehicle entering from N heads south: straight exits S, left exits E,
/// right exits W.
inline Side exit_side(Side incoming, Turn t) {
  int s = static_cast<int>(incoming);
  switch (t) {
    case Turn::Straight: return static_cast<Side>((s + 2) % 4);
    case Turn::Left: return static_cast<Side>((s + 1) % 4);
    case Turn::Right: return static_cast<Side>((s + 3) % 4);
  }
  fail("state", "invalid turn");
}

/// Queueing lane for a turn on an approach with `lanes` lanes: left-most lane
/// (index 0) for left turns, then straight, then right, collapsing onto the
/// last lane when there are fewer than three.
inline int lane_for_turn(Turn t, int lanes) {
  int i = static_cast<int>(t);
  return i < lanes ? i : lanes - 1;
}

/// Whether phase `p` greens the movement entering from `incoming` with turn
/// `t`. Right turns are always permitted.
inline bool phase_permits(Phase p, Side incoming, Turn t) {
  if (t == Turn::Right) return true;
  bool ns_axis = incoming == Side::N || incoming == Side::S;
  switch (p) {
    case Phase::NS: return ns_axis && t == Turn::Straight;
    case Phase::NSL: return ns_axis && t == Turn::Left;
    case Phase::EW: return !ns_axis && t == Turn::Straight;
    case Phase::EWL: return !ns_axis && t == Turn::Left;
  }
  return false;
}

/// Directed road segment. Endpoints are intersection ids, except that entry
/// arms originate at and exit arms terminate at boundary endpoint ids listed
/// in the network's boundary section.
struct Approach {
  std::string from;
  std::string to;
  double length_m = 0.0;
  int lanes = 0;
};

/// Boundary arm: a virtual source (entry) or sink (exit) endpoint attached to
/// one compass side of a perimeter intersection.
struct BoundaryArm {
  std::string id;    // virtual endpoint id, e.g. "src_N_1-1"
  std::string at;    // owning intersection
  Side side = Side::N;
};

struct Intersection {
  std::string id;
  std::array<std::optional<std::string>, 4> slots;  // neighbor id per Side, or empty
};

/// Sentinel for hop_distance between disconnected intersections.
inline constexpr int k_unreachable = INT_MAX;

/// Directed grid-style road network. Immutable after construction; all
/// orderings (intersection index, lane lists, arm lists) are deterministic
/// functions of the input file.
class RoadNetwork {
public:
  struct LaneRef {
    int approach = -1;
    int lane = -1;
    bool operator==(const LaneRef&) const = default;
  };

  size_t size() const { return nodes_.size(); }
  bool has(const std::string& id) const { return index_.count(id) != 0; }
  int index(const std::string& id) const;
  const std::string& id(int idx) const { return nodes_[idx].id; }
  const Intersection& node(int idx) const { return nodes_[idx]; }
  const std::vector<std::string>& ids() const { return ids_; }

  /// NB_v: real grid neighbors, sorted by id. Boundary endpoints excluded.
  std::vector<std::string> neighbors(const std::string& v) const;
  int degree(const std::string& v) const;

  /// Minimum hop count between two intersections; k_unreachable when no path.
  int hop_distance(const std::string& v, const std::string& u) const;

  const std::vector<Approach>& approaches() const { return approaches_; }
  const Approach& approach(int idx) const { return approaches_[idx]; }

  /// Approach index entering/leaving node `idx` on `side`, or -1.
  int incoming_approach(int idx, Side side) const { return in_app_[idx][static_cast<int>(side)]; }
  int outgoing_approach(int idx, Side side) const { return out_app_[idx][static_cast<int>(side)]; }

  /// Lane[v]: entering lanes ordered by (side N,E,S,W; lane index). Includes
  /// boundary entry arms.
  const std::vector<LaneRef>& entering_lanes(int idx) const { return lanes_in_[idx]; }

  const std::vector<BoundaryArm>& entries() const { return entries_; }
  const std::vector<BoundaryArm>& exits() const { return exits_; }
  bool is_exit_endpoint(const std::string& endpoint_id) const { return exit_ids_.count(endpoint_id) != 0; }
  bool is_entry_endpoint(const std::string& endpoint_id) const { return entry_ids_.count(endpoint_id) != 0; }

  /// Approach carrying entry arm `arm_idx` (index into entries()).
  int entry_approach(int arm_idx) const { return entry_app_[arm_idx]; }

  friend RoadNetwork build_roadnet(std::vector<Intersection> nodes, std::vector<Approach> approaches,
                                   std::vector<BoundaryArm> entries, std::vector<BoundaryArm> exits);

private:
  std::vector<Intersection> nodes_;  // sorted by id
  std::vector<std::string> ids_;
  std::map<std::string, int> index_;
  std::vector<Approach> approaches_;
  std::vector<std::array<int, 4>> in_app_;   // per node, per side
  std::vector<std::array<int, 4>> out_app_;
  std::vector<std::vector<LaneRef>> lanes_in_;
  std::vector<BoundaryArm> entries_;
  std::vector<BoundaryArm> exits_;
  std::vector<int> entry_app_;
  std::map<std::string, int> entry_ids_;  // endpoint id -> index into entries_
  std::map<std::string, int> exit_ids_;
};

/// Validates and assembles a network; the only constructor path. Throws
/// Error("validate", ...) naming the offending intersection or approach.
RoadNetwork build_roadnet(std::vector<Intersection> nodes, std::vector<Approach> approaches,
                          std::vector<BoundaryArm> entries, std::vector<BoundaryArm> exits);

RoadNetwork load_roadnet(const std::string& path);
void save_roadnet(const RoadNetwork& net, const std::string& path);

/// rows x cols grid, row-major ids "r-c" starting at 1. ns_length is the
/// length of vertical (N-S) segments, ew_length of horizontal ones. Every
/// perimeter side gets an entry and an exit arm of the matching length.
RoadNetwork make_grid(int rows, int cols, double ns_length, double ew_length, int lanes_per_approach);

/// Single intersection with four neighbors (a fully loaded star). Ids follow
/// the grid scheme with the center at "2-2".
RoadNetwork make_cross(double arm_length, int lanes_per_approach);

}  // namespace starlight
