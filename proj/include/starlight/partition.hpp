#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "starlight/json_io.hpp"
#include "starlight/net.hpp"
#include "starlight/rng.hpp"

namespace starlight {

/// Sorted list of intersection ids.
using DominatingSet = std::vector<std::string>;

/// Sentinel for an empty region slot backed by no real intersection.
inline const std::string k_fictitious = "";

/// Star region: a center plus at most four leaves, one per compass direction.
/// Slot order [center, N, E, S, W] is fixed; it is what ties each branch of
/// the shared Q-network to a stable spatial role across regions.
struct Region {
  std::string center;
  std::array<std::string, 5> slots = {k_fictitious, k_fictitious, k_fictitious, k_fictitious,
                                      k_fictitious};
  std::array<bool, 5> mask = {false, false, false, false, false};

  bool operator==(const Region&) const = default;
};

/// Disjoint star regions covering the whole network. Regions are stored
/// sorted by center id; `owner` maps every real member to its region index.
struct RegionConfiguration {
  std::vector<Region> regions;
  std::map<std::string, int> owner;

  bool operator==(const RegionConfiguration&) const = default;
};

/// Direct scan of the dominating-set property: every intersection outside W
/// has a neighbor in W. Throws on unknown ids.
bool is_dominating_set(const RoadNetwork& net, const DominatingSet& w);

struct BruteForceResult {
  int gamma = 0;
  std::vector<DominatingSet> all_minimum_sets;  // lexicographic order
};

/// Exhaustive enumeration by increasing subset size; the oracle the
/// branch-and-bound solver is tested against. Limited to 20 intersections.
BruteForceResult brute_force_min_dominating_set(const RoadNetwork& net);

struct SolveOptions {
  std::uint64_t node_budget = 20'000'000;  // search nodes before giving up
};

/// Exact minimum dominating set via branch-and-bound on per-intersection
/// center/leaf decisions (descending-degree variable order, greedy
/// max-coverage incumbent, disjoint-closed-neighborhood lower bound). Among
/// all minimum sets, returns the lexicographically smallest by id. Throws
/// Error("solver") carrying the best incumbent if the node budget runs out.
DominatingSet solve_min_dominating_set(const RoadNetwork& net, const SolveOptions& opts = {});

/// Iteration order for region construction: the order centers claim their
/// unassigned neighbors. Explicit so that order (non-)invariance is testable.
struct AssignmentOrder {
  std::vector<std::string> centers;                               // permutation of W
  std::map<std::string, std::vector<std::string>> neighbor_order;  // per center, permutation of NB
};

AssignmentOrder default_assignment_order(const RoadNetwork& net, const DominatingSet& w);
AssignmentOrder shuffled_assignment_order(const RoadNetwork& net, const DominatingSet& w, Rng& rng);

/// Builds regions by letting each center, in order, claim its still-unassigned
/// neighbors. Every intersection must end up in exactly one region; leaves
/// land in the slot matching their compass direction from the center.
RegionConfiguration construct_regions(const RoadNetwork& net, const DominatingSet& w,
                                      const AssignmentOrder& order);
RegionConfiguration construct_regions(const RoadNetwork& net, const DominatingSet& w);

/// True iff all pairwise center distances are >= 3, in which case the region
/// configuration is unique (order-invariant).
bool check_uniqueness(const RoadNetwork& net, const DominatingSet& w);

/// Moves leaf z from one region to an adjacent center's region, preserving
/// coverage and disjointness. Preconditions checked individually.
RegionConfiguration reassign_leaf(const RoadNetwork& net, const RegionConfiguration& config,
                                  const std::string& z, const std::string& from_center,
                                  const std::string& to_center);

/// Empty result iff coverage, disjointness, star topology, compass-slot
/// placement, and mask bookkeeping all hold.
std::vector<std::string> validate_configuration(const RoadNetwork& net,
                                                const RegionConfiguration& config);

Json regions_to_json(const RegionConfiguration& config);
RegionConfiguration regions_from_json(const RoadNetwork& net, const Json& j);

}  // namespace starlight
