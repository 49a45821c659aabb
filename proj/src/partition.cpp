#include "starlight/partition.hpp"

#include <algorithm>
#include <cstdint>

namespace starlight {

namespace {

/// Fixed-width bitset sized at runtime; the solver's working currency.
class Bits {
public:
  explicit Bits(int n = 0) : n_(n), w_((n + 63) / 64, 0) {}

  void set(int i) { w_[i >> 6] |= 1ULL << (i & 63); }
  bool test(int i) const { return (w_[i >> 6] >> (i & 63)) & 1; }

  int count() const {
    int c = 0;
    for (std::uint64_t x : w_) c += __builtin_popcountll(x);
    return c;
  }

  bool contains_all(const Bits& other) const {  // other subset of this
    for (size_t i = 0; i < w_.size(); ++i)
      if (other.w_[i] & ~w_[i]) return false;
    return true;
  }

  bool intersects(const Bits& other) const {
    for (size_t i = 0; i < w_.size(); ++i)
      if (w_[i] & other.w_[i]) return true;
    return false;
  }

  Bits& operator|=(const Bits& other) {
    for (size_t i = 0; i < w_.size(); ++i) w_[i] |= other.w_[i];
    return *this;
  }

  bool full() const { return count() == n_; }
  int size() const { return n_; }

private:
  int n_;
  std::vector<std::uint64_t> w_;
};

struct Graph {
  int n = 0;
  std::vector<std::vector<int>> nb;
  std::vector<Bits> closed;  // closed neighborhood N[v]
};

Graph build_graph(const RoadNetwork& net) {
  Graph g;
  g.n = static_cast<int>(net.size());
  g.nb.resize(g.n);
  g.closed.assign(g.n, Bits(g.n));
  for (int v = 0; v < g.n; ++v) {
    g.closed[v].set(v);
    for (const std::string& u : net.neighbors(net.id(v))) {
      int ui = net.index(u);
      g.nb[v].push_back(ui);
      g.closed[v].set(ui);
    }
  }
  return g;
}

/// Greedy max-coverage incumbent: repeatedly take the vertex dominating the
/// most still-undominated vertices (ties to the lowest index, i.e. the
/// lexicographically smallest id).
std::vector<int> greedy_dominating_set(const Graph& g) {
  std::vector<int> centers;
  Bits dominated(g.n);
  while (!dominated.full()) {
    int best = -1, best_gain = -1;
    for (int v = 0; v < g.n; ++v) {
      int gain = 0;
      for (int u : g.nb[v])
        if (!dominated.test(u)) ++gain;
      if (!dominated.test(v)) ++gain;
      if (gain > best_gain) {
        best_gain = gain;
        best = v;
      }
    }
    centers.push_back(best);
    dominated |= g.closed[best];
  }
  return centers;
}

/// Branch-and-bound over center/leaf decisions. Decision values: -1
/// undecided, 0 center, 1 leaf. Minimizes the number of centers.
class BranchAndBound {
public:
  BranchAndBound(const Graph& g, std::uint64_t node_budget)
      : g_(g), budget_(node_budget), decided_(g.n, -1) {
    order_.resize(g_.n);
    for (int v = 0; v < g_.n; ++v) order_[v] = v;
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) {
      return g_.nb[a].size() > g_.nb[b].size();  // descending degree, ties by index
    });
  }

  void force_center(int v) { decided_[v] = 0; }
  void force_leaf(int v) { decided_[v] = 1; }

  /// Searches for dominating sets strictly smaller than `cap`. When
  /// `stop_at_first` is set, returns as soon as one is found (feasibility
  /// query); otherwise exhausts the tree (optimality proof).
  bool run(int cap, bool stop_at_first) {
    best_ = cap;
    stop_first_ = stop_at_first;
    found_ = false;
    aborted_ = false;
    nodes_ = 0;

    Bits dominated(g_.n);
    std::vector<int> centers;
    for (int v = 0; v < g_.n; ++v)
      if (decided_[v] == 0) {
        dominated |= g_.closed[v];
        centers.push_back(v);
      }
    dfs(0, dominated, centers);
    return found_;
  }

  bool aborted() const { return aborted_; }
  int best_size() const { return best_; }
  const std::vector<int>& best_centers() const { return best_centers_; }

private:
  bool dead_or_pruned(const Bits& dominated, int n_centers) {
    // A vertex none of whose closed neighborhood can still become a center is
    // permanently undominated.
    Bits leaves(g_.n);
    for (int v = 0; v < g_.n; ++v)
      if (decided_[v] == 1) leaves.set(v);
    int lower = 0;
    Bits used(g_.n);
    for (int v = 0; v < g_.n; ++v) {
      if (dominated.test(v)) continue;
      if (leaves.contains_all(g_.closed[v])) return true;
      // Disjoint closed neighborhoods need distinct centers: a lower bound.
      if (!used.intersects(g_.closed[v])) {
        ++lower;
        used |= g_.closed[v];
      }
    }
    return n_centers + lower >= best_;
  }

  void dfs(size_t pos, const Bits& dominated, std::vector<int>& centers) {
    if (aborted_ || (stop_first_ && found_)) return;
    if (++nodes_ > budget_) {
      aborted_ = true;
      return;
    }

    if (dominated.full()) {  // undecided vertices all become leaves
      if (static_cast<int>(centers.size()) < best_) {
        best_ = static_cast<int>(centers.size());
        best_centers_ = centers;
        found_ = true;
      }
      return;
    }
    if (dead_or_pruned(dominated, static_cast<int>(centers.size()))) return;

    while (pos < order_.size() && decided_[order_[pos]] != -1) ++pos;
    if (pos == order_.size()) return;  // fully decided yet undominated: dead
    int v = order_[pos];

    decided_[v] = 0;  // center first: reaches full domination sooner
    Bits dom_center = dominated;
    dom_center |= g_.closed[v];
    centers.push_back(v);
    dfs(pos + 1, dom_center, centers);
    centers.pop_back();

    decided_[v] = 1;
    dfs(pos + 1, dominated, centers);
    decided_[v] = -1;
  }

  const Graph& g_;
  std::uint64_t budget_;
  std::uint64_t nodes_ = 0;
  std::vector<int8_t> decided_;
  std::vector<int> order_;
  int best_ = 0;
  bool stop_first_ = false;
  bool found_ = false;
  bool aborted_ = false;
  std::vector<int> best_centers_;
};

DominatingSet to_ids(const RoadNetwork& net, std::vector<int> centers) {
  DominatingSet w;
  for (int v : centers) w.push_back(net.id(v));
  std::sort(w.begin(), w.end());
  return w;
}

std::string join_ids(const DominatingSet& w) {
  std::string s;
  for (const auto& id : w) {
    if (!s.empty()) s += ", ";
    s += id;
  }
  return s;
}

}  // namespace

bool is_dominating_set(const RoadNetwork& net, const DominatingSet& w) {
  Bits in_w(static_cast<int>(net.size()));
  for (const std::string& id : w) in_w.set(net.index(id));
  for (size_t v = 0; v < net.size(); ++v) {
    if (in_w.test(static_cast<int>(v))) continue;
    bool covered = false;
    for (const std::string& u : net.neighbors(net.id(static_cast<int>(v))))
      if (in_w.test(net.index(u))) covered = true;
    if (!covered) return false;
  }
  return true;
}

BruteForceResult brute_force_min_dominating_set(const RoadNetwork& net) {
  int n = static_cast<int>(net.size());
  if (n > 20) fail("solver", "brute force is limited to 20 intersections, got " + std::to_string(n));

  std::vector<std::uint32_t> closed(n);
  for (int v = 0; v < n; ++v) {
    closed[v] = 1u << v;
    for (const std::string& u : net.neighbors(net.id(v))) closed[v] |= 1u << net.index(u);
  }
  const std::uint32_t all = n == 32 ? ~0u : (1u << n) - 1;

  BruteForceResult result;
  std::vector<int> pick;
  // Combinations in increasing index order; index order is id order, so the
  // result list comes out lexicographically sorted.
  auto search = [&](auto&& self, int start, int remaining, std::uint32_t dominated) -> void {
    if (remaining == 0) {
      if (dominated == all) {
        DominatingSet w;
        for (int v : pick) w.push_back(net.id(v));
        result.all_minimum_sets.push_back(std::move(w));
      }
      return;
    }
    for (int v = start; v <= n - remaining; ++v) {
      pick.push_back(v);
      self(self, v + 1, remaining - 1, dominated | closed[v]);
      pick.pop_back();
    }
  };

  for (int k = 1; k <= n; ++k) {
    search(search, 0, k, 0);
    if (!result.all_minimum_sets.empty()) {
      result.gamma = k;
      break;
    }
  }
  return result;
}

DominatingSet solve_min_dominating_set(const RoadNetwork& net, const SolveOptions& opts) {
  Graph g = build_graph(net);

  std::vector<int> incumbent = greedy_dominating_set(g);
  BranchAndBound bb(g, opts.node_budget);
  if (bb.run(static_cast<int>(incumbent.size()), false)) incumbent = bb.best_centers();
  if (bb.aborted())
    fail("solver", "node budget exhausted; best incumbent (size " +
                       std::to_string(incumbent.size()) + "): " + join_ids(to_ids(net, incumbent)));
  int gamma = static_cast<int>(incumbent.size());

  // Lexicographically smallest minimum set, built element by element: each
  // position takes the smallest id that still extends to a set of size gamma
  // using only larger ids.
  std::vector<int> prefix;
  int last = -1;
  while (static_cast<int>(prefix.size()) < gamma) {
    bool extended = false;
    for (int cand = last + 1; cand < g.n; ++cand) {
      BranchAndBound feas(g, opts.node_budget);
      for (int p : prefix) feas.force_center(p);
      feas.force_center(cand);
      for (int v = 0; v < cand; ++v)
        if (std::find(prefix.begin(), prefix.end(), v) == prefix.end()) feas.force_leaf(v);
      if (feas.run(gamma + 1, true)) {
        prefix.push_back(cand);
        last = cand;
        extended = true;
        break;
      }
      if (feas.aborted())
        fail("solver", "node budget exhausted; best incumbent (size " + std::to_string(gamma) +
                           "): " + join_ids(to_ids(net, incumbent)));
    }
    if (!extended)
      fail("solver", "internal inconsistency: no lexicographic extension at size " +
                         std::to_string(prefix.size()));
  }

  DominatingSet w = to_ids(net, prefix);
  if (!is_dominating_set(net, w))
    fail("solver", "internal inconsistency: solver output fails the domination scan");
  return w;
}

AssignmentOrder default_assignment_order(const RoadNetwork& net, const DominatingSet& w) {
  AssignmentOrder order;
  order.centers = w;
  std::sort(order.centers.begin(), order.centers.end());
  for (const std::string& c : order.centers) {
    std::vector<std::string> nbs;
    const Intersection& n = net.node(net.index(c));
    for (Side s : all_sides)
      if (n.slots[static_cast<int>(s)]) nbs.push_back(*n.slots[static_cast<int>(s)]);
    order.neighbor_order[c] = std::move(nbs);
  }
  return order;
}

AssignmentOrder shuffled_assignment_order(const RoadNetwork& net, const DominatingSet& w, Rng& rng) {
  AssignmentOrder order = default_assignment_order(net, w);
  rng.shuffle(order.centers);
  for (const std::string& c : order.centers) rng.shuffle(order.neighbor_order[c]);
  return order;
}

RegionConfiguration construct_regions(const RoadNetwork& net, const DominatingSet& w,
                                      const AssignmentOrder& order) {
  {
    DominatingSet sorted_w = w, sorted_o = order.centers;
    std::sort(sorted_w.begin(), sorted_w.end());
    std::sort(sorted_o.begin(), sorted_o.end());
    if (sorted_w != sorted_o)
      fail("validate", "assignment order centers are not a permutation of the dominating set");
    if (std::adjacent_find(sorted_w.begin(), sorted_w.end()) != sorted_w.end())
      fail("validate", "dominating set contains a duplicate id");
  }

  std::map<std::string, std::string> assigned_to;  // member -> center
  for (const std::string& c : order.centers) {
    net.index(c);  // unknown-id check
    assigned_to[c] = c;
  }

  std::map<std::string, Region> regions;
  for (const std::string& c : order.centers) {
    Region r;
    r.center = c;
    r.slots[0] = c;
    r.mask[0] = true;
    regions[c] = r;
  }

  for (const std::string& c : order.centers) {
    auto it = order.neighbor_order.find(c);
    if (it == order.neighbor_order.end())
      fail("validate", "assignment order is missing the neighbor list of '" + c + "'");
    std::vector<std::string> expect = net.neighbors(c), got = it->second;
    std::sort(got.begin(), got.end());
    if (got != expect)
      fail("validate", "assignment order for '" + c + "' is not a permutation of its neighbors");

    const Intersection& cn = net.node(net.index(c));
    for (const std::string& u : it->second) {
      if (assigned_to.count(u)) continue;
      assigned_to[u] = c;
      for (Side s : all_sides)
        if (cn.slots[static_cast<int>(s)] && *cn.slots[static_cast<int>(s)] == u) {
          regions[c].slots[1 + static_cast<int>(s)] = u;
          regions[c].mask[1 + static_cast<int>(s)] = true;
        }
    }
  }

  for (const std::string& id : net.ids())
    if (!assigned_to.count(id))
      fail("validate", "intersection '" + id + "' left unassigned: not a dominating set");

  RegionConfiguration config;
  for (auto& [c, r] : regions) config.regions.push_back(std::move(r));  // map order = center id order
  for (size_t i = 0; i < config.regions.size(); ++i)
    for (int s = 0; s < 5; ++s)
      if (config.regions[i].mask[s]) config.owner[config.regions[i].slots[s]] = static_cast<int>(i);
  return config;
}

RegionConfiguration construct_regions(const RoadNetwork& net, const DominatingSet& w) {
  return construct_regions(net, w, default_assignment_order(net, w));
}

bool check_uniqueness(const RoadNetwork& net, const DominatingSet& w) {
  for (size_t i = 0; i < w.size(); ++i)
    for (size_t j = i + 1; j < w.size(); ++j)
      if (net.hop_distance(w[i], w[j]) < 3) return false;
  return true;
}

RegionConfiguration reassign_leaf(const RoadNetwork& net, const RegionConfiguration& config,
                                  const std::string& z, const std::string& from_center,
                                  const std::string& to_center) {
  int from_idx = -1, to_idx = -1;
  for (size_t i = 0; i < config.regions.size(); ++i) {
    if (config.regions[i].center == from_center) from_idx = static_cast<int>(i);
    if (config.regions[i].center == to_center) to_idx = static_cast<int>(i);
  }
  if (from_idx < 0) fail("validate", "'" + from_center + "' is not a region center");
  if (to_idx < 0) fail("validate", "'" + to_center + "' is not a region center");
  if (z == from_center) fail("validate", "'" + z + "' is the center of its region, not a leaf");

  RegionConfiguration out = config;
  Region& from = out.regions[from_idx];
  Region& to = out.regions[to_idx];

  int z_slot = -1;
  for (int s = 1; s < 5; ++s)
    if (from.mask[s] && from.slots[s] == z) z_slot = s;
  if (z_slot < 0) fail("validate", "'" + z + "' is not a leaf of region '" + from_center + "'");

  const Intersection& tn = net.node(net.index(to_center));
  int target_slot = -1;
  for (Side s : all_sides)
    if (tn.slots[static_cast<int>(s)] && *tn.slots[static_cast<int>(s)] == z)
      target_slot = 1 + static_cast<int>(s);
  if (target_slot < 0) fail("validate", "'" + z + "' is not adjacent to '" + to_center + "'");
  if (to.mask[target_slot])
    fail("state", "slot for '" + z + "' in region '" + to_center + "' is already occupied");

  from.slots[z_slot] = k_fictitious;
  from.mask[z_slot] = false;
  to.slots[target_slot] = z;
  to.mask[target_slot] = true;
  out.owner[z] = to_idx;
  return out;
}

std::vector<std::string> validate_configuration(const RoadNetwork& net,
                                                const RegionConfiguration& config) {
  std::vector<std::string> violations;
  std::map<std::string, int> seen;  // id -> occurrences across regions

  for (size_t i = 0; i < config.regions.size(); ++i) {
    const Region& r = config.regions[i];
    std::string ctx = "region '" + r.center + "'";
    if (!net.has(r.center)) {
      violations.push_back(ctx + ": unknown center");
      continue;
    }
    if (r.slots[0] != r.center || !r.mask[0])
      violations.push_back(ctx + ": slot 0 must hold the center");
    const Intersection& cn = net.node(net.index(r.center));
    for (int s = 0; s < 5; ++s) {
      if (r.mask[s] != (r.slots[s] != k_fictitious)) {
        violations.push_back(ctx + ": mask[" + std::to_string(s) + "] disagrees with the slot");
        continue;
      }
      if (!r.mask[s]) continue;
      const std::string& member = r.slots[s];
      ++seen[member];
      if (s == 0) continue;
      if (!net.has(member)) {
        violations.push_back(ctx + ": unknown member '" + member + "'");
        continue;
      }
      Side side = static_cast<Side>(s - 1);
      const auto& slot = cn.slots[static_cast<int>(side)];
      if (!slot || *slot != member) {
        bool adjacent = false;
        for (const std::string& u : net.neighbors(r.center))
          if (u == member) adjacent = true;
        violations.push_back(ctx + (adjacent
                                        ? ": leaf '" + member + "' sits in the wrong compass slot"
                                        : ": member '" + member + "' is not adjacent to the center"));
      }
    }
    auto it = config.owner.find(r.center);
    if (it == config.owner.end() || it->second != static_cast<int>(i))
      violations.push_back(ctx + ": owner map does not point the center at its region");
  }

  for (const std::string& id : net.ids()) {
    auto it = seen.find(id);
    if (it == seen.end())
      violations.push_back("intersection '" + id + "' is not covered by any region");
    else if (it->second > 1)
      violations.push_back("intersection '" + id + "' is assigned to " +
                           std::to_string(it->second) + " regions");
  }

  for (const auto& [id, idx] : config.owner) {
    if (idx < 0 || idx >= static_cast<int>(config.regions.size())) {
      violations.push_back("owner map: '" + id + "' points at a nonexistent region");
      continue;
    }
    const Region& r = config.regions[idx];
    bool present = false;
    for (int s = 0; s < 5; ++s)
      if (r.mask[s] && r.slots[s] == id) present = true;
    if (!present)
      violations.push_back("owner map: '" + id + "' points at region '" + r.center +
                           "', which does not contain it");
  }

  return violations;
}

Json regions_to_json(const RegionConfiguration& config) {
  Json regions = Json::array();
  for (const Region& r : config.regions) {
    Json slots = Json::array();
    for (int s = 0; s < 5; ++s) slots.push_back(r.mask[s] ? Json(r.slots[s]) : Json(nullptr));
    Json mask = Json::array();
    for (int s = 0; s < 5; ++s) mask.push_back(r.mask[s]);
    regions.push_back({{"center", r.center}, {"slots", slots}, {"mask", mask}});
  }
  return Json{{"regions", regions}};
}

RegionConfiguration regions_from_json(const RoadNetwork& net, const Json& j) {
  RegionConfiguration config;
  if (!j.contains("regions") || !j["regions"].is_array())
    fail("parse", "configuration json: missing 'regions' array");
  for (const Json& rj : j["regions"]) {
    Region r;
    if (!rj.contains("center") || !rj.contains("slots") || !rj.contains("mask"))
      fail("parse", "configuration json: region needs center, slots, mask");
    r.center = rj["center"].get<std::string>();
    if (rj["slots"].size() != 5 || rj["mask"].size() != 5)
      fail("parse", "configuration json: slots and mask must have 5 entries");
    for (int s = 0; s < 5; ++s) {
      r.mask[s] = rj["mask"][s].get<bool>();
      if (!rj["slots"][s].is_null()) r.slots[s] = rj["slots"][s].get<std::string>();
    }
    config.regions.push_back(std::move(r));
  }
  for (size_t i = 0; i < config.regions.size(); ++i)
    for (int s = 0; s < 5; ++s)
      if (config.regions[i].mask[s]) config.owner[config.regions[i].slots[s]] = static_cast<int>(i);

  auto violations = validate_configuration(net, config);
  if (!violations.empty()) fail("validate", "configuration json invalid: " + violations.front());
  return config;
}

}  // namespace starlight
