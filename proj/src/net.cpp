#include "starlight/net.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "starlight/json_io.hpp"

namespace starlight {

const char* side_name(Side s) {
  switch (s) {
    case Side::N: return "N";
    case Side::E: return "E";
    case Side::S: return "S";
    case Side::W: return "W";
  }
  return "?";
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::NS: return "NS";
    case Phase::NSL: return "NSL";
    case Phase::EW: return "EW";
    case Phase::EWL: return "EWL";
  }
  return "?";
}

const char* turn_name(Turn t) {
  switch (t) {
    case Turn::Left: return "left";
    case Turn::Straight: return "straight";
    case Turn::Right: return "right";
  }
  return "?";
}

Side parse_side(const std::string& name) {
  for (Side s : all_sides)
    if (name == side_name(s)) return s;
  fail("parse", "unknown compass side: '" + name + "'");
}

Phase parse_phase(const std::string& name) {
  for (Phase p : all_phases)
    if (name == phase_name(p)) return p;
  fail("parse", "unknown phase: '" + name + "'");
}

int RoadNetwork::index(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail("validate", "unknown intersection: '" + id + "'");
  return it->second;
}

std::vector<std::string> RoadNetwork::neighbors(const std::string& v) const {
  const Intersection& n = nodes_[index(v)];
  std::vector<std::string> out;
  for (const auto& slot : n.slots)
    if (slot) out.push_back(*slot);
  std::sort(out.begin(), out.end());
  return out;
}

int RoadNetwork::degree(const std::string& v) const {
  return static_cast<int>(neighbors(v).size());
}

int RoadNetwork::hop_distance(const std::string& v, const std::string& u) const {
  int src = index(v), dst = index(u);
  if (src == dst) return 0;
  std::vector<int> dist(nodes_.size(), -1);
  dist[src] = 0;
  std::deque<int> frontier{src};
  while (!frontier.empty()) {
    int cur = frontier.front();
    frontier.pop_front();
    for (const auto& slot : nodes_[cur].slots) {
      if (!slot) continue;
      int nxt = index_.at(*slot);
      if (dist[nxt] >= 0) continue;
      dist[nxt] = dist[cur] + 1;
      if (nxt == dst) return dist[nxt];
      frontier.push_back(nxt);
    }
  }
  return k_unreachable;
}

RoadNetwork build_roadnet(std::vector<Intersection> nodes, std::vector<Approach> approaches,
                          std::vector<BoundaryArm> entries, std::vector<BoundaryArm> exits) {
  if (nodes.empty()) fail("validate", "network has no intersections");
  std::sort(nodes.begin(), nodes.end(),
            [](const Intersection& a, const Intersection& b) { return a.id < b.id; });

  RoadNetwork net;
  net.nodes_ = std::move(nodes);
  for (size_t i = 0; i < net.nodes_.size(); ++i) {
    const std::string& id = net.nodes_[i].id;
    if (!net.index_.emplace(id, static_cast<int>(i)).second)
      fail("validate", "duplicate intersection id: '" + id + "'");
    net.ids_.push_back(id);
  }

  // Slot sanity and symmetry.
  for (const Intersection& n : net.nodes_) {
    std::set<std::string> seen;
    for (Side s : all_sides) {
      const auto& slot = n.slots[static_cast<int>(s)];
      if (!slot) continue;
      if (*slot == n.id)
        fail("validate", "intersection '" + n.id + "': compass slot points at itself");
      if (!net.index_.count(*slot))
        fail("validate", "intersection '" + n.id + "': slot " + side_name(s) +
                             " references unknown intersection '" + *slot + "'");
      if (!seen.insert(*slot).second)
        fail("validate", "intersection '" + n.id + "': neighbor '" + *slot +
                             "' occupies two compass slots");
      const Intersection& other = net.nodes_[net.index_.at(*slot)];
      const auto& back = other.slots[static_cast<int>(opposite(s))];
      if (!back || *back != n.id)
        fail("validate", "compass slots inconsistent between '" + n.id + "' and '" + *slot +
                             "': " + side_name(s) + " is not mirrored");
    }
  }

  // Boundary declarations.
  std::map<std::string, int> entry_decl, exit_decl;  // endpoint id -> arm index
  auto check_arm = [&](const BoundaryArm& arm, const char* kind) {
    if (!net.index_.count(arm.at))
      fail("validate", std::string(kind) + " arm '" + arm.id + "' attached to unknown intersection '" +
                           arm.at + "'");
    if (net.index_.count(arm.id))
      fail("validate", std::string(kind) + " arm id '" + arm.id + "' collides with an intersection id");
    const Intersection& n = net.nodes_[net.index_.at(arm.at)];
    if (n.slots[static_cast<int>(arm.side)])
      fail("validate", std::string(kind) + " arm '" + arm.id + "' on side " + side_name(arm.side) +
                           " of '" + arm.at + "', which already has a neighbor there");
  };
  for (size_t i = 0; i < entries.size(); ++i) {
    check_arm(entries[i], "entry");
    if (!entry_decl.emplace(entries[i].id, static_cast<int>(i)).second)
      fail("validate", "duplicate entry arm id: '" + entries[i].id + "'");
  }
  for (size_t i = 0; i < exits.size(); ++i) {
    check_arm(exits[i], "exit");
    if (exit_decl.count(exits[i].id) || entry_decl.count(exits[i].id))
      fail("validate", "duplicate boundary arm id: '" + exits[i].id + "'");
    exit_decl.emplace(exits[i].id, static_cast<int>(i));
  }
  net.entries_ = std::move(entries);
  net.exits_ = std::move(exits);
  net.entry_ids_ = entry_decl;
  net.exit_ids_ = exit_decl;

  // Neighbor sets implied by the directed edge set, to cross-check the slots.
  std::vector<std::set<std::string>> nb_edges(net.nodes_.size());
  std::set<std::pair<std::string, std::string>> edge_pairs;

  net.in_app_.assign(net.nodes_.size(), {-1, -1, -1, -1});
  net.out_app_.assign(net.nodes_.size(), {-1, -1, -1, -1});
  net.entry_app_.assign(net.entries_.size(), -1);

  for (size_t i = 0; i < approaches.size(); ++i) {
    const Approach& a = approaches[i];
    std::string ctx = "approach '" + a.from + "' -> '" + a.to + "'";
    if (a.from == a.to) fail("validate", ctx + ": endpoints must be distinct");
    if (a.lanes < 1) fail("validate", ctx + ": lanes must be >= 1");
    if (!(a.length_m > 0.0)) fail("validate", ctx + ": length_m must be positive");
    bool from_real = net.index_.count(a.from) != 0;
    bool to_real = net.index_.count(a.to) != 0;
    if (from_real && to_real) {
      if (!edge_pairs.emplace(a.from, a.to).second) fail("validate", ctx + ": duplicate approach");
      nb_edges[net.index_.at(a.from)].insert(a.to);
      nb_edges[net.index_.at(a.to)].insert(a.from);
    } else if (entry_decl.count(a.from) && to_real) {
      const BoundaryArm& arm = net.entries_[entry_decl.at(a.from)];
      if (arm.at != a.to)
        fail("validate", ctx + ": entry arm is declared at '" + arm.at + "'");
      int node = net.index_.at(a.to), side = static_cast<int>(arm.side);
      if (net.in_app_[node][side] != -1)
        fail("validate", ctx + ": side " + side_name(arm.side) + " of '" + a.to +
                             "' already has an incoming approach");
      net.in_app_[node][side] = static_cast<int>(i);
      net.entry_app_[entry_decl.at(a.from)] = static_cast<int>(i);
    } else if (from_real && exit_decl.count(a.to)) {
      const BoundaryArm& arm = net.exits_[exit_decl.at(a.to)];
      if (arm.at != a.from)
        fail("validate", ctx + ": exit arm is declared at '" + arm.at + "'");
      int node = net.index_.at(a.from), side = static_cast<int>(arm.side);
      if (net.out_app_[node][side] != -1)
        fail("validate", ctx + ": side " + side_name(arm.side) + " of '" + a.from +
                             "' already has an outgoing approach");
      net.out_app_[node][side] = static_cast<int>(i);
    } else {
      fail("validate", ctx + ": endpoint is neither an intersection nor a declared boundary arm");
    }
  }

  // Degree bound and slot/edge agreement.
  for (size_t v = 0; v < net.nodes_.size(); ++v) {
    const Intersection& n = net.nodes_[v];
    if (nb_edges[v].size() > 4)
      fail("validate", "intersection '" + n.id + "' has " + std::to_string(nb_edges[v].size()) +
                           " neighbors; at most 4 are supported");
    std::set<std::string> slot_nbs;
    for (const auto& slot : n.slots)
      if (slot) slot_nbs.insert(*slot);
    if (slot_nbs != nb_edges[v])
      fail("validate", "intersection '" + n.id + "': compass slots do not match the approaches");
  }

  // Every neighbor edge must exist in both directions, and lands in the slot
  // side implied by the compass assignment.
  net.approaches_ = std::move(approaches);
  for (size_t i = 0; i < net.approaches_.size(); ++i) {
    const Approach& a = net.approaches_[i];
    if (!net.index_.count(a.from) || !net.index_.count(a.to)) continue;
    if (!edge_pairs.count({a.to, a.from}))
      fail("validate", "approach '" + a.from + "' -> '" + a.to + "' has no reverse approach");
    int to = net.index_.at(a.to);
    int from = net.index_.at(a.from);
    Side in_side = Side::N;
    for (Side s : all_sides) {
      const auto& slot = net.nodes_[to].slots[static_cast<int>(s)];
      if (slot && *slot == a.from) in_side = s;
    }
    net.in_app_[to][static_cast<int>(in_side)] = static_cast<int>(i);
    net.out_app_[from][static_cast<int>(opposite(in_side))] = static_cast<int>(i);
  }

  for (size_t i = 0; i < net.entries_.size(); ++i)
    if (net.entry_app_[i] == -1)
      fail("validate", "entry arm '" + net.entries_[i].id + "' has no approach");
  for (const BoundaryArm& arm : net.exits_)
    if (net.out_app_[net.index_.at(arm.at)][static_cast<int>(arm.side)] == -1)
      fail("validate", "exit arm '" + arm.id + "' has no approach");

  net.lanes_in_.resize(net.nodes_.size());
  for (size_t v = 0; v < net.nodes_.size(); ++v)
    for (Side s : all_sides) {
      int app = net.in_app_[v][static_cast<int>(s)];
      if (app == -1) continue;
      for (int l = 0; l < net.approaches_[app].lanes; ++l)
        net.lanes_in_[v].push_back({app, l});
    }

  return net;
}

namespace {

const Json& need(const Json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) fail("parse", ctx + ": missing field '" + key + "'");
  return *it;
}

std::vector<BoundaryArm> parse_arms(const Json& list, const std::string& ctx) {
  std::vector<BoundaryArm> arms;
  for (size_t i = 0; i < list.size(); ++i) {
    const Json& a = list[i];
    std::string actx = ctx + "[" + std::to_string(i) + "]";
    BoundaryArm arm;
    arm.id = need(a, "id", actx).get<std::string>();
    arm.at = need(a, "at", actx).get<std::string>();
    arm.side = parse_side(need(a, "side", actx).get<std::string>());
    arms.push_back(std::move(arm));
  }
  return arms;
}

}  // namespace

RoadNetwork load_roadnet(const std::string& path) {
  Json j = read_json_file(path);
  try {
    std::vector<Intersection> nodes;
    for (size_t i = 0; i < need(j, "intersections", path).size(); ++i) {
      const Json& nj = j["intersections"][i];
      std::string ctx = path + ": intersections[" + std::to_string(i) + "]";
      Intersection n;
      n.id = need(nj, "id", ctx).get<std::string>();
      const Json& slots = need(nj, "slots", ctx);
      for (Side s : all_sides) {
        auto it = slots.find(side_name(s));
        if (it != slots.end() && !it->is_null())
          n.slots[static_cast<int>(s)] = it->get<std::string>();
      }
      nodes.push_back(std::move(n));
    }
    std::vector<Approach> approaches;
    for (size_t i = 0; i < need(j, "approaches", path).size(); ++i) {
      const Json& aj = j["approaches"][i];
      std::string ctx = path + ": approaches[" + std::to_string(i) + "]";
      Approach a;
      a.from = need(aj, "from", ctx).get<std::string>();
      a.to = need(aj, "to", ctx).get<std::string>();
      a.length_m = need(aj, "length_m", ctx).get<double>();
      a.lanes = need(aj, "lanes", ctx).get<int>();
      approaches.push_back(std::move(a));
    }
    const Json& boundary = need(j, "boundary", path);
    auto entries = parse_arms(need(boundary, "entries", path + ": boundary"), path + ": boundary.entries");
    auto exits = parse_arms(need(boundary, "exits", path + ": boundary"), path + ": boundary.exits");
    return build_roadnet(std::move(nodes), std::move(approaches), std::move(entries), std::move(exits));
  } catch (const nlohmann::json::exception& e) {
    fail("parse", path + ": " + e.what());
  }
}

namespace {

Json arms_to_json(const std::vector<BoundaryArm>& arms) {
  Json list = Json::array();
  for (const BoundaryArm& arm : arms)
    list.push_back({{"id", arm.id}, {"at", arm.at}, {"side", side_name(arm.side)}});
  return list;
}

}  // namespace

void save_roadnet(const RoadNetwork& net, const std::string& path) {
  Json j;
  j["intersections"] = Json::array();
  for (size_t i = 0; i < net.size(); ++i) {
    const Intersection& n = net.node(static_cast<int>(i));
    Json slots;
    for (Side s : all_sides) {
      const auto& slot = n.slots[static_cast<int>(s)];
      slots[side_name(s)] = slot ? Json(*slot) : Json(nullptr);
    }
    j["intersections"].push_back({{"id", n.id}, {"slots", slots}});
  }
  j["approaches"] = Json::array();
  for (const Approach& a : net.approaches())
    j["approaches"].push_back(
        {{"from", a.from}, {"to", a.to}, {"length_m", a.length_m}, {"lanes", a.lanes}});
  j["boundary"] = {{"entries", arms_to_json(net.entries())}, {"exits", arms_to_json(net.exits())}};
  write_json_file(path, j);
}

namespace {

std::string grid_id(int r, int c) { return std::to_string(r) + "-" + std::to_string(c); }

}  // namespace

RoadNetwork make_grid(int rows, int cols, double ns_length, double ew_length,
                      int lanes_per_approach) {
  if (rows < 1 || cols < 1) fail("config", "grid dimensions must be >= 1");
  if (!(ns_length > 0.0) || !(ew_length > 0.0)) fail("config", "grid segment lengths must be positive");
  if (lanes_per_approach < 1) fail("config", "lanes_per_approach must be >= 1");

  std::vector<Intersection> nodes;
  std::vector<Approach> approaches;
  std::vector<BoundaryArm> entries, exits;

  auto side_length = [&](Side s) {
    return (s == Side::N || s == Side::S) ? ns_length : ew_length;
  };

  for (int r = 1; r <= rows; ++r)
    for (int c = 1; c <= cols; ++c) {
      Intersection n;
      n.id = grid_id(r, c);
      if (r > 1) n.slots[static_cast<int>(Side::N)] = grid_id(r - 1, c);
      if (c < cols) n.slots[static_cast<int>(Side::E)] = grid_id(r, c + 1);
      if (r < rows) n.slots[static_cast<int>(Side::S)] = grid_id(r + 1, c);
      if (c > 1) n.slots[static_cast<int>(Side::W)] = grid_id(r, c - 1);

      for (Side s : all_sides) {
        if (n.slots[static_cast<int>(s)]) {
          approaches.push_back({n.id, *n.slots[static_cast<int>(s)], side_length(s), lanes_per_approach});
        } else {
          std::string src = std::string("src_") + side_name(s) + "_" + n.id;
          std::string snk = std::string("snk_") + side_name(s) + "_" + n.id;
          entries.push_back({src, n.id, s});
          exits.push_back({snk, n.id, s});
          approaches.push_back({src, n.id, side_length(s), lanes_per_approach});
          approaches.push_back({n.id, snk, side_length(s), lanes_per_approach});
        }
      }
      nodes.push_back(std::move(n));
    }

  return build_roadnet(std::move(nodes), std::move(approaches), std::move(entries), std::move(exits));
}

RoadNetwork make_cross(double arm_length, int lanes_per_approach) {
  if (!(arm_length > 0.0)) fail("config", "arm_length must be positive");
  if (lanes_per_approach < 1) fail("config", "lanes_per_approach must be >= 1");

  const std::string center = "2-2";
  const std::array<std::string, 4> leaf = {"1-2", "2-3", "3-2", "2-1"};  // N, E, S, W

  std::vector<Intersection> nodes;
  std::vector<Approach> approaches;
  std::vector<BoundaryArm> entries, exits;

  Intersection c;
  c.id = center;
  for (Side s : all_sides) c.slots[static_cast<int>(s)] = leaf[static_cast<int>(s)];
  nodes.push_back(c);

  for (Side s : all_sides) {
    Intersection n;
    n.id = leaf[static_cast<int>(s)];
    n.slots[static_cast<int>(opposite(s))] = center;
    approaches.push_back({center, n.id, arm_length, lanes_per_approach});
    approaches.push_back({n.id, center, arm_length, lanes_per_approach});
    for (Side t : all_sides) {
      if (t == opposite(s)) continue;
      std::string src = std::string("src_") + side_name(t) + "_" + n.id;
      std::string snk = std::string("snk_") + side_name(t) + "_" + n.id;
      entries.push_back({src, n.id, t});
      exits.push_back({snk, n.id, t});
      approaches.push_back({src, n.id, arm_length, lanes_per_approach});
      approaches.push_back({n.id, snk, arm_length, lanes_per_approach});
    }
    nodes.push_back(std::move(n));
  }

  return build_roadnet(std::move(nodes), std::move(approaches), std::move(entries), std::move(exits));
}

}  // namespace starlight
