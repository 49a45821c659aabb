#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "starlight/net.hpp"

using namespace starlight;

namespace {

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("turn and phase geometry") {
  SUBCASE("exit sides from the north entrance") {
    CHECK_EQ(exit_side(Side::N, Turn::Straight), Side::S);
    CHECK_EQ(exit_side(Side::N, Turn::Left), Side::E);
    CHECK_EQ(exit_side(Side::N, Turn::Right), Side::W);
  }
  SUBCASE("exit side round trip: a straight vehicle keeps its axis") {
    for (Side s : all_sides) CHECK_EQ(exit_side(s, Turn::Straight), opposite(s));
  }
  SUBCASE("lane assignment collapses on narrow approaches") {
    CHECK_EQ(lane_for_turn(Turn::Left, 3), 0);
    CHECK_EQ(lane_for_turn(Turn::Straight, 3), 1);
    CHECK_EQ(lane_for_turn(Turn::Right, 3), 2);
    CHECK_EQ(lane_for_turn(Turn::Right, 2), 1);
    CHECK_EQ(lane_for_turn(Turn::Straight, 1), 0);
    CHECK_EQ(lane_for_turn(Turn::Right, 1), 0);
  }
  SUBCASE("each phase greens exactly its axis/turn pair") {
    CHECK(phase_permits(Phase::NS, Side::N, Turn::Straight));
    CHECK(phase_permits(Phase::NS, Side::S, Turn::Straight));
    CHECK_FALSE(phase_permits(Phase::NS, Side::N, Turn::Left));
    CHECK_FALSE(phase_permits(Phase::NS, Side::E, Turn::Straight));
    CHECK(phase_permits(Phase::NSL, Side::N, Turn::Left));
    CHECK(phase_permits(Phase::EW, Side::E, Turn::Straight));
    CHECK(phase_permits(Phase::EWL, Side::W, Turn::Left));
  }
  SUBCASE("right turns are green under every phase") {
    for (Phase p : all_phases)
      for (Side s : all_sides) CHECK(phase_permits(p, s, Turn::Right));
  }
}

TEST_CASE("4x4 grid structure") {
  RoadNetwork net = make_grid(4, 4, 600, 600, 3);
  CHECK_EQ(net.size(), 16);

  SUBCASE("corner, edge, and interior neighborhoods") {
    CHECK_EQ(as_set(net.neighbors("1-1")), std::set<std::string>{"1-2", "2-1"});
    CHECK_EQ(as_set(net.neighbors("2-2")), std::set<std::string>{"1-2", "2-1", "2-3", "3-2"});
    int corners = 0, edges = 0, interior = 0;
    for (const auto& id : net.ids()) {
      switch (net.degree(id)) {
        case 2: ++corners; break;
        case 3: ++edges; break;
        case 4: ++interior; break;
        default: FAIL("unexpected degree at " << id);
      }
    }
    CHECK_EQ(corners, 4);
    CHECK_EQ(edges, 8);
    CHECK_EQ(interior, 4);
  }

  SUBCASE("compass slots are mirrored") {
    for (size_t i = 0; i < net.size(); ++i) {
      const Intersection& n = net.node(static_cast<int>(i));
      for (Side s : all_sides) {
        const auto& slot = n.slots[static_cast<int>(s)];
        if (!slot) continue;
        const Intersection& other = net.node(net.index(*slot));
        REQUIRE(other.slots[static_cast<int>(opposite(s))].has_value());
        CHECK_EQ(*other.slots[static_cast<int>(opposite(s))], n.id);
      }
    }
  }

  SUBCASE("every intersection has four incoming approaches worth of lanes") {
    for (const auto& id : net.ids())
      CHECK_EQ(net.entering_lanes(net.index(id)).size(), 12);  // 4 sides x 3 lanes
  }

  SUBCASE("hop distances") {
    CHECK_EQ(net.hop_distance("2-3", "2-3"), 0);
    CHECK_EQ(net.hop_distance("1-3", "2-1"), 3);
    CHECK_EQ(net.hop_distance("1-1", "4-4"), 6);
    CHECK_EQ(net.hop_distance("1-1", "1-2"), 1);
  }

  SUBCASE("distance 1 exactly characterizes neighborhood") {
    for (const auto& a : net.ids())
      for (const auto& b : net.ids()) {
        bool nb = as_set(net.neighbors(a)).count(b) > 0;
        CHECK_EQ(net.hop_distance(a, b) == 1, nb);
      }
  }

  SUBCASE("triangle inequality") {
    const auto& ids = net.ids();
    for (size_t a = 0; a < ids.size(); a += 3)
      for (size_t b = 0; b < ids.size(); b += 2)
        for (size_t c = 0; c < ids.size(); c += 5) {
          int ab = net.hop_distance(ids[a], ids[b]);
          int bc = net.hop_distance(ids[b], ids[c]);
          int ac = net.hop_distance(ids[a], ids[c]);
          CHECK_LE(ac, ab + bc);
        }
  }
}

TEST_CASE("16x3 grid structure") {
  RoadNetwork net = make_grid(16, 3, 100, 350, 3);
  CHECK_EQ(net.size(), 48);
  CHECK_EQ(net.neighbors("1-2").size(), 3);

  SUBCASE("segment lengths follow the axis") {
    // 1-1 -> 2-1 runs north-south; 1-1 -> 1-2 east-west.
    for (const Approach& a : net.approaches()) {
      if (a.from == "1-1" && a.to == "2-1") CHECK_EQ(a.length_m, 100);
      if (a.from == "1-1" && a.to == "1-2") CHECK_EQ(a.length_m, 350);
    }
  }
}

TEST_CASE("1x1 grid: isolated intersection with four arm pairs") {
  RoadNetwork net = make_grid(1, 1, 200, 200, 2);
  CHECK_EQ(net.size(), 1);
  CHECK_EQ(net.degree("1-1"), 0);
  CHECK_EQ(net.entries().size(), 4);
  CHECK_EQ(net.exits().size(), 4);
  CHECK_EQ(net.entering_lanes(0).size(), 8);  // 4 entry arms x 2 lanes
  CHECK_EQ(net.hop_distance("1-1", "1-1"), 0);
}

TEST_CASE("cross network is a fully loaded star") {
  RoadNetwork net = make_cross(300, 3);
  CHECK_EQ(net.size(), 5);
  CHECK_EQ(net.degree("2-2"), 4);
  CHECK_EQ(as_set(net.neighbors("2-2")), std::set<std::string>{"1-2", "2-1", "2-3", "3-2"});
  for (const std::string& leaf : {"1-2", "2-3", "3-2", "2-1"}) {
    CHECK_EQ(net.degree(leaf), 1);
    CHECK_EQ(net.hop_distance(leaf, "2-2"), 1);
  }
  CHECK_EQ(net.entries().size(), 12);  // 3 open sides per leaf
  CHECK_EQ(net.exits().size(), 12);
}

TEST_CASE("unknown intersections are rejected") {
  RoadNetwork net = make_grid(2, 2, 100, 100, 1);
  CHECK_THROWS_AS(net.neighbors("9-9"), Error);
  CHECK_THROWS_AS(net.hop_distance("1-1", "9-9"), Error);
  try {
    net.neighbors("9-9");
  } catch (const Error& e) {
    CHECK_EQ(e.category(), "validate");
  }
}

TEST_CASE("degree-5 intersection is rejected naming the hub") {
  std::vector<Intersection> nodes(6);
  nodes[0].id = "2-2";  // hub
  const char* spoke_ids[] = {"1-2", "2-3", "3-2", "2-1", "9-9"};
  for (int i = 0; i < 5; ++i) nodes[i + 1].id = spoke_ids[i];
  for (int i = 0; i < 4; ++i) {
    nodes[0].slots[i] = spoke_ids[i];
    nodes[i + 1].slots[(i + 2) % 4] = "2-2";
  }
  std::vector<Approach> apps;
  for (int i = 0; i < 5; ++i) {
    apps.push_back({"2-2", spoke_ids[i], 100.0, 1});
    apps.push_back({spoke_ids[i], "2-2", 100.0, 1});
  }
  try {
    build_roadnet(nodes, apps, {}, {});
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK_EQ(e.category(), "validate");
    CHECK(std::string(e.what()).find("2-2") != std::string::npos);
    CHECK(std::string(e.what()).find("5 neighbors") != std::string::npos);
  }
}

TEST_CASE("save/load round trip preserves the network") {
  RoadNetwork net = make_grid(3, 2, 150, 250, 2);
  auto path = std::filesystem::temp_directory_path() / "starlight_roundtrip_net.json";
  save_roadnet(net, path.string());
  RoadNetwork back = load_roadnet(path.string());

  CHECK_EQ(back.size(), net.size());
  CHECK_EQ(back.ids(), net.ids());
  CHECK_EQ(back.approaches().size(), net.approaches().size());
  for (const auto& id : net.ids()) {
    CHECK_EQ(back.neighbors(id), net.neighbors(id));
    CHECK_EQ(back.entering_lanes(back.index(id)).size(), net.entering_lanes(net.index(id)).size());
  }
  CHECK_EQ(back.entries().size(), net.entries().size());
  CHECK_EQ(back.exits().size(), net.exits().size());
  std::filesystem::remove(path);
}

TEST_CASE("loader rejects malformed input") {
  namespace fs = std::filesystem;
  auto path = fs::temp_directory_path() / "starlight_bad_net.json";

  SUBCASE("missing file") { CHECK_THROWS_AS(load_roadnet("/nonexistent/net.json"), Error); }

  SUBCASE("not json") {
    { std::ofstream(path) << "not json at all"; }
    try {
      load_roadnet(path.string());
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK_EQ(e.category(), "parse");
    }
    fs::remove(path);
  }

  SUBCASE("missing approach field") {
    { std::ofstream(path) << R"({"intersections":[{"id":"1-1","slots":{}}],
        "approaches":[{"from":"src_N_1-1","to":"1-1","lanes":1}],
        "boundary":{"entries":[{"id":"src_N_1-1","at":"1-1","side":"N"}],"exits":[]}})"; }
    try {
      load_roadnet(path.string());
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK_EQ(e.category(), "parse");
      CHECK(std::string(e.what()).find("length_m") != std::string::npos);
    }
    fs::remove(path);
  }
}
