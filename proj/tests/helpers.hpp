#pragma once

#include <map>
#include <string>
#include <vector>

#include "starlight/net.hpp"
#include "starlight/rng.hpp"

namespace starlight::testing {

/// Random connected induced subgraph of a rows x cols lattice with `target`
/// cells, grown cell by cell from a random seed. Compass slots follow the
/// lattice, so any connected max-degree-4 layout this library admits can be
/// produced this way. No boundary arms (partitioning never looks at them).
inline RoadNetwork make_random_subgrid(Rng& rng, int rows, int cols, int target) {
  auto id_of = [](int r, int c) { return std::to_string(r) + "-" + std::to_string(c); };
  const int dr[] = {-1, 0, 1, 0}, dc[] = {0, 1, 0, -1};  // N, E, S, W

  std::map<std::pair<int, int>, bool> in;
  std::vector<std::pair<int, int>> cells, frontier;
  int r0 = 1 + static_cast<int>(rng.uniform_below(rows));
  int c0 = 1 + static_cast<int>(rng.uniform_below(cols));
  in[{r0, c0}] = true;
  cells.push_back({r0, c0});
  while (static_cast<int>(cells.size()) < target) {
    frontier.clear();
    for (auto [r, c] : cells)
      for (int d = 0; d < 4; ++d) {
        int nr = r + dr[d], nc = c + dc[d];
        if (nr < 1 || nr > rows || nc < 1 || nc > cols || in.count({nr, nc})) continue;
        frontier.push_back({nr, nc});
      }
    if (frontier.empty()) break;
    auto pick = frontier[rng.uniform_below(frontier.size())];
    in[pick] = true;
    cells.push_back(pick);
  }

  std::vector<Intersection> nodes;
  std::vector<Approach> approaches;
  for (auto [r, c] : cells) {
    Intersection n;
    n.id = id_of(r, c);
    for (int d = 0; d < 4; ++d) {
      int nr = r + dr[d], nc = c + dc[d];
      if (!in.count({nr, nc})) continue;
      n.slots[d] = id_of(nr, nc);
      approaches.push_back({n.id, id_of(nr, nc), 100.0, 1});
    }
    nodes.push_back(std::move(n));
  }
  return build_roadnet(std::move(nodes), std::move(approaches), {}, {});
}

}  // namespace starlight::testing
