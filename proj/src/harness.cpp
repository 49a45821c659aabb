#include "starlight/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

namespace starlight {

namespace {

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty() || path.front() == '/' || base_dir.empty()) return path;
  return base_dir + "/" + path;
}

/// All regions share one network, so every intersection must observe the
/// same dimension; make_grid/make_cross guarantee four approaches per node.
int per_node_obs_dim(const RoadNetwork& net) {
  int dim = -1;
  for (size_t v = 0; v < net.size(); ++v) {
    int d = 2 * static_cast<int>(net.entering_lanes(static_cast<int>(v)).size()) + 4;
    if (dim < 0) dim = d;
    if (d != dim)
      fail("config", "intersection '" + net.id(static_cast<int>(v)) +
                         "' observes dimension " + std::to_string(d) + " but '" + net.id(0) +
                         "' observes " + std::to_string(dim) +
                         "; a shared network needs uniform observations");
  }
  return dim;
}

std::vector<bool> region_mask(const Region& r) {
  return std::vector<bool>(r.mask.begin(), r.mask.end());
}

Json metrics_json(const Metrics& m) {
  Json j;
  j["att"] = m.att ? Json(*m.att) : Json(nullptr);
  j["aql"] = m.aql;
  j["tp"] = m.tp;
  j["in_network"] = m.in_network;
  j["deferred"] = m.deferred;
  return j;
}

}  // namespace

Experiment Experiment::from_json(const Json& j, const std::string& base_dir) {
  Experiment e;
  if (!j.contains("network")) fail("parse", "experiment: 'network' section is required");
  const Json& n = j["network"];
  if (n.contains("file")) {
    e.net = load_roadnet(resolve_path(base_dir, n["file"].get<std::string>()));
  } else if (n.contains("grid")) {
    const Json& g = n["grid"];
    if (!g.contains("rows") || !g.contains("cols"))
      fail("parse", "experiment: network.grid needs 'rows' and 'cols'");
    e.net = make_grid(g["rows"].get<int>(), g["cols"].get<int>(), g.value("ns_length", 300.0),
                      g.value("ew_length", 300.0), g.value("lanes", 3));
  } else if (n.contains("cross")) {
    const Json& c = n["cross"];
    e.net = make_cross(c.value("arm_length", 300.0), c.value("lanes", 3));
  } else {
    fail("parse", "experiment: network needs 'file', 'grid', or 'cross'");
  }
  e.network_desc = n;

  if (!j.contains("flow")) fail("parse", "experiment: 'flow' section is required");
  if (j["flow"].contains("file"))
    e.flow = load_flow(resolve_path(base_dir, j["flow"]["file"].get<std::string>()));
  else
    e.flow = FlowSpec::from_json(j["flow"]);

  e.sim = SimConfig::from_json(j.value("sim", Json::object()));

  if (j.contains("regions") && j["regions"].contains("centers")) {
    e.centers = j["regions"]["centers"].get<std::vector<std::string>>();
  } else {
    e.centers = solve_min_dominating_set(e.net);
  }
  e.regions = construct_regions(e.net, e.centers);

  e.episodes = j.value("episodes", e.episodes);
  e.eval_episodes = j.value("eval_episodes", e.eval_episodes);
  e.checkpoint_every = j.value("checkpoint_every", e.checkpoint_every);
  e.seed = j.value("seed", e.seed);

  Json a = j.value("agent", Json::object());
  if (!a.contains("net") || !a["net"].is_object()) a["net"] = Json::object();
  a["net"]["obs_dim"] = 5 * per_node_obs_dim(e.net);
  a["net"]["n_branches"] = 5;
  if (!a.contains("seed")) a["seed"] = e.seed;
  e.agent = AgentConfig::from_json(a);
  if (e.agent.net.n_actions != 4)
    fail("config", "agent: n_actions must be 4, one per signal phase");
  return e;
}

Json Experiment::resolved_json() const {
  return Json{{"network", network_desc},
              {"flow", flow.to_json()},
              {"sim", sim.to_json()},
              {"regions", Json{{"centers", centers}}},
              {"agent", agent.to_json()},
              {"episodes", episodes},
              {"eval_episodes", eval_episodes},
              {"checkpoint_every", checkpoint_every},
              {"seed", seed}};
}

Experiment load_experiment(const std::string& path) {
  std::string dir = std::filesystem::path(path).parent_path().string();
  return Experiment::from_json(read_json_file(path), dir);
}

PhasePicker fixed_time_picker() {
  return [](const Simulator& sim, int interval) {
    return std::vector<Phase>(sim.net().size(), all_phases[interval % 4]);
  };
}

PhasePicker random_picker(Rng& rng) {
  return [&rng](const Simulator& sim, int) {
    std::vector<Phase> phases(sim.net().size());
    for (Phase& p : phases) p = all_phases[rng.uniform_below(4)];
    return phases;
  };
}

PhasePicker max_pressure_picker() {
  return [](const Simulator& sim, int) {
    const RoadNetwork& net = sim.net();
    std::vector<Phase> phases(net.size());
    for (size_t v = 0; v < net.size(); ++v) {
      Phase best = Phase::NS;
      double best_p = sim.pressure(net.id(static_cast<int>(v)), Phase::NS);
      for (int i = 1; i < 4; ++i) {
        double p = sim.pressure(net.id(static_cast<int>(v)), all_phases[i]);
        if (p > best_p) {
          best_p = p;
          best = all_phases[i];
        }
      }
      phases[v] = best;
    }
    return phases;
  };
}

PhasePicker agent_picker(BranchingAgent& agent, const RegionConfiguration& regions) {
  return [&agent, &regions](const Simulator& sim, int) {
    const RoadNetwork& net = sim.net();
    std::vector<Phase> phases(net.size(), Phase::NS);
    for (const Region& r : regions.regions) {
      std::vector<double> obs = region_observation(r, sim);
      std::vector<int> acts = agent.select_actions(obs, region_mask(r), true);
      for (int slot = 0; slot < 5; ++slot)
        if (r.mask[slot]) phases[net.index(r.slots[slot])] = all_phases[acts[slot]];
    }
    return phases;
  };
}

EpisodeOutcome run_episode(Simulator& sim, const RegionConfiguration& regions,
                           const PhasePicker& pick) {
  double reward_sum = 0.0;
  while (!sim.done()) {
    std::vector<Phase> phases = pick(sim, sim.interval_index());
    std::vector<double> rewards = sim.step(phases);
    // Regions partition the nodes, so the region sums add up to the network sum.
    for (const Region& r : regions.regions) reward_sum += region_reward(r, rewards, sim.net());
  }
  return {sim.metrics(), reward_sum / static_cast<double>(sim.net().size())};
}

std::vector<Json> train(const Experiment& exp, BranchingAgent& agent, const std::string& out_dir,
                        const std::function<void(const Json&)>& on_episode) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_json_file(out_dir + "/config.json", exp.resolved_json());
  write_json_file(out_dir + "/regions.json", regions_to_json(exp.regions));

  std::ofstream metrics_out(out_dir + "/metrics.jsonl");
  std::ofstream timings_out(out_dir + "/timings.jsonl");
  if (!metrics_out || !timings_out) fail("io", "cannot write logs under '" + out_dir + "'");

  const std::vector<Region>& regions = exp.regions.regions;
  std::vector<std::vector<bool>> masks;
  std::vector<std::vector<std::uint8_t>> masks_u8;
  for (const Region& r : regions) {
    masks.push_back(region_mask(r));
    masks_u8.emplace_back(r.mask.begin(), r.mask.end());
  }

  Simulator sim(exp.net, exp.flow, exp.sim);
  std::vector<Json> history;
  for (int episode = 0; episode < exp.episodes; ++episode) {
    auto t0 = std::chrono::steady_clock::now();
    sim.reset(mix_seed(exp.seed, static_cast<std::uint64_t>(episode)));

    std::vector<std::vector<double>> obs;
    obs.reserve(regions.size());
    for (const Region& r : regions) obs.push_back(region_observation(r, sim));

    double reward_sum = 0.0;
    double loss_sum = 0.0;
    int losses = 0;
    while (!sim.done()) {
      std::vector<std::vector<int>> acts(regions.size());
      std::vector<Phase> phases(exp.net.size(), Phase::NS);
      for (size_t r = 0; r < regions.size(); ++r) {
        acts[r] = agent.select_actions(obs[r], masks[r], false);
        for (int slot = 0; slot < 5; ++slot)
          if (regions[r].mask[slot])
            phases[exp.net.index(regions[r].slots[slot])] = all_phases[acts[r][slot]];
      }

      std::vector<double> rewards = sim.step(phases);
      bool done = sim.done();
      for (size_t r = 0; r < regions.size(); ++r) {
        double rr = region_reward(regions[r], rewards, exp.net);
        reward_sum += rr;
        std::vector<double> next = region_observation(regions[r], sim);
        Transition t;
        t.obs.assign(obs[r].begin(), obs[r].end());
        t.actions.assign(acts[r].begin(), acts[r].end());
        t.activated = masks_u8[r];
        t.reward = static_cast<float>(rr);
        t.next_obs.assign(next.begin(), next.end());
        t.done = done ? 1 : 0;
        agent.store(std::move(t));
        obs[r] = std::move(next);
      }

      agent.advance_step();
      if (auto loss = agent.learn_step()) {
        loss_sum += *loss;
        ++losses;
      }
    }

    Metrics m = sim.metrics();
    Json line;
    line["episode"] = episode;
    line["reward"] = reward_sum / static_cast<double>(exp.net.size());
    line["loss"] = losses > 0 ? Json(loss_sum / losses) : Json(nullptr);
    line["epsilon"] = agent.epsilon();
    line.update(metrics_json(m));
    metrics_out << line.dump() << '\n';
    if (on_episode) on_episode(line);
    history.push_back(std::move(line));

    auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    timings_out << Json{{"episode", episode}, {"wall_ms", wall}}.dump() << '\n';
    metrics_out.flush();
    timings_out.flush();

    if (exp.checkpoint_every > 0 && (episode + 1) % exp.checkpoint_every == 0)
      agent.save(out_dir + "/checkpoint_ep" + std::to_string(episode + 1) + ".bin");
  }
  agent.save(out_dir + "/checkpoint.bin");
  return history;
}

Json evaluate(const Experiment& exp, const PhasePicker& pick, int episodes,
              std::uint64_t seed0) {
  if (episodes < 1) fail("config", "evaluation needs at least one episode");
  Simulator sim(exp.net, exp.flow, exp.sim);
  Json per = Json::array();
  double att_sum = 0.0, aql_sum = 0.0, reward_sum = 0.0;
  std::int64_t tp_sum = 0;
  int att_n = 0;
  for (int e = 0; e < episodes; ++e) {
    sim.reset(mix_seed(seed0, static_cast<std::uint64_t>(e)));
    EpisodeOutcome out = run_episode(sim, exp.regions, pick);
    Json line;
    line["episode"] = e;
    line["reward"] = out.episode_reward;
    line.update(metrics_json(out.metrics));
    per.push_back(std::move(line));
    if (out.metrics.att) {
      att_sum += *out.metrics.att;
      ++att_n;
    }
    aql_sum += out.metrics.aql;
    tp_sum += out.metrics.tp;
    reward_sum += out.episode_reward;
  }
  Json mean;
  mean["att"] = att_n > 0 ? Json(att_sum / att_n) : Json(nullptr);
  mean["aql"] = aql_sum / episodes;
  mean["tp"] = static_cast<double>(tp_sum) / episodes;
  mean["reward"] = reward_sum / episodes;
  return Json{{"episodes", episodes}, {"seed", seed0}, {"mean", mean}, {"per_episode", per}};
}

}  // namespace starlight
