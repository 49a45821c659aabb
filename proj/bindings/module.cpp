#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "starlight/harness.hpp"

namespace py = pybind11;
using namespace starlight;

namespace {

// JSON documents cross the boundary as native python objects via the json
// module; the C++ side never sees python containers directly.
py::object json_to_py(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Json py_to_json(const py::object& obj) {
  auto s = py::cast<std::string>(py::module_::import("json").attr("dumps")(obj));
  return Json::parse(s);
}

Json metrics_to_json(const Metrics& m) {
  Json j;
  j["att"] = m.att ? Json(*m.att) : Json(nullptr);
  j["aql"] = m.aql;
  j["tp"] = m.tp;
  j["in_network"] = m.in_network;
  j["deferred"] = m.deferred;
  return j;
}

// Accepts an experiment description as either a config-file path or a dict.
Experiment experiment_from(const py::object& config) {
  if (py::isinstance<py::str>(config)) return load_experiment(py::cast<std::string>(config));
  return Experiment::from_json(py_to_json(config), "");
}

std::vector<Phase> parse_phase_list(const py::object& phases, const RoadNetwork& net) {
  if (py::isinstance<py::dict>(phases)) {
    std::map<std::string, Phase> by_id;
    for (auto item : py::cast<py::dict>(phases))
      by_id[py::cast<std::string>(item.first)] = parse_phase(py::cast<std::string>(item.second));
    std::vector<Phase> out;
    out.reserve(net.size());
    for (const std::string& id : net.ids()) {
      auto it = by_id.find(id);
      if (it == by_id.end()) fail("config", "no phase given for intersection '" + id + "'");
      out.push_back(it->second);
    }
    if (by_id.size() != net.size()) fail("config", "phase map names unknown intersections");
    return out;
  }
  std::vector<Phase> out;
  for (auto p : py::cast<py::sequence>(phases)) out.push_back(parse_phase(py::cast<std::string>(p)));
  return out;
}

}  // namespace

PYBIND11_MODULE(_starlight, m) {
  m.doc() = "regional traffic-signal control laboratory";
  py::register_exception<Error>(m, "Error");

  m.def("version", [] { return "0.1.0"; });

  py::class_<RoadNetwork>(m, "RoadNetwork")
      .def("__len__", &RoadNetwork::size)
      .def_property_readonly("ids", &RoadNetwork::ids)
      .def("neighbors", &RoadNetwork::neighbors, py::arg("id"))
      .def("degree", &RoadNetwork::degree, py::arg("id"))
      .def("hop_distance", &RoadNetwork::hop_distance, py::arg("a"), py::arg("b"))
      .def("save", [](const RoadNetwork& net, const std::string& path) { save_roadnet(net, path); },
           py::arg("path"))
      .def("__repr__", [](const RoadNetwork& net) {
        return "RoadNetwork(" + std::to_string(net.size()) + " intersections)";
      });

  m.def("load_network", &load_roadnet, py::arg("path"));
  m.def("make_grid", &make_grid, py::arg("rows"), py::arg("cols"), py::arg("ns_length") = 300.0,
        py::arg("ew_length") = 300.0, py::arg("lanes") = 3);
  m.def("make_cross", &make_cross, py::arg("arm_length") = 300.0, py::arg("lanes") = 3);

  m.def(
      "minimum_dominating_set",
      [](const RoadNetwork& net) { return solve_min_dominating_set(net); }, py::arg("net"),
      "Exact minimum dominating set, lexicographically smallest among minima.");
  m.def("is_dominating_set", &is_dominating_set, py::arg("net"), py::arg("centers"));
  m.def("order_invariant", &check_uniqueness, py::arg("net"), py::arg("centers"),
        "True iff all pairwise center distances are >= 3 (unique region configuration).");
  m.def(
      "build_regions",
      [](const RoadNetwork& net, std::optional<std::vector<std::string>> centers,
         std::optional<std::uint64_t> shuffle_seed) {
        DominatingSet w = centers ? *centers : solve_min_dominating_set(net);
        RegionConfiguration config;
        if (shuffle_seed) {
          Rng rng(*shuffle_seed);
          config = construct_regions(net, w, shuffled_assignment_order(net, w, rng));
        } else {
          config = construct_regions(net, w);
        }
        return json_to_py(regions_to_json(config));
      },
      py::arg("net"), py::arg("centers") = std::nullopt, py::arg("shuffle_seed") = std::nullopt,
      "Star regions around the given (or solved) centers; slot order [center, N, E, S, W].");

  py::class_<Simulator>(m, "Simulator")
      .def(py::init([](const RoadNetwork& net, const py::object& flow, const py::object& config) {
             FlowSpec f = FlowSpec::from_json(py_to_json(flow));
             SimConfig c;
             if (!config.is_none()) c = SimConfig::from_json(py_to_json(config));
             return new Simulator(net, std::move(f), c);
           }),
           py::arg("net"), py::arg("flow"), py::arg("config") = py::none(),
           py::keep_alive<1, 2>())
      .def("reset", [](Simulator& s, std::uint64_t seed) { s.reset(seed); }, py::arg("seed"))
      .def("step",
           [](Simulator& s, const py::object& phases) {
             return s.step(parse_phase_list(phases, s.net()));
           },
           py::arg("phases"),
           "Holds phases (list in id order, or {id: phase} dict) for one action interval; "
           "returns per-intersection rewards in id order.")
      .def("observe", &Simulator::observe, py::arg("id"))
      .def("observation_dim", &Simulator::observation_dim, py::arg("id"))
      .def("pressure",
           [](const Simulator& s, const std::string& id, const std::string& phase) {
             return s.pressure(id, parse_phase(phase));
           },
           py::arg("id"), py::arg("phase"))
      .def("phase",
           [](const Simulator& s, const std::string& id) {
             return std::string(phase_name(s.phase(id)));
           },
           py::arg("id"))
      .def("metrics", [](const Simulator& s) { return json_to_py(metrics_to_json(s.metrics())); })
      .def_property_readonly("done", &Simulator::done)
      .def_property_readonly("clock_s", &Simulator::clock_s)
      .def_property_readonly("ids", [](const Simulator& s) { return s.net().ids(); });

  m.def(
      "train",
      [](const py::object& config, const std::string& out_dir, const py::object& on_episode) {
        Experiment exp = experiment_from(config);
        BranchingAgent agent(exp.agent);
        std::function<void(const Json&)> cb;
        if (!on_episode.is_none())
          cb = [&on_episode](const Json& line) { on_episode(json_to_py(line)); };
        std::vector<Json> history = train(exp, agent, out_dir, cb);
        Json eval_doc =
            evaluate(exp, agent_picker(agent, exp.regions), exp.eval_episodes, exp.eval_seed());
        write_json_file(out_dir + "/eval.json", eval_doc);
        return py::make_tuple(json_to_py(Json(history)), json_to_py(eval_doc));
      },
      py::arg("config"), py::arg("out_dir"), py::arg("on_episode") = py::none(),
      "Trains a fresh shared agent; writes the run directory and returns "
      "(episode history, final greedy evaluation).");

  m.def(
      "evaluate_controller",
      [](const py::object& config, const std::string& controller, int episodes,
         std::optional<std::uint64_t> seed) {
        Experiment exp = experiment_from(config);
        if (episodes <= 0) episodes = exp.eval_episodes;
        std::uint64_t seed0 = seed ? *seed : exp.eval_seed();
        Json result;
        if (controller == "fixed") {
          result = evaluate(exp, fixed_time_picker(), episodes, seed0);
        } else if (controller == "maxpressure") {
          result = evaluate(exp, max_pressure_picker(), episodes, seed0);
        } else if (controller == "random") {
          Rng rng(mix_seed(seed0, 1));
          result = evaluate(exp, random_picker(rng), episodes, seed0);
        } else {
          fail("config", "unknown controller '" + controller + "' (fixed, maxpressure, random)");
        }
        result["controller"] = controller;
        return json_to_py(result);
      },
      py::arg("config"), py::arg("controller"), py::arg("episodes") = 0,
      py::arg("seed") = std::nullopt);

  m.def(
      "evaluate_checkpoint",
      [](const std::string& checkpoint, const py::object& config, int episodes,
         std::optional<std::uint64_t> seed) {
        Experiment exp = experiment_from(config);
        BranchingAgent agent = BranchingAgent::load(checkpoint);
        if (agent.config().net.obs_dim != exp.agent.net.obs_dim)
          fail("config", "checkpoint expects observation dimension " +
                             std::to_string(agent.config().net.obs_dim) +
                             " but this network yields " + std::to_string(exp.agent.net.obs_dim));
        if (episodes <= 0) episodes = exp.eval_episodes;
        Json result = evaluate(exp, agent_picker(agent, exp.regions), episodes,
                               seed ? *seed : exp.eval_seed());
        return json_to_py(result);
      },
      py::arg("checkpoint"), py::arg("config"), py::arg("episodes") = 0,
      py::arg("seed") = std::nullopt);
}
