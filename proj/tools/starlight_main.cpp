#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "starlight/harness.hpp"

using namespace starlight;

namespace {

void emit(const Json& doc, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    write_json_file(out_path, doc);
    std::cerr << "wrote " << out_path << "\n";
  }
}

int cmd_make_net(int rows, int cols, bool cross, double ns_length, double ew_length, int lanes,
                 const std::string& out_path) {
  RoadNetwork net = cross ? make_cross(ns_length, lanes)
                          : make_grid(rows, cols, ns_length, ew_length, lanes);
  save_roadnet(net, out_path);
  std::cerr << "wrote " << out_path << " (" << net.size() << " intersections)\n";
  return 0;
}

int cmd_partition(const std::string& net_path, std::uint64_t order_seed, bool shuffle,
                  const std::string& out_path) {
  RoadNetwork net = load_roadnet(net_path);
  std::vector<std::string> centers = solve_min_dominating_set(net);
  Rng order_rng(order_seed);
  AssignmentOrder order = shuffle ? shuffled_assignment_order(net, centers, order_rng)
                                  : default_assignment_order(net, centers);
  RegionConfiguration regions = construct_regions(net, centers, order);

  Json doc = regions_to_json(regions);
  doc["gamma"] = centers.size();
  doc["centers"] = centers;
  doc["order_invariant"] = check_uniqueness(net, centers);
  emit(doc, out_path);
  return 0;
}

int cmd_simulate(const std::string& net_path, const std::string& flow_path,
                 const std::string& controller, const std::string& sim_path, int episodes,
                 std::uint64_t seed, const std::string& out_path) {
  Json desc{{"network", {{"file", net_path}}}, {"flow", {{"file", flow_path}}}};
  if (!sim_path.empty()) desc["sim"] = read_json_file(sim_path);
  Experiment exp = Experiment::from_json(desc, "");

  Json result;
  if (controller == "fixed") {
    result = evaluate(exp, fixed_time_picker(), episodes, seed);
  } else if (controller == "maxpressure") {
    result = evaluate(exp, max_pressure_picker(), episodes, seed);
  } else if (controller == "random") {
    Rng rng(mix_seed(seed, 1));
    result = evaluate(exp, random_picker(rng), episodes, seed);
  } else {
    fail("config", "unknown controller '" + controller + "' (fixed, maxpressure, random)");
  }
  result["controller"] = controller;
  emit(result, out_path);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  Experiment exp = load_experiment(config_path);
  BranchingAgent agent(exp.agent);
  train(exp, agent, out_dir, [](const Json& line) {
    std::fprintf(stderr, "episode %4d  reward %10.3f  epsilon %.3f\n",
                 line["episode"].get<int>(), line["reward"].get<double>(),
                 line["epsilon"].get<double>());
  });

  Json eval_doc = evaluate(exp, agent_picker(agent, exp.regions), exp.eval_episodes,
                           exp.eval_seed());
  write_json_file(out_dir + "/eval.json", eval_doc);
  std::cerr << "wrote " << out_dir << "/eval.json\n";
  std::cout << eval_doc["mean"].dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& config_path,
                 int episodes, std::uint64_t seed, const std::string& out_path) {
  Experiment exp = load_experiment(config_path);
  BranchingAgent agent = BranchingAgent::load(checkpoint_path);
  if (agent.config().net.obs_dim != exp.agent.net.obs_dim)
    fail("config", "checkpoint expects observation dimension " +
                       std::to_string(agent.config().net.obs_dim) + " but this network yields " +
                       std::to_string(exp.agent.net.obs_dim));
  if (episodes <= 0) episodes = exp.eval_episodes;
  Json result = evaluate(exp, agent_picker(agent, exp.regions), episodes, seed);
  emit(result, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regional traffic-signal control: partitioning, simulation, training"};
  app.require_subcommand(1);

  std::string net_path, flow_path, sim_path, config_path, checkpoint_path, out_path, controller;
  std::uint64_t seed = 0;
  int episodes = 1;
  bool shuffle = false;
  int rows = 1, cols = 1, lanes = 3;
  bool cross = false;
  double ns_length = 300.0, ew_length = 300.0;

  CLI::App* make_net_cmd = app.add_subcommand("make-net", "Generate a grid or cross network");
  make_net_cmd->add_option("--rows", rows, "grid rows")->default_val(1);
  make_net_cmd->add_option("--cols", cols, "grid columns")->default_val(1);
  make_net_cmd->add_flag("--cross", cross, "single intersection with four neighbors");
  make_net_cmd->add_option("--ns-length", ns_length, "north-south segment length, m")
      ->default_val(300.0);
  make_net_cmd->add_option("--ew-length", ew_length, "east-west segment length, m")
      ->default_val(300.0);
  make_net_cmd->add_option("--lanes", lanes, "lanes per approach")->default_val(3);
  make_net_cmd->add_option("--out", out_path, "output path")->required();

  CLI::App* partition = app.add_subcommand(
      "partition", "Compute a minimum set of region centers and build the regions");
  partition->add_option("--net", net_path, "network json")->required();
  partition->add_option("--seed", seed, "shuffle the leaf assignment order with this seed");
  partition->add_flag("--shuffle", shuffle, "use the seeded assignment order");
  partition->add_option("--out", out_path, "write the result here instead of stdout");

  CLI::App* simulate =
      app.add_subcommand("simulate", "Run episodes under a fixed controller and report metrics");
  simulate->add_option("--net", net_path, "network json")->required();
  simulate->add_option("--flow", flow_path, "flow json")->required();
  simulate->add_option("--controller", controller, "fixed | maxpressure | random")->required();
  simulate->add_option("--sim", sim_path, "simulator config json");
  simulate->add_option("--episodes", episodes, "episode count")->default_val(1);
  simulate->add_option("--seed", seed, "episode seed base");
  simulate->add_option("--out", out_path, "write the result here instead of stdout");

  CLI::App* train_cmd = app.add_subcommand("train", "Train the shared regional agent");
  train_cmd->add_option("--config", config_path, "experiment json")->required();
  train_cmd->add_option("--out", out_path, "run directory")->required();

  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Greedy evaluation of a trained checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "agent checkpoint")->required();
  eval_cmd->add_option("--config", config_path, "experiment json")->required();
  eval_cmd->add_option("--episodes", episodes, "episode count (default from config)")
      ->default_val(0);
  eval_cmd->add_option("--seed", seed, "episode seed base");
  eval_cmd->add_option("--out", out_path, "write the result here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (make_net_cmd->parsed())
      return cmd_make_net(rows, cols, cross, ns_length, ew_length, lanes, out_path);
    if (partition->parsed()) return cmd_partition(net_path, seed, shuffle, out_path);
    if (simulate->parsed())
      return cmd_simulate(net_path, flow_path, controller, sim_path, episodes, seed, out_path);
    if (train_cmd->parsed()) return cmd_train(config_path, out_path);
    if (eval_cmd->parsed())
      return cmd_evaluate(checkpoint_path, config_path, episodes, seed, out_path);
  } catch (const Error& e) {
    std::cerr << "error (" << e.category() << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
