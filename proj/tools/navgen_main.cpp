// Command-line pipeline: synthesize a grid city, partition it into
// zones, train the generator, generate trajectories for OD requests,
// evaluate against real data, and run the reference baselines.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "navgen/baselines.hpp"
#include "navgen/gridgen.hpp"
#include "navgen/metrics.hpp"
#include "navgen/model.hpp"
#include "navgen/partition.hpp"
#include "navgen/search.hpp"
#include "navgen/trainer.hpp"
#include "navgen/trajfile.hpp"
#include "navgen/trajgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw navgen::config_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path))
    throw navgen::config_error(std::string(what) + " not found: " + path);
}

struct SynthArgs {
  int rows = 8, cols = 8;
  double spacing = 500.0, origin_lon = 0.0, origin_lat = 0.0;
  int avenue_every = 4;
  int count = 5000;
  double beta = 1.0;
  double speed_noise = 0.1;
  std::vector<double> speeds = {30.0, 50.0};
  uint64_t seed = 0;
  std::string out_dir = "data";
};

int run_synth(const SynthArgs& a) {
  navgen::GridSpec spec;
  spec.rows = a.rows;
  spec.cols = a.cols;
  spec.spacing_m = a.spacing;
  spec.origin_lon = a.origin_lon;
  spec.origin_lat = a.origin_lat;
  spec.avenue_every = a.avenue_every;
  navgen::RoadNetwork net = navgen::grid_network(spec);

  navgen::SynthPolicy policy;
  policy.beta = a.beta;
  policy.speed_kmh = a.speeds;
  policy.speed_noise = a.speed_noise;
  policy.seed = a.seed;
  std::vector<navgen::Trajectory> trajectories =
      navgen::synth_trajectories(net, a.count, policy);

  fs::create_directories(a.out_dir);
  net.save(a.out_dir + "/network.csv");
  navgen::save_trajectories(trajectories, a.out_dir + "/trajectories.jsonl");
  write_json(json{{"command", "synth"},
                  {"rows", a.rows},
                  {"cols", a.cols},
                  {"spacing_m", a.spacing},
                  {"origin_lon", a.origin_lon},
                  {"origin_lat", a.origin_lat},
                  {"avenue_every", a.avenue_every},
                  {"count", a.count},
                  {"beta", a.beta},
                  {"speed_kmh", a.speeds},
                  {"speed_noise", a.speed_noise},
                  {"seed", a.seed},
                  {"segments", net.size()}},
             a.out_dir + "/config.json");
  std::cout << "wrote " << net.size() << " segments and " << trajectories.size()
            << " trajectories to " << a.out_dir << "\n";
  return 0;
}

struct PartitionArgs {
  std::string network;
  int k = 0;  // 0 = default max(2, ceil(|V|/500))
  double epsilon = 0.1;
  uint64_t seed = 0;
  std::string out = "zones.csv";
};

int run_partition(const PartitionArgs& a) {
  require_file(a.network, "network file");
  navgen::RoadNetwork net = navgen::RoadNetwork::load(a.network);
  const int k = a.k > 0 ? a.k : std::max(2, (net.size() + 499) / 500);
  navgen::ZonePartition part = navgen::partition_zones(net, k, a.epsilon, a.seed);
  navgen::save_partition(part, a.out);
  write_json(json{{"command", "partition"},
                  {"network", a.network},
                  {"k", k},
                  {"epsilon", a.epsilon},
                  {"seed", a.seed},
                  {"cut_edges", navgen::partition_cut(net, part.zone_of)}},
             a.out + ".config.json");
  std::cout << "partitioned " << net.size() << " segments into " << k << " zones ("
            << navgen::partition_cut(net, part.zone_of) << " cut pairs)\n";
  return 0;
}

struct TrainArgs {
  std::string network, zones, trajectories;
  std::string out_dir = "run";
  navgen::TrainConfig cfg;
  double train_ratio = 0.7, val_ratio = 0.1;
  int max_requests = 0;  // 0 = all test trajectories
};

int run_train(const TrainArgs& a) {
  require_file(a.network, "network file");
  require_file(a.zones, "partition file");
  require_file(a.trajectories, "trajectory file");
  navgen::RoadNetwork net = navgen::RoadNetwork::load(a.network);
  navgen::ZonePartition part = navgen::load_partition(a.zones, net);
  std::vector<navgen::Trajectory> all = navgen::load_trajectories(a.trajectories);

  navgen::SplitResult split =
      navgen::validate_and_split(all, a.train_ratio, a.val_ratio, a.cfg.seed);
  if (split.train.empty()) throw navgen::data_error("no trajectories survive the filters");
  for (const navgen::Trajectory& t : split.train) navgen::validate_against_network(t, net);
  for (const navgen::Trajectory& t : split.val) navgen::validate_against_network(t, net);
  for (const navgen::Trajectory& t : split.test) navgen::validate_against_network(t, net);

  fs::create_directories(a.out_dir);
  navgen::save_trajectories(split.train, a.out_dir + "/train_split.jsonl");
  navgen::save_trajectories(split.val, a.out_dir + "/val_split.jsonl");
  navgen::save_trajectories(split.test, a.out_dir + "/test_split.jsonl");
  split.report.save_csv(a.out_dir + "/filter_report.csv");

  std::vector<navgen::GenRequest> requests;
  for (const navgen::Trajectory& t : split.test) {
    requests.push_back({t.points.front().segment, t.points.front().time_s,
                        t.points.back().segment});
    if (a.max_requests > 0 && static_cast<int>(requests.size()) >= a.max_requests) break;
  }
  navgen::save_requests(requests, a.out_dir + "/test_requests.csv");

  navgen::TrainReport report;
  navgen::Model model = navgen::train(net, part, a.cfg, split.train, split.val, &report);
  model.save(a.out_dir + "/checkpoint.bin");
  report.save_csv(a.out_dir + "/train_report.csv");

  write_json(json{{"command", "train"},
                  {"network", a.network},
                  {"zones", a.zones},
                  {"trajectories", a.trajectories},
                  {"model", json::parse(a.cfg.model.to_json())},
                  {"learning_rate", a.cfg.learning_rate},
                  {"epochs", a.cfg.epochs},
                  {"batch_size", a.cfg.batch_size},
                  {"grad_clip", a.cfg.grad_clip},
                  {"seed", a.cfg.seed},
                  {"train_ratio", a.train_ratio},
                  {"val_ratio", a.val_ratio},
                  {"kept", split.report.kept},
                  {"final_val_loss", report.val_loss.empty() ? 0.0 : report.val_loss.back()}},
             a.out_dir + "/config.json");
  std::cout << "trained " << a.cfg.epochs << " epochs on " << split.train.size()
            << " trajectories; final val loss "
            << (report.val_loss.empty() ? 0.0 : report.val_loss.back()) << "\n";
  return 0;
}

struct GenerateArgs {
  std::string network, zones, checkpoint, requests;
  std::string out = "generated.jsonl";
  int budget_factor = 50;
  int threads = 0;
  double max_failure_rate = 1.0;
};

int run_generate(const GenerateArgs& a) {
  require_file(a.network, "network file");
  require_file(a.zones, "partition file");
  require_file(a.checkpoint, "checkpoint");
  require_file(a.requests, "request file");
  navgen::RoadNetwork net = navgen::RoadNetwork::load(a.network);
  navgen::ZonePartition part = navgen::load_partition(a.zones, net);
  navgen::Model model = navgen::Model::load(net, part, a.checkpoint);
  std::vector<navgen::GenRequest> requests = navgen::load_requests(a.requests);

  navgen::FrozenModel frozen(model);
  navgen::SearchLimits limits;
  limits.max_pops = static_cast<int64_t>(a.budget_factor) * net.size();
  const int threads =
      a.threads > 0 ? a.threads : std::max(1u, std::thread::hardware_concurrency());
  navgen::BatchResult result =
      navgen::generate_batch(navgen::model_policy(frozen), net, requests, limits, threads);

  std::vector<navgen::Trajectory> ok;
  for (size_t i = 0; i < result.trajectories.size(); ++i) {
    if (result.trajectories[i].has_value()) {
      navgen::Trajectory t = *result.trajectories[i];
      t.id = static_cast<int64_t>(i);
      ok.push_back(std::move(t));
    }
  }
  navgen::save_trajectories(ok, a.out);
  {
    std::ofstream fail(a.out + ".failures.csv", std::ios::binary);
    fail << "request_index,error\n";
    for (size_t i = 0; i < result.errors.size(); ++i)
      if (!result.errors[i].empty()) fail << i << ",\"" << result.errors[i] << "\"\n";
  }
  const double failure_rate =
      requests.empty() ? 0.0
                       : 1.0 - static_cast<double>(result.succeeded) / requests.size();
  write_json(json{{"command", "generate"},
                  {"network", a.network},
                  {"zones", a.zones},
                  {"checkpoint", a.checkpoint},
                  {"requests", a.requests},
                  {"budget_factor", a.budget_factor},
                  {"max_pops", limits.max_pops},
                  {"threads", threads},
                  {"succeeded", result.succeeded},
                  {"failed", static_cast<int64_t>(requests.size()) - result.succeeded},
                  {"failure_rate", failure_rate}},
             a.out + ".config.json");
  std::cout << "generated " << result.succeeded << "/" << requests.size() << " trajectories\n";
  if (failure_rate > a.max_failure_rate) {
    std::cerr << "failure rate " << failure_rate << " exceeds the allowed "
              << a.max_failure_rate << "\n";
    return 4;
  }
  return 0;
}

struct EvaluateArgs {
  std::string network, real, generated;
  std::string out_dir = "eval";
  navgen::EvalOptions opt;
};

int run_evaluate(const EvaluateArgs& a) {
  require_file(a.network, "network file");
  require_file(a.real, "real trajectory file");
  require_file(a.generated, "generated trajectory file");
  navgen::RoadNetwork net = navgen::RoadNetwork::load(a.network);
  std::vector<navgen::Trajectory> real = navgen::load_trajectories(a.real);
  std::vector<navgen::Trajectory> gen = navgen::load_trajectories(a.generated);
  navgen::MetricsReport rep = navgen::evaluate(real, gen, net, a.opt);
  rep.save(a.out_dir);
  write_json(json{{"command", "evaluate"},
                  {"network", a.network},
                  {"real", a.real},
                  {"generated", a.generated},
                  {"bins", a.opt.bins},
                  {"grid_m", a.opt.grid_m},
                  {"edr_threshold_m", a.opt.edr_threshold_m},
                  {"max_pairs_per_key", a.opt.max_pairs_per_key}},
             a.out_dir + "/config.json");
  std::cout << rep.summary();
  return 0;
}

struct BaselineArgs {
  std::string method = "markov";
  std::string network, train, requests;
  std::string out = "baseline.jsonl";
  double speed_kmh = 30.0;
  uint64_t seed = 0;
  int budget_factor = 50;
};

int run_baseline(const BaselineArgs& a) {
  require_file(a.network, "network file");
  require_file(a.requests, "request file");
  navgen::RoadNetwork net = navgen::RoadNetwork::load(a.network);
  std::vector<navgen::GenRequest> requests = navgen::load_requests(a.requests);

  navgen::MarkovModel markov;
  if (a.method == "markov" || a.method == "markov_search") {
    require_file(a.train, "training trajectory file");
    markov = navgen::markov_fit(navgen::load_trajectories(a.train), net);
  }
  navgen::SearchLimits limits;
  limits.max_pops = static_cast<int64_t>(a.budget_factor) * net.size();

  std::vector<navgen::Trajectory> ok;
  int64_t failed = 0;
  navgen::Rng walk_rng(a.seed);
  for (size_t i = 0; i < requests.size(); ++i) {
    try {
      navgen::Trajectory t;
      if (a.method == "markov")
        t = navgen::markov_generate(markov, net, requests[i]);
      else if (a.method == "markov_search")
        t = navgen::markov_search_generate(markov, net, requests[i], limits);
      else if (a.method == "dijkstra")
        t = navgen::dijkstra_generate(net, requests[i], a.speed_kmh);
      else if (a.method == "random_walk")
        t = navgen::random_walk_generate(net, requests[i], walk_rng);
      else
        throw navgen::config_error("unknown baseline method: " + a.method);
      t.id = static_cast<int64_t>(i);
      ok.push_back(std::move(t));
    } catch (const navgen::Error& e) {
      if (e.kind() == navgen::ErrorKind::generation)
        ++failed;
      else
        throw;
    }
  }
  navgen::save_trajectories(ok, a.out);
  write_json(json{{"command", "baseline"},
                  {"method", a.method},
                  {"network", a.network},
                  {"requests", a.requests},
                  {"speed_kmh", a.speed_kmh},
                  {"seed", a.seed},
                  {"succeeded", static_cast<int64_t>(ok.size())},
                  {"failed", failed}},
             a.out + ".config.json");
  std::cout << a.method << " generated " << ok.size() << "/" << requests.size()
            << " trajectories\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"navgen: destination-conditioned trajectory generation on road networks"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic grid city + trajectories");
  synth_cmd->add_option("--rows", synth.rows);
  synth_cmd->add_option("--cols", synth.cols);
  synth_cmd->add_option("--spacing", synth.spacing, "block spacing in meters");
  synth_cmd->add_option("--origin-lon", synth.origin_lon);
  synth_cmd->add_option("--origin-lat", synth.origin_lat);
  synth_cmd->add_option("--avenue-every", synth.avenue_every);
  synth_cmd->add_option("--count", synth.count, "number of trajectories");
  synth_cmd->add_option("--beta", synth.beta, "walk softmax temperature (0 = shortest paths)");
  synth_cmd->add_option("--speed-noise", synth.speed_noise);
  synth_cmd->add_option("--speeds", synth.speeds, "mean km/h per road type");
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--out-dir", synth.out_dir);

  PartitionArgs part;
  CLI::App* part_cmd = app.add_subcommand("partition", "partition the network into zones");
  part_cmd->add_option("--network", part.network)->required();
  part_cmd->add_option("--k", part.k, "zone count (default max(2, |V|/500))");
  part_cmd->add_option("--epsilon", part.epsilon, "balance slack");
  part_cmd->add_option("--seed", part.seed);
  part_cmd->add_option("--out", part.out);

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "filter/split the data and train the model");
  train_cmd->add_option("--network", train.network)->required();
  train_cmd->add_option("--zones", train.zones)->required();
  train_cmd->add_option("--trajectories", train.trajectories)->required();
  train_cmd->add_option("--out-dir", train.out_dir);
  train_cmd->add_option("--d", train.cfg.model.d);
  train_cmd->add_option("--heads", train.cfg.model.heads);
  train_cmd->add_option("--gat-layers", train.cfg.model.gat_layers);
  train_cmd->add_option("--zone-layers", train.cfg.model.zone_layers);
  train_cmd->add_option("--traj-layers", train.cfg.model.traj_layers);
  train_cmd->add_option("--window", train.cfg.model.window);
  train_cmd->add_flag("--literal-dk-scale", train.cfg.model.literal_dk_scale,
                      "divide attention logits by d_k instead of sqrt(d_k)");
  train_cmd->add_flag("--disable-road-encoder", train.cfg.model.disable_road_encoder);
  train_cmd->add_flag("--disable-traj-encoder", train.cfg.model.disable_traj_encoder);
  train_cmd->add_flag("--disable-navigator", train.cfg.model.disable_navigator);
  train_cmd->add_option("--epochs", train.cfg.epochs);
  train_cmd->add_option("--batch", train.cfg.batch_size);
  train_cmd->add_option("--lr", train.cfg.learning_rate);
  train_cmd->add_option("--clip", train.cfg.grad_clip);
  train_cmd->add_option("--seed", train.cfg.seed);
  train_cmd->add_option("--train-ratio", train.train_ratio);
  train_cmd->add_option("--val-ratio", train.val_ratio);
  train_cmd->add_option("--max-requests", train.max_requests,
                        "cap on emitted test OD requests (0 = all)");

  GenerateArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("generate", "generate trajectories for OD requests");
  gen_cmd->add_option("--network", gen.network)->required();
  gen_cmd->add_option("--zones", gen.zones)->required();
  gen_cmd->add_option("--checkpoint", gen.checkpoint)->required();
  gen_cmd->add_option("--requests", gen.requests)->required();
  gen_cmd->add_option("--out", gen.out);
  gen_cmd->add_option("--budget-factor", gen.budget_factor, "max pops = factor * |V|");
  gen_cmd->add_option("--threads", gen.threads, "0 = hardware concurrency");
  gen_cmd->add_option("--max-failure-rate", gen.max_failure_rate,
                      "exit 4 when exceeded (default tolerate all)");

  EvaluateArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "compare generated against real trajectories");
  eval_cmd->add_option("--network", eval.network)->required();
  eval_cmd->add_option("--real", eval.real)->required();
  eval_cmd->add_option("--generated", eval.generated)->required();
  eval_cmd->add_option("--out-dir", eval.out_dir);
  eval_cmd->add_option("--bins", eval.opt.bins);
  eval_cmd->add_option("--grid-m", eval.opt.grid_m);
  eval_cmd->add_option("--edr-threshold-m", eval.opt.edr_threshold_m);
  eval_cmd->add_option("--max-pairs-per-key", eval.opt.max_pairs_per_key);

  BaselineArgs base;
  CLI::App* base_cmd = app.add_subcommand("baseline", "reference generators");
  base_cmd->add_option("--method", base.method, "markov | markov_search | dijkstra | random_walk");
  base_cmd->add_option("--network", base.network)->required();
  base_cmd->add_option("--train", base.train, "training trajectories (markov fits)");
  base_cmd->add_option("--requests", base.requests)->required();
  base_cmd->add_option("--out", base.out);
  base_cmd->add_option("--speed-kmh", base.speed_kmh);
  base_cmd->add_option("--seed", base.seed);
  base_cmd->add_option("--budget-factor", base.budget_factor);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return run_synth(synth);
    if (part_cmd->parsed()) return run_partition(part);
    if (train_cmd->parsed()) return run_train(train);
    if (gen_cmd->parsed()) return run_generate(gen);
    if (eval_cmd->parsed()) return run_evaluate(eval);
    if (base_cmd->parsed()) return run_baseline(base);
  } catch (const navgen::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case navgen::ErrorKind::config:
        return 2;
      case navgen::ErrorKind::data:
        return 3;
      case navgen::ErrorKind::generation:
        return 4;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
