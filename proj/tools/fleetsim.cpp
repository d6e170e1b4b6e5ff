#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "fleetsim/experiment.hpp"

namespace {

using namespace fleetsim;

struct Environment {
  RoadNetwork network;
  TravelTimeMatrix travel_times;
  DemandPattern demand;
};

Environment build_environment(const ExperimentConfig& config) {
  RoadNetwork network = config.network_source == "file"
                            ? load_network(config.network_file)
                            : build_lattice(config.rows, config.cols, config.weight_low,
                                            config.weight_high, config.network_seed);
  TravelTimeMatrix travel_times = all_pairs_shortest(network);
  DemandPattern demand =
      config.demand_source == "file"
          ? load_demand(config.demand_file, network.node_count())
          : generate_random_demand(network, config.demand_seed, config.n_c);
  return {std::move(network), std::move(travel_times), std::move(demand)};
}

ExperimentConfig load_config(const std::string& path, bool paper_scale,
                             std::uint64_t seed_override, const std::string& out_override) {
  ExperimentConfig config = ExperimentConfig::from_file(path);
  if (paper_scale) config.apply_paper_scale();
  if (seed_override != 0) config.seeds = {seed_override};
  if (!out_override.empty()) config.out_dir = out_override;
  return config;
}

std::unique_ptr<VacantRouter> make_router(const ExperimentConfig& config,
                                          const Environment& env,
                                          std::unique_ptr<PolicyMatrix>& policy_holder,
                                          std::unique_ptr<DispatchMatrix>& dispatch_holder,
                                          const std::string& policy_file) {
  if (!policy_file.empty()) {
    policy_holder =
        std::make_unique<PolicyMatrix>(PolicyMatrix::load(policy_file, env.network));
    return std::make_unique<PolicyRouter>(*policy_holder);
  }
  if (config.method == Method::mb_dispatch) {
    dispatch_holder = std::make_unique<DispatchMatrix>(
        DispatchMatrix::build(env.travel_times, env.demand.g, config.variant.normalized));
    return std::make_unique<DispatchRouter>(*dispatch_holder, env.travel_times,
                                            config.variant.committed, config.variant.sampling);
  }
  policy_holder = std::make_unique<PolicyMatrix>(PolicyMatrix::random(env.network));
  return std::make_unique<PolicyRouter>(*policy_holder);
}

int cmd_simulate(const ExperimentConfig& config, const std::string& policy_file,
                 const std::string& out_dir) {
  Environment env = build_environment(config);
  std::unique_ptr<PolicyMatrix> policy;
  std::unique_ptr<DispatchMatrix> dispatch;
  auto router = make_router(config, env, policy, dispatch, policy_file);

  SimulationOptions options;
  options.taxi_count = config.taxi_counts.front();
  options.horizon = config.horizon;
  options.max_samples = config.trainer.max_samples;
  options.queue_cap = config.trainer.queue_cap;
  options.seed = config.seeds.front();
  EpochResult result =
      run_epoch(env.network, env.travel_times, env.demand, *router, std::move(options));

  std::printf("reward_total %lld\n", static_cast<long long>(result.total_extrinsic_reward));
  std::printf("reward_avg %.10g\n", result.average_reward);
  std::printf("waiting_total %lld\n", static_cast<long long>(result.waiting_total));
  std::printf("waiting_avg %.10g\n", result.average_waiting);
  std::printf("served %lld\n", static_cast<long long>(result.commuters_served));
  std::printf("overflow %lld\n", static_cast<long long>(result.overflow_drops));
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/simulate.csv");
    out << "reward_total,reward_avg,waiting_total,waiting_avg,served,overflow\n"
        << result.total_extrinsic_reward << "," << result.average_reward << ","
        << result.waiting_total << "," << result.average_waiting << ","
        << result.commuters_served << "," << result.overflow_drops << "\n";
  }
  return 0;
}

int cmd_train(ExperimentConfig config, const std::string& init_policy_file) {
  Environment env = build_environment(config);
  TrainerConfig trainer_config = config.trainer;
  trainer_config.taxi_count = config.taxi_counts.front();
  trainer_config.horizon = config.horizon;
  trainer_config.epochs = config.epochs;
  trainer_config.seed = config.seeds.front();
  Trainer trainer(env.network, env.travel_times, env.demand, trainer_config);

  PolicyMatrix init = init_policy_file.empty()
                          ? PolicyMatrix::random(env.network)
                          : PolicyMatrix::load(init_policy_file, env.network);
  TrainResult result = trainer.train(std::move(init));

  std::filesystem::create_directories(config.out_dir);
  std::ofstream curve(config.out_dir + "/curve.csv");
  curve << "epoch,reward_avg,waiting_avg,intrinsic_mean,loss_surrogate,loss_value\n";
  for (const EpochLog& log : result.curve) {
    curve << log.epoch << "," << log.reward_avg << "," << log.waiting_avg << ","
          << log.intrinsic_mean << "," << log.loss_surrogate << "," << log.loss_value << "\n";
  }
  trainer.save_checkpoint(config.out_dir + "/checkpoint", result.policy);
  if (!result.curve.empty())
    std::printf("final reward_avg %.10g waiting_avg %.10g\n", result.curve.back().reward_avg,
                result.curve.back().waiting_avg);
  std::printf("checkpoint %s/checkpoint\n", config.out_dir.c_str());
  return 0;
}

int cmd_extract(const ExperimentConfig& config) {
  Environment env = build_environment(config);
  DispatchMatrix dispatch =
      DispatchMatrix::build(env.travel_times, env.demand.g, config.variant.normalized);
  DispatchRouter router(dispatch, env.travel_times, config.variant.committed,
                        config.variant.sampling);
  PolicyMatrix effective = extract_effective_policy(
      env.network, env.travel_times, env.demand, router, config.taxi_counts.front(),
      config.extract_horizon, config.seeds.front());
  std::filesystem::create_directories(config.out_dir);
  const std::string path = config.out_dir + "/effective_policy.txt";
  effective.save(path, "effective-from " + variant_name(config.variant) +
                           " H=" + std::to_string(config.extract_horizon));
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_imitate(const ExperimentConfig& config, const std::string& target_file) {
  Environment env = build_environment(config);
  PolicyMatrix target = PolicyMatrix::load(target_file, env.network);
  ImitationConfig imitation;
  imitation.learning_rate = config.trainer.learning_rate;
  imitation.policy_floor = config.trainer.policy_floor;
  ImitationResult result = imitation_init(target, imitation);
  std::filesystem::create_directories(config.out_dir);
  const std::string path = config.out_dir + "/imitated_policy.txt";
  result.policy.save(path);
  std::printf("steps %d loss %.10g\n", result.steps, result.final_loss);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fleetsim: taxi-fleet simulation and routing-policy optimisation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, policy_file, target_file;
  std::uint64_t seed = 0;
  bool paper_scale = false;
  std::vector<std::string> summary_files;

  auto add_common = [&](CLI::App* sub, bool config_required = true) {
    sub->add_option("--config", config_path, "experiment config file")
        ->required(config_required);
    sub->add_option("--seed", seed, "override the config's seed list with one seed");
    sub->add_option("--out", out_dir, "output directory override");
    sub->add_flag("--paper-scale", paper_scale, "horizon 50000, 1000 epochs");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run one epoch and print metrics");
  add_common(simulate);
  simulate->add_option("--policy", policy_file, "policy file to drive vacant taxis");

  CLI::App* train = app.add_subcommand("train", "PPO training run");
  add_common(train);
  train->add_option("--init-policy", policy_file, "initial policy file (default random)");

  CLI::App* extract =
      app.add_subcommand("extract-effective", "effective policy of the dispatch variant");
  add_common(extract);

  CLI::App* imitate = app.add_subcommand("imitate", "cross-entropy fit to a target policy");
  add_common(imitate);
  imitate->add_option("--target", target_file, "target policy file")->required();

  CLI::App* experiment = app.add_subcommand("experiment", "full (taxis x seeds) grid");
  add_common(experiment);

  CLI::App* compare = app.add_subcommand("compare", "paired comparison of summary files");
  compare->add_option("summaries", summary_files, "summary.csv files")
      ->required()
      ->expected(-2);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(compare)) {
      ComparisonReport report = compare_methods(summary_files);
      std::cout << report.text;
      return 0;
    }
    ExperimentConfig config = load_config(config_path, paper_scale, seed, out_dir);
    if (app.got_subcommand(simulate)) return cmd_simulate(config, policy_file, out_dir);
    if (app.got_subcommand(train)) return cmd_train(config, policy_file);
    if (app.got_subcommand(extract)) return cmd_extract(config);
    if (app.got_subcommand(imitate)) return cmd_imitate(config, target_file);
    if (app.got_subcommand(experiment)) {
      ExperimentResult result = run_experiment(config);
      std::printf("summary %s (%zu rows)\n", result.summary_path.c_str(),
                  result.summary.size());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
