#include "fleetsim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fleetsim {

namespace fs = std::filesystem;

Method parse_method(const std::string& name) {
  if (name == "random") return Method::random;
  if (name == "mb-dispatch") return Method::mb_dispatch;
  if (name == "mb-init") return Method::mb_init;
  if (name == "mf-rl") return Method::mf_rl;
  if (name == "hybrid") return Method::hybrid;
  throw std::invalid_argument("unknown method: " + name);
}

std::string method_name(Method method) {
  switch (method) {
    case Method::random: return "random";
    case Method::mb_dispatch: return "mb-dispatch";
    case Method::mb_init: return "mb-init";
    case Method::mf_rl: return "mf-rl";
    case Method::hybrid: return "hybrid";
  }
  return "?";
}

DispatchVariant parse_variant(const std::string& name) {
  DispatchVariant variant;
  if (name == "committed") {
    variant.committed = true;
    variant.normalized = false;
  } else if (name == "committed-normalized") {
    variant.committed = true;
    variant.normalized = true;
  } else if (name == "non-committed") {
    variant.committed = false;
    variant.normalized = false;
  } else if (name == "non-committed-normalized") {
    variant.committed = false;
    variant.normalized = true;
  } else {
    throw std::invalid_argument("unknown dispatch variant: " + name);
  }
  return variant;
}

std::string variant_name(const DispatchVariant& variant) {
  std::string name = variant.committed ? "committed" : "non-committed";
  if (variant.normalized) name += "-normalized";
  return name;
}

namespace {

std::vector<std::string> split_commas(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

int parallel_cell_limit() {
  if (const char* env = std::getenv("FLEETSIM_THREADS")) {
    const int limit = std::atoi(env);
    if (limit >= 1) return limit;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    std::string value;
    std::getline(ss, value);
    const auto first = value.find_first_not_of(" \t");
    value = first == std::string::npos ? "" : value.substr(first);
    const auto last = value.find_last_not_of(" \t\r");
    if (last != std::string::npos) value = value.substr(0, last + 1);
    auto fail = [&](const std::string& msg) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
    };
    try {
      if (key == "setting") config.setting = value;
      else if (key == "method") config.method = parse_method(value);
      else if (key == "variant") config.variant = parse_variant(value);
      else if (key == "dispatch_sampling") {
        if (value == "weighted") config.variant.sampling = DispatchSampling::weighted;
        else if (value == "residual-stay")
          config.variant.sampling = DispatchSampling::residual_stay;
        else fail("unknown dispatch_sampling: " + value);
      } else if (key == "network") config.network_source = value;
      else if (key == "rows") config.rows = std::stoi(value);
      else if (key == "cols") config.cols = std::stoi(value);
      else if (key == "weight_low") config.weight_low = std::stoi(value);
      else if (key == "weight_high") config.weight_high = std::stoi(value);
      else if (key == "network_seed") config.network_seed = std::stoull(value);
      else if (key == "network_file") config.network_file = value;
      else if (key == "demand") config.demand_source = value;
      else if (key == "demand_seed") config.demand_seed = std::stoull(value);
      else if (key == "n_c") config.n_c = std::stod(value);
      else if (key == "demand_file") config.demand_file = value;
      else if (key == "taxis") {
        config.taxi_counts.clear();
        for (const auto& part : split_commas(value)) config.taxi_counts.push_back(std::stoi(part));
      } else if (key == "horizon") config.horizon = std::stoi(value);
      else if (key == "epochs") config.epochs = std::stoi(value);
      else if (key == "extract_horizon") config.extract_horizon = std::stoi(value);
      else if (key == "seeds") {
        config.seeds.clear();
        for (const auto& part : split_commas(value)) config.seeds.push_back(std::stoull(part));
      } else if (key == "out") config.out_dir = value;
      else if (key == "learning_rate") config.trainer.learning_rate = std::stod(value);
      else if (key == "clip") config.trainer.clip_epsilon = std::stod(value);
      else if (key == "iterations") config.trainer.iterations = std::stoi(value);
      else if (key == "exploration") {
        if (value == "on") config.trainer.exploration = true;
        else if (value == "off") config.trainer.exploration = false;
        else fail("exploration must be on or off");
      } else if (key == "max_samples") config.trainer.max_samples = std::stoi(value);
      else if (key == "queue_cap") config.trainer.queue_cap = std::stoi(value);
      else fail("unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  config.validate();
  return config;
}

void ExperimentConfig::apply_paper_scale() {
  horizon = 50'000;
  epochs = 1000;
  extract_horizon = 50'000;
}

void ExperimentConfig::validate() const {
  if (network_source != "lattice" && network_source != "file")
    throw std::runtime_error("network must be 'lattice' or 'file'");
  if (demand_source != "random" && demand_source != "file")
    throw std::runtime_error("demand must be 'random' or 'file'");
  if (network_source == "file" && !fs::exists(network_file))
    throw std::runtime_error("network file does not exist: " + network_file);
  if (demand_source == "file" && !fs::exists(demand_file))
    throw std::runtime_error("demand file does not exist: " + demand_file);
  if (epochs < 0) throw std::runtime_error("epochs must be >= 0");
  if (horizon < 1) throw std::runtime_error("horizon must be >= 1");
  if (taxi_counts.empty() || seeds.empty())
    throw std::runtime_error("taxis and seeds must be non-empty");
  for (int t : taxi_counts) {
    if (t < 0) throw std::runtime_error("taxi counts must be >= 0");
  }
}

namespace {

std::string format_double(double x) {
  std::ostringstream ss;
  ss << std::setprecision(12) << x;
  return ss.str();
}

void write_epoch_rows(std::ofstream& out, int epoch, std::uint64_t seed, int taxis,
                      const EpochResult& result) {
  out << epoch << "," << seed << "," << taxis << "," << format_double(result.average_reward)
      << "," << format_double(result.average_waiting) << "," << result.commuters_served << ","
      << result.trajectory.records.size() << "\n";
}

struct CellStats {
  std::vector<double> rewards;
  std::vector<double> waitings;
};

double last10_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const std::size_t take = std::min<std::size_t>(10, xs.size());
  double sum = 0.0;
  for (std::size_t i = xs.size() - take; i < xs.size(); ++i) sum += xs[i];
  return sum / static_cast<double>(take);
}

// Evaluates a fixed router over `epochs` independent runs.
CellStats evaluate_router(const ExperimentConfig& cfg, const RoadNetwork& net,
                          const TravelTimeMatrix& tt, const DemandPattern& demand,
                          VacantRouter& router, int taxis, std::uint64_t seed,
                          std::ofstream& epochs_csv) {
  CellStats stats;
  Rng seed_stream = Rng(seed).derive("eval");
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SimulationOptions options;
    options.taxi_count = taxis;
    options.horizon = cfg.horizon;
    options.max_samples = cfg.trainer.max_samples;
    options.queue_cap = cfg.trainer.queue_cap;
    options.seed = seed_stream.derive("epoch", static_cast<std::uint64_t>(epoch)).next_u64();
    EpochResult result = run_epoch(net, tt, demand, router, std::move(options));
    write_epoch_rows(epochs_csv, epoch, seed, taxis, result);
    stats.rewards.push_back(result.average_reward);
    stats.waitings.push_back(result.average_waiting);
  }
  return stats;
}

CellStats record_training_curve(const ExperimentConfig& cfg, const TrainResult& trained,
                                std::uint64_t seed, int taxis, std::ofstream& epochs_csv,
                                const std::string& cell_dir) {
  CellStats stats;
  std::ofstream curve(cell_dir + "/curve.csv");
  curve << "epoch,reward_avg,waiting_avg,intrinsic_mean,loss_surrogate,loss_value\n";
  for (const EpochLog& log : trained.curve) {
    curve << log.epoch << "," << format_double(log.reward_avg) << ","
          << format_double(log.waiting_avg) << "," << format_double(log.intrinsic_mean) << ","
          << format_double(log.loss_surrogate) << "," << format_double(log.loss_value) << "\n";
    epochs_csv << log.epoch << "," << seed << "," << taxis << ","
               << format_double(log.reward_avg) << "," << format_double(log.waiting_avg) << ","
               << log.served << "," << log.samples << "\n";
    stats.rewards.push_back(log.reward_avg);
    stats.waitings.push_back(log.waiting_avg);
  }
  return stats;
}

SummaryRow run_cell(const ExperimentConfig& cfg, const RoadNetwork& net,
                    const TravelTimeMatrix& tt, const DemandPattern& demand, int taxis,
                    std::uint64_t seed, const std::string& cell_dir) {
  fs::create_directories(cell_dir);
  std::ofstream epochs_csv(cell_dir + "/epochs.csv");
  epochs_csv << "epoch,seed,taxis,reward_avg,waiting_avg,served,samples\n";

  CellStats stats;
  switch (cfg.method) {
    case Method::random: {
      PolicyMatrix policy = PolicyMatrix::random(net);
      PolicyRouter router(policy);
      stats = evaluate_router(cfg, net, tt, demand, router, taxis, seed, epochs_csv);
      break;
    }
    case Method::mb_dispatch: {
      DispatchMatrix dispatch = DispatchMatrix::build(tt, demand.g, cfg.variant.normalized);
      DispatchRouter router(dispatch, tt, cfg.variant.committed, cfg.variant.sampling);
      stats = evaluate_router(cfg, net, tt, demand, router, taxis, seed, epochs_csv);
      break;
    }
    case Method::mb_init: {
      DispatchMatrix dispatch = DispatchMatrix::build(tt, demand.g, cfg.variant.normalized);
      DispatchRouter dispatch_router(dispatch, tt, cfg.variant.committed, cfg.variant.sampling);
      PolicyMatrix effective = extract_effective_policy(
          net, tt, demand, dispatch_router, taxis, cfg.extract_horizon,
          Rng(seed).derive("extract").next_u64());
      effective.save(cell_dir + "/effective_policy.txt",
                     "effective-from " + variant_name(cfg.variant) +
                         " H=" + std::to_string(cfg.extract_horizon));
      PolicyRouter router(effective);
      stats = evaluate_router(cfg, net, tt, demand, router, taxis, seed, epochs_csv);
      break;
    }
    case Method::mf_rl: {
      TrainerConfig trainer_config = cfg.trainer;
      trainer_config.taxi_count = taxis;
      trainer_config.horizon = cfg.horizon;
      trainer_config.epochs = cfg.epochs;
      trainer_config.seed = seed;
      Trainer trainer(net, tt, demand, trainer_config);
      TrainResult trained = trainer.train(PolicyMatrix::random(net));
      stats = record_training_curve(cfg, trained, seed, taxis, epochs_csv, cell_dir);
      trainer.save_checkpoint(cell_dir + "/checkpoint", trained.policy);
      break;
    }
    case Method::hybrid: {
      DispatchMatrix dispatch = DispatchMatrix::build(tt, demand.g, cfg.variant.normalized);
      DispatchRouter dispatch_router(dispatch, tt, cfg.variant.committed, cfg.variant.sampling);
      PolicyMatrix effective = extract_effective_policy(
          net, tt, demand, dispatch_router, taxis, cfg.extract_horizon,
          Rng(seed).derive("extract").next_u64());
      effective.save(cell_dir + "/effective_policy.txt",
                     "effective-from " + variant_name(cfg.variant) +
                         " H=" + std::to_string(cfg.extract_horizon));
      ImitationConfig imitation;
      imitation.learning_rate = cfg.trainer.learning_rate;
      imitation.policy_floor = cfg.trainer.policy_floor;
      ImitationResult imitated = imitation_init(effective, imitation);
      imitated.policy.save(cell_dir + "/imitated_policy.txt");

      TrainerConfig trainer_config = cfg.trainer;
      trainer_config.taxi_count = taxis;
      trainer_config.horizon = cfg.horizon;
      trainer_config.epochs = cfg.epochs;
      trainer_config.seed = seed;
      Trainer trainer(net, tt, demand, trainer_config);
      TrainResult trained = trainer.train(std::move(imitated.policy));
      stats = record_training_curve(cfg, trained, seed, taxis, epochs_csv, cell_dir);
      trainer.save_checkpoint(cell_dir + "/checkpoint", trained.policy);
      break;
    }
  }

  SummaryRow row;
  row.method = method_name(cfg.method);
  if (cfg.method == Method::mb_dispatch || cfg.method == Method::mb_init ||
      cfg.method == Method::hybrid)
    row.method += "(" + variant_name(cfg.variant) + ")";
  row.taxis = taxis;
  row.seed = seed;
  row.reward_avg = last10_mean(stats.rewards);
  row.waiting_avg = last10_mean(stats.waitings);
  return row;
}

void write_manifest(const std::string& out_dir, const std::string& failure_note) {
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "MANIFEST")
      files.push_back(fs::relative(entry.path(), out_dir).generic_string());
  }
  std::sort(files.begin(), files.end());
  std::ofstream manifest(out_dir + "/MANIFEST");
  if (!failure_note.empty()) manifest << "FAILED " << failure_note << "\n";
  for (const auto& file : files)
    manifest << file_content_hash(out_dir + "/" + file) << "  " << file << "\n";
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);

  std::optional<RoadNetwork> network;
  std::optional<DemandPattern> demand;
  try {
    network = config.network_source == "file"
                  ? load_network(config.network_file)
                  : build_lattice(config.rows, config.cols, config.weight_low,
                                  config.weight_high, config.network_seed);
    demand = config.demand_source == "file"
                 ? load_demand(config.demand_file, network->node_count())
                 : generate_random_demand(*network, config.demand_seed, config.n_c);
  } catch (const std::exception& e) {
    write_manifest(config.out_dir, e.what());
    throw;
  }
  TravelTimeMatrix travel_times = all_pairs_shortest(*network);

  struct Cell {
    int taxis;
    std::uint64_t seed;
    std::string dir;
  };
  std::vector<Cell> cells;
  const std::string method_label = method_name(config.method);
  for (int taxis : config.taxi_counts) {
    for (std::uint64_t seed : config.seeds) {
      cells.push_back({taxis, seed,
                       config.out_dir + "/" + method_label + "/t" + std::to_string(taxis) +
                           "_s" + std::to_string(seed)});
    }
  }

  std::vector<SummaryRow> summary(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  const int workers =
      std::min<int>(parallel_cell_limit(), static_cast<int>(cells.size()));
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
      try {
        summary[i] = run_cell(config, *network, travel_times, *demand, cells[i].taxis,
                              cells[i].seed, cells[i].dir);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error.empty())
          first_error = cells[i].dir + ": " + e.what();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& thread : threads) thread.join();
  }
  if (!first_error.empty()) {
    write_manifest(config.out_dir, first_error);
    throw std::runtime_error("experiment failed at " + first_error);
  }

  ExperimentResult result;
  result.summary = std::move(summary);
  result.summary_path = config.out_dir + "/summary.csv";
  std::ofstream out(result.summary_path);
  out << "method,taxis,seed,reward_avg,waiting_avg\n";
  for (const SummaryRow& row : result.summary) {
    out << row.method << "," << row.taxis << "," << row.seed << ","
        << format_double(row.reward_avg) << "," << format_double(row.waiting_avg) << "\n";
  }
  out.close();
  write_manifest(config.out_dir, "");
  return result;
}

std::vector<SummaryRow> load_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open summary file: " + path);
  std::vector<SummaryRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    SummaryRow row;
    std::string field;
    std::getline(ss, row.method, ',');
    std::getline(ss, field, ',');
    row.taxis = std::stoi(field);
    std::getline(ss, field, ',');
    row.seed = std::stoull(field);
    std::getline(ss, field, ',');
    row.reward_avg = std::stod(field);
    std::getline(ss, field, ',');
    row.waiting_avg = std::stod(field);
    rows.push_back(row);
  }
  return rows;
}

double sign_test_p(int wins, int n) {
  if (n <= 0) return -1.0;
  // P(X >= wins) for X ~ Binomial(n, 1/2), exact.
  double p = 0.0;
  double coeff = 1.0;  // C(n, 0)
  for (int k = 0; k <= n; ++k) {
    if (k >= wins) p += coeff;
    coeff = coeff * (n - k) / (k + 1);
  }
  return p / std::pow(2.0, n);
}

ComparisonReport compare_methods(const std::vector<std::string>& summary_files) {
  // method -> (taxis, seed) -> row
  std::map<std::string, std::map<std::pair<int, std::uint64_t>, SummaryRow>> methods;
  for (const std::string& file : summary_files) {
    // A method appearing in several files gets a per-file suffix so it can be
    // compared against itself.
    std::map<std::string, std::string> rename;
    for (const SummaryRow& row : load_summary(file)) {
      auto it = rename.find(row.method);
      if (it == rename.end()) {
        std::string name = row.method;
        int suffix = 2;
        while (methods.count(name)) name = row.method + "#" + std::to_string(suffix++);
        it = rename.emplace(row.method, name).first;
      }
      methods[it->second][{row.taxis, row.seed}] = row;
    }
  }
  if (methods.size() < 2)
    throw std::runtime_error("compare requires at least two methods");

  // Grids must match across methods.
  const auto& reference = methods.begin()->second;
  std::set<int> taxi_counts;
  for (const auto& [key, row] : reference) taxi_counts.insert(key.first);
  for (const auto& [name, grid] : methods) {
    if (grid.size() != reference.size())
      throw std::runtime_error("mismatched grids for method " + name);
    for (const auto& [key, row] : reference) {
      if (!grid.count(key))
        throw std::runtime_error("mismatched grids for method " + name);
    }
  }

  ComparisonReport report;
  std::ostringstream text;
  text << std::setprecision(6);
  for (int taxis : taxi_counts) {
    MethodComparisonCell cell;
    cell.taxis = taxis;
    std::map<std::string, std::map<std::uint64_t, SummaryRow>> by_seed;
    for (const auto& [name, grid] : methods) {
      std::vector<double> waits, rewards;
      for (const auto& [key, row] : grid) {
        if (key.first != taxis) continue;
        by_seed[name][key.second] = row;
        waits.push_back(row.waiting_avg);
        rewards.push_back(row.reward_avg);
      }
      auto mean = [](const std::vector<double>& xs) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s / static_cast<double>(xs.size());
      };
      auto stddev = [&](const std::vector<double>& xs, double mu) {
        if (xs.size() < 2) return 0.0;
        double s = 0.0;
        for (double x : xs) s += (x - mu) * (x - mu);
        return std::sqrt(s / static_cast<double>(xs.size() - 1));
      };
      cell.mean_waiting[name] = mean(waits);
      cell.std_waiting[name] = stddev(waits, cell.mean_waiting[name]);
      cell.mean_reward[name] = mean(rewards);
      cell.std_reward[name] = stddev(rewards, cell.mean_reward[name]);
      text << "taxis=" << taxis << " method=" << name
           << " waiting=" << cell.mean_waiting[name] << "±" << cell.std_waiting[name]
           << " reward=" << cell.mean_reward[name] << "±" << cell.std_reward[name] << "\n";
    }
    for (const auto& [a, grid_a] : by_seed) {
      for (const auto& [b, grid_b] : by_seed) {
        if (a >= b) continue;
        int n_waiting = 0, wins_waiting = 0, n_reward = 0, wins_reward = 0;
        for (const auto& [seed, row_a] : grid_a) {
          const SummaryRow& row_b = grid_b.at(seed);
          if (row_a.waiting_avg != row_b.waiting_avg) {
            ++n_waiting;
            if (row_a.waiting_avg < row_b.waiting_avg) ++wins_waiting;
          }
          if (row_a.reward_avg != row_b.reward_avg) {
            ++n_reward;
            if (row_a.reward_avg > row_b.reward_avg) ++wins_reward;
          }
        }
        const double pw = sign_test_p(wins_waiting, n_waiting);
        const double pr = sign_test_p(wins_reward, n_reward);
        cell.p_waiting[{a, b}] = pw;
        cell.p_reward[{a, b}] = pr;
        text << "taxis=" << taxis << " " << a << " vs " << b << " waiting-win=" << wins_waiting
             << "/" << n_waiting << " p=" << (pw < 0 ? std::string("n/a") : format_double(pw))
             << " reward-win=" << wins_reward << "/" << n_reward
             << " p=" << (pr < 0 ? std::string("n/a") : format_double(pr)) << "\n";
      }
    }
    report.cells.push_back(std::move(cell));
  }
  report.text = text.str();
  return report;
}

std::string file_content_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash file: " + path);
  std::uint64_t hash = 0xcbf29ce484222325ull;
  char buffer[4096];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001b3ull;
    }
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << hash;
  return ss.str();
}

}  // namespace fleetsim
