#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fleetsim/demand.hpp"
#include "fleetsim/dispatch.hpp"
#include "fleetsim/graph.hpp"
#include "fleetsim/rl.hpp"

namespace fleetsim {

enum class Method { random, mb_dispatch, mb_init, mf_rl, hybrid };

struct DispatchVariant {
  bool committed = false;
  bool normalized = true;
  DispatchSampling sampling = DispatchSampling::weighted;
};

Method parse_method(const std::string& name);
DispatchVariant parse_variant(const std::string& name);
std::string method_name(Method method);
std::string variant_name(const DispatchVariant& variant);

// Flat key-value experiment configuration. Unknown keys are an error.
struct ExperimentConfig {
  std::string setting = "S1";
  Method method = Method::random;
  DispatchVariant variant = parse_variant("non-committed-normalized");

  // network: lattice dims + weight range, or a file
  std::string network_source = "lattice";  // "lattice" | "file"
  int rows = 10, cols = 10;
  int weight_low = 1, weight_high = 10;
  std::uint64_t network_seed = 1;
  std::string network_file;

  // demand: random band or a file
  std::string demand_source = "random";  // "random" | "file"
  std::uint64_t demand_seed = 7;
  double n_c = 0.3;
  std::string demand_file;

  std::vector<int> taxi_counts{20};
  int horizon = 10'000;
  int epochs = 200;
  int extract_horizon = 50'000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out_dir = "results";

  TrainerConfig trainer;

  static ExperimentConfig from_file(const std::string& path);
  void apply_paper_scale();  // horizon 50k, epochs 1000
  void validate() const;
};

struct SummaryRow {
  std::string method;
  int taxis = 0;
  std::uint64_t seed = 0;
  double reward_avg = 0.0;   // last-10-epoch mean
  double waiting_avg = 0.0;  // last-10-epoch mean
};

struct ExperimentResult {
  std::vector<SummaryRow> summary;
  std::string summary_path;
};

// Runs the configured method over the (taxi_count, seed) grid, writing
// per-epoch CSVs, a summary CSV and a MANIFEST of content hashes. Cells run
// in parallel up to FLEETSIM_THREADS.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::vector<SummaryRow> load_summary(const std::string& path);

struct MethodComparisonCell {
  int taxis = 0;
  std::map<std::string, double> mean_waiting, std_waiting, mean_reward, std_reward;
  // One-sided sign-test p-value that method A beats B (lower waiting / higher
  // reward); -1 when undefined (single seed or all ties).
  std::map<std::pair<std::string, std::string>, double> p_waiting, p_reward;
};

struct ComparisonReport {
  std::vector<MethodComparisonCell> cells;
  std::string text;  // rendered table
};

// Paired comparison of >= 2 methods on matched (taxi_count, seed) grids.
ComparisonReport compare_methods(const std::vector<std::string>& summary_files);

// Exact one-sided sign test: probability of >= `wins` successes in `n` fair
// coin flips. Returns -1 when n == 0.
double sign_test_p(int wins, int n);

// FNV-1a hash of a file's bytes, hex-encoded; used for MANIFEST entries.
std::string file_content_hash(const std::string& path);

}  // namespace fleetsim
