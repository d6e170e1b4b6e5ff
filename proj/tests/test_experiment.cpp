#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fleetsim/experiment.hpp"

using namespace fleetsim;
namespace fs = std::filesystem;

namespace {

std::string write_config(const std::string& name, const std::string& body) {
  const std::string path = "/tmp/fleetsim_exp_" + name + ".cfg";
  std::ofstream out(path);
  out << body;
  return path;
}

std::string small_base(const std::string& method, const std::string& out) {
  return "method " + method +
         "\n"
         "rows 3\ncols 3\nweight_low 1\nweight_high 4\nnetwork_seed 5\n"
         "demand_seed 9\nn_c 0.3\n"
         "taxis 4\nhorizon 200\nepochs 3\nextract_horizon 2000\n"
         "seeds 1,2\nout " +
         out + "\n";
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("well-formed file") {
    std::string path = write_config("ok",
                                    "setting S1\nmethod mb-dispatch\n"
                                    "variant non-committed-normalized\n"
                                    "taxis 10,20\nseeds 3,4,5\nepochs 7\n"
                                    "# trailing comment\n");
    ExperimentConfig cfg = ExperimentConfig::from_file(path);
    CHECK(cfg.method == Method::mb_dispatch);
    CHECK(cfg.variant.normalized);
    CHECK_FALSE(cfg.variant.committed);
    CHECK(cfg.taxi_counts == std::vector<int>{10, 20});
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4, 5});
    CHECK(cfg.epochs == 7);
  }
  SUBCASE("unknown keys are rejected") {
    std::string path = write_config("typo", "method random\nepochss 5\n");
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_file(path),
                         doctest::Contains("unknown key"), std::runtime_error);
  }
  SUBCASE("missing referenced files are rejected") {
    std::string path =
        write_config("nofile", "method random\nnetwork file\nnetwork_file /tmp/nope_x\n");
    CHECK_THROWS_AS(ExperimentConfig::from_file(path), std::runtime_error);
  }
  SUBCASE("paper-scale flag sets the long-run horizon and epochs") {
    ExperimentConfig cfg;
    cfg.apply_paper_scale();
    CHECK(cfg.horizon == 50'000);
    CHECK(cfg.epochs == 1000);
  }
}

TEST_CASE("random method produces evaluation rows and no training artifacts") {
  const std::string out = "/tmp/fleetsim_exp_random_out";
  fs::remove_all(out);
  ExperimentConfig cfg =
      ExperimentConfig::from_file(write_config("rand", small_base("random", out)));
  cfg.epochs = 1;
  ExperimentResult res = run_experiment(cfg);
  CHECK(res.summary.size() == 2);  // 1 taxi count x 2 seeds
  for (const SummaryRow& row : res.summary) {
    CHECK(row.method == "random");
    CHECK(row.taxis == 4);
  }
  CHECK(fs::exists(out + "/summary.csv"));
  CHECK(fs::exists(out + "/random/t4_s1/epochs.csv"));
  CHECK_FALSE(fs::exists(out + "/random/t4_s1/checkpoint"));
  CHECK(fs::exists(out + "/MANIFEST"));
}

TEST_CASE("manifest covers every produced file") {
  const std::string out = "/tmp/fleetsim_exp_manifest_out";
  fs::remove_all(out);
  ExperimentConfig cfg =
      ExperimentConfig::from_file(write_config("man", small_base("random", out)));
  run_experiment(cfg);
  std::ifstream manifest(out + "/MANIFEST");
  REQUIRE(manifest.good());
  int listed = 0;
  std::string hash, rel;
  while (manifest >> hash >> rel) {
    ++listed;
    CHECK(hash.size() == 16);
    CHECK(fs::exists(out + "/" + rel));
    CHECK(file_content_hash(out + "/" + rel) == hash);
  }
  int present = 0;
  for (const auto& entry : fs::recursive_directory_iterator(out))
    if (entry.is_regular_file() && entry.path().filename() != "MANIFEST") ++present;
  CHECK(listed == present);
}

TEST_CASE("identical configs give byte-identical outputs") {
  const std::string out_a = "/tmp/fleetsim_exp_det_a";
  const std::string out_b = "/tmp/fleetsim_exp_det_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  ExperimentConfig cfg =
      ExperimentConfig::from_file(write_config("det", small_base("mb-dispatch", out_a)));
  run_experiment(cfg);
  cfg.out_dir = out_b;
  run_experiment(cfg);
  for (const auto& entry : fs::recursive_directory_iterator(out_a)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), out_a).generic_string();
    CHECK(file_content_hash(out_a + "/" + rel) == file_content_hash(out_b + "/" + rel));
  }
}

TEST_CASE("summary files round trip through load_summary") {
  const std::string out = "/tmp/fleetsim_exp_round_out";
  fs::remove_all(out);
  ExperimentConfig cfg =
      ExperimentConfig::from_file(write_config("round", small_base("random", out)));
  ExperimentResult res = run_experiment(cfg);
  std::vector<SummaryRow> rows = load_summary(res.summary_path);
  REQUIRE(rows.size() == res.summary.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].method == res.summary[i].method);
    CHECK(rows[i].taxis == res.summary[i].taxis);
    CHECK(rows[i].seed == res.summary[i].seed);
    CHECK(rows[i].reward_avg == doctest::Approx(res.summary[i].reward_avg).epsilon(1e-9));
  }
}

TEST_CASE("sign test probabilities") {
  CHECK(sign_test_p(5, 5) == doctest::Approx(1.0 / 32).epsilon(1e-12));
  CHECK(sign_test_p(0, 5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sign_test_p(4, 5) == doctest::Approx(6.0 / 32).epsilon(1e-12));
  CHECK(sign_test_p(3, 4) == doctest::Approx(5.0 / 16).epsilon(1e-12));
  CHECK(sign_test_p(0, 0) == -1.0);
}

TEST_CASE("comparisons") {
  const std::string out = "/tmp/fleetsim_exp_cmp_out";
  fs::remove_all(out);
  ExperimentConfig cfg =
      ExperimentConfig::from_file(write_config("cmp", small_base("random", out)));
  ExperimentResult res = run_experiment(cfg);

  SUBCASE("a method against itself shows zero differences and no p-value") {
    ComparisonReport report = compare_methods({res.summary_path, res.summary_path});
    REQUIRE(report.cells.size() == 1);
    const MethodComparisonCell& cell = report.cells[0];
    REQUIRE(cell.mean_waiting.size() == 2);
    const double a = cell.mean_waiting.begin()->second;
    const double b = std::next(cell.mean_waiting.begin())->second;
    CHECK(a == b);
    for (const auto& [pair, p] : cell.p_waiting) CHECK(p == -1.0);  // all ties
  }

  SUBCASE("single seed yields zero std and n/a p-values") {
    cfg.seeds = {1};
    cfg.out_dir = out + "_single";
    fs::remove_all(cfg.out_dir);
    ExperimentResult single = run_experiment(cfg);
    ComparisonReport report =
        compare_methods({single.summary_path, single.summary_path});
    for (const auto& [name, sd] : report.cells[0].std_waiting) CHECK(sd == 0.0);
    for (const auto& [pair, p] : report.cells[0].p_waiting) CHECK(p == -1.0);
  }

  SUBCASE("mismatched grids are an error") {
    cfg.seeds = {1, 2, 3};
    cfg.out_dir = out + "_wide";
    fs::remove_all(cfg.out_dir);
    ExperimentResult wide = run_experiment(cfg);
    CHECK_THROWS_WITH_AS(compare_methods({res.summary_path, wide.summary_path}),
                         doctest::Contains("mismatched grids"), std::runtime_error);
  }

  SUBCASE("fewer than two methods is an error") {
    CHECK_THROWS_AS(compare_methods({res.summary_path}), std::runtime_error);
  }
}

TEST_CASE("training methods leave a versioned checkpoint") {
  const std::string out = "/tmp/fleetsim_exp_train_out";
  fs::remove_all(out);
  ExperimentConfig cfg =
      ExperimentConfig::from_file(write_config("train", small_base("mf-rl", out)));
  cfg.seeds = {1};
  cfg.epochs = 2;
  run_experiment(cfg);
  CHECK(fs::exists(out + "/mf-rl/t4_s1/curve.csv"));
  CHECK(fs::exists(out + "/mf-rl/t4_s1/checkpoint/policy.txt"));
  CHECK(fs::exists(out + "/mf-rl/t4_s1/checkpoint/value.txt"));
  CHECK(fs::exists(out + "/mf-rl/t4_s1/checkpoint/rnd_predictor.txt"));
  CHECK(fs::exists(out + "/mf-rl/t4_s1/checkpoint/VERSION"));
}

TEST_CASE("failures leave partial results and a marked manifest") {
  const std::string out = "/tmp/fleetsim_exp_fail_out";
  fs::remove_all(out);
  // demand that cannot reach the entropy band: n_c so high that every g_i
  // caps at 1 and the entropy is forced to 1.0
  ExperimentConfig cfg =
      ExperimentConfig::from_file(write_config("fail", small_base("random", out)));
  cfg.n_c = 9.0;
  CHECK_THROWS_AS(run_experiment(cfg), std::runtime_error);
  std::ifstream manifest(out + "/MANIFEST");
  REQUIRE(manifest.good());
  std::string first;
  std::getline(manifest, first);
  CHECK(first.rfind("FAILED", 0) == 0);
}
