#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fleetsim/engine.hpp"

namespace fleetsim {

struct TrainerConfig {
  double learning_rate = 0.01;
  double clip_epsilon = 0.1;
  int iterations = 10;  // surrogate ascent passes per epoch, full batch
  int epochs = 200;
  bool exploration = true;
  bool sigma_reset_per_epoch = false;  // default: running sigma persists
  double policy_floor = 1e-6;
  int rnd_dim = 16;
  std::uint64_t seed = 0;
  int taxi_count = 20;
  int horizon = 10'000;
  int max_samples = 512'000;
  int queue_cap = 1'000'001;

  void validate() const;
};

// Tabular baseline V(s), one entry per node.
struct ValueTable {
  explicit ValueTable(int node_count) : values(node_count, 0.0), visits(node_count, 0) {}
  std::vector<double> values;
  std::vector<std::int64_t> visits;

  void save(const std::string& path) const;
};

// Random network distillation over (node, action) pairs. Both maps are linear
// in the concatenated one-hot encoding, i.e. an embedding column per node
// plus one per action; the target is frozen at construction.
class RndPair {
 public:
  RndPair(int node_count, int dim, std::uint64_t seed);

  int dim() const { return dim_; }
  // Squared prediction error for one pair; the exploration bonus.
  double bonus(int state, int action) const;
  // One stochastic gradient pass over the batch, minimising per-record
  // squared error.
  void train_predictor(std::span<const SampleRecord> records, double learning_rate);

  void set_predictor_to_target();  // test hook: zero bonus everywhere
  void save(const std::string& path) const;

 private:
  std::span<const double> target_state(int s) const;
  std::span<const double> target_action(int a) const;
  std::span<double> pred_state(int s);
  std::span<double> pred_action(int a);

  int node_count_;
  int dim_;
  std::vector<double> target_state_, target_action_;  // dim x node_count, column-major
  std::vector<double> pred_state_, pred_action_;
};

// Undiscounted tail sums of per-step fleet occupancy, one value per record.
std::vector<double> extrinsic_returns(const TrajectoryBatch& batch);

// Running second-moment accumulator for the intrinsic-reward scale sigma
// (sample standard deviation over all observed bonuses).
struct SigmaAccumulator {
  std::int64_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++count;
    sum += x;
    sum_sq += x * x;
  }
  void reset() { *this = {}; }
  double sigma() const;
};

// total = R_e + R_i / sigma; when sigma is zero the intrinsic term drops out.
std::vector<double> combine_rewards(std::span<const double> extrinsic,
                                    std::span<const double> intrinsic,
                                    SigmaAccumulator& accumulator);

// Raw advantages: scaled combined return minus the tabular baseline.
std::vector<double> advantages(const TrajectoryBatch& batch,
                               std::span<const double> combined_returns,
                               const ValueTable& value_table);

// Regresses V(s) toward the mean combined return observed at s this batch.
void fit_value(ValueTable& value_table, const TrajectoryBatch& batch,
               std::span<const double> combined_returns, double learning_rate);

// In-place normalisation to zero mean and unit variance; a zero-variance
// batch maps to all zeros.
void normalize_advantages(std::vector<double>& advantages);

// Clipped surrogate objective and its gradient with respect to the policy
// entries (rows aligned to neighbour lists).
double ppo_surrogate(const PolicyMatrix& policy, const PolicyMatrix& policy_old,
                     const TrajectoryBatch& batch, std::span<const double> advantages,
                     double clip_epsilon);
std::vector<std::vector<double>> ppo_surrogate_gradient(const PolicyMatrix& policy,
                                                        const PolicyMatrix& policy_old,
                                                        const TrajectoryBatch& batch,
                                                        std::span<const double> advantages,
                                                        double clip_epsilon);

struct PpoStats {
  double surrogate = 0.0;  // objective value after the final ascent pass
};

// `iterations` full-batch ascent passes on the clipped surrogate; rows are
// simplex-projected (with the probability floor) after every step while
// policy_old stays fixed.
PpoStats ppo_update(PolicyMatrix& policy, const PolicyMatrix& policy_old,
                    const TrajectoryBatch& batch, std::span<const double> advantages,
                    const TrainerConfig& config);

struct ImitationConfig {
  double learning_rate = 0.01;
  int max_steps = 30'000;
  int patience = 500;  // stop after this many steps without loss improvement
  double policy_floor = 1e-6;
};

struct ImitationResult {
  PolicyMatrix policy;
  double final_loss = 0.0;
  int steps = 0;
};

// Cross-entropy fit of a fresh policy to `target` with Adam; the returned
// rows match the target within the probability floor.
ImitationResult imitation_init(const PolicyMatrix& target, const ImitationConfig& config);

struct EpochLog {
  int epoch = 0;
  double reward_avg = 0.0;
  double waiting_avg = 0.0;
  double intrinsic_mean = 0.0;
  double loss_surrogate = 0.0;
  double loss_value = 0.0;
  std::int64_t samples = 0;
  std::int64_t served = 0;
};

struct TrainResult {
  PolicyMatrix policy;
  std::vector<EpochLog> curve;
};

class Trainer {
 public:
  Trainer(const RoadNetwork& network, const TravelTimeMatrix& travel_times,
          const DemandPattern& demand, TrainerConfig config);

  TrainResult train(PolicyMatrix init);

  // Policy, value table and RND predictor in one directory.
  void save_checkpoint(const std::string& dir, const PolicyMatrix& policy) const;

 private:
  const RoadNetwork& network_;
  const TravelTimeMatrix& travel_times_;
  const DemandPattern& demand_;
  TrainerConfig config_;
  ValueTable value_;
  RndPair rnd_;
  SigmaAccumulator sigma_;
};

}  // namespace fleetsim
