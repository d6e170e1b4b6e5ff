#include "fleetsim/rl.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace fleetsim {

void TrainerConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
  if (clip_epsilon <= 0.0 || clip_epsilon >= 1.0)
    throw std::invalid_argument("clip_epsilon must be in (0, 1)");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (rnd_dim < 1) throw std::invalid_argument("rnd_dim must be >= 1");
}

void ValueTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write value table: " + path);
  out.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i)
    out << "v " << i << " " << values[i] << " " << visits[i] << "\n";
}

RndPair::RndPair(int node_count, int dim, std::uint64_t seed)
    : node_count_(node_count), dim_(dim) {
  Rng rng(seed);
  const std::size_t size = static_cast<std::size_t>(node_count) * dim;
  target_state_.resize(size);
  target_action_.resize(size);
  for (double& w : target_state_) w = rng.normal();
  for (double& w : target_action_) w = rng.normal();
  pred_state_.assign(size, 0.0);
  pred_action_.assign(size, 0.0);
}

std::span<const double> RndPair::target_state(int s) const {
  return {&target_state_[static_cast<std::size_t>(s) * dim_], static_cast<std::size_t>(dim_)};
}
std::span<const double> RndPair::target_action(int a) const {
  return {&target_action_[static_cast<std::size_t>(a) * dim_], static_cast<std::size_t>(dim_)};
}
std::span<double> RndPair::pred_state(int s) {
  return {&pred_state_[static_cast<std::size_t>(s) * dim_], static_cast<std::size_t>(dim_)};
}
std::span<double> RndPair::pred_action(int a) {
  return {&pred_action_[static_cast<std::size_t>(a) * dim_], static_cast<std::size_t>(dim_)};
}

double RndPair::bonus(int state, int action) const {
  const std::size_t s = static_cast<std::size_t>(state) * dim_;
  const std::size_t a = static_cast<std::size_t>(action) * dim_;
  double err = 0.0;
  for (int k = 0; k < dim_; ++k) {
    const double diff = (pred_state_[s + k] + pred_action_[a + k]) -
                        (target_state_[s + k] + target_action_[a + k]);
    err += diff * diff;
  }
  return err;
}

void RndPair::train_predictor(std::span<const SampleRecord> records, double learning_rate) {
  std::vector<double> error(dim_);
  for (const SampleRecord& record : records) {
    const std::size_t s = static_cast<std::size_t>(record.state) * dim_;
    const std::size_t a = static_cast<std::size_t>(record.action) * dim_;
    for (int k = 0; k < dim_; ++k) {
      error[k] = (pred_state_[s + k] + pred_action_[a + k]) -
                 (target_state_[s + k] + target_action_[a + k]);
    }
    for (int k = 0; k < dim_; ++k) {
      const double step = 2.0 * learning_rate * error[k];
      pred_state_[s + k] -= step;
      pred_action_[a + k] -= step;
    }
  }
}

void RndPair::set_predictor_to_target() {
  pred_state_ = target_state_;
  pred_action_ = target_action_;
}

void RndPair::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write rnd predictor: " + path);
  out.precision(17);
  out << "rnd " << node_count_ << " " << dim_ << "\n";
  for (double w : pred_state_) out << w << "\n";
  for (double w : pred_action_) out << w << "\n";
}

std::vector<double> extrinsic_returns(const TrajectoryBatch& batch) {
  const int horizon = batch.horizon;
  // Reverse cumulative pass: tail[t] = sum of occupied counts from t to H.
  std::vector<double> tail(horizon + 2, 0.0);
  for (int t = horizon; t >= 1; --t)
    tail[t] = tail[t + 1] + static_cast<double>(batch.occupied_per_step[t]);
  std::vector<double> returns(batch.records.size());
  for (std::size_t i = 0; i < batch.records.size(); ++i)
    returns[i] = tail[batch.records[i].time];
  return returns;
}

double SigmaAccumulator::sigma() const {
  if (count < 2) return 0.0;
  const double n = static_cast<double>(count);
  const double variance = (n * sum_sq - sum * sum) / (n * (n - 1.0));
  return variance > 0.0 ? std::sqrt(variance) : 0.0;
}

std::vector<double> combine_rewards(std::span<const double> extrinsic,
                                    std::span<const double> intrinsic,
                                    SigmaAccumulator& accumulator) {
  if (extrinsic.size() != intrinsic.size())
    throw std::invalid_argument("reward vector length mismatch");
  for (double x : intrinsic) accumulator.add(x);
  const double sigma = accumulator.sigma();
  std::vector<double> total(extrinsic.begin(), extrinsic.end());
  if (sigma > 0.0) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += intrinsic[i] / sigma;
  }
  return total;
}

std::vector<double> advantages(const TrajectoryBatch& batch,
                               std::span<const double> combined_returns,
                               const ValueTable& value_table) {
  std::vector<double> result(batch.records.size());
  for (std::size_t i = 0; i < batch.records.size(); ++i)
    result[i] = combined_returns[i] - value_table.values[batch.records[i].state];
  return result;
}

void fit_value(ValueTable& value_table, const TrajectoryBatch& batch,
               std::span<const double> combined_returns, double learning_rate) {
  const int n = static_cast<int>(value_table.values.size());
  std::vector<double> sums(n, 0.0);
  std::vector<std::int64_t> counts(n, 0);
  for (std::size_t i = 0; i < batch.records.size(); ++i) {
    sums[batch.records[i].state] += combined_returns[i];
    ++counts[batch.records[i].state];
  }
  for (int s = 0; s < n; ++s) {
    if (counts[s] == 0) continue;
    const double mean = sums[s] / static_cast<double>(counts[s]);
    value_table.values[s] += learning_rate * (mean - value_table.values[s]);
    value_table.visits[s] += counts[s];
  }
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  const double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  double variance = 0.0;
  for (double a : advantages) variance += (a - mean) * (a - mean);
  variance /= n;
  const double stddev = std::sqrt(variance);
  if (stddev <= 0.0) {
    std::fill(advantages.begin(), advantages.end(), 0.0);
    return;
  }
  for (double& a : advantages) a = (a - mean) / stddev;
}

namespace {

// Per-record clipped term min(r*A, clip(r)*A). The gradient of the min is
// A/theta_old whenever the unclipped branch is active (or tied).
double clipped_term(double ratio, double advantage, double clip_epsilon, bool* unclipped) {
  const double clipped_ratio = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  const double raw = ratio * advantage;
  const double clipped = clipped_ratio * advantage;
  if (unclipped) *unclipped = raw <= clipped;
  return std::min(raw, clipped);
}

}  // namespace

double ppo_surrogate(const PolicyMatrix& policy, const PolicyMatrix& policy_old,
                     const TrajectoryBatch& batch, std::span<const double> advantages,
                     double clip_epsilon) {
  if (batch.records.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.records.size(); ++i) {
    const SampleRecord& record = batch.records[i];
    const double p_old = policy_old.prob(record.state, record.action);
    const double ratio = policy.prob(record.state, record.action) / p_old;
    total += clipped_term(ratio, advantages[i], clip_epsilon, nullptr);
  }
  return total / static_cast<double>(batch.records.size());
}

std::vector<std::vector<double>> ppo_surrogate_gradient(const PolicyMatrix& policy,
                                                        const PolicyMatrix& policy_old,
                                                        const TrajectoryBatch& batch,
                                                        std::span<const double> advantages,
                                                        double clip_epsilon) {
  std::vector<std::vector<double>> grad(policy.node_count());
  for (int i = 0; i < policy.node_count(); ++i) grad[i].assign(policy.row(i).size(), 0.0);
  if (batch.records.empty()) return grad;
  const double inv_n = 1.0 / static_cast<double>(batch.records.size());
  for (std::size_t i = 0; i < batch.records.size(); ++i) {
    const SampleRecord& record = batch.records[i];
    const int idx = policy.action_index(record.state, record.action);
    const double p_old = policy_old.row(record.state)[idx];
    const double ratio = policy.row(record.state)[idx] / p_old;
    bool unclipped = false;
    clipped_term(ratio, advantages[i], clip_epsilon, &unclipped);
    if (unclipped) grad[record.state][idx] += advantages[i] / p_old * inv_n;
  }
  return grad;
}

PpoStats ppo_update(PolicyMatrix& policy, const PolicyMatrix& policy_old,
                    const TrajectoryBatch& batch, std::span<const double> advantages,
                    const TrainerConfig& config) {
  PpoStats stats;
  if (batch.records.empty()) return stats;
  // Per-state visit counts precondition the ascent: each row moves by the
  // mean gradient of its own records, so the step size does not shrink with
  // the batch size or the horizon.
  std::vector<double> visits(policy.node_count(), 0.0);
  for (const SampleRecord& record : batch.records) visits[record.state] += 1.0;
  const double total = static_cast<double>(batch.records.size());

  for (int iter = 0; iter < config.iterations; ++iter) {
    const auto grad =
        ppo_surrogate_gradient(policy, policy_old, batch, advantages, config.clip_epsilon);
    for (int s = 0; s < policy.node_count(); ++s) {
      if (visits[s] == 0.0) continue;
      const double scale = total / visits[s];
      auto& row = policy.row(s);
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (!std::isfinite(grad[s][k]))
          throw std::runtime_error("non-finite surrogate gradient at node " +
                                   std::to_string(s));
        row[k] += config.learning_rate * scale * grad[s][k];
      }
      policy.project_row(s, config.policy_floor);
    }
  }
  stats.surrogate = ppo_surrogate(policy, policy_old, batch, advantages, config.clip_epsilon);
  return stats;
}

ImitationResult imitation_init(const PolicyMatrix& target, const ImitationConfig& config) {
  const RoadNetwork& network = target.network();
  PolicyMatrix policy = PolicyMatrix::random(network);
  policy.apply_floor(config.policy_floor);

  auto cross_entropy = [&](const PolicyMatrix& p) {
    double loss = 0.0;
    for (int i = 0; i < network.node_count(); ++i) {
      const auto& target_row = target.row(i);
      const auto& row = p.row(i);
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (target_row[k] > 0.0) loss -= target_row[k] * std::log(row[k]);
      }
    }
    return loss;
  };

  // Adam state per policy entry.
  std::vector<std::vector<double>> m(network.node_count()), v(network.node_count());
  for (int i = 0; i < network.node_count(); ++i) {
    m[i].assign(policy.row(i).size(), 0.0);
    v[i].assign(policy.row(i).size(), 0.0);
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  const double initial_loss = cross_entropy(policy);
  double best_loss = initial_loss;
  int steps_since_improvement = 0;
  ImitationResult result{policy, initial_loss, 0};
  for (int step = 1; step <= config.max_steps; ++step) {
    const double bc1 = 1.0 - std::pow(beta1, step);
    const double bc2 = 1.0 - std::pow(beta2, step);
    for (int i = 0; i < network.node_count(); ++i) {
      const auto& target_row = target.row(i);
      auto& row = policy.row(i);
      for (std::size_t k = 0; k < row.size(); ++k) {
        const double g = target_row[k] > 0.0 ? -target_row[k] / row[k] : 0.0;
        m[i][k] = beta1 * m[i][k] + (1.0 - beta1) * g;
        v[i][k] = beta2 * v[i][k] + (1.0 - beta2) * g * g;
        row[k] -= config.learning_rate * (m[i][k] / bc1) / (std::sqrt(v[i][k] / bc2) + adam_eps);
      }
      policy.project_row(i, config.policy_floor);
    }
    const double loss = cross_entropy(policy);
    result.steps = step;
    if (loss < best_loss - 1e-12) {
      best_loss = loss;
      steps_since_improvement = 0;
      result.policy = policy;
      result.final_loss = loss;
    } else {
      ++steps_since_improvement;
      if (steps_since_improvement >= config.patience) break;
    }
  }
  if (best_loss > initial_loss)
    throw std::runtime_error("imitation training diverged: loss increased from start");
  result.policy.validate();
  return result;
}

Trainer::Trainer(const RoadNetwork& network, const TravelTimeMatrix& travel_times,
                 const DemandPattern& demand, TrainerConfig config)
    : network_(network),
      travel_times_(travel_times),
      demand_(demand),
      config_(std::move(config)),
      value_(network.node_count()),
      rnd_(network.node_count(), config_.rnd_dim, Rng(config_.seed).derive("rnd-target").next_u64()) {
  config_.validate();
}

TrainResult Trainer::train(PolicyMatrix init) {
  TrainResult result{std::move(init), {}};
  Rng seed_stream = Rng(config_.seed).derive("train");
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    result.policy.apply_floor(config_.policy_floor);
    const PolicyMatrix policy_old = result.policy;
    PolicyRouter router(policy_old);

    SimulationOptions options;
    options.taxi_count = config_.taxi_count;
    options.horizon = config_.horizon;
    options.max_samples = config_.max_samples;
    options.queue_cap = config_.queue_cap;
    options.seed = seed_stream.derive("epoch", static_cast<std::uint64_t>(epoch)).next_u64();
    EpochResult epoch_result =
        run_epoch(network_, travel_times_, demand_, router, std::move(options));
    const TrajectoryBatch& batch = epoch_result.trajectory;

    std::vector<double> ext = extrinsic_returns(batch);
    std::vector<double> combined;
    double intrinsic_mean = 0.0;
    if (config_.exploration && !batch.records.empty()) {
      std::vector<double> intrinsic(batch.records.size());
      for (std::size_t i = 0; i < batch.records.size(); ++i)
        intrinsic[i] = rnd_.bonus(batch.records[i].state, batch.records[i].action);
      intrinsic_mean = std::accumulate(intrinsic.begin(), intrinsic.end(), 0.0) /
                       static_cast<double>(intrinsic.size());
      if (config_.sigma_reset_per_epoch) sigma_.reset();
      combined = combine_rewards(ext, intrinsic, sigma_);
    } else {
      combined = ext;
    }
    // Returns are scaled by the horizon so the fixed learning rate behaves
    // the same across horizons.
    const double inv_h = 1.0 / static_cast<double>(config_.horizon);
    for (double& r : combined) r *= inv_h;

    std::vector<double> adv = advantages(batch, combined, value_);
    double loss_value = 0.0;
    if (!adv.empty()) {
      for (double a : adv) loss_value += a * a;
      loss_value /= static_cast<double>(adv.size());
    }
    normalize_advantages(adv);
    const PpoStats stats = ppo_update(result.policy, policy_old, batch, adv, config_);
    if (config_.exploration)
      rnd_.train_predictor(batch.records, config_.learning_rate);
    fit_value(value_, batch, combined, config_.learning_rate);

    result.curve.push_back({epoch, epoch_result.average_reward, epoch_result.average_waiting,
                            intrinsic_mean, stats.surrogate, loss_value,
                            static_cast<std::int64_t>(batch.records.size()),
                            epoch_result.commuters_served});
  }
  return result;
}

void Trainer::save_checkpoint(const std::string& dir, const PolicyMatrix& policy) const {
  std::filesystem::create_directories(dir);
  policy.save(dir + "/policy.txt");
  value_.save(dir + "/value.txt");
  rnd_.save(dir + "/rnd_predictor.txt");
  std::ofstream version(dir + "/VERSION");
  version << "fleetsim-checkpoint 1\n";
}

}  // namespace fleetsim
