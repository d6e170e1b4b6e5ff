#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fleetsim/engine.hpp"

namespace fleetsim {

// Sampling rule used by the unnormalised dispatch variant. The raw weights
// g_j/d_ij do not sum to one, so two readings are possible:
//   weighted: sample in proportion to the raw weights (same distribution the
//     normalised variant produces);
//   residual_stay: treat the raw weights as sub-probabilities; when they sum
//     to less than one the leftover mass means "stay put".
enum class DispatchSampling { weighted, residual_stay };

// Full-network dispatch probabilities D[i][j] = lambda_i * g_j / d_ij.
class DispatchMatrix {
 public:
  // normalized: rows scaled by lambda_i so they sum to one; otherwise raw
  // weights are kept.
  static DispatchMatrix build(const TravelTimeMatrix& travel_times,
                              std::span<const double> g, bool normalized);

  int node_count() const { return n_; }
  bool normalized() const { return normalized_; }
  double entry(int i, int j) const { return rows_[static_cast<std::size_t>(i) * n_ + j]; }
  double row_sum(int i) const { return row_sums_[i]; }

  int sample_target(int origin, Rng& rng, DispatchSampling sampling) const;

 private:
  DispatchMatrix(int n, std::vector<double> rows, std::vector<double> row_sums,
                 bool normalized)
      : n_(n), rows_(std::move(rows)), row_sums_(std::move(row_sums)), normalized_(normalized) {}

  int n_;
  std::vector<double> rows_;
  std::vector<double> row_sums_;
  bool normalized_;
};

// Routes vacant taxis toward sampled dispatch targets along shortest paths.
// Committed taxis do not pick up before reaching their target.
class DispatchRouter : public VacantRouter {
 public:
  DispatchRouter(const DispatchMatrix& dispatch, const TravelTimeMatrix& travel_times,
                 bool committed, DispatchSampling sampling = DispatchSampling::weighted)
      : dispatch_(&dispatch),
        travel_times_(&travel_times),
        committed_(committed),
        sampling_(sampling) {}

  void begin_epoch(int taxi_count) override { targets_.assign(taxi_count, kNoTarget); }
  int choose(int taxi, int node, Rng& rng) override;
  bool pickup_allowed(int taxi, int node) const override;
  void notify_pickup(int taxi) override { targets_[taxi] = kNoTarget; }

 private:
  static constexpr int kNoTarget = -1;
  const DispatchMatrix* dispatch_;
  const TravelTimeMatrix* travel_times_;
  bool committed_;
  DispatchSampling sampling_;
  std::vector<int> targets_;
};

// Vacant-landing and move counts accumulated during extraction; counters from
// parallel runs merge by addition.
struct EffectivePolicyCounters : MoveObserver {
  explicit EffectivePolicyCounters(const RoadNetwork& network);

  void on_vacant_move(int from, int to) override;
  void merge(const EffectivePolicyCounters& other);
  std::int64_t landings(int node) const { return n[node]; }

  const RoadNetwork* network;
  std::vector<std::int64_t> n;                 // vacant landings per node
  std::vector<std::vector<std::int64_t>> p;    // moves, aligned to neighbour lists
};

// Builds the effective turn-by-turn policy induced by `router` from move
// counts over one long run. Rows with no vacant landings fall back to the
// random-policy row; `fallback_rows`, when given, flags them.
PolicyMatrix extract_effective_policy(const RoadNetwork& network,
                                      const TravelTimeMatrix& travel_times,
                                      const DemandPattern& demand, VacantRouter& router,
                                      int taxi_count, int horizon, std::uint64_t seed,
                                      std::vector<bool>* fallback_rows = nullptr);

// Policy from already-merged counters.
PolicyMatrix effective_policy_from_counters(const EffectivePolicyCounters& counters,
                                            std::vector<bool>* fallback_rows = nullptr);

}  // namespace fleetsim
