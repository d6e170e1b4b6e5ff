#include "fleetsim/dispatch.hpp"

#include <algorithm>
#include <stdexcept>

namespace fleetsim {

DispatchMatrix DispatchMatrix::build(const TravelTimeMatrix& travel_times,
                                     std::span<const double> g, bool normalized) {
  const int n = travel_times.node_count();
  if (static_cast<int>(g.size()) != n) throw std::invalid_argument("g size mismatch");
  bool any = false;
  for (double gi : g) any = any || gi > 0.0;
  if (!any) throw std::invalid_argument("dispatch requires at least one node with demand");

  std::vector<double> rows(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> row_sums(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      const double w = g[j] / travel_times.d(i, j);  // d_ii = 1: staying competes as g_i
      rows[static_cast<std::size_t>(i) * n + j] = w;
      sum += w;
    }
    if (normalized) {
      for (int j = 0; j < n; ++j) rows[static_cast<std::size_t>(i) * n + j] /= sum;
      row_sums[i] = 1.0;
    } else {
      row_sums[i] = sum;
    }
  }
  return DispatchMatrix(n, std::move(rows), std::move(row_sums), normalized);
}

int DispatchMatrix::sample_target(int origin, Rng& rng, DispatchSampling sampling) const {
  const std::span<const double> row(&rows_[static_cast<std::size_t>(origin) * n_],
                                    static_cast<std::size_t>(n_));
  double total = row_sums_[origin];
  if (!normalized_ && sampling == DispatchSampling::residual_stay) {
    // Sub-probability reading: leftover mass stays put.
    if (total < 1.0) {
      const double u = rng.uniform();
      double acc = 0.0;
      for (int j = 0; j < n_; ++j) {
        acc += row[j];
        if (u < acc) return j;
      }
      return origin;
    }
  }
  return rng.sample_weights(row, total);
}

int DispatchRouter::choose(int taxi, int node, Rng& rng) {
  if (targets_[taxi] == node) targets_[taxi] = kNoTarget;  // arrived: resample now
  if (targets_[taxi] == kNoTarget) {
    const int target = dispatch_->sample_target(node, rng, sampling_);
    if (target == node) return node;  // wait one step, then resample
    targets_[taxi] = target;
  }
  return travel_times_->next_hop(node, targets_[taxi]);
}

bool DispatchRouter::pickup_allowed(int taxi, int node) const {
  if (!committed_) return true;
  const int target = targets_.empty() ? kNoTarget : targets_[taxi];
  return target == kNoTarget || target == node;
}

EffectivePolicyCounters::EffectivePolicyCounters(const RoadNetwork& net) : network(&net) {
  n.assign(net.node_count(), 0);
  p.resize(net.node_count());
  for (int i = 0; i < net.node_count(); ++i) p[i].assign(net.neighbors(i).size(), 0);
}

void EffectivePolicyCounters::on_vacant_move(int from, int to) {
  const auto& nbrs = network->neighbors(from);
  const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), to);
  ++n[from];
  ++p[from][it - nbrs.begin()];
}

void EffectivePolicyCounters::merge(const EffectivePolicyCounters& other) {
  for (std::size_t i = 0; i < n.size(); ++i) {
    n[i] += other.n[i];
    for (std::size_t k = 0; k < p[i].size(); ++k) p[i][k] += other.p[i][k];
  }
}

PolicyMatrix effective_policy_from_counters(const EffectivePolicyCounters& counters,
                                            std::vector<bool>* fallback_rows) {
  const RoadNetwork& network = *counters.network;
  bool any_moves = false;
  for (std::int64_t count : counters.n) any_moves = any_moves || count > 0;
  if (!any_moves) throw std::runtime_error("no vacant moves recorded; cannot extract policy");

  std::vector<std::vector<double>> rows(network.node_count());
  if (fallback_rows) fallback_rows->assign(network.node_count(), false);
  for (int i = 0; i < network.node_count(); ++i) {
    const std::size_t n_i = network.neighbors(i).size();
    if (counters.n[i] == 0) {
      rows[i].assign(n_i, 1.0 / static_cast<double>(n_i));
      if (fallback_rows) (*fallback_rows)[i] = true;
      continue;
    }
    rows[i].resize(n_i);
    for (std::size_t k = 0; k < n_i; ++k)
      rows[i][k] = static_cast<double>(counters.p[i][k]) / static_cast<double>(counters.n[i]);
  }
  PolicyMatrix policy(network, std::move(rows));
  policy.validate();
  return policy;
}

PolicyMatrix extract_effective_policy(const RoadNetwork& network,
                                      const TravelTimeMatrix& travel_times,
                                      const DemandPattern& demand, VacantRouter& router,
                                      int taxi_count, int horizon, std::uint64_t seed,
                                      std::vector<bool>* fallback_rows) {
  EffectivePolicyCounters counters(network);
  SimulationOptions options;
  options.taxi_count = taxi_count;
  options.horizon = horizon;
  options.seed = seed;
  options.max_samples = 0;  // counters carry the data; no sample records needed
  options.observer = &counters;
  run_epoch(network, travel_times, demand, router, std::move(options));
  return effective_policy_from_counters(counters, fallback_rows);
}

}  // namespace fleetsim
