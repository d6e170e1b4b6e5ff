#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "fleetsim/rng.hpp"

namespace fleetsim {

class RoadNetwork;

// Commuter demand: per-node generation probabilities g_i and a row-stochastic
// destination matrix M with zero diagonal.
struct DemandPattern {
  std::vector<double> g;
  std::vector<std::vector<double>> destination;  // M, dense rows
  double n_c = 0.0;                              // expected commuters per step, sum of g

  void validate() const;
  int sample_destination(int origin, Rng& rng) const;
};

// Shannon entropy of g normalised to [0, 1]; zero-probability terms
// contribute 0.
double normalized_entropy(std::span<const double> g);

// Random demand with normalised entropy in (0.6, 0.8), rescaled so that
// sum(g) == n_c with every g_i <= 1. Deterministic per seed.
DemandPattern generate_random_demand(const RoadNetwork& network, std::uint64_t seed,
                                     double n_c);

// Text format: "g <node> <prob>" and "m <origin> <dest> <prob>" lines;
// destination rows are renormalised on load.
DemandPattern load_demand(const std::string& path, int node_count);
void save_demand(const DemandPattern& demand, const std::string& path);

struct CommuterRecord {
  int destination;
  int birth_time;
};

// Per-node FIFO queues of waiting commuters, capped in length.
class CommuterQueues {
 public:
  explicit CommuterQueues(int node_count, int cap = 1'000'001)
      : queues_(node_count), cap_(cap) {}

  int node_count() const { return static_cast<int>(queues_.size()); }
  int count(int node) const { return static_cast<int>(queues_[node].size()); }
  int cap() const { return cap_; }
  std::int64_t total_waiting() const;
  std::int64_t overflow_drops() const { return overflow_drops_; }
  std::int64_t births() const { return births_; }

  // Appends one commuter unless the queue is full; overflow is counted.
  void push(int node, CommuterRecord record);
  CommuterRecord pop_front(int node);

 private:
  std::vector<std::deque<CommuterRecord>> queues_;
  int cap_;
  std::int64_t overflow_drops_ = 0;
  std::int64_t births_ = 0;
};

// One time-step of commuter arrivals: each node independently gains one
// commuter with probability g_i, destination sampled from M.
void step_commuters(CommuterQueues& queues, const DemandPattern& demand, int t, Rng& rng);

struct WaitingStats {
  std::int64_t total = 0;  // sum over steps of waiting commuter counts
  double average = 0.0;    // total / (H * n_c)
};

// per_step_counts[t] is the total waiting count at the end of step t.
WaitingStats waiting_time_total(std::span<const std::int64_t> per_step_counts, double n_c);

}  // namespace fleetsim
