#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fleetsim/demand.hpp"
#include "fleetsim/graph.hpp"
#include "fleetsim/policy.hpp"
#include "fleetsim/rng.hpp"

namespace fleetsim {

enum class TaxiStatus { vacant, occupied };

// Taxi position (k1, k2, d): on the directed edge k1->k2 at d time-steps from
// k1, or at a node when k1 == k2 and d == 0.
struct TaxiState {
  int edge_tail = 0;
  int edge_head = 0;
  int progress = 0;
  TaxiStatus status = TaxiStatus::vacant;
  int passenger_dest = -1;
  int pickup_time = -1;

  bool at_node() const { return edge_tail == edge_head && progress == 0; }
  int node() const { return edge_tail; }
};

struct SampleRecord {
  int state;   // node where a vacant taxi chose
  int action;  // successor node (possibly the same node)
  int time;    // step index, 1-based
};

struct TrajectoryBatch {
  std::vector<SampleRecord> records;
  std::vector<std::int64_t> occupied_per_step;  // index 1..horizon
  int horizon = 0;
};

struct EpochResult {
  std::int64_t total_extrinsic_reward = 0;  // occupied-taxi time-steps
  double average_reward = 0.0;              // total / H
  std::int64_t waiting_total = 0;
  double average_waiting = 0.0;
  std::int64_t commuters_served = 0;  // pickups
  std::int64_t overflow_drops = 0;
  TrajectoryBatch trajectory;
};

// Thrown when a router proposes a non-adjacent successor; the epoch aborts.
class ContractViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Routing strategy for vacant taxis standing at a node.
class VacantRouter {
 public:
  virtual ~VacantRouter() = default;
  virtual void begin_epoch(int taxi_count) { (void)taxi_count; }
  // Next node for a vacant taxi; must be adjacent to `node` or `node` itself.
  virtual int choose(int taxi, int node, Rng& rng) = 0;
  // Committed dispatch refuses pickups at intermediate nodes.
  virtual bool pickup_allowed(int taxi, int node) const {
    (void)taxi;
    (void)node;
    return true;
  }
  virtual void notify_pickup(int taxi) { (void)taxi; }
};

class PolicyRouter : public VacantRouter {
 public:
  explicit PolicyRouter(const PolicyMatrix& policy) : policy_(&policy) {}
  int choose(int taxi, int node, Rng& rng) override {
    (void)taxi;
    return policy_->sample_action(node, rng);
  }

 private:
  const PolicyMatrix* policy_;
};

// Receives every vacant routing decision, uncapped; used for effective-policy
// extraction.
struct MoveObserver {
  virtual ~MoveObserver() = default;
  virtual void on_vacant_move(int from, int to) = 0;
};

struct SimulationOptions {
  int taxi_count = 0;
  int horizon = 10'000;
  std::uint64_t seed = 0;
  int max_samples = 512'000;
  int queue_cap = 1'000'001;
  MoveObserver* observer = nullptr;
  std::optional<std::vector<int>> initial_positions;  // defaults to random nodes
};

// Single-threaded discrete-time simulation of one epoch. Step order:
// commuter arrivals, taxi motion, drop-offs, pickups, routing decisions,
// metric accrual. A taxi that drops off may pick up again at the same node in
// the same step.
class Simulation {
 public:
  Simulation(const RoadNetwork& network, const TravelTimeMatrix& travel_times,
             const DemandPattern& demand, VacantRouter& router, SimulationOptions options);

  void step();
  void run();  // all remaining steps
  EpochResult finish();

  int current_time() const { return t_; }
  int horizon() const { return options_.horizon; }
  const std::vector<TaxiState>& taxis() const { return taxis_; }
  const CommuterQueues& queues() const { return queues_; }
  std::int64_t delivered() const { return delivered_; }
  std::int64_t served() const { return served_; }
  std::int64_t completed_trip_steps() const { return completed_trip_steps_; }
  std::int64_t total_extrinsic_reward() const { return total_reward_; }

  // Test hook: place a commuter before (or between) steps.
  void inject_commuter(int node, int destination);

 private:
  const RoadNetwork& network_;
  const TravelTimeMatrix& travel_times_;
  const DemandPattern& demand_;
  VacantRouter& router_;
  SimulationOptions options_;
  Rng demand_rng_;
  Rng taxi_rng_;
  CommuterQueues queues_;
  std::vector<TaxiState> taxis_;
  TrajectoryBatch trajectory_;
  std::vector<std::int64_t> waiting_per_step_;
  std::int64_t total_reward_ = 0;
  std::int64_t served_ = 0;
  std::int64_t delivered_ = 0;
  std::int64_t completed_trip_steps_ = 0;
  int t_ = 0;
};

EpochResult run_epoch(const RoadNetwork& network, const TravelTimeMatrix& travel_times,
                      const DemandPattern& demand, VacantRouter& router,
                      SimulationOptions options);

}  // namespace fleetsim
