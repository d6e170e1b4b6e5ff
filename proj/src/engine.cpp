#include "fleetsim/engine.hpp"

#include <string>

namespace fleetsim {

Simulation::Simulation(const RoadNetwork& network, const TravelTimeMatrix& travel_times,
                       const DemandPattern& demand, VacantRouter& router,
                       SimulationOptions options)
    : network_(network),
      travel_times_(travel_times),
      demand_(demand),
      router_(router),
      options_(std::move(options)),
      demand_rng_(Rng(options_.seed).derive("demand")),
      taxi_rng_(Rng(options_.seed).derive("taxi")),
      queues_(network.node_count(), options_.queue_cap) {
  if (options_.taxi_count < 0) throw std::invalid_argument("negative taxi count");
  if (options_.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  taxis_.resize(options_.taxi_count);
  if (options_.initial_positions) {
    if (static_cast<int>(options_.initial_positions->size()) != options_.taxi_count)
      throw std::invalid_argument("initial position count mismatch");
    for (int l = 0; l < options_.taxi_count; ++l) {
      const int node = (*options_.initial_positions)[l];
      taxis_[l].edge_tail = taxis_[l].edge_head = node;
    }
  } else {
    for (auto& taxi : taxis_) {
      const int node = static_cast<int>(taxi_rng_.uniform_int(0, network.node_count() - 1));
      taxi.edge_tail = taxi.edge_head = node;
    }
  }
  trajectory_.horizon = options_.horizon;
  trajectory_.occupied_per_step.assign(options_.horizon + 1, 0);
  waiting_per_step_.assign(options_.horizon + 1, 0);
  router_.begin_epoch(options_.taxi_count);
}

void Simulation::inject_commuter(int node, int destination) {
  queues_.push(node, {destination, t_});
}

void Simulation::step() {
  ++t_;

  // 1. Commuter arrivals.
  step_commuters(queues_, demand_, t_, demand_rng_);

  // 2. Motion: en-route taxis advance one time-step; arrival normalises the
  // state to (k2, k2, 0).
  for (auto& taxi : taxis_) {
    if (taxi.edge_tail == taxi.edge_head) continue;
    ++taxi.progress;
    if (taxi.progress == network_.travel_time(taxi.edge_tail, taxi.edge_head)) {
      taxi.edge_tail = taxi.edge_head;
      taxi.progress = 0;
    }
  }

  // 3. Drop-offs before pickups, so a taxi can serve a new commuter from the
  // node it just delivered to within the same step.
  for (auto& taxi : taxis_) {
    if (taxi.status == TaxiStatus::occupied && taxi.at_node() &&
        taxi.node() == taxi.passenger_dest) {
      taxi.status = TaxiStatus::vacant;
      taxi.passenger_dest = -1;
      ++delivered_;
      completed_trip_steps_ += t_ - taxi.pickup_time;
      taxi.pickup_time = -1;
    }
  }

  // 4. Pickups: ascending taxi-id order against FIFO queues, one commuter per
  // taxi. Committed dispatch taxis pass through without picking up.
  for (int l = 0; l < static_cast<int>(taxis_.size()); ++l) {
    auto& taxi = taxis_[l];
    if (taxi.status != TaxiStatus::vacant || !taxi.at_node()) continue;
    const int node = taxi.node();
    if (queues_.count(node) == 0) continue;
    if (!router_.pickup_allowed(l, node)) continue;
    const CommuterRecord commuter = queues_.pop_front(node);
    taxi.status = TaxiStatus::occupied;
    taxi.passenger_dest = commuter.destination;
    taxi.pickup_time = t_;
    ++served_;
    router_.notify_pickup(l);
  }

  // 5. Routing decisions at nodes: occupied taxis follow next_hop, vacant
  // taxis ask the router.
  for (int l = 0; l < static_cast<int>(taxis_.size()); ++l) {
    auto& taxi = taxis_[l];
    if (!taxi.at_node()) continue;
    const int node = taxi.node();
    if (taxi.status == TaxiStatus::occupied) {
      taxi.edge_head = travel_times_.next_hop(node, taxi.passenger_dest);
      continue;
    }
    const int action = router_.choose(l, node, taxi_rng_);
    if (action != node && !network_.has_edge(node, action))
      throw ContractViolation("router proposed non-adjacent successor " +
                              std::to_string(action) + " from node " + std::to_string(node));
    if (static_cast<int>(trajectory_.records.size()) < options_.max_samples)
      trajectory_.records.push_back({node, action, t_});
    if (options_.observer) options_.observer->on_vacant_move(node, action);
    if (action != node) taxi.edge_head = action;
  }

  // 6. Metric accrual at end of step.
  std::int64_t occupied = 0;
  for (const auto& taxi : taxis_) {
    if (taxi.status == TaxiStatus::occupied) ++occupied;
  }
  trajectory_.occupied_per_step[t_] = occupied;
  total_reward_ += occupied;
  waiting_per_step_[t_] = queues_.total_waiting();
}

void Simulation::run() {
  while (t_ < options_.horizon) step();
}

EpochResult Simulation::finish() {
  run();
  EpochResult result;
  result.total_extrinsic_reward = total_reward_;
  result.average_reward = static_cast<double>(total_reward_) / options_.horizon;
  const WaitingStats waiting = waiting_time_total(
      std::span<const std::int64_t>(waiting_per_step_.data() + 1, options_.horizon),
      demand_.n_c);
  result.waiting_total = waiting.total;
  result.average_waiting = waiting.average;
  result.commuters_served = served_;
  result.overflow_drops = queues_.overflow_drops();
  result.trajectory = std::move(trajectory_);
  return result;
}

EpochResult run_epoch(const RoadNetwork& network, const TravelTimeMatrix& travel_times,
                      const DemandPattern& demand, VacantRouter& router,
                      SimulationOptions options) {
  Simulation sim(network, travel_times, demand, router, std::move(options));
  return sim.finish();
}

}  // namespace fleetsim
