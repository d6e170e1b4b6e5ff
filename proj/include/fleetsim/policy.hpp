#pragma once

#include <string>
#include <vector>

#include "fleetsim/rng.hpp"

namespace fleetsim {

class RoadNetwork;

// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::vector<double> raw);

// Row-stochastic turn-by-turn routing policy. Row i is a distribution over
// the neighbours of i (self included), stored aligned to the network's sorted
// neighbour lists. Also serves as the RL parameter matrix under simplex
// projection.
class PolicyMatrix {
 public:
  PolicyMatrix(const RoadNetwork& network, std::vector<std::vector<double>> rows);

  // P[i][j] = 1/n_i over the n_i neighbours of i including self.
  static PolicyMatrix random(const RoadNetwork& network);

  const RoadNetwork& network() const { return *network_; }
  int node_count() const;
  const std::vector<int>& actions(int node) const;
  const std::vector<double>& row(int node) const { return rows_[node]; }
  std::vector<double>& row(int node) { return rows_[node]; }

  // Probability of moving node -> j; zero if j is not a neighbour.
  double prob(int node, int j) const;
  // Index of j within actions(node); -1 when absent.
  int action_index(int node, int j) const;

  // Successor sampled from the row distribution.
  int sample_action(int node, Rng& rng) const;

  // Projects a row onto the simplex and applies a probability floor so that
  // importance ratios stay finite.
  void project_row(int node, double floor);
  void apply_floor(double floor);

  void validate() const;  // throws on any row invariant violation

  void save(const std::string& path, const std::string& header = "") const;
  static PolicyMatrix load(const std::string& path, const RoadNetwork& network);

 private:
  const RoadNetwork* network_;  // non-owning; networks outlive their policies
  std::vector<std::vector<double>> rows_;
};

}  // namespace fleetsim
