#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fleetsim {

struct Edge {
  int from = 0;
  int to = 0;
  int travel_time = 0;  // integer time-steps, >= 1
};

// Directed weighted road network. Immutable after construction; safe to share
// across concurrent simulation runs.
class RoadNetwork {
 public:
  RoadNetwork(int node_count, std::vector<Edge> edges);

  int node_count() const { return node_count_; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Travel time of the direct edge i->j, or 0 if absent.
  int travel_time(int from, int to) const;
  bool has_edge(int from, int to) const { return travel_time(from, to) > 0; }

  // A[i][j]: reciprocal of travel time for direct edges, 1 on the diagonal,
  // 0 otherwise.
  double adjacency(int i, int j) const;

  // Directly connected successors of i, sorted ascending, self included.
  const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }

 private:
  int node_count_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<int, int>>> out_;  // (to, travel_time), sorted by to
  std::vector<std::vector<int>> neighbors_;
};

// rows x cols grid, bidirectional edges between orthogonal neighbours, each
// directed edge weight drawn uniformly from {weight_low..weight_high}.
RoadNetwork build_lattice(int rows, int cols, int weight_low, int weight_high,
                          std::uint64_t seed);

// Text format: "nodes <N>" header, then "edge <from> <to> <travel_time>"
// lines; '#' starts a comment.
RoadNetwork load_network(const std::string& path);
void save_network(const RoadNetwork& network, const std::string& path);

// Dense all-pairs shortest travel times plus first-hop table. d[i][i] is 1 by
// convention; use true_distance for the path metric.
class TravelTimeMatrix {
 public:
  TravelTimeMatrix(int n, std::vector<std::int32_t> dist, std::vector<std::int32_t> hop)
      : n_(n), dist_(std::move(dist)), hop_(std::move(hop)) {}

  int node_count() const { return n_; }
  int d(int i, int j) const { return i == j ? 1 : dist_[static_cast<std::size_t>(i) * n_ + j]; }
  int true_distance(int i, int j) const {
    return i == j ? 0 : dist_[static_cast<std::size_t>(i) * n_ + j];
  }
  // First node on a shortest path i -> dest (ties: lowest successor id).
  int next_hop(int i, int dest) const {
    return hop_[static_cast<std::size_t>(i) * n_ + dest];
  }

 private:
  int n_;
  std::vector<std::int32_t> dist_;
  std::vector<std::int32_t> hop_;
};

TravelTimeMatrix all_pairs_shortest(const RoadNetwork& network);

}  // namespace fleetsim
