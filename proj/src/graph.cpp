#include "fleetsim/graph.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "fleetsim/rng.hpp"

namespace fleetsim {
namespace {

void check_connected(int n, const std::vector<std::vector<std::pair<int, int>>>& out,
                     const std::string& context) {
  // Strong connectivity: forward BFS from node 0 plus BFS on the reverse graph.
  std::vector<std::vector<int>> rev(n);
  for (int i = 0; i < n; ++i) {
    for (auto [j, tt] : out[i]) rev[j].push_back(i);
  }
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (pass == 0) {
        for (auto [v, tt] : out[u]) {
          if (!seen[v]) {
            seen[v] = 1;
            ++count;
            stack.push_back(v);
          }
        }
      } else {
        for (int v : rev[u]) {
          if (!seen[v]) {
            seen[v] = 1;
            ++count;
            stack.push_back(v);
          }
        }
      }
    }
    if (count != n) throw std::invalid_argument(context + ": disconnected");
  }
}

}  // namespace

RoadNetwork::RoadNetwork(int node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
  if (node_count_ < 1) throw std::invalid_argument("node count must be positive");
  out_.resize(node_count_);
  for (const Edge& e : edges_) {
    if (e.from < 0 || e.from >= node_count_ || e.to < 0 || e.to >= node_count_)
      throw std::invalid_argument("edge endpoint out of range");
    if (e.from == e.to) throw std::invalid_argument("self-loop edges are not allowed");
    if (e.travel_time < 1) throw std::invalid_argument("non-positive travel time");
    out_[e.from].push_back({e.to, e.travel_time});
  }
  neighbors_.resize(node_count_);
  for (int i = 0; i < node_count_; ++i) {
    std::sort(out_[i].begin(), out_[i].end());
    for (std::size_t k = 1; k < out_[i].size(); ++k) {
      if (out_[i][k].first == out_[i][k - 1].first)
        throw std::invalid_argument("duplicate edge");
    }
    neighbors_[i].push_back(i);
    for (auto [j, tt] : out_[i]) neighbors_[i].push_back(j);
    std::sort(neighbors_[i].begin(), neighbors_[i].end());
    if (neighbors_[i].size() < 2)
      throw std::invalid_argument("node " + std::to_string(i) + " has no successor");
  }
  check_connected(node_count_, out_, "network");
}

int RoadNetwork::travel_time(int from, int to) const {
  const auto& row = out_[from];
  auto it = std::lower_bound(row.begin(), row.end(), std::pair<int, int>{to, 0});
  if (it != row.end() && it->first == to) return it->second;
  return 0;
}

double RoadNetwork::adjacency(int i, int j) const {
  if (i == j) return 1.0;
  int tt = travel_time(i, j);
  return tt > 0 ? 1.0 / tt : 0.0;
}

RoadNetwork build_lattice(int rows, int cols, int weight_low, int weight_high,
                          std::uint64_t seed) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("lattice dimensions must be >= 2");
  if (weight_low < 1 || weight_low > weight_high)
    throw std::invalid_argument("invalid weight range");
  Rng rng(seed);
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(2 * (rows * (cols - 1) + cols * (rows - 1))));
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int a = id(r, c);
      if (c + 1 < cols) {
        const int b = id(r, c + 1);
        edges.push_back({a, b, static_cast<int>(rng.uniform_int(weight_low, weight_high))});
        edges.push_back({b, a, static_cast<int>(rng.uniform_int(weight_low, weight_high))});
      }
      if (r + 1 < rows) {
        const int b = id(r + 1, c);
        edges.push_back({a, b, static_cast<int>(rng.uniform_int(weight_low, weight_high))});
        edges.push_back({b, a, static_cast<int>(rng.uniform_int(weight_low, weight_high))});
      }
    }
  }
  return RoadNetwork(rows * cols, std::move(edges));
}

RoadNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network file: " + path);
  std::string line;
  int line_no = 0;
  int node_count = -1;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind)) continue;
    auto fail = [&](const std::string& msg) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (kind == "nodes") {
      if (!(ss >> node_count) || node_count < 1) fail("invalid node count");
    } else if (kind == "edge") {
      Edge e;
      if (!(ss >> e.from >> e.to >> e.travel_time)) fail("malformed edge line");
      if (node_count < 0) fail("edge before nodes header");
      if (e.from < 0 || e.from >= node_count || e.to < 0 || e.to >= node_count)
        fail("edge endpoint out of range");
      if (e.travel_time < 1) fail("non-positive travel time");
      edges.push_back(e);
    } else {
      fail("unknown directive '" + kind + "'");
    }
  }
  if (node_count < 0) throw std::runtime_error(path + ": missing nodes header");
  try {
    return RoadNetwork(node_count, std::move(edges));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void save_network(const RoadNetwork& network, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write network file: " + path);
  out << "nodes " << network.node_count() << "\n";
  for (const Edge& e : network.edges())
    out << "edge " << e.from << " " << e.to << " " << e.travel_time << "\n";
}

TravelTimeMatrix all_pairs_shortest(const RoadNetwork& network) {
  const int n = network.node_count();
  const std::int32_t inf = std::numeric_limits<std::int32_t>::max() / 4;
  std::vector<std::int32_t> dist(static_cast<std::size_t>(n) * n, inf);
  std::vector<std::int32_t> hop(static_cast<std::size_t>(n) * n, -1);

  // Dijkstra from every source on integer weights.
  using Item = std::pair<std::int32_t, int>;
  for (int src = 0; src < n; ++src) {
    auto* drow = &dist[static_cast<std::size_t>(src) * n];
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    drow[src] = 0;
    heap.push({0, src});
    while (!heap.empty()) {
      auto [du, u] = heap.top();
      heap.pop();
      if (du != drow[u]) continue;
      for (int v : network.neighbors(u)) {
        if (v == u) continue;
        const std::int32_t cand = du + network.travel_time(u, v);
        if (cand < drow[v]) {
          drow[v] = cand;
          heap.push({cand, v});
        }
      }
    }
    for (int j = 0; j < n; ++j) {
      if (drow[j] >= inf) throw std::invalid_argument("network is disconnected");
    }
  }

  // next_hop[i][dest]: lowest successor j attaining d(i,dest); ties broken by
  // the ascending neighbour order.
  for (int i = 0; i < n; ++i) {
    auto* drow = &dist[static_cast<std::size_t>(i) * n];
    auto* hrow = &hop[static_cast<std::size_t>(i) * n];
    hrow[i] = i;
    for (int dest = 0; dest < n; ++dest) {
      if (dest == i) continue;
      for (int j : network.neighbors(i)) {
        if (j == i) continue;
        const std::int32_t via = network.travel_time(i, j) +
                                 dist[static_cast<std::size_t>(j) * n + dest];
        if (via == drow[dest]) {
          hrow[dest] = j;
          break;
        }
      }
    }
  }

  // Overwrite the diagonal to the d_ii = 1 convention.
  for (int i = 0; i < n; ++i) dist[static_cast<std::size_t>(i) * n + i] = 1;
  return TravelTimeMatrix(n, std::move(dist), std::move(hop));
}

}  // namespace fleetsim
