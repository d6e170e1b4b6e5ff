#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "fleetsim/graph.hpp"

using namespace fleetsim;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = std::string("/tmp/fleetsim_graph_") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

// Reference all-pairs shortest paths by Bellman-Ford, O(n^2 m), for small
// networks only.
std::vector<std::vector<long>> bellman_ford_all(const RoadNetwork& net) {
  const int n = net.node_count();
  const long inf = std::numeric_limits<long>::max() / 4;
  std::vector<std::vector<long>> dist(n, std::vector<long>(n, inf));
  for (int s = 0; s < n; ++s) {
    dist[s][s] = 0;
    for (int pass = 0; pass < n; ++pass) {
      for (const Edge& e : net.edges()) {
        if (dist[s][e.from] + e.travel_time < dist[s][e.to])
          dist[s][e.to] = dist[s][e.from] + e.travel_time;
      }
    }
  }
  return dist;
}

}  // namespace

TEST_CASE("lattice dimensions and edge counts") {
  RoadNetwork big = build_lattice(10, 10, 1, 10, 42);
  CHECK(big.node_count() == 100);
  CHECK(big.edges().size() == 360);

  RoadNetwork tiny = build_lattice(2, 2, 1, 1, 7);
  CHECK(tiny.node_count() == 4);
  CHECK(tiny.edges().size() == 8);
  for (const Edge& e : tiny.edges()) CHECK(e.travel_time == 1);

  CHECK(build_lattice(33, 33, 1, 10, 1).node_count() == 1089);
}

TEST_CASE("lattice weights stay in range and network invariants hold") {
  RoadNetwork net = build_lattice(6, 7, 2, 9, 123);
  for (const Edge& e : net.edges()) {
    CHECK(e.travel_time >= 2);
    CHECK(e.travel_time <= 9);
    CHECK(e.from != e.to);
  }
  for (int i = 0; i < net.node_count(); ++i) {
    CHECK(net.adjacency(i, i) == 1.0);
    CHECK(net.neighbors(i).size() >= 2);  // self plus at least one successor
  }
}

TEST_CASE("adjacency is reciprocal travel time") {
  RoadNetwork net(2, {{0, 1, 4}, {1, 0, 2}});
  CHECK(net.adjacency(0, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(net.adjacency(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(net.adjacency(0, 0) == 1.0);
}

TEST_CASE("lattice is deterministic per seed") {
  RoadNetwork a = build_lattice(5, 5, 1, 10, 99);
  RoadNetwork b = build_lattice(5, 5, 1, 10, 99);
  REQUIRE(a.edges().size() == b.edges().size());
  for (std::size_t i = 0; i < a.edges().size(); ++i) {
    CHECK(a.edges()[i].from == b.edges()[i].from);
    CHECK(a.edges()[i].to == b.edges()[i].to);
    CHECK(a.edges()[i].travel_time == b.edges()[i].travel_time);
  }
}

TEST_CASE("network file loading") {
  SUBCASE("4-node cycle") {
    std::string path = write_temp("cycle.txt",
                                  "nodes 4\n"
                                  "edge 0 1 1\nedge 1 2 1\nedge 2 3 1\nedge 3 0 1\n"
                                  "edge 1 0 1\nedge 2 1 1\nedge 3 2 1\nedge 0 3 1\n");
    RoadNetwork net = load_network(path);
    CHECK(net.node_count() == 4);
    CHECK(net.has_edge(3, 0));
  }
  SUBCASE("zero weight rejected") {
    std::string path = write_temp("zero.txt", "nodes 2\nedge 0 1 0\nedge 1 0 1\n");
    CHECK_THROWS_WITH_AS(load_network(path),
                         doctest::Contains("non-positive travel time"), std::runtime_error);
  }
  SUBCASE("disconnected rejected") {
    // node 3 of 5 can leave but nothing reaches it
    std::string path = write_temp("disc.txt",
                                  "nodes 5\n"
                                  "edge 0 1 1\nedge 1 0 1\nedge 1 2 2\nedge 2 1 2\n"
                                  "edge 4 0 1\nedge 0 4 1\nedge 3 0 1\n");
    CHECK_THROWS_WITH_AS(load_network(path), doctest::Contains("disconnected"),
                         std::runtime_error);
  }
}

TEST_CASE("network save/load round trip") {
  RoadNetwork net = build_lattice(4, 3, 1, 10, 5);
  const std::string path = "/tmp/fleetsim_graph_roundtrip.txt";
  save_network(net, path);
  RoadNetwork back = load_network(path);
  REQUIRE(back.node_count() == net.node_count());
  REQUIRE(back.edges().size() == net.edges().size());
  for (const Edge& e : net.edges()) CHECK(back.travel_time(e.from, e.to) == e.travel_time);
}

TEST_CASE("shortest paths on a two-edge path") {
  RoadNetwork net(3, {{0, 1, 2}, {1, 0, 2}, {1, 2, 3}, {2, 1, 3}});
  TravelTimeMatrix tt = all_pairs_shortest(net);
  CHECK(tt.d(0, 2) == 5);
  CHECK(tt.next_hop(0, 2) == 1);
  for (int i = 0; i < 3; ++i) CHECK(tt.d(i, i) == 1);  // diagonal convention
}

TEST_CASE("diagonal corners of a unit 2x2 lattice are two hops apart") {
  RoadNetwork net = build_lattice(2, 2, 1, 1, 3);
  TravelTimeMatrix tt = all_pairs_shortest(net);
  CHECK(tt.d(0, 3) == 2);
  CHECK(tt.d(3, 0) == 2);
}

TEST_CASE("Dijkstra matches a Bellman-Ford oracle on a 5x5 lattice") {
  RoadNetwork net = build_lattice(5, 5, 1, 10, 2024);
  TravelTimeMatrix tt = all_pairs_shortest(net);
  auto oracle = bellman_ford_all(net);
  for (int i = 0; i < net.node_count(); ++i) {
    for (int j = 0; j < net.node_count(); ++j) {
      if (i == j) continue;
      CHECK(tt.true_distance(i, j) == oracle[i][j]);
    }
  }
}

TEST_CASE("triangle inequality on the true path metric") {
  RoadNetwork net = build_lattice(4, 4, 1, 10, 77);
  TravelTimeMatrix tt = all_pairs_shortest(net);
  const int n = net.node_count();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        CHECK(tt.true_distance(i, k) <= tt.true_distance(i, j) + tt.true_distance(j, k));
}

TEST_CASE("following next_hop accumulates exactly the shortest distance") {
  RoadNetwork net = build_lattice(5, 4, 1, 10, 11);
  TravelTimeMatrix tt = all_pairs_shortest(net);
  const int n = net.node_count();
  for (int i = 0; i < n; ++i) {
    for (int dest = 0; dest < n; ++dest) {
      if (i == dest) continue;
      int at = i;
      long total = 0;
      int guard = 0;
      while (at != dest) {
        const int next = tt.next_hop(at, dest);
        REQUIRE(net.has_edge(at, next));
        total += net.travel_time(at, next);
        at = next;
        REQUIRE(++guard <= n * 12);
      }
      CHECK(total == tt.true_distance(i, dest));
    }
  }
}

TEST_CASE("next_hop tie-break picks the lowest successor") {
  // Two equal-cost first hops from 0 to 3: via 1 or via 2.
  RoadNetwork net(4, {{0, 1, 1}, {1, 0, 1}, {0, 2, 1}, {2, 0, 1},
                      {1, 3, 1}, {3, 1, 1}, {2, 3, 1}, {3, 2, 1}});
  TravelTimeMatrix tt = all_pairs_shortest(net);
  CHECK(tt.true_distance(0, 3) == 2);
  CHECK(tt.next_hop(0, 3) == 1);
}

TEST_CASE("constructor rejects malformed networks") {
  CHECK_THROWS_AS(RoadNetwork(2, {{0, 0, 1}, {0, 1, 1}, {1, 0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(RoadNetwork(2, {{0, 1, 1}, {1, 0, 1}, {0, 1, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(RoadNetwork(2, {{0, 2, 1}, {1, 0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(RoadNetwork(3, {{0, 1, 1}, {1, 0, 1}}), std::invalid_argument);  // node 2 cut off
}
