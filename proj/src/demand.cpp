#include "fleetsim/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fleetsim/graph.hpp"

namespace fleetsim {

void DemandPattern::validate() const {
  const int n = static_cast<int>(g.size());
  if (n == 0 || destination.size() != g.size())
    throw std::invalid_argument("demand pattern shape mismatch");
  for (int i = 0; i < n; ++i) {
    if (g[i] < 0.0 || g[i] > 1.0)
      throw std::invalid_argument("g out of [0,1] at node " + std::to_string(i));
    if (destination[i][i] != 0.0)
      throw std::invalid_argument("nonzero destination diagonal at node " + std::to_string(i));
    double row = std::accumulate(destination[i].begin(), destination[i].end(), 0.0);
    if (std::abs(row - 1.0) > 1e-9)
      throw std::invalid_argument("destination row " + std::to_string(i) + " not stochastic");
  }
}

int DemandPattern::sample_destination(int origin, Rng& rng) const {
  return rng.sample_weights(destination[origin], 1.0);
}

double normalized_entropy(std::span<const double> g) {
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  if (total <= 0.0) throw std::invalid_argument("entropy of all-zero distribution");
  if (g.size() < 2) return 0.0;
  double h = 0.0;
  for (double gi : g) {
    const double p = gi / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(g.size()));
}

namespace {

// Rescale so sum == n_c with every entry <= 1. Entries that hit the cap are
// frozen and the remainder redistributed.
void rescale_capped(std::vector<double>& g, double n_c) {
  const int n = static_cast<int>(g.size());
  std::vector<char> capped(n, 0);
  for (int round = 0; round < n; ++round) {
    double free_sum = 0.0;
    double capped_sum = 0.0;
    for (int i = 0; i < n; ++i) (capped[i] ? capped_sum : free_sum) += g[i];
    const double target = n_c - capped_sum;
    if (free_sum <= 0.0) break;
    const double scale = target / free_sum;
    bool new_cap = false;
    for (int i = 0; i < n; ++i) {
      if (capped[i]) continue;
      g[i] *= scale;
      if (g[i] >= 1.0) {
        g[i] = 1.0;
        capped[i] = 1;
        new_cap = true;
      }
    }
    if (!new_cap) return;
  }
}

}  // namespace

DemandPattern generate_random_demand(const RoadNetwork& network, std::uint64_t seed,
                                     double n_c) {
  const int n = network.node_count();
  if (n_c <= 0.0 || n_c > n) throw std::invalid_argument("n_c must be in (0, node_count]");
  Rng rng(seed);
  constexpr int kMaxResamples = 100;
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    std::vector<double> u(n);
    for (double& x : u) x = rng.uniform();

    // Uniform draws are too flat for the target entropy band; raising them to
    // a power concentrates mass, and the exponent is found by bisection since
    // entropy decreases monotonically in it.
    double lo = 0.0, hi = 64.0;
    std::vector<double> g(n);
    double eta = 0.0;
    for (int iter = 0; iter < 80; ++iter) {
      const double beta = 0.5 * (lo + hi);
      for (int i = 0; i < n; ++i) g[i] = std::pow(u[i], beta);
      eta = normalized_entropy(g);
      if (eta > 0.7)
        lo = beta;
      else
        hi = beta;
    }
    rescale_capped(g, n_c);
    eta = normalized_entropy(g);
    if (eta <= 0.6 || eta >= 0.8) continue;

    DemandPattern demand;
    demand.g = std::move(g);
    demand.destination.assign(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        demand.destination[i][j] = rng.uniform();
        row_sum += demand.destination[i][j];
      }
      for (int j = 0; j < n; ++j) demand.destination[i][j] /= row_sum;
    }
    demand.n_c = std::accumulate(demand.g.begin(), demand.g.end(), 0.0);
    demand.validate();
    return demand;
  }
  throw std::runtime_error("could not reach entropy band (0.6, 0.8) while rescaling demand");
}

DemandPattern load_demand(const std::string& path, int node_count) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open demand file: " + path);
  DemandPattern demand;
  demand.g.assign(node_count, 0.0);
  demand.destination.assign(node_count, std::vector<double>(node_count, 0.0));
  std::string line;
  int line_no = 0;
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
    if (kind == "g") {
      int node;
      double p;
      if (!(ss >> node >> p) || node < 0 || node >= node_count) fail("malformed g line");
      if (p < 0.0 || p > 1.0) fail("g probability out of [0,1]");
      demand.g[node] = p;
    } else if (kind == "m") {
      int from, to;
      double p;
      if (!(ss >> from >> to >> p) || from < 0 || from >= node_count || to < 0 ||
          to >= node_count)
        fail("malformed m line");
      if (p < 0.0) fail("negative destination probability");
      if (from == to && p != 0.0) fail("nonzero destination diagonal");
      demand.destination[from][to] = p;
    } else {
      fail("unknown directive '" + kind + "'");
    }
  }
  for (int i = 0; i < node_count; ++i) {
    double row_sum = std::accumulate(demand.destination[i].begin(),
                                     demand.destination[i].end(), 0.0);
    if (row_sum <= 0.0)
      throw std::runtime_error(path + ": destination row " + std::to_string(i) + " is empty");
    for (double& p : demand.destination[i]) p /= row_sum;
  }
  demand.n_c = std::accumulate(demand.g.begin(), demand.g.end(), 0.0);
  demand.validate();
  return demand;
}

void save_demand(const DemandPattern& demand, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write demand file: " + path);
  out.precision(17);
  const int n = static_cast<int>(demand.g.size());
  for (int i = 0; i < n; ++i) out << "g " << i << " " << demand.g[i] << "\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (demand.destination[i][j] > 0.0)
        out << "m " << i << " " << j << " " << demand.destination[i][j] << "\n";
    }
  }
}

std::int64_t CommuterQueues::total_waiting() const {
  std::int64_t total = 0;
  for (const auto& q : queues_) total += static_cast<std::int64_t>(q.size());
  return total;
}

void CommuterQueues::push(int node, CommuterRecord record) {
  ++births_;
  if (static_cast<int>(queues_[node].size()) >= cap_) {
    ++overflow_drops_;
    return;
  }
  queues_[node].push_back(record);
}

CommuterRecord CommuterQueues::pop_front(int node) {
  CommuterRecord record = queues_[node].front();
  queues_[node].pop_front();
  return record;
}

void step_commuters(CommuterQueues& queues, const DemandPattern& demand, int t, Rng& rng) {
  const int n = queues.node_count();
  for (int i = 0; i < n; ++i) {
    // One uniform draw per node regardless of g_i keeps the stream aligned
    // across demand patterns with the same seed.
    const double u = rng.uniform();
    if (u < demand.g[i]) {
      const int dest = demand.sample_destination(i, rng);
      queues.push(i, {dest, t});
    }
  }
}

WaitingStats waiting_time_total(std::span<const std::int64_t> per_step_counts, double n_c) {
  if (per_step_counts.empty()) throw std::invalid_argument("empty simulation horizon");
  WaitingStats stats;
  for (std::int64_t c : per_step_counts) stats.total += c;
  const double denom = static_cast<double>(per_step_counts.size()) * n_c;
  stats.average = denom > 0.0 ? static_cast<double>(stats.total) / denom : 0.0;
  return stats;
}

}  // namespace fleetsim
