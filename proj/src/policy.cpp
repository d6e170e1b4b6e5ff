#include "fleetsim/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fleetsim/graph.hpp"

namespace fleetsim {

namespace {

// Euclidean projection onto {x >= 0, sum x = total}.
std::vector<double> project_to_scaled_simplex(std::vector<double> raw, double total) {
  const int n = static_cast<int>(raw.size());
  std::vector<double> sorted = raw;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = sorted[0] - total;
  for (int k = 0; k < n; ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - total) / (k + 1);
    if (sorted[k] - candidate > 0.0) tau = candidate;
  }
  for (double& x : raw) x = std::max(x - tau, 0.0);
  return raw;
}

// Projection onto the simplex with every coordinate >= floor: shift by the
// floor, project onto the shrunken simplex, shift back.
std::vector<double> project_with_floor(std::vector<double> raw, double floor) {
  if (floor <= 0.0) return project_to_scaled_simplex(std::move(raw), 1.0);
  const int n = static_cast<int>(raw.size());
  for (double& x : raw) x -= floor;
  raw = project_to_scaled_simplex(std::move(raw), 1.0 - n * floor);
  for (double& x : raw) x += floor;
  return raw;
}

}  // namespace

std::vector<double> project_to_simplex(std::vector<double> raw) {
  return project_to_scaled_simplex(std::move(raw), 1.0);
}

PolicyMatrix::PolicyMatrix(const RoadNetwork& network, std::vector<std::vector<double>> rows)
    : network_(&network), rows_(std::move(rows)) {
  if (static_cast<int>(rows_.size()) != network.node_count())
    throw std::invalid_argument("policy row count mismatch");
  for (int i = 0; i < network.node_count(); ++i) {
    if (rows_[i].size() != network.neighbors(i).size())
      throw std::invalid_argument("policy row " + std::to_string(i) + " support mismatch");
  }
}

PolicyMatrix PolicyMatrix::random(const RoadNetwork& network) {
  std::vector<std::vector<double>> rows(network.node_count());
  for (int i = 0; i < network.node_count(); ++i) {
    const std::size_t n_i = network.neighbors(i).size();
    rows[i].assign(n_i, 1.0 / static_cast<double>(n_i));
  }
  return PolicyMatrix(network, std::move(rows));
}

int PolicyMatrix::node_count() const { return network_->node_count(); }

const std::vector<int>& PolicyMatrix::actions(int node) const {
  return network_->neighbors(node);
}

int PolicyMatrix::action_index(int node, int j) const {
  const auto& nbrs = network_->neighbors(node);
  auto it = std::lower_bound(nbrs.begin(), nbrs.end(), j);
  if (it != nbrs.end() && *it == j) return static_cast<int>(it - nbrs.begin());
  return -1;
}

double PolicyMatrix::prob(int node, int j) const {
  const int idx = action_index(node, j);
  return idx >= 0 ? rows_[node][idx] : 0.0;
}

int PolicyMatrix::sample_action(int node, Rng& rng) const {
  const int idx = rng.sample_weights(rows_[node], 1.0);
  return network_->neighbors(node)[idx];
}

void PolicyMatrix::project_row(int node, double floor) {
  rows_[node] = project_with_floor(std::move(rows_[node]), floor);
}

void PolicyMatrix::apply_floor(double floor) {
  for (int i = 0; i < node_count(); ++i)
    rows_[i] = project_with_floor(std::move(rows_[i]), floor);
}

void PolicyMatrix::validate() const {
  for (int i = 0; i < node_count(); ++i) {
    double sum = 0.0;
    for (double p : rows_[i]) {
      if (!(p >= 0.0) || !std::isfinite(p))
        throw std::runtime_error("policy row " + std::to_string(i) + " has invalid entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::runtime_error("policy row " + std::to_string(i) + " does not sum to 1");
  }
}

void PolicyMatrix::save(const std::string& path, const std::string& header) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write policy file: " + path);
  if (!header.empty()) out << "# " << header << "\n";
  out.precision(17);
  for (int i = 0; i < node_count(); ++i) {
    const auto& nbrs = network_->neighbors(i);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      if (rows_[i][k] != 0.0) out << "p " << i << " " << nbrs[k] << " " << rows_[i][k] << "\n";
    }
  }
}

PolicyMatrix PolicyMatrix::load(const std::string& path, const RoadNetwork& network) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open policy file: " + path);
  std::vector<std::vector<double>> rows(network.node_count());
  for (int i = 0; i < network.node_count(); ++i)
    rows[i].assign(network.neighbors(i).size(), 0.0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind)) continue;
    if (kind != "p")
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown directive");
    int i, j;
    double p;
    if (!(ss >> i >> j >> p) || i < 0 || i >= network.node_count())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed p line");
    const auto& nbrs = network.neighbors(i);
    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), j);
    if (it == nbrs.end() || *it != j)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": entry outside neighbour support");
    rows[i][it - nbrs.begin()] = p;
  }
  PolicyMatrix policy(network, std::move(rows));
  policy.validate();
  return policy;
}

}  // namespace fleetsim
