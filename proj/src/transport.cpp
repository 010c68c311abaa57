#include "mfos/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace mfos {
namespace {

constexpr double kFlowEps = 1e-15;

double powp(double d, int order) { return order == 1 ? d : d * d; }

}  // namespace

double min_cost_transport(std::span<const double> a, std::span<const double> b,
                          std::span<const double> cost) {
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("min_cost_transport: empty marginal");
  if (cost.size() != n1 * n2) throw std::invalid_argument("min_cost_transport: cost matrix has wrong size");
  if (n1 * n2 > kMaxTransportEdges) throw NumericalError("min_cost_transport: problem exceeds exact solver size limit");
  const double ta = std::accumulate(a.begin(), a.end(), 0.0);
  const double tb = std::accumulate(b.begin(), b.end(), 0.0);
  if (std::abs(ta - tb) > 1e-9 * std::max(1.0, ta)) {
    throw std::invalid_argument("min_cost_transport: marginals carry different mass");
  }
  for (double c : cost) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("min_cost_transport: costs must be finite and >= 0");
  }

  std::vector<double> supply(a.begin(), a.end());
  std::vector<double> demand(b.begin(), b.end());
  std::vector<double> flow(n1 * n2, 0.0);
  const std::size_t nv = n1 + n2;
  std::vector<double> potential(nv, 0.0);
  std::vector<double> dist(nv);
  std::vector<std::ptrdiff_t> pred(nv);  // predecessor node, -1 for roots
  std::vector<char> done(nv);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  using Entry = std::pair<double, std::size_t>;

  auto remaining = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };

  while (remaining(supply) > kFlowEps && remaining(demand) > kFlowEps) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(pred.begin(), pred.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (std::size_t u = 0; u < n1; ++u) {
      if (supply[u] > kFlowEps) {
        dist[u] = 0.0;
        heap.emplace(0.0, u);
      }
    }
    while (!heap.empty()) {
      auto [d, v] = heap.top();
      heap.pop();
      if (done[v] || d > dist[v]) continue;
      done[v] = 1;
      if (v < n1) {
        for (std::size_t j = 0; j < n2; ++j) {
          const std::size_t t = n1 + j;
          const double rc = std::max(0.0, cost[v * n2 + j] + potential[v] - potential[t]);
          if (d + rc < dist[t]) {
            dist[t] = d + rc;
            pred[t] = static_cast<std::ptrdiff_t>(v);
            heap.emplace(dist[t], t);
          }
        }
      } else {
        const std::size_t j = v - n1;
        for (std::size_t u = 0; u < n1; ++u) {
          if (flow[u * n2 + j] <= kFlowEps) continue;
          const double rc = std::max(0.0, -cost[u * n2 + j] + potential[v] - potential[u]);
          if (d + rc < dist[u]) {
            dist[u] = d + rc;
            pred[u] = static_cast<std::ptrdiff_t>(v);
            heap.emplace(dist[u], u);
          }
        }
      }
    }
    for (std::size_t v = 0; v < nv; ++v) {
      if (done[v]) potential[v] += dist[v];
    }
    // Sources with supply share one potential, so the updated sink potential
    // orders sinks by true shortest-path cost.
    std::size_t target = nv;
    for (std::size_t j = 0; j < n2; ++j) {
      if (demand[j] > kFlowEps && done[n1 + j] && (target == nv || potential[n1 + j] < potential[target])) {
        target = n1 + j;
      }
    }
    if (target == nv) throw NumericalError("min_cost_transport: no augmenting path");
    // Bottleneck along the path.
    double amount = demand[target - n1];
    std::size_t v = target;
    while (pred[v] >= 0) {
      const auto u = static_cast<std::size_t>(pred[v]);
      if (u >= n1) amount = std::min(amount, flow[v * n2 + (u - n1)]);  // reverse arc sink u -> source v
      v = u;
    }
    amount = std::min(amount, supply[v]);
    const std::size_t root = v;
    v = target;
    while (pred[v] >= 0) {
      const auto u = static_cast<std::size_t>(pred[v]);
      if (u < n1) {
        flow[u * n2 + (v - n1)] += amount;
      } else {
        double& f = flow[v * n2 + (u - n1)];
        f = std::max(0.0, f - amount);
      }
      v = u;
    }
    supply[root] -= amount;
    demand[target - n1] -= amount;
  }

  double total = 0.0;
  for (std::size_t k = 0; k < flow.size(); ++k) total += flow[k] * cost[k];
  return total;
}

double ground_distance(const Atom& a, const Atom& b, int dim) {
  double s = 0.0;
  for (int c = 0; c < dim; ++c) {
    const double d = a.x[c] - b.x[c];
    s += d * d;
  }
  const double di = static_cast<double>(a.i - b.i);
  return std::sqrt(s + di * di);
}

double wasserstein_1d(std::span<const double> x1, std::span<const double> w1,
                      std::span<const double> x2, std::span<const double> w2, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("wasserstein order must be 1 or 2");
  auto sorted = [](std::span<const double> x, std::span<const double> w) {
    std::vector<std::pair<double, double>> v;
    double tot = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) tot += w[k];
    for (std::size_t k = 0; k < x.size(); ++k) v.emplace_back(x[k], w[k] / tot);
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto a = sorted(x1, w1);
  const auto b = sorted(x2, w2);
  std::size_t i = 0, j = 0;
  double ra = a.empty() ? 0.0 : a[0].second;
  double rb = b.empty() ? 0.0 : b[0].second;
  double cost = 0.0;
  while (i < a.size() && j < b.size()) {
    const double m = std::min(ra, rb);
    cost += m * powp(std::abs(a[i].first - b[j].first), order);
    ra -= m;
    rb -= m;
    if (ra <= 1e-16) {
      if (++i < a.size()) ra = a[i].second;
    }
    if (rb <= 1e-16) {
      if (++j < b.size()) rb = b[j].second;
    }
  }
  return order == 1 ? cost : std::sqrt(cost);
}

double wasserstein(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("wasserstein order must be 1 or 2");
  if (m1.dim() != m2.dim()) throw std::invalid_argument("wasserstein: dimension mismatch");
  const int dim = m1.dim();
  if (dim == 1) {
    const int flag = m1[0].i;
    auto same = [flag](const EmpiricalMeasure& m) {
      return std::all_of(m.atoms().begin(), m.atoms().end(), [flag](const Atom& a) { return a.i == flag; });
    };
    if (same(m1) && same(m2)) {
      std::vector<double> x1, w1, x2, w2;
      for (const Atom& a : m1.atoms()) x1.push_back(a.x[0]), w1.push_back(a.w);
      for (const Atom& a : m2.atoms()) x2.push_back(a.x[0]), w2.push_back(a.w);
      return wasserstein_1d(x1, w1, x2, w2, order);
    }
  }
  if (m1.size() * m2.size() > kMaxTransportEdges) {
    throw NumericalError("wasserstein: atom counts exceed the exact solver limit");
  }
  std::vector<double> a, b, cost;
  for (const Atom& p : m1.atoms()) a.push_back(p.w);
  for (const Atom& q : m2.atoms()) b.push_back(q.w);
  cost.reserve(a.size() * b.size());
  for (const Atom& p : m1.atoms()) {
    for (const Atom& q : m2.atoms()) cost.push_back(powp(ground_distance(p, q, dim), order));
  }
  const double c = min_cost_transport(a, b, cost);
  return order == 1 ? c : std::sqrt(std::max(0.0, c));
}

}  // namespace mfos
