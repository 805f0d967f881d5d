#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mconv/metric.hpp"

namespace mconv {

// Sparse row-stochastic kernel. Rows absent from `rows` are identity rows;
// that keeps time-layered chains (states = (t, label)) compact.
template <class S>
struct SparseKernel {
  using Row = std::vector<std::pair<int, S>>;  // (dst, prob), dst ascending
  std::vector<std::pair<int, Row>> rows;       // (src, row), src ascending

  const Row* row(int src) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), src,
                               [](const auto& r, int v) { return r.first < v; });
    if (it == rows.end() || it->first != src) return nullptr;
    return &it->second;
  }
  bool identity() const { return rows.empty(); }
};

// Finite-window Markov chain mapped into a metric space. Kernels are the
// time-inhomogeneous primitive; kernels[i] drives the step t_min+i -> t_min+i+1.
template <class Space>
struct TimedMarkovChain {
  using S = typename Space::scalar_type;
  const Space* space = nullptr;
  std::vector<std::string> state_names;
  long long t_min = 0, t_max = 0;
  std::vector<std::pair<int, S>> init;  // sparse distribution at t_min
  std::vector<SparseKernel<S>> kernels;
  std::vector<int> point_map;  // state -> point id

  int states() const { return static_cast<int>(state_names.size()); }
  long long window_length() const { return t_max - t_min; }
  const SparseKernel<S>& kernel_at(long long t) const {
    return kernels[static_cast<size_t>(t - t_min)];
  }
};

struct ChainIssue {
  std::string message;
  long long t = 0;
  int state = -1;
};

template <class Space>
std::vector<ChainIssue> validate_chain(const TimedMarkovChain<Space>& c,
                                       double float_tol = 1e-12) {
  using S = typename Space::scalar_type;
  std::vector<ChainIssue> issues;
  int n = c.states();
  if (c.t_max < c.t_min) issues.push_back({"t_max < t_min", 0, -1});
  if (c.kernels.size() != static_cast<size_t>(c.window_length()))
    issues.push_back({"kernel count != window length", 0, -1});
  if (c.point_map.size() != static_cast<size_t>(n))
    issues.push_back({"point_map size != state count", 0, -1});
  for (int p : c.point_map)
    if (p < 0 || (c.space && p >= c.space->size()))
      issues.push_back({"point_map entry out of range", 0, p});
  S init_sum{};
  for (auto& [s, w] : c.init) {
    if (s < 0 || s >= n) issues.push_back({"init state out of range", 0, s});
    if (w < S{}) issues.push_back({"negative init mass", 0, s});
    init_sum += w;
  }
  auto sums_to_one = [&](const S& v) {
    if constexpr (std::is_same_v<S, Rat>)
      return v == Rat(1);
    else
      return std::fabs(v - 1.0) <= float_tol;
  };
  if (!sums_to_one(init_sum)) issues.push_back({"init does not sum to 1", 0, -1});
  for (size_t i = 0; i < c.kernels.size() && issues.size() < 32; ++i) {
    for (auto& [src, row] : c.kernels[i].rows) {
      if (src < 0 || src >= n) {
        issues.push_back({"kernel row source out of range", c.t_min + (long long)i, src});
        continue;
      }
      S sum{};
      for (auto& [dst, p] : row) {
        if (dst < 0 || dst >= n)
          issues.push_back({"kernel entry destination out of range", c.t_min + (long long)i, dst});
        if (p < S{}) issues.push_back({"negative kernel entry", c.t_min + (long long)i, src});
        sum += p;
      }
      if (!sums_to_one(sum))
        issues.push_back({"kernel row does not sum to 1", c.t_min + (long long)i, src});
    }
  }
  return issues;
}

// Per-time probability vectors mu_t, t = t_min..t_max (sparse, index-sorted).
template <class Space>
std::vector<std::vector<std::pair<int, typename Space::scalar_type>>> marginals(
    const TimedMarkovChain<Space>& c) {
  using S = typename Space::scalar_type;
  using Dist = std::vector<std::pair<int, S>>;
  std::vector<Dist> out;
  Dist cur = c.init;
  std::sort(cur.begin(), cur.end());
  out.push_back(cur);
  for (const auto& k : c.kernels) {
    std::vector<std::pair<int, S>> next;
    for (auto& [s, w] : cur) {
      const auto* row = k.row(s);
      if (!row) {
        next.push_back({s, w});
      } else {
        for (auto& [d, p] : *row)
          if (!(p == S{})) next.push_back({d, w * p});
      }
    }
    std::sort(next.begin(), next.end());
    Dist merged;
    for (auto& [s, w] : next) {
      if (!merged.empty() && merged.back().first == s)
        merged.back().second += w;
      else
        merged.push_back({s, w});
    }
    cur = std::move(merged);
    out.push_back(cur);
  }
  return out;
}

}  // namespace mconv
