#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "mconv/chain.hpp"
#include "mconv/rat.hpp"

namespace mconv {

// Exponent policy: exact arithmetic only for integer p (d^p leaves the
// rationals otherwise); float backend takes any p > 0.
template <class S>
struct PExp;
template <>
struct PExp<Rat> {
  unsigned p;
  Rat apply(const Rat& d) const { return rat_pow(d, p); }
  Rat scale_pow(int k) const { return rat_pow(pow2(k), p); }  // 2^{kp}
  double as_double() const { return p; }
};
template <>
struct PExp<double> {
  double p;
  double apply(double d) const { return std::pow(d, p); }
  double scale_pow(int k) const { return std::pow(2.0, k * p); }
  double as_double() const { return p; }
};

template <class S>
struct ConvexityReport {
  double p = 0;
  int k_max = 0;
  // nonzero LHS terms, sorted by (k, t)
  std::vector<std::tuple<int, long long, S>> lhs_terms;
  bool terms_collected = true;
  S lhs_total{};
  S rhs_total{};
  bool rhs_zero = false;
  S ratio{};            // lhs/rhs when rhs != 0
  double pi_lower = 0;  // ratio^(1/p), float view of the exact ratio
};

template <class S>
void finish_report(ConvexityReport<S>& rep) {
  if (rep.rhs_total == S{}) {
    rep.rhs_zero = true;
  } else {
    rep.ratio = rep.lhs_total / rep.rhs_total;
    if constexpr (std::is_same_v<S, Rat>)
      rep.pi_lower = std::pow(rat_to_double(rep.ratio), 1.0 / rep.p);
    else
      rep.pi_lower = std::pow(rep.ratio, 1.0 / rep.p);
  }
}

template <class Space>
int default_k_max(const TimedMarkovChain<Space>& c) {
  long long w = std::max<long long>(1, c.window_length());
  int k = 0;
  while ((1LL << k) < w) ++k;
  return k;
}

namespace detail {

template <class Space>
class PairPowCache {
 public:
  using S = typename Space::scalar_type;
  PairPowCache(const TimedMarkovChain<Space>& c, PExp<S> p) : c_(c), p_(p) {}
  const S& dp(int a, int b) {
    if (a > b) std::swap(a, b);
    uint64_t key = (static_cast<uint64_t>(a) << 32) | static_cast<uint32_t>(b);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    S v = a == b ? S{}
                 : p_.apply(c_.space->dist(c_.point_map[static_cast<size_t>(a)],
                                           c_.point_map[static_cast<size_t>(b)]));
    return cache_.emplace(key, std::move(v)).first->second;
  }

 private:
  const TimedMarkovChain<Space>& c_;
  PExp<S> p_;
  std::unordered_map<uint64_t, S> cache_;
};

// Explicit window-product matrix restricted to the sources reachable at the
// window start; every listed source carries an explicit row.
template <class S>
struct WinMat {
  using Row = std::vector<std::pair<int, S>>;
  std::vector<std::pair<int, Row>> rows;  // src ascending
  const Row* row(int src) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), src,
                               [](const auto& r, int v) { return r.first < v; });
    if (it == rows.end() || it->first != src) return nullptr;
    return &it->second;
  }
};

template <class S>
WinMat<S> win_mul(const WinMat<S>& a, const WinMat<S>& b) {
  WinMat<S> c;
  c.rows.reserve(a.rows.size());
  for (auto& [src, arow] : a.rows) {
    std::map<int, S> acc;
    for (auto& [mid, p] : arow) {
      const auto* brow = b.row(mid);
      if (!brow) throw std::logic_error("window product lost a reachable source");
      for (auto& [dst, q] : *brow) acc[dst] += p * q;
    }
    typename WinMat<S>::Row out;
    out.reserve(acc.size());
    for (auto& [dst, p] : acc)
      if (!(p == S{})) out.push_back({dst, p});
    c.rows.push_back({src, std::move(out)});
  }
  return c;
}

}  // namespace detail

struct ConvexityOptions {
  std::optional<int> k_max;
  bool collect_terms = true;
  // refuse instances whose doubling tables would not fit
  long long max_table_entries = 60'000'000;
};

// Both sides of the Markov p-convexity inequality, computed exactly in
// rational mode. LHS truncation at k_max only discards nonnegative terms, so
// the reported ratio is a valid lower bound on Pi_p^p of the target space.
//
// Window products A(t,k) = P_{s0} ... P_{t-1} (s0 = max(t-2^k, t_min)) are
// built by doubling in k, each restricted to the sources reachable at s0.
template <class Space>
ConvexityReport<typename Space::scalar_type> convexity_sides(
    const TimedMarkovChain<Space>& c, PExp<typename Space::scalar_type> p,
    ConvexityOptions opts = {}) {
  using S = typename Space::scalar_type;
  using Mat = detail::WinMat<S>;
  ConvexityReport<S> rep;
  rep.p = p.as_double();
  rep.k_max = opts.k_max.value_or(default_k_max(c));
  rep.terms_collected = opts.collect_terms;

  auto marg = marginals(c);
  detail::PairPowCache<Space> dp(c, p);
  const long long W = c.window_length();

  for (long long t = c.t_min + 1; t <= c.t_max; ++t) {
    const auto& k = c.kernel_at(t - 1);
    for (auto& [s, w] : marg[static_cast<size_t>(t - 1 - c.t_min)]) {
      const auto* row = k.row(s);
      if (!row) continue;
      for (auto& [d, pr] : *row)
        if (d != s && !(pr == S{})) rep.rhs_total += w * pr * dp.dp(s, d);
    }
  }

  {
    long long supp_max = 0;
    for (auto& m : marg) supp_max = std::max<long long>(supp_max, (long long)m.size());
    if (W * supp_max * supp_max > opts.max_table_entries)
      throw std::length_error("chain too large for the generic doubling engine");
  }

  // prev[t - t_min - 1] = A(t, k-1); cur likewise for level k
  std::vector<std::shared_ptr<const Mat>> prev(static_cast<size_t>(W)), cur(static_cast<size_t>(W));
  auto idx = [&](long long t) { return static_cast<size_t>(t - c.t_min - 1); };

  auto assemble = [&](long long t, int k, const Mat& A) {
    long long s0 = std::max(t - (1LL << k), c.t_min);
    S e{};
    for (auto& [s, mu] : marg[static_cast<size_t>(s0 - c.t_min)]) {
      const auto* row = A.row(s);
      if (!row || row->size() < 2) continue;
      for (size_t i = 0; i < row->size(); ++i)
        for (size_t j = i + 1; j < row->size(); ++j) {
          const S& d = dp.dp((*row)[i].first, (*row)[j].first);
          if (!(d == S{})) e += mu * (*row)[i].second * (*row)[j].second * d * 2;
        }
    }
    if (!(e == S{})) {
      S term = e / p.scale_pow(k);
      rep.lhs_total += term;
      if (opts.collect_terms) rep.lhs_terms.push_back({k, t, term});
    }
  };

  for (int k = 0; k <= rep.k_max; ++k) {
    for (long long t = c.t_min + 1; t <= c.t_max; ++t) {
      std::shared_ptr<const Mat> A;
      if (k == 0) {
        Mat m;
        const auto& ker = c.kernel_at(t - 1);
        for (auto& [s, w] : marg[static_cast<size_t>(t - 1 - c.t_min)]) {
          const auto* row = ker.row(s);
          if (row)
            m.rows.push_back({s, *row});
          else
            m.rows.push_back({s, {{s, S(1)}}});
        }
        A = std::make_shared<Mat>(std::move(m));
      } else {
        long long s0 = std::max(t - (1LL << k), c.t_min);
        long long mid = std::max(t - (1LL << (k - 1)), c.t_min);
        if (s0 == mid)
          A = prev[idx(t)];  // window saturated at t_min
        else
          A = std::make_shared<Mat>(detail::win_mul(*prev[idx(mid)], *prev[idx(t)]));
      }
      assemble(t, k, *A);
      cur[idx(t)] = std::move(A);
    }
    std::swap(prev, cur);
  }

  finish_report(rep);
  return rep;
}

// One LHS fork term: two independent continuations from the common state at
// s0 = max(t - 2^k, t_min). Direct product over the window.
template <class Space>
typename Space::scalar_type fork_expectation(const TimedMarkovChain<Space>& c, long long t,
                                             int k, PExp<typename Space::scalar_type> p) {
  using S = typename Space::scalar_type;
  if (t < c.t_min || t > c.t_max) throw std::out_of_range("fork time outside window");
  long long s0 = std::max(t - (1LL << k), c.t_min);
  auto marg = marginals(c);
  detail::PairPowCache<Space> dp(c, p);
  detail::WinMat<S> A;
  for (auto& [s, w] : marg[static_cast<size_t>(s0 - c.t_min)]) A.rows.push_back({s, {{s, S(1)}}});
  for (long long u = s0; u < t; ++u) {
    const auto& ker = c.kernel_at(u);
    detail::WinMat<S> step;
    for (auto& [s, w] : marg[static_cast<size_t>(u - c.t_min)]) {
      const auto* row = ker.row(s);
      if (row)
        step.rows.push_back({s, *row});
      else
        step.rows.push_back({s, {{s, S(1)}}});
    }
    A = detail::win_mul(A, step);
  }
  S e{};
  for (auto& [s, mu] : marg[static_cast<size_t>(s0 - c.t_min)]) {
    const auto* row = A.row(s);
    if (!row || row->size() < 2) continue;
    for (size_t i = 0; i < row->size(); ++i)
      for (size_t j = i + 1; j < row->size(); ++j)
        e += mu * (*row)[i].second * (*row)[j].second * dp.dp((*row)[i].first, (*row)[j].first) * 2;
  }
  return e;
}

struct BruteForceError {
  std::string message;
};

// Independent oracle: full enumeration of trajectories (and trajectory pairs
// for the fork terms) by depth-first search. Shares nothing with the
// kernel-product path above beyond the chain accessors and d^p itself.
template <class Space>
std::optional<ConvexityReport<typename Space::scalar_type>> brute_force_sides(
    const TimedMarkovChain<Space>& c, PExp<typename Space::scalar_type> p,
    ConvexityOptions opts = {}, long long guard = 10'000'000, BruteForceError* err = nullptr) {
  using S = typename Space::scalar_type;
  ConvexityReport<S> rep;
  rep.p = p.as_double();
  rep.k_max = opts.k_max.value_or(default_k_max(c));
  rep.terms_collected = opts.collect_terms;
  detail::PairPowCache<Space> dp(c, p);

  long long budget = guard;
  bool exhausted = false;

  // DFS over trajectories from `t` to `to`; accumulates endpoint mass into
  // `out` or (when out == nullptr) edge costs into rhs.
  std::function<void(long long, long long, int, S, S, std::vector<S>*)> walk =
      [&](long long t, long long to, int st, S prob, S cost, std::vector<S>* out) {
        if (exhausted) return;
        if (--budget < 0) {
          exhausted = true;
          return;
        }
        if (t == to) {
          if (out)
            (*out)[static_cast<size_t>(st)] += prob;
          else
            rep.rhs_total += prob * cost;
          return;
        }
        const auto* row = c.kernel_at(t).row(st);
        if (!row) {
          walk(t + 1, to, st, prob, cost, out);
          return;
        }
        for (auto& [d, pr] : *row)
          if (!(pr == S{}))
            walk(t + 1, to, d, prob * pr, out ? cost : cost + dp.dp(st, d), out);
      };

  for (auto& [s, w] : c.init)
    if (!(w == S{})) walk(c.t_min, c.t_max, s, w, S{}, nullptr);

  auto dist_at = [&](long long to) {
    std::vector<S> out(static_cast<size_t>(c.states()), S{});
    for (auto& [s, w] : c.init)
      if (!(w == S{})) walk(c.t_min, to, s, w, S{}, &out);
    return out;
  };

  for (int k = 0; k <= rep.k_max && !exhausted; ++k) {
    long long span = 1LL << k;
    for (long long t = c.t_min + 1; t <= c.t_max && !exhausted; ++t) {
      long long s0 = std::max(t - span, c.t_min);
      auto mu = dist_at(s0);
      S e{};
      for (int s = 0; s < c.states() && !exhausted; ++s) {
        if (mu[static_cast<size_t>(s)] == S{}) continue;
        std::vector<S> q(static_cast<size_t>(c.states()), S{});
        walk(s0, t, s, S(1), S{}, &q);
        S inner{};
        for (int a = 0; a < c.states(); ++a) {
          if (q[static_cast<size_t>(a)] == S{}) continue;
          for (int b = a + 1; b < c.states(); ++b) {
            if (q[static_cast<size_t>(b)] == S{}) continue;
            inner += q[static_cast<size_t>(a)] * q[static_cast<size_t>(b)] * dp.dp(a, b) * 2;
          }
        }
        e += mu[static_cast<size_t>(s)] * inner;
      }
      if (!(e == S{})) {
        S term = e / p.scale_pow(k);
        rep.lhs_total += term;
        if (opts.collect_terms) rep.lhs_terms.push_back({k, t, term});
      }
    }
  }
  if (exhausted) {
    if (err) err->message = "instance too large for path enumeration";
    return std::nullopt;
  }

  finish_report(rep);
  return rep;
}

}  // namespace mconv
