#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mconv/geodesic.hpp"
#include "mconv/rat.hpp"

namespace mconv {

// Thickness machinery at a fixed control-point resolution: a finite family is
// never thick in the absolute sense, so every result carries the grid spacing
// and control budget it was established for.

template <class S>
struct ThicknessQuery {
  int g = 0;                // member index
  std::vector<S> controls;  // sorted, within [0, length], on the grid
};

template <class S>
struct ThicknessResponse {
  int g_tilde = 0;
  std::vector<S> q_list;  // 0 < q_1 < ... < q_m < length, agreement points
  std::vector<S> s_list;  // interleaved, size m+1
  S separation{};
};

struct ThicknessFailure {
  std::string message;
};

// Search context for one family at one resolution. Candidate responses are
// ranked by (|q_list|, partner index, lexicographic q_list); the s-point of
// each gap maximizes that gap's separation (ties to the left). The degenerate
// partner g~ = g is admissible and carries separation 0.
template <class Space>
class ThicknessSearch {
 public:
  using S = typename Space::scalar_type;
  using P = typename scalar_policy<S>::type;

  ThicknessSearch(const GeodesicFamily<Space>& fam, S grid, S tol = {})
      : fam_(fam), grid_(grid), tol_(tol) {
    S len = fam.members.empty() ? S(1) : fam.members.front().length;
    if constexpr (std::is_same_v<S, Rat>) {
      Rat ratio = len / grid;
      if (den(ratio) != 1) throw std::invalid_argument("grid does not divide the length");
      n_ = num(ratio).convert_to<int>();
    } else {
      n_ = static_cast<int>(std::llround(len / grid));
    }
    length_ = len;
  }

  int grid_segments() const { return n_; }
  const S& grid() const { return grid_; }
  const S& length() const { return length_; }
  const GeodesicFamily<Space>& family() const { return fam_; }

  std::optional<int> grid_index(const S& v) const {
    if constexpr (std::is_same_v<S, Rat>) {
      Rat r = v / grid_;
      if (den(r) != 1) return std::nullopt;
      Int i = num(r);
      if (i < 0 || i > n_) return std::nullopt;
      return i.convert_to<int>();
    } else {
      double r = v / grid_;
      int i = static_cast<int>(std::llround(r));
      if (i < 0 || i > n_ || std::fabs(r - i) > 1e-9) return std::nullopt;
      return i;
    }
  }

  // Best response against a fixed partner: the smallest q-list that reaches
  // separation >= alpha, lexicographically least among those.
  std::optional<ThicknessResponse<S>> best_against(int g, int gt, const std::vector<int>& controls,
                                                   const S& alpha) const {
    const Pair& pr = pair(g, gt);
    for (int c : controls)
      if (c != 0 && c != n_ && !pr.agree[static_cast<size_t>(c)]) return std::nullopt;
    std::vector<char> is_control(static_cast<size_t>(n_) + 1, 0);
    for (int c : controls) is_control[static_cast<size_t>(c)] = 1;

    // gap (a, b): needs an interior grid point and no control strictly inside
    std::vector<int> next_control(static_cast<size_t>(n_) + 2, n_ + 1);
    for (int i = n_; i >= 0; --i)
      next_control[static_cast<size_t>(i)] =
          is_control[static_cast<size_t>(i)] ? i : next_control[static_cast<size_t>(i) + 1];
    auto gap_ok = [&](int a, int b) {
      return b - a >= 2 && next_control[static_cast<size_t>(a) + 1] >= b;
    };

    const S minus_one = S(-1);
    // f[m][j]: best separation from breakpoint j rightward with exactly m
    // further q-points; negative = infeasible
    std::vector<std::vector<S>> f;
    {
      std::vector<S> f0(static_cast<size_t>(n_) + 1, minus_one);
      for (int j = 0; j <= n_ - 2; ++j)
        if (gap_ok(j, n_)) f0[static_cast<size_t>(j)] = pr.gap_max(j, n_);
      f.push_back(std::move(f0));
    }
    int m_star = -1;
    if (!(f[0][0] < S{}) && f[0][0] >= alpha) m_star = 0;
    for (int m = 1; m_star < 0 && m <= n_ / 2; ++m) {
      std::vector<S> fm(static_cast<size_t>(n_) + 1, minus_one);
      for (int j = n_ - 2 * (m + 1); j >= 0; --j) {
        S best = minus_one;
        for (int q = j + 2; q <= n_ - 2; ++q) {
          if (!pr.agree[static_cast<size_t>(q)]) continue;
          const S& tail = f[static_cast<size_t>(m - 1)][static_cast<size_t>(q)];
          if (tail < S{}) continue;
          if (!gap_ok(j, q)) continue;
          S cand = pr.gap_max(j, q) + tail;
          if (cand > best) best = cand;
        }
        fm[static_cast<size_t>(j)] = best;
      }
      f.push_back(std::move(fm));
      if (!(f[static_cast<size_t>(m)][0] < S{}) && f[static_cast<size_t>(m)][0] >= alpha)
        m_star = m;
    }
    if (m_star < 0) return std::nullopt;

    ThicknessResponse<S> resp;
    resp.g_tilde = gt;
    std::vector<int> qs;
    int j = 0;
    S acc{};
    for (int r = m_star; r > 0; --r) {
      for (int q = j + 2; q <= n_ - 2; ++q) {
        if (!pr.agree[static_cast<size_t>(q)]) continue;
        const S& tail = f[static_cast<size_t>(r - 1)][static_cast<size_t>(q)];
        if (tail < S{}) continue;
        if (!gap_ok(j, q)) continue;
        if (acc + pr.gap_max(j, q) + tail >= alpha) {
          acc += pr.gap_max(j, q);
          qs.push_back(q);
          j = q;
          break;
        }
      }
    }
    std::vector<int> bounds{0};
    for (int q : qs) bounds.push_back(q);
    bounds.push_back(n_);
    S sep{};
    for (size_t bi = 0; bi + 1 < bounds.size(); ++bi) {
      int a = bounds[bi], b = bounds[bi + 1];
      int arg = a + 1;
      for (int i = a + 2; i < b; ++i)
        if (pr.d[static_cast<size_t>(i)] > pr.d[static_cast<size_t>(arg)]) arg = i;
      resp.s_list.push_back(grid_ * arg);
      sep += pr.d[static_cast<size_t>(arg)];
    }
    for (int q : qs) resp.q_list.push_back(grid_ * q);
    resp.separation = sep;
    return resp;
  }

  std::optional<ThicknessResponse<S>> answer(int g, const std::vector<int>& controls,
                                             const S& alpha,
                                             ThicknessFailure* fail = nullptr) const {
    std::optional<ThicknessResponse<S>> best;
    for (int gt = 0; gt < static_cast<int>(fam_.members.size()); ++gt) {
      auto r = best_against(g, gt, controls, alpha);
      if (r && (!best || r->q_list.size() < best->q_list.size())) best = std::move(r);
    }
    if (!best && fail)
      fail->message = "no response with separation >= alpha at this resolution";
    return best;
  }

  // Largest separation of any valid response for (g, controls); 0 when no
  // response exists at all.
  S best_separation(int g, const std::vector<int>& controls) const {
    S best{};
    bool any = false;
    for (int gt = 0; gt < static_cast<int>(fam_.members.size()); ++gt) {
      const Pair& pr = pair(g, gt);
      bool ok = true;
      for (int c : controls)
        if (c != 0 && c != n_ && !pr.agree[static_cast<size_t>(c)]) ok = false;
      if (!ok) continue;
      std::vector<char> is_control(static_cast<size_t>(n_) + 1, 0);
      for (int c : controls) is_control[static_cast<size_t>(c)] = 1;
      std::vector<int> next_control(static_cast<size_t>(n_) + 2, n_ + 1);
      for (int i = n_; i >= 0; --i)
        next_control[static_cast<size_t>(i)] =
            is_control[static_cast<size_t>(i)] ? i : next_control[static_cast<size_t>(i) + 1];
      auto gap_ok = [&](int a, int b) {
        return b - a >= 2 && next_control[static_cast<size_t>(a) + 1] >= b;
      };
      const S minus_one = S(-1);
      std::vector<S> fmax(static_cast<size_t>(n_) + 1, minus_one);
      for (int j = n_ - 2; j >= 0; --j) {
        S b = minus_one;
        if (gap_ok(j, n_)) b = pr.gap_max(j, n_);
        for (int q = j + 2; q <= n_ - 2; ++q) {
          if (!pr.agree[static_cast<size_t>(q)]) continue;
          if (fmax[static_cast<size_t>(q)] < S{}) continue;
          if (!gap_ok(j, q)) continue;
          S cand = pr.gap_max(j, q) + fmax[static_cast<size_t>(q)];
          if (cand > b) b = cand;
        }
        fmax[static_cast<size_t>(j)] = b;
      }
      if (!(fmax[0] < S{})) {
        any = true;
        if (fmax[0] > best) best = fmax[0];
      }
    }
    (void)any;
    return best;
  }

 private:
  struct Pair {
    std::vector<S> d;          // pointwise distances on the grid
    std::vector<char> agree;   // interior agreement flags
    std::vector<std::vector<S>> gmax;  // gmax[a][b-a-1] = max d over (a, b)
    const S& gap_max(int a, int b) const {
      return gmax[static_cast<size_t>(a)][static_cast<size_t>(b - a - 2)];
    }
  };

  const Pair& pair(int g, int gt) const {
    auto key = std::make_pair(g, gt);
    auto it = pairs_.find(key);
    if (it != pairs_.end()) return it->second;
    Pair pr;
    pr.d.resize(static_cast<size_t>(n_) + 1);
    for (int i = 0; i <= n_; ++i) {
      S s = grid_ * i;
      auto a = eval_geodesic(fam_.members[static_cast<size_t>(g)], s);
      auto b = eval_geodesic(fam_.members[static_cast<size_t>(gt)], s);
      if (!a || !b) throw std::invalid_argument("grid point off the family's breakpoint grid");
      pr.d[static_cast<size_t>(i)] = fam_.space->dist(*a, *b);
    }
    pr.agree.resize(static_cast<size_t>(n_) + 1, 0);
    for (int i = 0; i <= n_; ++i)
      pr.agree[static_cast<size_t>(i)] = P::is_zero(pr.d[static_cast<size_t>(i)], tol_) ? 1 : 0;
    pr.gmax.resize(static_cast<size_t>(n_) + 1);
    for (int a = 0; a <= n_ - 2; ++a) {
      auto& row = pr.gmax[static_cast<size_t>(a)];
      row.resize(static_cast<size_t>(n_ - a - 1));
      S run = pr.d[static_cast<size_t>(a) + 1];
      row[0] = run;
      for (int b = a + 3; b <= n_; ++b) {
        if (pr.d[static_cast<size_t>(b - 1)] > run) run = pr.d[static_cast<size_t>(b - 1)];
        row[static_cast<size_t>(b - a - 2)] = run;
      }
    }
    return pairs_.emplace(key, std::move(pr)).first->second;
  }

  const GeodesicFamily<Space>& fam_;
  S grid_;
  S tol_;
  S length_;
  int n_ = 0;
  mutable std::map<std::pair<int, int>, Pair> pairs_;
};

template <class S>
struct ThicknessBoundT {
  S alpha{};
  bool complete = true;  // false: enumeration guard hit, alpha is only the
                         // minimum over the queries actually checked
  long long queries_checked = 0;
  int witness_g = -1;
  std::vector<S> witness_controls;
};

// Exhaustive forall-exists scan: the largest alpha such that every (member,
// control-set) query with at most n_max on-grid controls admits a response
// with separation >= alpha. A query admitting no response at all pins the
// bound to zero.
template <class Space>
ThicknessBoundT<typename Space::scalar_type> thickness_lower_bound(
    const GeodesicFamily<Space>& fam, typename Space::scalar_type grid, int n_max,
    typename Space::scalar_type tol = {}, long long guard = 2'000'000) {
  using S = typename Space::scalar_type;
  ThicknessSearch<Space> search(fam, grid, tol);
  ThicknessBoundT<S> out;
  bool first = true;
  int n = search.grid_segments();
  std::vector<int> subset;
  std::function<bool(int, int)> scan = [&](int start, int remaining) -> bool {
    for (int g = 0; g < static_cast<int>(fam.members.size()); ++g) {
      if (out.queries_checked >= guard) {
        out.complete = false;
        return false;
      }
      ++out.queries_checked;
      S sep = search.best_separation(g, subset);
      if (first || sep < out.alpha) {
        first = false;
        out.alpha = sep;
        out.witness_g = g;
        out.witness_controls.clear();
        for (int c : subset) out.witness_controls.push_back(grid * c);
      }
    }
    if (remaining == 0) return true;
    for (int c = start; c <= n; ++c) {
      subset.push_back(c);
      if (!scan(c + 1, remaining - 1)) return false;
      subset.pop_back();
    }
    return true;
  };
  scan(0, n_max);
  return out;
}

enum class ResponseCheck {
  Ok,
  BadPartner,
  Ordering,      // q not strictly increasing inside (0, len)
  Interleaving,  // s-points do not interleave
  OffGrid,       // a point is not evaluable on the family's grid
  Containment,   // a control is missing from {0} ∪ q ∪ {len}
  Agreement,     // g(q_i) != g~(q_i)
  Separation     // separation below alpha
};

inline const char* to_string(ResponseCheck c) {
  switch (c) {
    case ResponseCheck::Ok: return "ok";
    case ResponseCheck::BadPartner: return "bad-partner";
    case ResponseCheck::Ordering: return "ordering";
    case ResponseCheck::Interleaving: return "interleaving";
    case ResponseCheck::OffGrid: return "off-grid";
    case ResponseCheck::Containment: return "containment";
    case ResponseCheck::Agreement: return "agreement";
    case ResponseCheck::Separation: return "separation";
  }
  return "unknown";
}

// Pure checker: re-verifies a response against the definition, reporting the
// first failed condition. Never touches the search code above.
template <class Space>
ResponseCheck verify_response(const GeodesicFamily<Space>& fam,
                              const ThicknessQuery<typename Space::scalar_type>& query,
                              const ThicknessResponse<typename Space::scalar_type>& resp,
                              const typename Space::scalar_type& alpha,
                              typename Space::scalar_type tol = {}) {
  using S = typename Space::scalar_type;
  using P = typename scalar_policy<S>::type;
  if (resp.g_tilde < 0 || resp.g_tilde >= static_cast<int>(fam.members.size()) || query.g < 0 ||
      query.g >= static_cast<int>(fam.members.size()))
    return ResponseCheck::BadPartner;
  const auto& g = fam.members[static_cast<size_t>(query.g)];
  const auto& gt = fam.members[static_cast<size_t>(resp.g_tilde)];
  S len = g.length;
  for (size_t i = 0; i < resp.q_list.size(); ++i) {
    if (!(resp.q_list[i] > S{}) || !(resp.q_list[i] < len)) return ResponseCheck::Ordering;
    if (i > 0 && !(resp.q_list[i - 1] < resp.q_list[i])) return ResponseCheck::Ordering;
  }
  if (resp.s_list.size() != resp.q_list.size() + 1) return ResponseCheck::Interleaving;
  for (size_t i = 0; i < resp.s_list.size(); ++i) {
    S lo = i == 0 ? S{} : resp.q_list[i - 1];
    S hi = i == resp.q_list.size() ? len : resp.q_list[i];
    if (!(lo < resp.s_list[i]) || !(resp.s_list[i] < hi)) return ResponseCheck::Interleaving;
  }
  for (const S& c : query.controls) {
    if (P::eq(c, S{}, tol) || P::eq(c, len, tol)) continue;
    bool found = false;
    for (const S& q : resp.q_list)
      if (P::eq(q, c, tol)) found = true;
    if (!found) return ResponseCheck::Containment;
  }
  for (const S& q : resp.q_list) {
    auto a = eval_geodesic(g, q);
    auto b = eval_geodesic(gt, q);
    if (!a || !b) return ResponseCheck::OffGrid;
    if (!P::is_zero(fam.space->dist(*a, *b), tol)) return ResponseCheck::Agreement;
  }
  S sep{};
  for (const S& s : resp.s_list) {
    auto a = eval_geodesic(g, s);
    auto b = eval_geodesic(gt, s);
    if (!a || !b) return ResponseCheck::OffGrid;
    sep += fam.space->dist(*a, *b);
  }
  if constexpr (P::exact) {
    if (sep < alpha) return ResponseCheck::Separation;
  } else {
    if (sep < alpha - tol) return ResponseCheck::Separation;
  }
  return ResponseCheck::Ok;
}

}  // namespace mconv
