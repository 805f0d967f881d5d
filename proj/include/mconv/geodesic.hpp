#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mconv/metric.hpp"

namespace mconv {

// Unit-speed path through a metric space, stored as a breakpoint grid
// (parameter, point-id). Evaluation between breakpoints is undefined in exact
// mode; the constructions only ever evaluate on the grid.
template <class Space>
struct ParamGeodesic {
  using S = typename Space::scalar_type;
  const Space* space = nullptr;
  S length{};
  std::vector<std::pair<S, int>> breakpoints;  // strictly increasing parameters

  int start_point() const { return breakpoints.front().second; }
  int end_point() const { return breakpoints.back().second; }
};

struct GeodesicEvalError {
  std::string message;
};

template <class Space>
std::optional<int> eval_geodesic(const ParamGeodesic<Space>& g,
                                 const typename Space::scalar_type& s,
                                 GeodesicEvalError* err = nullptr) {
  using S = typename Space::scalar_type;
  if (s < S{} || s > g.length) {
    if (err) err->message = "parameter outside [0, length]";
    return std::nullopt;
  }
  auto it = std::lower_bound(
      g.breakpoints.begin(), g.breakpoints.end(), s,
      [](const std::pair<S, int>& bp, const S& v) { return bp.first < v; });
  if (it == g.breakpoints.end() || !(it->first == s)) {
    if (err) err->message = "parameter off the breakpoint grid";
    return std::nullopt;
  }
  return it->second;
}

template <class Space>
struct GeodesicCheck {
  bool ok = true;
  int bad_i = -1, bad_j = -1;  // first violating breakpoint pair
};

// Distance-preserving on the breakpoint grid: dist(p_i, p_j) == |t_i - t_j|.
template <class Space>
GeodesicCheck<Space> is_geodesic(const ParamGeodesic<Space>& g,
                                 typename Space::scalar_type tol = {}) {
  using S = typename Space::scalar_type;
  using P = typename scalar_policy<S>::type;
  GeodesicCheck<Space> r;
  const auto& bp = g.breakpoints;
  for (size_t i = 0; i < bp.size(); ++i)
    for (size_t j = i + 1; j < bp.size(); ++j) {
      S want = bp[j].first - bp[i].first;
      if (!P::eq(g.space->dist(bp[i].second, bp[j].second), want, tol)) {
        r.ok = false;
        r.bad_i = static_cast<int>(i);
        r.bad_j = static_cast<int>(j);
        return r;
      }
    }
  return r;
}

// Family of uv-geodesics sharing endpoints and length (normalized to 1 in all
// generated families). claimed_alpha = 0 means unknown; when positive it
// carries the resolution it was measured at (see thickness module).
template <class Space>
struct GeodesicFamily {
  using S = typename Space::scalar_type;
  const Space* space = nullptr;
  std::vector<ParamGeodesic<Space>> members;
  S claimed_alpha{};
  S alpha_grid{};    // provenance: grid spacing the alpha was measured at
  int alpha_nmax = -1;  // provenance: control budget (-1 = not measured)

  bool consistent() const {
    if (members.empty()) return true;
    int u = members.front().start_point(), v = members.front().end_point();
    const S& len = members.front().length;
    for (const auto& g : members)
      if (g.start_point() != u || g.end_point() != v || !(g.length == len)) return false;
    return true;
  }
};

}  // namespace mconv
