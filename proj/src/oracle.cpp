#include "mconv/oracle.hpp"

#include <algorithm>

#include "mconv/graph.hpp"

namespace mconv {

OracleAnswer CanonicalLaaksoOracle::answer(const std::vector<int>& member_flips,
                                           const std::vector<Rat>& controls) const {
  OracleAnswer out;
  std::vector<Rat> ctrl = controls;
  std::sort(ctrl.begin(), ctrl.end());
  ctrl.erase(std::unique(ctrl.begin(), ctrl.end()), ctrl.end());
  for (const Rat& c : ctrl)
    if (c < 0 || c > 1) {
      out.error = "control outside [0,1]";
      return out;
    }
  std::vector<Rat> interior;
  for (const Rat& c : ctrl)
    if (c > 0 && c < 1) interior.push_back(c);

  for (int level = 1; level <= level_cap_; ++level) {
    bool clear = true;
    for (const Rat& c : interior)
      if (laakso_middle(c, level)) {
        clear = false;
        break;
      }
    if (!clear) continue;

    long long middles = 1LL << (2 * (level - 1));
    Rat unit = pow2(-2 * level);
    // separators between consecutive middles where no control already sits
    std::vector<Rat> q = interior;
    for (long long j = 0; j + 1 < middles; ++j) {
      Rat lo = Rat(4 * j + 3) * unit, hi = Rat(4 * j + 5) * unit;
      auto it = std::lower_bound(interior.begin(), interior.end(), lo);
      bool occupied = it != interior.end() && *it <= hi;
      if (!occupied) q.push_back(lo);
    }
    std::sort(q.begin(), q.end());

    // s-points: the centre of the single middle inside each gap, or the
    // leftmost grid point of an empty gap
    std::vector<Rat> bounds;
    bounds.push_back(Rat(0));
    bounds.insert(bounds.end(), q.begin(), q.end());
    bounds.push_back(Rat(1));
    auto floor_rat = [](const Rat& r) {
      Int q = num(r) / den(r);
      if (q * den(r) != num(r) && num(r) < 0) --q;
      return q;
    };
    std::vector<Rat> s;
    Rat sep(0);
    bool slot_ok = true;
    long long centers_seen = 0;
    for (size_t bi = 0; bi + 1 < bounds.size() && slot_ok; ++bi) {
      const Rat& a = bounds[bi];
      const Rat& b = bounds[bi + 1];
      // centres (4j+2)*unit strictly inside (a, b)
      Int j0 = floor_rat((a / unit - 2) / 4) + 1;  // least j with centre > a
      if (j0 < 0) j0 = 0;
      Rat center = Rat(4 * j0 + 2) * unit;
      if (j0 < middles && center > a && center < b) {
        Rat next_center = Rat(4 * (j0 + 1) + 2) * unit;
        if (j0 + 1 < middles && next_center < b) {
          out.error = "internal: two middles in one gap at level " + std::to_string(level);
          return out;
        }
        s.push_back(center);
        sep += 2 * unit;
        ++centers_seen;
      } else {
        // leftmost multiple of `unit` strictly inside
        Rat scaled = a / unit;
        Int g0 = num(scaled) / den(scaled) + 1;
        Rat cand = Rat(g0) * unit;
        if (!(cand < b)) {
          slot_ok = false;
          break;
        }
        s.push_back(cand);
      }
    }
    if (!slot_ok) continue;  // a finer level subdivides every gap
    if (centers_seen != middles) {
      out.error = "internal: lost a middle at level " + std::to_string(level);
      return out;
    }
    if (sep < alpha()) continue;

    out.ok = true;
    out.partner_flips = member_flips;
    auto it = std::find(out.partner_flips.begin(), out.partner_flips.end(), level);
    if (it != out.partner_flips.end())
      out.partner_flips.erase(it);
    else
      out.partner_flips.insert(
          std::lower_bound(out.partner_flips.begin(), out.partner_flips.end(), level), level);
    out.q_list = std::move(q);
    out.s_list = std::move(s);
    out.separation = sep;
    return out;
  }
  out.error = "no admissible flip level within cap " + std::to_string(level_cap_);
  return out;
}

FiniteLaaksoOracle::FiniteLaaksoOracle(int level, Rat alpha) : level_(level), alpha_(std::move(alpha)) {
  std::string err;
  auto lg = laakso_graph(level, &err);
  if (!lg) throw std::invalid_argument("laakso_graph: " + err);
  graph_ = std::make_shared<LaaksoGraph>(std::move(*lg));
  GraphToMetricError gerr;
  auto metric = graph_to_metric(graph_->graph, &gerr);
  if (!metric) throw std::invalid_argument("graph_to_metric: " + gerr.message);
  metric_ = std::make_shared<FiniteMetricSpace<Rat>>(std::move(*metric));
  family_ = std::make_shared<GeodesicFamily<FiniteMetricSpace<Rat>>>(
      laakso_family(level, *graph_, *metric_));
  search_ = std::make_shared<ThicknessSearch<FiniteMetricSpace<Rat>>>(*family_, pow2(-2 * level));
}

OracleAnswer FiniteLaaksoOracle::answer(const std::vector<int>& member_flips,
                                        const std::vector<Rat>& controls) const {
  OracleAnswer out;
  for (int f : member_flips)
    if (f < 1 || f > level_) {
      out.error = "member flip level outside the materialized family";
      return out;
    }
  int g = laakso_member_index(member_flips, level_);
  std::vector<int> idx;
  for (const Rat& c : controls) {
    auto i = search_->grid_index(c);
    if (!i) {
      out.error = "control off the 4^-" + std::to_string(level_) + " grid";
      return out;
    }
    idx.push_back(*i);
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  ThicknessFailure fail;
  auto resp = search_->answer(g, idx, alpha_, &fail);
  if (!resp) {
    out.error = fail.message;
    return out;
  }
  out.ok = true;
  out.partner_flips = laakso_member_flips(resp->g_tilde, level_);
  out.q_list = resp->q_list;
  out.s_list = resp->s_list;
  out.separation = resp->separation;
  return out;
}

}  // namespace mconv
