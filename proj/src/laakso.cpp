#include "mconv/laakso.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace mconv {

std::optional<LaaksoMiddle> laakso_middle(const Rat& s, int level) {
  // gadget index j = floor(s * 4^(level-1)); middle ((4j+1)4^-l, (4j+3)4^-l)
  Rat scaled = s * pow2(2 * (level - 1));
  Int j = num(scaled) / den(scaled);  // floor for nonnegative values
  Rat p = Rat(4 * j + 1) * pow2(-2 * level);
  Rat q = Rat(4 * j + 3) * pow2(-2 * level);
  if (p < s && s < q) return LaaksoMiddle{p, q, j.convert_to<long long>()};
  return std::nullopt;
}

std::vector<int> laakso_relevant_levels(const Rat& s) {
  std::vector<int> out;
  if (s <= 0 || s >= 1) return out;
  for (int level = 1;; ++level) {
    Rat scaled = s * pow2(2 * (level - 1));
    if (den(scaled) == 1) break;  // on a gadget boundary; nothing deeper
    if (laakso_middle(s, level)) out.push_back(level);
  }
  return out;
}

int LaaksoMemberBits::bit(int level) const {
  return std::binary_search(flips.begin(), flips.end(), level) ? 1 : 0;
}

std::string CanonPoint::name() const {
  std::ostringstream os;
  os << "s=" << rat_to_string(s);
  for (auto& [level, bit] : bits) os << ";L" << level << "=" << bit;
  return os.str();
}

CanonPoint laakso_point(const LaaksoMemberBits& member, const Rat& s) {
  CanonPoint p;
  p.s = s;
  for (int level : laakso_relevant_levels(s)) p.bits.push_back({level, member.bit(level)});
  return p;
}

namespace {

int bit_of(const CanonPoint& p, int level) {
  for (auto& [l, b] : p.bits)
    if (l == level) return b;
  return -1;  // level not relevant for this point
}

// Same gadget at `level`?
bool same_gadget(const Rat& a, const Rat& b, int level) {
  Rat sa = a * pow2(2 * (level - 1));
  Rat sb = b * pow2(2 * (level - 1));
  return num(sa) / den(sa) == num(sb) / den(sb);
}

}  // namespace

Rat laakso_dist(const CanonPoint& a, const CanonPoint& b) {
  if (a.s == b.s) {
    for (auto& [level, bit] : a.bits) {
      int ob = bit_of(b, level);
      if (ob >= 0 && ob != bit) {
        auto mid = laakso_middle(a.s, level);
        Rat d1 = 2 * (a.s - mid->p);
        Rat d2 = 2 * (mid->q - a.s);
        return d1 < d2 ? d1 : d2;
      }
    }
    return Rat(0);
  }
  const CanonPoint& lo = a.s < b.s ? a : b;
  const CanonPoint& hi = a.s < b.s ? b : a;
  // Shallowest level where both sit inside the same gadget middle on
  // different branches; the gadget's p and q separate them.
  for (auto& [level, bit] : lo.bits) {
    int ob = bit_of(hi, level);
    if (ob < 0 || ob == bit) continue;
    if (!same_gadget(lo.s, hi.s, level)) continue;
    auto mid = laakso_middle(lo.s, level);
    Rat via_p = (lo.s - mid->p) + (hi.s - mid->p);
    Rat via_q = (mid->q - lo.s) + (mid->q - hi.s);
    return via_p < via_q ? via_p : via_q;
  }
  return hi.s - lo.s;
}

Rat laakso_member_dist(const LaaksoMemberBits& a, const LaaksoMemberBits& b, const Rat& s) {
  for (int level : laakso_relevant_levels(s)) {
    if (a.bit(level) != b.bit(level)) {
      auto mid = laakso_middle(s, level);
      Rat d1 = 2 * (s - mid->p);
      Rat d2 = 2 * (mid->q - s);
      return d1 < d2 ? d1 : d2;
    }
  }
  return Rat(0);
}

int LaaksoSpace::intern(const CanonPoint& p) {
  auto it = ids_.find(p);
  if (it != ids_.end()) return it->second;
  int id = static_cast<int>(points_.size());
  points_.push_back(p);
  ids_.emplace(p, id);
  return id;
}

Rat LaaksoSpace::dist(int i, int j) const {
  if (i == j) return Rat(0);
  return laakso_dist(points_[static_cast<size_t>(i)], points_[static_cast<size_t>(j)]);
}

std::vector<int> laakso_member_flips(int index, int h) {
  std::vector<int> flips;
  for (int level = 1; level <= h; ++level)
    if ((index >> (h - level)) & 1) flips.push_back(level);
  return flips;
}

int laakso_member_index(const std::vector<int>& flips, int h) {
  int idx = 0;
  for (int level : flips) idx |= 1 << (h - level);
  return idx;
}

std::optional<LaaksoGraph> laakso_graph(int h, std::string* err) {
  if (h < 0 || h > kLaaksoGraphLevelGuard) {
    if (err) *err = "level out of range [0," + std::to_string(kLaaksoGraphLevelGuard) + "]";
    return std::nullopt;
  }
  LaaksoGraph lg;
  lg.h = h;
  LaaksoSpace interner;
  long long steps = 1LL << (2 * h);  // 4^h params of spacing 4^-h
  Rat step = pow2(-2 * h);
  std::set<std::pair<int, int>> seen_edges;
  int members = 1 << h;
  std::vector<int> prev_ids(static_cast<size_t>(members));
  for (int m = 0; m < members; ++m) {
    LaaksoMemberBits bits{laakso_member_flips(m, h)};
    for (long long jstep = 0; jstep <= steps; ++jstep) {
      Rat s = Rat(jstep) * step;
      int id = interner.intern(laakso_point(bits, s));
      if (jstep > 0) {
        int u = prev_ids[static_cast<size_t>(m)], v = id;
        auto key = std::minmax(u, v);
        if (seen_edges.insert({key.first, key.second}).second)
          lg.graph.edges.push_back({u, v, step});
      }
      prev_ids[static_cast<size_t>(m)] = id;
    }
  }
  for (int i = 0; i < interner.size(); ++i) {
    lg.graph.add_vertex(interner.label(i));
    lg.vertex_points.push_back(interner.point(i));
  }
  lg.terminal_u = interner.intern(CanonPoint{Rat(0), {}});
  lg.terminal_v = interner.intern(CanonPoint{Rat(1), {}});
  for (int level = 1; level <= h; ++level) {
    long long gadgets = 1LL << (2 * (level - 1));
    for (long long j = 0; j < gadgets; ++j) {
      lg.branch_points.push_back({Rat(4 * j + 1) * pow2(-2 * level), level, true});
      lg.branch_points.push_back({Rat(4 * j + 3) * pow2(-2 * level), level, false});
    }
  }
  std::sort(lg.branch_points.begin(), lg.branch_points.end(),
            [](const LaaksoBranchPoint& a, const LaaksoBranchPoint& b) {
              return a.position < b.position;
            });
  return lg;
}

GeodesicFamily<FiniteMetricSpace<Rat>> laakso_family(int h, const LaaksoGraph& lg,
                                                     const FiniteMetricSpace<Rat>& space) {
  GeodesicFamily<FiniteMetricSpace<Rat>> fam;
  fam.space = &space;
  LaaksoSpace interner;
  for (int i = 0; i < static_cast<int>(lg.vertex_points.size()); ++i)
    interner.intern(lg.vertex_points[static_cast<size_t>(i)]);  // ids match graph order
  long long steps = 1LL << (2 * h);
  Rat step = pow2(-2 * h);
  int members = 1 << h;
  for (int m = 0; m < members; ++m) {
    LaaksoMemberBits bits{laakso_member_flips(m, h)};
    ParamGeodesic<FiniteMetricSpace<Rat>> g;
    g.space = &space;
    g.length = Rat(1);
    for (long long jstep = 0; jstep <= steps; ++jstep) {
      Rat s = Rat(jstep) * step;
      g.breakpoints.push_back({s, interner.intern(laakso_point(bits, s))});
    }
    fam.members.push_back(std::move(g));
  }
  return fam;
}

}  // namespace mconv
