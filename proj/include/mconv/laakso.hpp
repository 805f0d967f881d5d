#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mconv/geodesic.hpp"
#include "mconv/graph.hpp"
#include "mconv/metric.hpp"
#include "mconv/rat.hpp"

namespace mconv {

// ---------------------------------------------------------------------------
// Canonical coordinates on Laakso graphs.
//
// L_0 is a single unit edge; L_{k+1} replaces every edge of L_k by the 6-edge
// gadget  a - p - {m0|m1} - q - b  with subdivision points p, q at 1/4 and 3/4
// of the edge. A level-l gadget occupies the parameter interval
// [j*4^{1-l}, (j+1)*4^{1-l}] and its doubled middle is the open interval
// ((4j+1)*4^{-l}, (4j+3)*4^{-l}).
//
// A point is identified by its parameter s in [0,1] together with one branch
// bit for every level whose open middle strictly contains s. Distances have
// an exact closed form in these coordinates; the graph metric of L_h agrees
// with it on the materialized vertex set (checked in tests).
// ---------------------------------------------------------------------------

struct LaaksoMiddle {
  Rat p, q;     // open middle (p, q)
  long long j;  // gadget index at its level
};

// Gadget middle of level `level` around s, if s lies strictly inside.
std::optional<LaaksoMiddle> laakso_middle(const Rat& s, int level);

// Levels whose middle strictly contains s (finite for dyadic s).
std::vector<int> laakso_relevant_levels(const Rat& s);

struct CanonPoint {
  Rat s;
  std::vector<std::pair<int, int>> bits;  // (level, bit), sorted, relevant levels only
  bool operator<(const CanonPoint& o) const {
    if (s != o.s) return s < o.s;
    return bits < o.bits;
  }
  bool operator==(const CanonPoint& o) const { return s == o.s && bits == o.bits; }
  std::string name() const;
};

// A member of the canonical one-bit-per-level family: the set of levels whose
// branch bit is 1 (all gadgets of one level switch together).
struct LaaksoMemberBits {
  std::vector<int> flips;  // sorted levels with bit 1
  int bit(int level) const;
};

CanonPoint laakso_point(const LaaksoMemberBits& member, const Rat& s);

// Exact distance between canonical points.
Rat laakso_dist(const CanonPoint& a, const CanonPoint& b);

// Distance between two family members at a common parameter.
Rat laakso_member_dist(const LaaksoMemberBits& a, const LaaksoMemberBits& b, const Rat& s);

// Interning point universe with the analytic metric; grows on demand. Serves
// as the metric space behind symbolic families and chains whose materialized
// distance matrix would not fit.
class LaaksoSpace {
 public:
  using scalar_type = Rat;
  int intern(const CanonPoint& p);
  int size() const { return static_cast<int>(points_.size()); }
  Rat dist(int i, int j) const;
  const CanonPoint& point(int i) const { return points_[static_cast<size_t>(i)]; }
  std::string label(int i) const { return points_[static_cast<size_t>(i)].name(); }

 private:
  std::vector<CanonPoint> points_;
  std::map<CanonPoint, int> ids_;
};

// ---------------------------------------------------------------------------
// Materialized graphs L_h.
// ---------------------------------------------------------------------------

struct LaaksoBranchPoint {
  Rat position;
  int gadget_level;  // 1-based construction level
  bool opening;      // true at (4j+1)*4^-l, false at (4j+3)*4^-l
};

struct LaaksoGraph {
  int h = 0;
  WeightedGraph<Rat> graph;
  int terminal_u = -1, terminal_v = -1;
  std::vector<LaaksoBranchPoint> branch_points;  // sorted by position
  std::vector<CanonPoint> vertex_points;         // canonical coordinates per vertex
};

inline constexpr int kLaaksoGraphLevelGuard = 6;  // 6^h edge guard

// Builds L_h. Edge count 6^h, every edge of length 4^-h, d(u,v) = 1.
std::optional<LaaksoGraph> laakso_graph(int h, std::string* err = nullptr);

// The canonical 2^h-member family on the materialized graph metric. The
// returned family references `space`, which must be the metric of the same
// LaaksoGraph (vertex indexing is shared).
GeodesicFamily<FiniteMetricSpace<Rat>> laakso_family(int h, const LaaksoGraph& lg,
                                                     const FiniteMetricSpace<Rat>& space);

// Member labels are binary strings read big-endian: member index
// sum(theta_l * 2^(h-l)). Index 0 is the all-zero member.
std::vector<int> laakso_member_flips(int index, int h);
int laakso_member_index(const std::vector<int>& flips, int h);

}  // namespace mconv
