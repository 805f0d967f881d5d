#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mconv/oracle.hpp"
#include "mconv/refresh_chain.hpp"

namespace mconv {

// The plan: 2^h labeled geodesics selected through the witness oracle,
// crossing sets, the scale parameters, the chain, A-sets and the certified
// lower bound. Prefixes are packed as (depth, value) with value read
// big-endian off the label bits.

struct PrefixId {
  int depth = 0;
  int value = 0;
  bool operator<(const PrefixId& o) const {
    return depth != o.depth ? depth < o.depth : value < o.value;
  }
  bool operator==(const PrefixId& o) const { return depth == o.depth && value == o.value; }
  PrefixId parent() const { return {depth - 1, value >> 1}; }
  std::string str() const {
    if (depth == 0) return "";
    std::string s;
    for (int i = depth - 1; i >= 0; --i) s += ((value >> i) & 1) ? '1' : '0';
    return s;
  }
};

struct PlanSelection {
  PrefixId prefix;
  std::vector<int> base_flips;     // g_{(prefix,0,...,0)}
  std::vector<int> partner_flips;  // g_{(prefix,1,0,...,0)}
  std::vector<Rat> controls;       // the issued control set
  std::vector<Rat> q, s;           // response sequences
  Rat separation;
  std::vector<Rat> r_set;          // R_prefix
  std::vector<Rat> L;              // L_i for i = 1..m+1 (aligned with s)
};

struct PlanAEntry {
  PrefixId prefix;
  int i = 0;  // 1-based index into s
  Rat L;
  int k = 0;
  long long i_lo = 0, i_hi = 0;  // interval of integers tau
};

struct ConstructionPlan {
  int h = 0;
  unsigned p = 0;
  Rat alpha;
  std::string oracle;
  std::vector<int> gamma;                 // gamma[n-1] = gamma(n), n = 1..h-1
  int phi = 0;
  std::vector<PlanSelection> selections;  // ordered by (depth, value)
  std::vector<std::vector<int>> members;  // label -> flips, label = 0..2^h-1
  std::vector<PlanAEntry> a_entries;

  const PlanSelection* selection(const PrefixId& id) const {
    for (const auto& s : selections)
      if (s.prefix == id) return &s;
    return nullptr;
  }
};

struct TripleContribution {
  PrefixId prefix;
  int i = 0;
  int k = 0;
  long long i_lo = 0, i_hi = 0;
  Rat L;
  Rat per_term;  // (1/2^{p+1}) L^p 2^{-n} / 2^{kp}
};

struct LowerBoundCertificate {
  int h = 0;
  unsigned p = 0;
  Rat alpha;
  int phi = 0;
  std::vector<TripleContribution> contributions;
  Rat per_term_floor_c;  // alpha^p / 2^{3p+1}
  Rat claimed_lhs;       // sum of |I| * per_term
  Rat rhs;               // 2^{(1-p) phi}
  Rat claimed_bound;     // claimed_lhs / rhs, a lower bound on Pi_p^p
  Rat total_floor;       // h * alpha^{p+1} / 2^{3p+6}
  bool a_exclusion_formula_holds = true;  // literal 4*m(parent)*2^-gamma bound
};

struct ConstructionError {
  std::string stage;
  std::string message;
};

// select_geodesics + choose_phi + select_A_sets rolled forward in order;
// stops at the first failure (e.g. the oracle cannot serve a query).
std::optional<ConstructionPlan> build_plan(const LaaksoOracle& oracle, int h, unsigned p,
                                           ConstructionError* err = nullptr);

// Smallest phi meeting both constraints, given selections; exposed separately
// for the brute-scan cross-check in tests.
int choose_phi(const std::vector<PlanSelection>& selections, int h);

// The plan's chain in compact refresh form.
RefreshChain build_chain(const ConstructionPlan& plan);

// Certificate assembly; fails if any side condition does not hold.
std::optional<LowerBoundCertificate> certify(const ConstructionPlan& plan,
                                             ConstructionError* err = nullptr);

// True iff all (scale, integer, geodesic) triple sets are pairwise disjoint;
// on failure reports the colliding pair.
bool verify_triple_disjointness(const ConstructionPlan& plan, std::string* witness = nullptr);

}  // namespace mconv
