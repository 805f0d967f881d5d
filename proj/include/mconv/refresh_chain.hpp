#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mconv/chain.hpp"
#include "mconv/convexity.hpp"
#include "mconv/laakso.hpp"

namespace mconv {

// The paper-style chain in compact form: states are (time, label) with
// 2^h labels mapping to canonical Laakso family members; transitions advance
// time and, at crossing steps, redistribute uniformly inside a prefix block.
// f(t, label) = member(label) evaluated at clamp(t, 0, 2^phi) * 2^-phi.

struct RefreshCrossing {
  long long step = 0;  // fires on the transition step -> step+1
  int depth = 0;       // prefix length d; refresh mixes bits d+1..h
  int prefix = -1;     // packed bits theta_1..theta_d (big-endian in low d bits);
                       // -1 = applies to every label through its own depth-d prefix
  Rat position;        // crossing parameter in [0,1]
};

struct RefreshChain {
  int h = 0;
  int phi = 0;
  long long t_min = 0, t_max = 0;
  std::vector<LaaksoMemberBits> members;   // size 2^h, indexed by label
  std::vector<RefreshCrossing> crossings;  // sorted by step
  int recommended_k_max = 0;

  int labels() const { return 1 << h; }
  long long active_steps() const { return 1LL << phi; }
  Rat param_at(long long t) const {
    if (t < 0) return Rat(0);
    if (t > active_steps()) return Rat(1);
    return Rat(t) * pow2(-phi);
  }
  CanonPoint point_at(long long t, int label) const {
    return laakso_point(members[static_cast<size_t>(label)], param_at(t));
  }
};

// Step at which a crossing with parameter c fires: the half-open interval
// [tau*2^-phi, (tau+1)*2^-phi) containing c, except c = 1 which fires on the
// last active step. Each crossing fires exactly once.
long long crossing_step(const Rat& c, int phi);

struct RefreshChainError {
  std::string message;
};

// Structural checks: members sized 2^h, crossings sorted, at most one
// applicable crossing per (label, step).
std::optional<RefreshChainError> validate_refresh_chain(const RefreshChain& rc);

// Minimum gap between consecutive branch points of L_h (openings and
// closings across all levels).
Rat laakso_min_branch_gap(int h);

// Smallest phi admissible for the canonical chain on L_h.
int laakso_min_phi(int h);

// Canonical branching chain: a crossing at every gadget split opening
// (4j+1)*4^-l, redistributing over the 2^(h-(l-1)) labels that share the
// first l-1 bits. phi defaults to the minimal admissible value.
std::optional<RefreshChain> laakso_canonical_chain(int h, std::optional<int> phi = std::nullopt,
                                                   std::string* err = nullptr);

// Forward label-distribution walk; fn(t, dist) is called for every time in
// [t_min, t_max]. Exact.
void walk_label_marginals(const RefreshChain& rc,
                          const std::function<void(long long, const std::vector<Rat>&)>& fn);

// Exact convexity computation specialized to refresh structure. Equals the
// generic engine on materialized copies (property-tested); integer
// accumulation keeps it fast enough for large phi.
ConvexityReport<Rat> convexity_refresh(const RefreshChain& rc, unsigned p,
                                       std::optional<int> k_max = std::nullopt,
                                       bool collect_terms = false);

// Explicit (t, label) materialization; refuses above max_states.
std::optional<TimedMarkovChain<LaaksoSpace>> to_timed_chain(const RefreshChain& rc,
                                                            LaaksoSpace& space,
                                                            long long max_states = 2'000'000,
                                                            std::string* err = nullptr);

}  // namespace mconv
