#include "mconv/refresh_chain.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <stdexcept>

namespace mconv {

long long crossing_step(const Rat& c, int phi) {
  Rat scaled = c * pow2(phi);
  Int fl = num(scaled) / den(scaled);
  long long step = fl.convert_to<long long>();
  long long last = (1LL << phi) - 1;
  return std::min(step, last);
}

std::optional<RefreshChainError> validate_refresh_chain(const RefreshChain& rc) {
  if (static_cast<int>(rc.members.size()) != rc.labels())
    return RefreshChainError{"member count != 2^h"};
  for (size_t i = 1; i < rc.crossings.size(); ++i)
    if (rc.crossings[i - 1].step > rc.crossings[i].step)
      return RefreshChainError{"crossings not sorted by step"};
  // at most one applicable crossing per (label, step)
  for (size_t i = 0; i < rc.crossings.size(); ++i) {
    for (size_t j = i + 1; j < rc.crossings.size() && rc.crossings[j].step == rc.crossings[i].step;
         ++j) {
      const auto& a = rc.crossings[i];
      const auto& b = rc.crossings[j];
      for (int label = 0; label < rc.labels(); ++label) {
        bool ina = a.prefix < 0 || (label >> (rc.h - a.depth)) == a.prefix;
        bool inb = b.prefix < 0 || (label >> (rc.h - b.depth)) == b.prefix;
        if (ina && inb)
          return RefreshChainError{"two crossings apply to one geodesic in step " +
                                   std::to_string(a.step)};
      }
    }
  }
  for (const auto& c : rc.crossings) {
    if (c.depth < 0 || c.depth >= rc.h) return RefreshChainError{"crossing depth out of range"};
    if (c.step < 0 || c.step >= rc.active_steps())
      return RefreshChainError{"crossing step outside the active window"};
  }
  if (rc.t_min > 0 || rc.t_max < rc.active_steps())
    return RefreshChainError{"window does not contain the active steps"};
  return std::nullopt;
}

Rat laakso_min_branch_gap(int h) {
  if (h <= 0) return Rat(1);
  std::vector<Rat> pos;
  for (int level = 1; level <= h; ++level) {
    long long gadgets = 1LL << (2 * (level - 1));
    for (long long j = 0; j < gadgets; ++j) {
      pos.push_back(Rat(4 * j + 1) * pow2(-2 * level));
      pos.push_back(Rat(4 * j + 3) * pow2(-2 * level));
    }
  }
  std::sort(pos.begin(), pos.end());
  Rat best = Rat(1);
  for (size_t i = 1; i < pos.size(); ++i) best = std::min(best, Rat(pos[i] - pos[i - 1]));
  return best;
}

int laakso_min_phi(int h) {
  Rat gap = laakso_min_branch_gap(h);
  int phi = 1;
  while (!(pow2(-phi) < gap)) ++phi;
  return phi;
}

std::optional<RefreshChain> laakso_canonical_chain(int h, std::optional<int> phi_opt,
                                                   std::string* err) {
  if (h < 0) {
    if (err) *err = "negative level";
    return std::nullopt;
  }
  int phi_min = laakso_min_phi(h);
  int phi = phi_opt.value_or(phi_min);
  if (phi < phi_min) {
    if (err)
      *err = "phi too small: 2^-phi must lie strictly below the minimum branch-point gap "
             "(need phi >= " + std::to_string(phi_min) + ")";
    return std::nullopt;
  }
  RefreshChain rc;
  rc.h = h;
  rc.phi = phi;
  rc.recommended_k_max = phi + 2;
  rc.t_min = -(1LL << (phi + 2));
  rc.t_max = (1LL << phi) + 2;
  for (int label = 0; label < (1 << h); ++label)
    rc.members.push_back(LaaksoMemberBits{laakso_member_flips(label, h)});
  for (int level = 1; level <= h; ++level) {
    long long gadgets = 1LL << (2 * (level - 1));
    for (long long j = 0; j < gadgets; ++j) {
      Rat c = Rat(4 * j + 1) * pow2(-2 * level);
      rc.crossings.push_back({crossing_step(c, phi), level - 1, -1, c});
    }
  }
  std::sort(rc.crossings.begin(), rc.crossings.end(),
            [](const RefreshCrossing& a, const RefreshCrossing& b) { return a.step < b.step; });
  if (auto bad = validate_refresh_chain(rc)) {
    if (err) *err = bad->message;
    return std::nullopt;
  }
  return rc;
}

namespace {

// crossing indices grouped by step
std::map<long long, std::vector<int>> crossings_by_step(const RefreshChain& rc) {
  std::map<long long, std::vector<int>> m;
  for (int i = 0; i < static_cast<int>(rc.crossings.size()); ++i)
    m[rc.crossings[static_cast<size_t>(i)].step].push_back(i);
  return m;
}

// the crossing applicable to `label` at this step, if any
int applicable_crossing(const RefreshChain& rc, const std::vector<int>& at_step, int label) {
  for (int ci : at_step) {
    const auto& c = rc.crossings[static_cast<size_t>(ci)];
    if (c.prefix < 0 || (label >> (rc.h - c.depth)) == c.prefix) return ci;
  }
  return -1;
}

}  // namespace

void walk_label_marginals(const RefreshChain& rc,
                          const std::function<void(long long, const std::vector<Rat>&)>& fn) {
  int L = rc.labels();
  std::vector<Rat> dist(static_cast<size_t>(L), Rat(1, L));
  auto by_step = crossings_by_step(rc);
  fn(rc.t_min, dist);
  for (long long t = rc.t_min; t < rc.t_max; ++t) {
    auto it = by_step.find(t);
    if (it != by_step.end()) {
      std::vector<Rat> next(static_cast<size_t>(L), Rat(0));
      for (int label = 0; label < L; ++label) {
        if (dist[static_cast<size_t>(label)] == 0) continue;
        int ci = applicable_crossing(rc, it->second, label);
        if (ci < 0) {
          next[static_cast<size_t>(label)] += dist[static_cast<size_t>(label)];
        } else {
          const auto& c = rc.crossings[static_cast<size_t>(ci)];
          int block = 1 << (rc.h - c.depth);
          int base = (label >> (rc.h - c.depth)) << (rc.h - c.depth);
          Rat share = dist[static_cast<size_t>(label)] / block;
          for (int off = 0; off < block; ++off) next[static_cast<size_t>(base + off)] += share;
        }
      }
      dist = std::move(next);
    }
    fn(t + 1, dist);
  }
}

namespace {

struct PairDiff {
  int a, b;
  std::vector<int> levels;  // differing levels, ascending
};

// distance between members a,b at parameter tau*2^-phi, in units of 2^-phi
long long dist_steps(const PairDiff& pd, long long tau, int phi) {
  for (int level : pd.levels) {
    int gexp = phi - 2 * (level - 1);  // gadget span in steps = 2^gexp
    if (gexp < 2) break;               // deeper structure is below step resolution (unused)
    long long g = 1LL << gexp;
    long long off = tau & (g - 1);
    long long p_off = g >> 2, q_off = 3 * (g >> 2);
    if (off > p_off && off < q_off) return 2 * std::min(off - p_off, q_off - off);
  }
  return 0;
}

using I128 = __int128;

I128 ipow(long long base, unsigned e) {
  I128 r = 1;
  for (unsigned i = 0; i < e; ++i) r *= base;
  return r;
}

Int to_int(I128 v) {
  bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
  Int hi = static_cast<unsigned long long>(u >> 64);
  Int lo = static_cast<unsigned long long>(u & ~0ULL);
  Int r = (hi << 64) | lo;
  return neg ? -r : r;
}

}  // namespace

ConvexityReport<Rat> convexity_refresh(const RefreshChain& rc, unsigned p,
                                       std::optional<int> k_max_opt, bool collect_terms) {
  if (auto bad = validate_refresh_chain(rc))
    throw std::invalid_argument("invalid refresh chain: " + bad->message);
  const int h = rc.h, phi = rc.phi, L = rc.labels();
  const long long A = rc.active_steps();
  ConvexityReport<Rat> rep;
  rep.p = p;
  int k_max = k_max_opt.value_or(rc.recommended_k_max);
  rep.k_max = k_max;

  // integer range guard for the __int128 accumulators
  long long bits = static_cast<long long>(p) * phi + 5 * h + phi + 4;
  if (bits >= 126)
    throw std::overflow_error("exponent range too wide for the fast path; materialize the chain");

  // RHS: every step inside the active window moves distance exactly 2^-phi
  // (same geodesic: parameter distance; crossing switch: both sides touch the
  // crossing point). rhs = 2^phi * 2^-(p*phi). Spot-checked against the
  // analytic metric here, fully checked in tests.
  {
    auto by_step = crossings_by_step(rc);
    for (long long t = 0; t < A; t += std::max<long long>(1, A / 64)) {
      auto it = by_step.find(t);
      int label = static_cast<int>(t % L);
      int ci = it == by_step.end() ? -1 : applicable_crossing(rc, it->second, label);
      int dst = label;
      if (ci >= 0) {
        const auto& c = rc.crossings[static_cast<size_t>(ci)];
        int blockbase = (label >> (h - c.depth)) << (h - c.depth);
        dst = blockbase + ((label + 1) & ((1 << (h - c.depth)) - 1));
      }
      Rat d = laakso_dist(rc.point_at(t, label), rc.point_at(t + 1, dst));
      if (d != pow2(-phi))
        throw std::logic_error("refresh chain step distance is not 2^-phi");
    }
    rep.rhs_total = pow2(phi) * rat_pow(pow2(-phi), p);
  }

  // member pair tables, bottom-up block sums S[pid][t]
  std::vector<PairDiff> pairs;
  std::vector<std::vector<int>> cross_pairs(static_cast<size_t>(L) - 1);  // per prefix id
  auto pid_of = [&](int depth, int prefix) { return (1 << depth) - 1 + prefix; };
  for (int d = 0; d < h; ++d)
    for (int v = 0; v < (1 << d); ++v) {
      int pid = pid_of(d, v);
      int half = h - d - 1;
      int base0 = (v << 1) << half, base1 = ((v << 1) | 1) << half;
      for (int i = 0; i < (1 << half); ++i)
        for (int j = 0; j < (1 << half); ++j) {
          PairDiff pd;
          pd.a = base0 + i;
          pd.b = base1 + j;
          const auto& fa = rc.members[static_cast<size_t>(pd.a)].flips;
          const auto& fb = rc.members[static_cast<size_t>(pd.b)].flips;
          std::set_symmetric_difference(fa.begin(), fa.end(), fb.begin(), fb.end(),
                                        std::back_inserter(pd.levels));
          cross_pairs[static_cast<size_t>(pid)].push_back(static_cast<int>(pairs.size()));
          pairs.push_back(std::move(pd));
        }
    }

  // S[pid][t] = sum over ordered pairs in the block of d^p, in units 2^-(p*phi)
  std::vector<std::vector<I128>> S(static_cast<size_t>(L) - 1);
  for (auto& v : S) v.assign(static_cast<size_t>(A) + 1, 0);
  for (long long t = 0; t <= A; ++t) {
    for (int d = h - 1; d >= 0; --d)
      for (int v = 0; v < (1 << d); ++v) {
        int pid = pid_of(d, v);
        I128 x = 0;
        for (int pi : cross_pairs[static_cast<size_t>(pid)])
          x += ipow(dist_steps(pairs[static_cast<size_t>(pi)], t, phi), p);
        I128 s = 2 * x;
        if (d + 1 < h) {
          s += S[static_cast<size_t>(pid_of(d + 1, v << 1))][static_cast<size_t>(t)];
          s += S[static_cast<size_t>(pid_of(d + 1, (v << 1) | 1))][static_cast<size_t>(t)];
        }
        S[static_cast<size_t>(pid)][static_cast<size_t>(t)] = s;
      }
  }

  // cumulative crossing counts per prefix and per depth (all-prefix crossings)
  std::vector<std::vector<int>> cnt_prefix(static_cast<size_t>(L) - 1);
  std::vector<std::vector<int>> cnt_depth(static_cast<size_t>(h));
  auto make_cnt = [&](std::vector<int>& c) { c.assign(static_cast<size_t>(A) + 1, 0); };
  for (auto& c : cnt_prefix) make_cnt(c);
  for (auto& c : cnt_depth) make_cnt(c);
  for (const auto& c : rc.crossings) {
    if (c.prefix < 0)
      cnt_depth[static_cast<size_t>(c.depth)][static_cast<size_t>(c.step) + 1] += 1;
    else
      cnt_prefix[static_cast<size_t>(pid_of(c.depth, c.prefix))][static_cast<size_t>(c.step) + 1] +=
          1;
  }
  for (auto& c : cnt_prefix)
    for (size_t i = 1; i < c.size(); ++i) c[i] += c[i - 1];
  for (auto& c : cnt_depth)
    for (size_t i = 1; i < c.size(); ++i) c[i] += c[i - 1];
  // fired(pid/depth, [a,b]) = cnt[b+1] - cnt[a] with [a,b] within [0, A-1]
  auto fired = [&](const std::vector<int>& c, long long a, long long b) {
    return c[static_cast<size_t>(b) + 1] - c[static_cast<size_t>(a)] > 0;
  };

  const Rat scale_base = pow2(-(3 * h + static_cast<int>(p) * phi));
  for (int k = 0; k <= k_max; ++k) {
    long long span = 1LL << k;
    I128 lhs_k = 0;
    for (long long t = 1; t < A; ++t) {
      long long s0 = std::max(t - span, rc.t_min);
      long long a = std::max<long long>(s0, 0), b = std::min(t - 1, A - 1);
      if (a > b) continue;
      I128 e_num = 0;
      for (int label = 0; label < L; ++label) {
        for (int d = 0; d < h; ++d) {
          bool hit = fired(cnt_depth[static_cast<size_t>(d)], a, b);
          if (!hit) {
            int pid = pid_of(d, label >> (h - d));
            hit = fired(cnt_prefix[static_cast<size_t>(pid)], a, b);
          }
          if (hit) {
            int pid = pid_of(d, label >> (h - d));
            e_num += S[static_cast<size_t>(pid)][static_cast<size_t>(t)] << (2 * d);
            break;
          }
        }
      }
      if (e_num != 0) {
        lhs_k += e_num;
        if (collect_terms)
          rep.lhs_terms.push_back(
              {k, t, Rat(to_int(e_num)) * scale_base * rat_pow(pow2(-k), p)});
      }
    }
    if (lhs_k != 0) rep.lhs_total += Rat(to_int(lhs_k)) * scale_base * rat_pow(pow2(-k), p);
  }
  rep.terms_collected = collect_terms;

  finish_report(rep);
  return rep;
}

std::optional<TimedMarkovChain<LaaksoSpace>> to_timed_chain(const RefreshChain& rc,
                                                            LaaksoSpace& space,
                                                            long long max_states,
                                                            std::string* err) {
  if (auto bad = validate_refresh_chain(rc)) {
    if (err) *err = bad->message;
    return std::nullopt;
  }
  const int L = rc.labels();
  long long layers = rc.t_max - rc.t_min + 1;
  long long total = layers * L;
  if (total > max_states) {
    if (err)
      *err = "materialization would need " + std::to_string(total) + " states (cap " +
             std::to_string(max_states) + ")";
    return std::nullopt;
  }
  TimedMarkovChain<LaaksoSpace> c;
  c.space = &space;
  c.t_min = rc.t_min;
  c.t_max = rc.t_max;
  auto idx = [&](long long t, int label) {
    return static_cast<int>((t - rc.t_min) * L + label);
  };
  c.state_names.resize(static_cast<size_t>(total));
  c.point_map.resize(static_cast<size_t>(total));
  for (long long t = rc.t_min; t <= rc.t_max; ++t)
    for (int label = 0; label < L; ++label) {
      std::string bits;
      for (int i = 0; i < rc.h; ++i) bits += ((label >> (rc.h - 1 - i)) & 1) ? '1' : '0';
      c.state_names[static_cast<size_t>(idx(t, label))] =
          "t=" + std::to_string(t) + ",g=" + (rc.h ? bits : "0");
      c.point_map[static_cast<size_t>(idx(t, label))] = space.intern(rc.point_at(t, label));
    }
  for (int label = 0; label < L; ++label) c.init.push_back({idx(rc.t_min, label), Rat(1, L)});
  auto by_step = crossings_by_step(rc);
  for (long long t = rc.t_min; t < rc.t_max; ++t) {
    SparseKernel<Rat> k;
    auto it = by_step.find(t);
    for (int label = 0; label < L; ++label) {
      SparseKernel<Rat>::Row row;
      int ci = it == by_step.end() ? -1 : applicable_crossing(rc, it->second, label);
      if (ci < 0) {
        row.push_back({idx(t + 1, label), Rat(1)});
      } else {
        const auto& cr = rc.crossings[static_cast<size_t>(ci)];
        int block = 1 << (rc.h - cr.depth);
        int base = (label >> (rc.h - cr.depth)) << (rc.h - cr.depth);
        for (int off = 0; off < block; ++off)
          row.push_back({idx(t + 1, base + off), Rat(1, block)});
      }
      k.rows.push_back({idx(t, label), std::move(row)});
    }
    c.kernels.push_back(std::move(k));
  }
  return c;
}

}  // namespace mconv
