#include "mconv/construction.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace mconv {

namespace {

int label_of(const PrefixId& prefix, int next_bit, int h) {
  // label bits: prefix, next_bit, zeros
  int v = (prefix.value << 1) | next_bit;
  return v << (h - prefix.depth - 1);
}

std::vector<Rat> merge_sorted(std::vector<Rat> a, const std::vector<Rat>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

bool response_sane(const OracleAnswer& ans, const std::vector<Rat>& controls, const Rat& alpha,
                   std::string* why) {
  for (size_t i = 0; i < ans.q_list.size(); ++i) {
    if (!(ans.q_list[i] > 0) || !(ans.q_list[i] < 1)) {
      *why = "q outside (0,1)";
      return false;
    }
    if (i > 0 && !(ans.q_list[i - 1] < ans.q_list[i])) {
      *why = "q not increasing";
      return false;
    }
  }
  if (ans.s_list.size() != ans.q_list.size() + 1) {
    *why = "s count != q count + 1";
    return false;
  }
  for (size_t i = 0; i < ans.s_list.size(); ++i) {
    Rat lo = i == 0 ? Rat(0) : ans.q_list[i - 1];
    Rat hi = i == ans.q_list.size() ? Rat(1) : ans.q_list[i];
    if (!(lo < ans.s_list[i]) || !(ans.s_list[i] < hi)) {
      *why = "s not interleaved";
      return false;
    }
  }
  for (const Rat& c : controls) {
    if (c == 0 || c == 1) continue;
    if (!std::binary_search(ans.q_list.begin(), ans.q_list.end(), c)) {
      *why = "control not contained in q-list";
      return false;
    }
  }
  if (ans.separation < alpha) {
    *why = "separation below alpha";
    return false;
  }
  return true;
}

}  // namespace

int choose_phi(const std::vector<PlanSelection>& selections, int h) {
  // bullet 1: 2^-phi strictly below every same-geodesic crossing gap
  int phi = 1;
  for (int label = 0; label < (1 << h); ++label) {
    std::vector<Rat> crossings;
    for (const auto& sel : selections) {
      if ((label >> (h - sel.prefix.depth)) != sel.prefix.value) continue;
      crossings.insert(crossings.end(), sel.r_set.begin(), sel.r_set.end());
    }
    std::sort(crossings.begin(), crossings.end());
    for (size_t i = 1; i < crossings.size(); ++i) {
      Rat gap = crossings[i] - crossings[i - 1];
      if (gap == 0) continue;
      while (!(pow2(-phi) < gap)) ++phi;
    }
  }
  // bullet 2: 2^-phi <= L/16 for every nonzero L
  for (const auto& sel : selections)
    for (const Rat& L : sel.L)
      if (L != 0)
        while (!(pow2(-phi) <= L / 16)) ++phi;
  return phi;
}

std::optional<ConstructionPlan> build_plan(const LaaksoOracle& oracle, int h, unsigned p,
                                           ConstructionError* err) {
  auto fail = [&](const std::string& stage, const std::string& message) {
    if (err) *err = {stage, message};
    return std::nullopt;
  };
  if (h < 1) return fail("build_plan", "depth must be at least 1");
  if (p < 1) return fail("build_plan", "p must be a positive integer");

  ConstructionPlan plan;
  plan.h = h;
  plan.p = p;
  plan.alpha = oracle.alpha();
  plan.oracle = oracle.describe();
  plan.members.assign(static_cast<size_t>(1) << h, {});

  auto do_select = [&](const PrefixId& prefix, const std::vector<Rat>& controls,
                       std::string* why) -> bool {
    const auto& base = plan.members[static_cast<size_t>(label_of(prefix, 0, h))];
    OracleAnswer ans = oracle.answer(base, controls);
    if (!ans.ok) {
      *why = ans.error;
      return false;
    }
    if (!response_sane(ans, controls, plan.alpha, why)) return false;
    PlanSelection sel;
    sel.prefix = prefix;
    sel.base_flips = base;
    sel.partner_flips = ans.partner_flips;
    sel.controls = controls;
    sel.q = ans.q_list;
    sel.s = ans.s_list;
    sel.separation = ans.separation;
    // R_prefix: the response's agreement set minus all ancestor crossing sets
    std::set<Rat> anc;
    for (const auto& prev : plan.selections)
      if (prev.prefix.depth < prefix.depth &&
          (prefix.value >> (prefix.depth - prev.prefix.depth)) == prev.prefix.value)
        anc.insert(prev.r_set.begin(), prev.r_set.end());
    if (prefix.depth == 0) {
      sel.r_set.push_back(Rat(0));
      for (const Rat& q : sel.q) sel.r_set.push_back(q);
      sel.r_set.push_back(Rat(1));
    } else {
      for (const Rat& q : sel.q)
        if (!anc.count(q)) sel.r_set.push_back(q);
    }
    LaaksoMemberBits mb{sel.base_flips}, pb{sel.partner_flips};
    for (const Rat& s : sel.s) sel.L.push_back(laakso_member_dist(mb, pb, s));
    plan.members[static_cast<size_t>(label_of(prefix, 1, h))] = sel.partner_flips;
    plan.selections.push_back(std::move(sel));
    return true;
  };

  std::string why;
  if (!do_select(PrefixId{0, 0}, {Rat(0), Rat(1)}, &why))
    return fail("select_geodesics", "prefix '': " + why);

  for (int n = 1; n < h; ++n) {
    // gamma(n): smallest integer meeting both constraints against the
    // depth-(n-1) data
    int gamma = 1;
    for (const auto& sel : plan.selections) {
      if (sel.prefix.depth != n - 1) continue;
      Rat m(static_cast<long long>(sel.q.size()));
      if (m > 0)
        while (!(4 * m * pow2(-gamma) <= plan.alpha / 10)) ++gamma;
      for (size_t i = 0; i < sel.s.size(); ++i) {
        Rat qprev = i == 0 ? Rat(0) : sel.q[i - 1];
        Rat gap = sel.s[i] - qprev;
        while (!(pow2(-gamma) <= gap / 4)) ++gamma;
      }
      if (gamma > 40)
        return fail("select_geodesics", "gamma(" + std::to_string(n) + ") exceeds the guard");
    }
    plan.gamma.push_back(gamma);
    std::vector<Rat> grid;
    for (long long kk = 1; kk <= (1LL << gamma); ++kk) grid.push_back(Rat(kk) * pow2(-gamma));
    for (int v = 0; v < (1 << n); ++v) {
      PrefixId prefix{n, v};
      const auto* parent = plan.selection(prefix.parent());
      std::vector<Rat> controls = merge_sorted(merge_sorted(parent->q, parent->s), grid);
      if (!do_select(prefix, controls, &why))
        return fail("select_geodesics", "prefix '" + prefix.str() + "': " + why);
    }
  }

  plan.phi = choose_phi(plan.selections, h);

  // A-sets with scales and intervals
  for (const auto& sel : plan.selections) {
    int n = sel.prefix.depth;
    std::vector<const PlanSelection*> ancestors;
    for (const auto& prev : plan.selections)
      if (prev.prefix.depth < n &&
          (sel.prefix.value >> (n - prev.prefix.depth)) == prev.prefix.value)
        ancestors.push_back(&prev);
    Rat kept_sum(0);
    for (size_t i1 = 1; i1 <= sel.s.size(); ++i1) {
      const Rat& L = sel.L[i1 - 1];
      if (L == 0) continue;  // (E:NE)
      const Rat& si = sel.s[i1 - 1];
      Rat qprev = i1 == 1 ? Rat(0) : sel.q[i1 - 2];
      Rat qnext = i1 == sel.s.size() ? Rat(1) : sel.q[i1 - 1];
      int k = 1;
      while (!(pow2(k - plan.phi) > si - qprev)) ++k;
      // interval: tau*2^-phi in [si - L/4, si]
      Rat lo = (si - L / 4) * pow2(plan.phi);
      Rat hi = si * pow2(plan.phi);
      Int lo_i = num(lo) / den(lo);
      if (Rat(lo_i) < lo) ++lo_i;  // ceil (lo >= 0 here)
      Int hi_i = num(hi) / den(hi);
      long long i_lo = lo_i.convert_to<long long>();
      long long i_hi = hi_i.convert_to<long long>();
      if (!(Rat(i_hi - i_lo + 1) * pow2(-plan.phi) >= L / 8))
        return fail("select_A_sets", "interval shorter than L/8 at prefix '" + sel.prefix.str() +
                                         "' i=" + std::to_string(i1));
      // (a): no ancestor crossing in [si - L/4 - 2^{k-phi}, si]
      Rat wlo = si - L / 4 - pow2(k - plan.phi);
      bool a_ok = true;
      for (const auto* anc : ancestors)
        for (const Rat& c : anc->r_set)
          if (wlo <= c && c <= si) a_ok = false;
      if (!a_ok) continue;
      // (b)
      if (!(L >= plan.alpha / 2 * (qnext - qprev))) continue;
      plan.a_entries.push_back({sel.prefix, static_cast<int>(i1), L, k, i_lo, i_hi});
      kept_sum += L;
    }
    if (!(kept_sum >= plan.alpha / 4))
      return fail("select_A_sets", "prefix '" + sel.prefix.str() +
                                       "': kept separation sum " + rat_to_string(kept_sum) +
                                       " below alpha/4");
  }
  return plan;
}

RefreshChain build_chain(const ConstructionPlan& plan) {
  RefreshChain rc;
  rc.h = plan.h;
  rc.phi = plan.phi;
  rc.recommended_k_max = plan.phi + 2;
  rc.t_min = -(1LL << (plan.phi + 2));
  rc.t_max = (1LL << plan.phi) + 2;
  for (const auto& flips : plan.members) rc.members.push_back(LaaksoMemberBits{flips});
  for (const auto& sel : plan.selections)
    for (const Rat& c : sel.r_set)
      rc.crossings.push_back({crossing_step(c, plan.phi), sel.prefix.depth, sel.prefix.value, c});
  std::sort(rc.crossings.begin(), rc.crossings.end(),
            [](const RefreshCrossing& a, const RefreshCrossing& b) { return a.step < b.step; });
  if (auto bad = validate_refresh_chain(rc))
    throw std::logic_error("build_chain produced an invalid chain: " + bad->message);
  return rc;
}

bool verify_triple_disjointness(const ConstructionPlan& plan, std::string* witness) {
  // triples (scale k, integer tau, geodesic): grouped by k; two entries
  // collide iff their intervals intersect and their prefix blocks intersect
  // (one prefix extends the other)
  std::map<int, std::vector<const PlanAEntry*>> by_k;
  for (const auto& e : plan.a_entries) by_k[e.k].push_back(&e);
  for (auto& [k, entries] : by_k) {
    for (size_t i = 0; i < entries.size(); ++i)
      for (size_t j = i + 1; j < entries.size(); ++j) {
        const auto *a = entries[i], *b = entries[j];
        const auto *shal = a, *deep = b;
        if (shal->prefix.depth > deep->prefix.depth) std::swap(shal, deep);
        if ((deep->prefix.value >> (deep->prefix.depth - shal->prefix.depth)) !=
            shal->prefix.value)
          continue;  // disjoint geodesic sets
        if (a->i_hi < b->i_lo || b->i_hi < a->i_lo) continue;  // disjoint intervals
        if (witness)
          *witness = "triples collide: prefix '" + a->prefix.str() + "' i=" + std::to_string(a->i) +
                     " and prefix '" + b->prefix.str() + "' i=" + std::to_string(b->i) +
                     " share scale k=" + std::to_string(k);
        return false;
      }
  }
  return true;
}

std::optional<LowerBoundCertificate> certify(const ConstructionPlan& plan,
                                             ConstructionError* err) {
  auto fail = [&](const std::string& message) {
    if (err) *err = {"certify", message};
    return std::nullopt;
  };
  LowerBoundCertificate cert;
  cert.h = plan.h;
  cert.p = plan.p;
  cert.alpha = plan.alpha;
  cert.phi = plan.phi;
  cert.per_term_floor_c = rat_pow(plan.alpha, plan.p) / pow2(3 * static_cast<int>(plan.p) + 1);
  cert.rhs = pow2((1 - static_cast<int>(plan.p)) * plan.phi);
  cert.total_floor =
      plan.h * rat_pow(plan.alpha, plan.p + 1) / pow2(3 * static_cast<int>(plan.p) + 6);

  std::string witness;
  if (!verify_triple_disjointness(plan, &witness)) return fail(witness);

  for (const auto& e : plan.a_entries) {
    int n = e.prefix.depth;
    // the per-term display needs L > (alpha/4) 2^{k - phi}
    if (!(e.L > plan.alpha / 4 * pow2(e.k - plan.phi)))
      return fail("per-term bound fails at prefix '" + e.prefix.str() +
                  "' i=" + std::to_string(e.i));
    TripleContribution tc;
    tc.prefix = e.prefix;
    tc.i = e.i;
    tc.k = e.k;
    tc.i_lo = e.i_lo;
    tc.i_hi = e.i_hi;
    tc.L = e.L;
    tc.per_term = rat_pow(e.L, plan.p) / pow2(static_cast<int>(plan.p) + 1) * pow2(-n) /
                  rat_pow(pow2(e.k), plan.p);
    if (!(tc.per_term >= cert.per_term_floor_c * pow2(-n) *
                             rat_pow(pow2(-plan.phi), plan.p)))
      return fail("per-term contribution below the alpha^p/2^{3p+1} floor at prefix '" +
                  e.prefix.str() + "' i=" + std::to_string(e.i));
    cert.claimed_lhs += Rat(e.i_hi - e.i_lo + 1) * tc.per_term;
    cert.contributions.push_back(std::move(tc));
  }
  if (cert.rhs == 0) return fail("rhs is zero");
  cert.claimed_bound = cert.claimed_lhs / cert.rhs;
  if (!(cert.claimed_bound >= cert.total_floor))
    return fail("claimed bound falls below the h*alpha^{p+1}/2^{3p+6} floor");

  // literal (a)-exclusion accounting 4*m(parent)*2^-gamma(n); recorded, not
  // enforced (endpoint crossings escape the parent-count formula)
  cert.a_exclusion_formula_holds = true;
  for (const auto& sel : plan.selections) {
    int n = sel.prefix.depth;
    if (n == 0 || n > static_cast<int>(plan.gamma.size())) continue;
    const auto* parent = plan.selection(sel.prefix.parent());
    Rat excluded(0);
    std::set<std::pair<int, int>> kept;  // (depth(redundant), i)
    for (const auto& e : plan.a_entries)
      if (e.prefix == sel.prefix) kept.insert({0, e.i});
    for (size_t i1 = 1; i1 <= sel.s.size(); ++i1) {
      if (sel.L[i1 - 1] == 0) continue;
      Rat qprev = i1 == 1 ? Rat(0) : sel.q[i1 - 2];
      Rat qnext = i1 == sel.s.size() ? Rat(1) : sel.q[i1 - 1];
      bool b_ok = sel.L[i1 - 1] >= plan.alpha / 2 * (qnext - qprev);
      if (b_ok && !kept.count({0, static_cast<int>(i1)})) excluded += sel.L[i1 - 1];
    }
    Rat bound = 4 * Rat(static_cast<long long>(parent->q.size())) *
                pow2(-plan.gamma[static_cast<size_t>(n) - 1]);
    if (excluded > bound) cert.a_exclusion_formula_holds = false;
  }
  return cert;
}

}  // namespace mconv
