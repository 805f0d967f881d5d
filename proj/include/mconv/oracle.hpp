#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mconv/laakso.hpp"
#include "mconv/metric.hpp"
#include "mconv/thickness.hpp"

namespace mconv {

// Witness oracle over canonical Laakso-style families: members are identified
// by their flip sets (levels whose branch bit is 1). The plan construction
// consumes this interface; it never needs to enumerate the family.

struct OracleAnswer {
  bool ok = false;
  std::string error;
  std::vector<int> partner_flips;
  std::vector<Rat> q_list, s_list;
  Rat separation;
};

class LaaksoOracle {
 public:
  virtual ~LaaksoOracle() = default;
  virtual Rat alpha() const = 0;
  virtual OracleAnswer answer(const std::vector<int>& member_flips,
                              const std::vector<Rat>& controls) const = 0;
  virtual std::string describe() const = 0;
};

// Closed-form oracle over the one-bit-per-level family with levels
// materialized on demand up to level_cap. For a query it returns the
// shallowest single-level flip whose middles avoid every control, with the
// minimal separator set isolating each middle; separation is exactly 1/2.
// Matches the finite-family search on plan-style queries (golden-tested).
class CanonicalLaaksoOracle : public LaaksoOracle {
 public:
  explicit CanonicalLaaksoOracle(int level_cap = 16) : level_cap_(level_cap) {}
  Rat alpha() const override { return Rat(1, 2); }
  OracleAnswer answer(const std::vector<int>& member_flips,
                      const std::vector<Rat>& controls) const override;
  std::string describe() const override {
    return "laakso-canonical(cap=" + std::to_string(level_cap_) + ")";
  }
  int level_cap() const { return level_cap_; }

 private:
  int level_cap_;
};

// Witness oracle backed by the generic thickness search over a materialized
// L_H family; used to cross-check the closed-form oracle on small levels.
class FiniteLaaksoOracle : public LaaksoOracle {
 public:
  FiniteLaaksoOracle(int level, Rat alpha);
  Rat alpha() const override { return alpha_; }
  OracleAnswer answer(const std::vector<int>& member_flips,
                      const std::vector<Rat>& controls) const override;
  std::string describe() const override { return "laakso-graph(L_" + std::to_string(level_) + ")"; }

 private:
  int level_;
  Rat alpha_;
  std::shared_ptr<LaaksoGraph> graph_;
  std::shared_ptr<FiniteMetricSpace<Rat>> metric_;
  std::shared_ptr<GeodesicFamily<FiniteMetricSpace<Rat>>> family_;
  std::shared_ptr<ThicknessSearch<FiniteMetricSpace<Rat>>> search_;
};

// Degenerate oracle over a single geodesic; every query with positive alpha
// fails. Exists for the error path.
class SingleGeodesicOracle : public LaaksoOracle {
 public:
  explicit SingleGeodesicOracle(Rat alpha) : alpha_(std::move(alpha)) {}
  Rat alpha() const override { return alpha_; }
  OracleAnswer answer(const std::vector<int>&, const std::vector<Rat>&) const override {
    OracleAnswer a;
    a.error = "family has a single geodesic: no partner achieves separation >= alpha";
    return a;
  }
  std::string describe() const override { return "single-geodesic"; }

 private:
  Rat alpha_;
};

}  // namespace mconv
