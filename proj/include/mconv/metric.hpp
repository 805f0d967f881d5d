#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mconv/rat.hpp"

namespace mconv {

// Scalar policies for the two backends: exact rationals (Laakso lane,
// construction, chain probabilities) and double (Heisenberg lane).
struct ExactScalar {
  using type = Rat;
  static constexpr bool exact = true;
  static bool eq(const Rat& a, const Rat& b, const Rat&) { return a == b; }
  static bool is_zero(const Rat& a, const Rat&) { return a == 0; }
  static Rat zero() { return Rat(0); }
};

struct FloatScalar {
  using type = double;
  static constexpr bool exact = false;
  static bool eq(double a, double b, double tol) { return std::fabs(a - b) <= tol; }
  static bool is_zero(double a, double tol) { return std::fabs(a) <= tol; }
  static double zero() { return 0.0; }
};

template <class S>
struct scalar_policy;
template <>
struct scalar_policy<Rat> {
  using type = ExactScalar;
};
template <>
struct scalar_policy<double> {
  using type = FloatScalar;
};

enum class MetricViolation { NotSquare, NegativeEntry, NonzeroDiagonal, Asymmetry, Triangle };

inline const char* to_string(MetricViolation v) {
  switch (v) {
    case MetricViolation::NotSquare: return "not-square";
    case MetricViolation::NegativeEntry: return "negative-entry";
    case MetricViolation::NonzeroDiagonal: return "nonzero-diagonal";
    case MetricViolation::Asymmetry: return "asymmetry";
    case MetricViolation::Triangle: return "triangle";
  }
  return "unknown";
}

struct MetricIssue {
  MetricViolation kind;
  int i = -1, j = -1, k = -1;  // witness indices; k used for triangle violations
  std::string describe() const {
    std::string s = to_string(kind);
    s += " at (" + std::to_string(i) + "," + std::to_string(j);
    if (k >= 0) s += "," + std::to_string(k);
    s += ")";
    return s;
  }
};

// Finite metric space as a validated dense matrix. Immutable after
// construction; shared freely across threads.
template <class S>
class FiniteMetricSpace {
 public:
  using scalar_type = S;

  FiniteMetricSpace() = default;
  FiniteMetricSpace(int n, std::vector<S> dist, std::vector<std::string> labels = {})
      : n_(n), dist_(std::move(dist)), labels_(std::move(labels)) {}

  int size() const { return n_; }
  const S& dist(int i, int j) const { return dist_[static_cast<size_t>(i) * n_ + j]; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::string label(int i) const {
    return labels_.empty() ? std::to_string(i) : labels_[static_cast<size_t>(i)];
  }

 private:
  int n_ = 0;
  std::vector<S> dist_;
  std::vector<std::string> labels_;
};

template <class S>
struct MetricValidation {
  std::optional<FiniteMetricSpace<S>> space;
  std::vector<MetricIssue> issues;
  bool ok() const { return space.has_value(); }
};

// Checks the three metric axioms and returns either the space or the violated
// axioms with witness triples. The triangle scan is O(n^3); above
// `full_triangle_limit` points it switches to a seeded sample (the exact lane
// only ever builds dense spaces well below the limit).
template <class S>
MetricValidation<S> validate_metric(int n, std::vector<S> dist,
                                    std::vector<std::string> labels = {},
                                    typename scalar_policy<S>::type::type tol = {},
                                    int full_triangle_limit = 512) {
  using P = typename scalar_policy<S>::type;
  MetricValidation<S> out;
  if (n < 0 || dist.size() != static_cast<size_t>(n) * static_cast<size_t>(n)) {
    out.issues.push_back({MetricViolation::NotSquare, -1, -1, -1});
    return out;
  }
  auto at = [&](int i, int j) -> const S& { return dist[static_cast<size_t>(i) * n + j]; };
  for (int i = 0; i < n && out.issues.size() < 32; ++i) {
    if (!P::is_zero(at(i, i), tol)) out.issues.push_back({MetricViolation::NonzeroDiagonal, i, i, -1});
    for (int j = i + 1; j < n && out.issues.size() < 32; ++j) {
      if (at(i, j) < S{}) out.issues.push_back({MetricViolation::NegativeEntry, i, j, -1});
      if (!P::eq(at(i, j), at(j, i), tol)) out.issues.push_back({MetricViolation::Asymmetry, i, j, -1});
    }
  }
  if (out.issues.empty()) {
    if (n <= full_triangle_limit) {
      for (int i = 0; i < n && out.issues.empty(); ++i)
        for (int j = 0; j < n && out.issues.empty(); ++j) {
          if (j == i) continue;
          for (int k = 0; k < n; ++k) {
            if (at(i, k) > at(i, j) + at(j, k) + (P::exact ? S{} : S(tol))) {
              out.issues.push_back({MetricViolation::Triangle, i, j, k});
              break;
            }
          }
        }
    } else {
      // deterministic sample: stride the middle index
      int stride = n / 257 + 1;
      for (int i = 0; i < n && out.issues.empty(); ++i)
        for (int j = i % stride; j < n && out.issues.empty(); j += stride)
          for (int k = 0; k < n; ++k)
            if (at(i, k) > at(i, j) + at(j, k) + (P::exact ? S{} : S(tol))) {
              out.issues.push_back({MetricViolation::Triangle, i, j, k});
              break;
            }
    }
  }
  if (out.issues.empty()) out.space = FiniteMetricSpace<S>(n, std::move(dist), std::move(labels));
  return out;
}

}  // namespace mconv
