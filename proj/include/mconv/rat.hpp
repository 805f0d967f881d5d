#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <stdexcept>
#include <string>

namespace mconv {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline Int num(const Rat& r) { return boost::multiprecision::numerator(r); }
inline Int den(const Rat& r) { return boost::multiprecision::denominator(r); }

inline Rat rat_pow(const Rat& base, unsigned exp) {
  Rat result = 1;
  Rat b = base;
  unsigned e = exp;
  while (e > 0) {
    if (e & 1u) result *= b;
    b *= b;
    e >>= 1u;
  }
  return result;
}

// 2^e for e possibly negative.
inline Rat pow2(int e) {
  if (e >= 0) return Rat(Int(1) << e, 1);
  return Rat(1, Int(1) << (-e));
}

inline bool is_dyadic(const Rat& r) {
  Int d = den(r);
  return (d & (d - 1)) == 0;
}

// Canonical text form "p/q" (or "p" when q == 1); parses both plus plain
// decimals like "0.25". Used by every file format so artifacts stay diffable.
inline std::string rat_to_string(const Rat& r) {
  if (den(r) == 1) return num(r).str();
  return num(r).str() + "/" + den(r).str();
}

inline std::optional<Rat> rat_from_string(const std::string& s) {
  if (s.empty()) return std::nullopt;
  auto slash = s.find('/');
  try {
    if (slash != std::string::npos) {
      Int n(s.substr(0, slash));
      Int d(s.substr(slash + 1));
      if (d == 0) return std::nullopt;
      return Rat(n, d);
    }
    auto dot = s.find('.');
    if (dot != std::string::npos) {
      std::string whole = s.substr(0, dot);
      std::string frac = s.substr(dot + 1);
      if (frac.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
      bool neg = !whole.empty() && whole[0] == '-';
      if (whole == "-" || whole.empty()) whole = neg ? "-0" : "0";
      Int w(whole);
      Int scale = 1;
      for (size_t i = 0; i < frac.size(); ++i) scale *= 10;
      Int f = frac.empty() ? Int(0) : Int(frac);
      Rat r = Rat(w) + (neg ? -Rat(f, scale) : Rat(f, scale));
      return r;
    }
    return Rat(Int(s));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline Rat rat_from_string_or_throw(const std::string& s) {
  auto r = rat_from_string(s);
  if (!r) throw std::invalid_argument("cannot parse rational: '" + s + "'");
  return *r;
}

// floor(log2(r)) for r > 0.
inline int floor_log2(const Rat& r) {
  if (r <= 0) throw std::domain_error("floor_log2 needs a positive argument");
  Int n = num(r), d = den(r);
  long nb = static_cast<long>(boost::multiprecision::msb(n));
  long db = static_cast<long>(boost::multiprecision::msb(d));
  long e = nb - db;
  // msb gives floor(log2) for integers; fix up the off-by-one.
  if ((n << (e < 0 ? std::size_t(-e) : 0)) < (d << (e > 0 ? std::size_t(e) : 0))) --e;
  return static_cast<int>(e);
}

// smallest integer k with 2^k > r (r > 0); the scale rule of the plan builder.
inline int smallest_pow2_exceeding(const Rat& r) {
  int k = floor_log2(r);
  while (pow2(k) <= r) ++k;
  return k;
}

// smallest integer g with 2^-g <= r (r > 0).
inline int smallest_neg_pow2_below(const Rat& r) {
  int g = -floor_log2(r);
  while (pow2(-g) > r) ++g;
  while (g > 0 && pow2(-(g - 1)) <= r) --g;
  return g;
}

inline double rat_to_double(const Rat& r) { return r.template convert_to<double>(); }

}  // namespace mconv
