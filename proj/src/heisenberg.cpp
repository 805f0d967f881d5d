#include "mconv/heisenberg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "mconv/laakso.hpp"
#include "mconv/refresh_chain.hpp"

namespace mconv {

HPoint group_mul(const HPoint& a, const HPoint& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z + (a.x * b.y - a.y * b.x) / 2};
}

HPoint group_inv(const HPoint& a) { return {-a.x, -a.y, -a.z}; }

HPoint dilation(const HPoint& a, double lambda) {
  return {lambda * a.x, lambda * a.y, lambda * lambda * a.z};
}

std::optional<HPoint> geodesic_point(const CCGeodesic& g, double s) {
  if (s < 0 || s > g.duration + 1e-12) return std::nullopt;
  HPoint rel;
  if (std::fabs(g.curvature) < 1e-15) {
    rel = {s * std::cos(g.direction), s * std::sin(g.direction), 0};
  } else {
    double k = g.curvature, th = k * s + g.direction;
    rel.x = (std::sin(th) - std::sin(g.direction)) / k;
    rel.y = (std::cos(g.direction) - std::cos(th)) / k;
    rel.z = (k * s - std::sin(k * s)) / (2 * k * k);
  }
  return group_mul(g.start, rel);
}

namespace {

// d(0, (r, 0, z)) with r = planar radius: solve the swept angle v of the
// spiral hitting the target. z = r^2 (v - sin v) / (8 sin^2(v/2)) is strictly
// increasing on (0, 2pi); d = v r / (2 sin(v/2)).
double vertical_profile(double v, double r2) {
  double sh = std::sin(v / 2);
  return r2 * (v - std::sin(v)) / (8 * sh * sh);
}

}  // namespace

CCDistance cc_distance(const HPoint& a, const HPoint& b, double tol) {
  HPoint c = group_mul(group_inv(a), b);
  double r = std::hypot(c.x, c.y);
  double az = std::fabs(c.z);
  CCDistance out;
  double scale = std::max({1.0, r, std::sqrt(az)});
  if (az <= 1e-18 * scale * scale) {
    out.d = r;
    return out;
  }
  if (r <= 1e-18 * scale) {
    out.d = 2 * std::sqrt(M_PI * az);
    out.swept_angle = 2 * M_PI;
    return out;
  }
  double lo = 1e-12, hi = 2 * M_PI - 1e-12;
  double r2 = r * r;
  // the profile is increasing; when the root sits beyond the numeric bracket
  // the planar part is negligible and the vertical limit applies
  if (vertical_profile(hi, r2) < az) {
    out.d = 2 * std::sqrt(M_PI * az);
    out.swept_angle = 2 * M_PI;
    return out;
  }
  auto dist_of = [&](double v) { return v * r / (2 * std::sin(v / 2)); };
  int it = 0;
  while (dist_of(hi) - dist_of(lo) > tol && it++ < 500) {
    double mid = (lo + hi) / 2;
    if (vertical_profile(mid, r2) < az)
      lo = mid;
    else
      hi = mid;
  }
  out.swept_angle = (lo + hi) / 2;
  out.d = dist_of(out.swept_angle);
  out.converged = it < 500;
  return out;
}

namespace {

// Length minimization over planar polygons with free interior vertices; the
// planar endpoints are pinned, and the single lifted-area constraint
// A(p) = target.z is handled by an augmented Lagrangian. The lift of a
// polygon is exact (sum of segment cross terms), so the only systematic error
// is the inscribed-polygon length deficit, which is O(1/M^2).
struct PathRun {
  double length = 1e18;
  double area_err = 1e18;
};

PathRun path_opt_run(const HPoint& target, int m, double bulge, int rounds, int iters) {
  double tx = target.x, ty = target.y, tz = target.z;
  double r = std::hypot(tx, ty);
  double scale = std::max({1.0, r, std::sqrt(std::fabs(tz))});
  std::vector<double> x(static_cast<size_t>(m) + 1), y(static_cast<size_t>(m) + 1);
  if (r < 1e-14 * scale) {
    // closed loop: circle through the origin with the right signed area
    double R = std::sqrt(std::fabs(tz) / M_PI);
    double sgn = tz >= 0 ? 1.0 : -1.0;
    for (int i = 0; i <= m; ++i) {
      double a = 2 * M_PI * i / m;
      x[static_cast<size_t>(i)] = R * std::sin(a) * sgn;
      y[static_cast<size_t>(i)] = R * (1 - std::cos(a));
    }
    x[0] = y[0] = x[static_cast<size_t>(m)] = y[static_cast<size_t>(m)] = 0;
  } else {
    double nxv = -ty / r, nyv = tx / r;
    for (int i = 0; i <= m; ++i) {
      double t = static_cast<double>(i) / m;
      x[static_cast<size_t>(i)] = tx * t + bulge * std::sin(M_PI * t) * nxv;
      y[static_cast<size_t>(i)] = ty * t + bulge * std::sin(M_PI * t) * nyv;
    }
  }
  auto area = [&]() {
    double A = 0;
    for (int i = 0; i < m; ++i)
      A += (x[static_cast<size_t>(i)] * y[static_cast<size_t>(i) + 1] -
            y[static_cast<size_t>(i)] * x[static_cast<size_t>(i) + 1]) /
           2;
    return A;
  };
  auto length = [&]() {
    double L = 0;
    for (int i = 0; i < m; ++i)
      L += std::hypot(x[static_cast<size_t>(i) + 1] - x[static_cast<size_t>(i)],
                      y[static_cast<size_t>(i) + 1] - y[static_cast<size_t>(i)]);
    return L;
  };
  double lam = 0, mu = 16.0;
  std::vector<double> mx(static_cast<size_t>(m) + 1, 0), vx(static_cast<size_t>(m) + 1, 0);
  std::vector<double> my(static_cast<size_t>(m) + 1, 0), vy(static_cast<size_t>(m) + 1, 0);
  double b1 = 0.9, b2 = 0.999, eps = 1e-14;
  for (int outer = 0; outer < rounds; ++outer) {
    double lr = 0.05 * scale / std::pow(1.7, std::min(outer, 30));
    for (int it = 0; it < iters; ++it) {
      double gA = lam + mu * (area() - tz);
      for (int i = 1; i < m; ++i) {
        size_t si = static_cast<size_t>(i);
        double ax = x[si] - x[si - 1], ay = y[si] - y[si - 1];
        double bx = x[si + 1] - x[si], by = y[si + 1] - y[si];
        double na = std::hypot(ax, ay) + 1e-18, nb = std::hypot(bx, by) + 1e-18;
        double gx = ax / na - bx / nb + gA * (y[si + 1] - y[si - 1]) / 2;
        double gy = ay / na - by / nb + gA * (x[si - 1] - x[si + 1]) / 2;
        mx[si] = b1 * mx[si] + (1 - b1) * gx;
        vx[si] = b2 * vx[si] + (1 - b2) * gx * gx;
        my[si] = b1 * my[si] + (1 - b1) * gy;
        vy[si] = b2 * vy[si] + (1 - b2) * gy * gy;
        x[si] -= lr * mx[si] / (std::sqrt(vx[si]) + eps);
        y[si] -= lr * my[si] / (std::sqrt(vy[si]) + eps);
      }
    }
    double E = area() - tz;
    lam += mu * E;
    if (std::fabs(E) > 1e-11 * scale * scale) mu *= 1.8;
  }
  return {length(), std::fabs(area() - tz)};
}

double path_opt_best(const HPoint& target, int m, int rounds, int iters) {
  double r = std::hypot(target.x, target.y);
  double scale = std::max({1.0, r, std::sqrt(std::fabs(target.z))});
  double best = 1e18;
  std::vector<double> bulges;
  if (r < 1e-14 * scale) {
    bulges.push_back(0);
  } else {
    double sgn = target.z >= 0 ? 1.0 : -1.0;
    bulges = {0, sgn * r / 2, sgn * r, sgn * 2 * r};
  }
  for (double b : bulges) {
    PathRun run = path_opt_run(target, m, b, rounds, iters);
    if (run.area_err <= 1e-7 * scale * scale) best = std::min(best, run.length);
  }
  return best;
}

}  // namespace

PathOracleResult cc_distance_path_oracle(const HPoint& target, int segments) {
  int rounds = 34, iters = 1800;
  double d1 = path_opt_best(target, segments, rounds, iters);
  double d2 = path_opt_best(target, 2 * segments, rounds, iters);
  PathOracleResult out;
  out.d = (4 * d2 - d1) / 3;  // inscribed-polygon error is O(1/M^2)
  out.residual = std::fabs(d2 - d1);
  return out;
}

SampledFamily vertical_family(double z, int count, int samples_per_member, double tol) {
  SampledFamily out;
  double az = std::fabs(z);
  double kappa = (z >= 0 ? 1.0 : -1.0) * std::sqrt(M_PI / az);
  double duration = 2 * std::sqrt(M_PI * az);
  out.grid = duration / samples_per_member;

  std::vector<HPoint> points;
  std::vector<std::vector<int>> member_points(static_cast<size_t>(count));
  auto add_point = [&](const HPoint& p) {
    for (size_t i = 0; i < points.size(); ++i)
      if (std::fabs(points[i].x - p.x) < 1e-14 && std::fabs(points[i].y - p.y) < 1e-14 &&
          std::fabs(points[i].z - p.z) < 1e-14)
        return static_cast<int>(i);
    points.push_back(p);
    return static_cast<int>(points.size() - 1);
  };
  for (int j = 0; j < count; ++j) {
    CCGeodesic g{{0, 0, 0}, 2 * M_PI * j / count, kappa, duration};
    for (int i = 0; i <= samples_per_member; ++i) {
      double s = duration * i / samples_per_member;
      auto p = geodesic_point(g, s);
      member_points[static_cast<size_t>(j)].push_back(add_point(*p));
    }
  }
  int n = static_cast<int>(points.size());
  std::vector<double> dist(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double d = cc_distance(points[static_cast<size_t>(i)], points[static_cast<size_t>(j)], tol).d;
      dist[static_cast<size_t>(i) * n + j] = d;
      dist[static_cast<size_t>(j) * n + i] = d;
    }
  out.space = std::make_shared<FiniteMetricSpace<double>>(n, std::move(dist));
  out.family.space = out.space.get();
  for (int j = 0; j < count; ++j) {
    ParamGeodesic<FiniteMetricSpace<double>> g;
    g.space = out.space.get();
    g.length = duration;
    for (int i = 0; i <= samples_per_member; ++i)
      g.breakpoints.push_back({out.grid * i, member_points[static_cast<size_t>(j)][static_cast<size_t>(i)]});
    out.family.members.push_back(std::move(g));
  }
  return out;
}

std::optional<HeisenbergExperiment> heisenberg_ratio_experiment(int h, double p,
                                                                std::optional<int> phi_opt,
                                                                std::string* err) {
  auto rc = laakso_canonical_chain(h, phi_opt, err);
  if (!rc) return std::nullopt;
  if (rc->phi > 9) {
    if (err) *err = "experiment guard: phi too large for the sampled metric";
    return std::nullopt;
  }
  HeisenbergExperiment out;
  out.h = h;
  out.phi = rc->phi;

  long long steps = rc->active_steps();
  int labels = rc->labels();
  // lifted odd-tent curves: x = s; y carries one zero-mean bump per gadget
  // middle (up then down), signed by the branch bit, with amplitude
  // (1/2) 32^-l at level l. Zero mean makes the lift difference between
  // branches cancel exactly at every gadget closing (the bump's breakpoints
  // sit on the step grid), so crossing transitions map to common points.
  auto tent_y = [&](int label, long long t) {
    double s = static_cast<double>(t) / static_cast<double>(steps);
    double y = 0;
    Rat sr = Rat(t) * pow2(-rc->phi);
    for (int level = 1; level <= h; ++level) {
      auto mid = laakso_middle(sr, level);
      if (!mid) continue;
      double pp = rat_to_double(mid->p), qq = rat_to_double(mid->q);
      double c = (pp + qq) / 2, w = (qq - pp) / 2;
      double u = (s - c) / w;  // in (-1, 1) across the middle
      double bump;             // odd, zero-mean: 0 -> 1 -> 0 -> -1 -> 0
      if (u < -0.5)
        bump = 2 * (u + 1);
      else if (u < 0.5)
        bump = -2 * u;
      else
        bump = 2 * (u - 1);
      double amp = 0.5 * std::pow(32.0, -level);
      int bit = (label >> (h - level)) & 1;
      y += (bit ? 1.0 : -1.0) * amp * bump;
    }
    return y;
  };

  // per-member lifted curves sampled on the step grid
  std::vector<std::vector<HPoint>> curve(static_cast<size_t>(labels));
  for (int label = 0; label < labels; ++label) {
    auto& c = curve[static_cast<size_t>(label)];
    c.resize(static_cast<size_t>(steps) + 1);
    HPoint cur{0, 0, 0};
    c[0] = cur;
    double prev_y = 0;
    for (long long t = 1; t <= steps; ++t) {
      double x = static_cast<double>(t) / static_cast<double>(steps);
      double y = tent_y(label, t);
      double dx = 1.0 / static_cast<double>(steps), dy = y - prev_y;
      cur.z += (cur.x * dy - cur.y * dx) / 2;
      cur.x = x;
      cur.y = y;
      prev_y = y;
      c[static_cast<size_t>(t)] = cur;
    }
  }

  // sampled metric space over the distinct images
  std::vector<HPoint> points;
  std::vector<std::vector<int>> pid(static_cast<size_t>(labels));
  std::map<std::tuple<double, double, double>, int> seen;
  for (int label = 0; label < labels; ++label) {
    pid[static_cast<size_t>(label)].resize(static_cast<size_t>(steps) + 1);
    for (long long t = 0; t <= steps; ++t) {
      const HPoint& q = curve[static_cast<size_t>(label)][static_cast<size_t>(t)];
      auto key = std::make_tuple(q.x, q.y, q.z);
      auto it = seen.find(key);
      int id;
      if (it == seen.end()) {
        id = static_cast<int>(points.size());
        points.push_back(q);
        seen.emplace(key, id);
      } else {
        id = it->second;
      }
      pid[static_cast<size_t>(label)][static_cast<size_t>(t)] = id;
    }
  }
  int n = static_cast<int>(points.size());
  std::vector<double> dist(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double d = cc_distance(points[static_cast<size_t>(i)], points[static_cast<size_t>(j)], 1e-10).d;
      dist[static_cast<size_t>(i) * n + j] = d;
      dist[static_cast<size_t>(j) * n + i] = d;
    }
  auto space = std::make_shared<FiniteMetricSpace<double>>(n, std::move(dist));

  // materialize the chain over (t, label) states with double kernels
  LaaksoSpace unused;
  TimedMarkovChain<FiniteMetricSpace<double>> chain;
  chain.space = space.get();
  chain.t_min = rc->t_min;
  chain.t_max = rc->t_max;
  int L = labels;
  auto idx = [&](long long t, int label) {
    return static_cast<int>((t - rc->t_min) * L + label);
  };
  long long total = (rc->t_max - rc->t_min + 1) * L;
  chain.state_names.resize(static_cast<size_t>(total));
  chain.point_map.resize(static_cast<size_t>(total));
  for (long long t = rc->t_min; t <= rc->t_max; ++t)
    for (int label = 0; label < L; ++label) {
      long long tc = std::clamp<long long>(t, 0, steps);
      chain.point_map[static_cast<size_t>(idx(t, label))] =
          pid[static_cast<size_t>(label)][static_cast<size_t>(tc)];
      chain.state_names[static_cast<size_t>(idx(t, label))] =
          "t=" + std::to_string(t) + ",g=" + std::to_string(label);
    }
  for (int label = 0; label < L; ++label)
    chain.init.push_back({idx(rc->t_min, label), 1.0 / L});
  std::map<long long, std::vector<const RefreshCrossing*>> by_step;
  for (const auto& c : rc->crossings) by_step[c.step].push_back(&c);
  for (long long t = rc->t_min; t < rc->t_max; ++t) {
    SparseKernel<double> k;
    auto it = by_step.find(t);
    for (int label = 0; label < L; ++label) {
      SparseKernel<double>::Row row;
      const RefreshCrossing* cr = nullptr;
      if (it != by_step.end())
        for (const auto* c : it->second)
          if (c->prefix < 0 || (label >> (h - c->depth)) == c->prefix) cr = c;
      if (!cr) {
        row.push_back({idx(t + 1, label), 1.0});
      } else {
        int block = 1 << (h - cr->depth);
        int base = (label >> (h - cr->depth)) << (h - cr->depth);
        for (int off = 0; off < block; ++off)
          row.push_back({idx(t + 1, base + off), 1.0 / block});
      }
      k.rows.push_back({idx(t, label), std::move(row)});
    }
    chain.kernels.push_back(std::move(k));
  }
  out.report = convexity_sides(chain, PExp<double>{p},
                               {.k_max = rc->recommended_k_max, .collect_terms = false});
  // keep the space alive through the report only; report carries values
  (void)unused;
  return out;
}

}  // namespace mconv
