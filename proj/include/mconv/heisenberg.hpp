#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "mconv/convexity.hpp"
#include "mconv/geodesic.hpp"
#include "mconv/metric.hpp"

namespace mconv {

// Heisenberg group on R^3, z-increment = half the signed swept area:
//   (a.x, a.y, a.z) * (b.x, b.y, b.z)
//     = (a.x+b.x, a.y+b.y, a.z+b.z + (a.x*b.y - a.y*b.x)/2).
// Horizontal frame X = d/dx - (y/2) d/dz, Y = d/dy + (x/2) d/dz. All
// closed-form expectations in tests are derived under this convention and
// cross-checked against the path-optimization oracle.

struct HPoint {
  double x = 0, y = 0, z = 0;
};

HPoint group_mul(const HPoint& a, const HPoint& b);
HPoint group_inv(const HPoint& a);
HPoint dilation(const HPoint& a, double lambda);

// Unit-speed geodesic: planar circular arc of curvature kappa (0 = straight
// line) starting at `start` with initial heading `direction`; z accrues the
// swept area per the horizontal constraint.
struct CCGeodesic {
  HPoint start;
  double direction = 0;
  double curvature = 0;
  double duration = 0;
};

std::optional<HPoint> geodesic_point(const CCGeodesic& g, double s);

struct CCDistance {
  double d = 0;
  bool converged = true;
  double swept_angle = 0;  // solved arc angle, 0 for straight lines
};

// Carnot-Caratheodory distance by reduction to d(0, a^-1 b) and
// one-dimensional root finding in the swept angle of the spiral family.
CCDistance cc_distance(const HPoint& a, const HPoint& b, double tol = 1e-9);

// Independent oracle: augmented-Lagrangian minimization of polygonal
// horizontal path length with the endpoint as constraint, Richardson
// extrapolated across two segment counts.
struct PathOracleResult {
  double d = 0;
  double residual = 0;  // endpoint constraint violation of the best run
};
PathOracleResult cc_distance_path_oracle(const HPoint& target, int segments = 192);

// `count` spiral geodesics from the origin to (0, 0, z) (rotations of one
// another), discretized into a sampled metric space.
struct SampledFamily {
  std::shared_ptr<FiniteMetricSpace<double>> space;
  GeodesicFamily<FiniteMetricSpace<double>> family;
  double grid = 0;
};
SampledFamily vertical_family(double z, int count, int samples_per_member = 16,
                              double tol = 1e-9);

// Laakso-shaped canonical chain mapped into a sampled Heisenberg point set
// through lifted tent curves (amplitudes shrink with depth, so the assignment
// is nowhere near bilipschitz). Sanity experiment only: ratios stay bounded
// where the Laakso target's grow.
struct HeisenbergExperiment {
  int h = 0;
  int phi = 0;
  ConvexityReport<double> report;
};
std::optional<HeisenbergExperiment> heisenberg_ratio_experiment(int h, double p,
                                                                std::optional<int> phi = {},
                                                                std::string* err = nullptr);

}  // namespace mconv
