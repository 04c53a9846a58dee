#pragma once

#include <vector>

#include "patlab/geometry.hpp"

namespace patlab {

/// Point of a null bicharacteristic of tau^2 - c^2 |xi|^2, projected to
/// (x, xi) and parametrised by travel time.
struct RayState {
  Vec2 x;
  Vec2 xi;
  double t = 0.0;
};

struct RayOptions {
  double dt = 0.005;
  double t_max = 0.0;  // 0: 20 R_M / c_min
  bool record_path = false;
};

struct RayResult {
  std::vector<RayState> path;  // only with record_path
  bool crossed = false;
  RayState exit;               // crossing state, or the last state when not crossed
  double max_hamiltonian_drift = 0.0;  // max |c^2 |xi|^2 - 1|
};

/// RK4 for x' = c^2 xi, xi' = -|xi|^2 c grad c from x0 in M (closed), xi0
/// rescaled to c(x0) |xi0| = 1. The first crossing of dM is located by
/// solving for the partial step that lands on the circle. A start on dM
/// heading outward or tangentially exits at t = 0.
RayResult trace_ray(Vec2 x0, Vec2 xi0, const SpeedField& c, const DomainMask& mask, const RayOptions& options = {});

/// First positive crossing time; HypothesisError when the ray is trapped
/// until t_max.
double exit_time(Vec2 x0, Vec2 xi0, const SpeedField& c, const DomainMask& mask, const RayOptions& options = {});

/// Chord length from x in the unit direction v to a circle of radius R
/// centred at the origin.
double chord_exit_time(Vec2 x, Vec2 v, double R);

/// n points of a sunflower spiral covering the disk K.
std::vector<Vec2> sample_disk(const CompactSupport& support, int n);

struct ExitTimeScan {
  double max_exit_time = 0.0;
  bool trapped = false;
  int n_rays = 0;
  Vec2 argmax_x;
  double argmax_angle = 0.0;
};

ExitTimeScan max_exit_time(const SpeedField& c, const DomainMask& mask, const CompactSupport& support, int n_x,
                           int n_dir, const RayOptions& options = {});

struct ExitRecord {
  Vec2 x0;
  double angle = 0.0;       // launch direction
  double exit_time = 0.0;
  Vec2 exit_point;
  double exit_angle = 0.0;  // angle between the exit velocity and the tangent of dM
  bool tangential = false;
  bool trapped = false;
};

inline constexpr double kTangencyAngle = 1e-3;

/// Exit record for one launch.
ExitRecord exit_record(Vec2 x0, double angle, const SpeedField& c, const DomainMask& mask,
                       const RayOptions& options = {});

struct TangencyScan {
  std::vector<ExitRecord> records;  // every sample, point-major
  std::vector<std::size_t> flagged;  // indices of tangential exits
};

TangencyScan tangency_scan(const CompactSupport& support, const SpeedField& c, const DomainMask& mask, int n_x,
                           int n_dir, const RayOptions& options = {});

/// For straight rays: the line through x0 along v is tangent to the circle
/// of radius R (impact parameter |x0 x v| equal to R within tol).
bool analytic_tangency(Vec2 x0, Vec2 v, double R, double tol = 1e-9);

struct ConvexityReport {
  std::vector<double> curvature;  // geodesic curvature of dM in g per sample
  double min_curvature = 0.0;
  bool formula_convex = false;
  bool probe_convex = false;
  int n_disagree = 0;    // samples where formula and probe differ
  int n_undecided = 0;   // |curvature| R below the decision threshold
  bool consistent() const { return n_disagree == 0; }
};

/// Geodesic curvature of the circle in g = c^-2 dx^2, kappa_g = c (1/R - d_nu log c),
/// compared at every sample with a probe ray launched along the tangent:
/// a convex boundary sends it outside M straight away.
ConvexityReport boundary_convexity_check(const SpeedField& c, const DomainMask& mask);

}  // namespace patlab
