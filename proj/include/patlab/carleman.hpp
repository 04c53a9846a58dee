#pragma once

#include <functional>
#include <optional>

#include "patlab/geometry.hpp"

namespace patlab {

struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  double trace() const { return xx + yy; }
  double min_eigenvalue() const {
    const double m = 0.5 * (xx + yy);
    const double d = std::hypot(0.5 * (xx - yy), xy);
    return m - d;
  }
};

/// The weight l. Either l = scale |x - x0|^2 / 2 + shift with exact
/// derivatives, or grid samples differentiated by central differences (only
/// grid nodes can then be evaluated).
class ConvexWeight {
 public:
  static ConvexWeight quadratic(Vec2 x0, double scale = 1.0, double shift = 0.0);
  static ConvexWeight sampled(ScalarField values);

  bool is_quadratic() const { return !samples_.has_value(); }
  Vec2 x0() const { return x0_; }

  double value(Vec2 p) const;
  Vec2 gradient(Vec2 p) const;
  Sym2 hessian(Vec2 p) const;
  /// Euclidean Laplacian and its gradient.
  double laplacian(Vec2 p) const;
  Vec2 laplacian_gradient(Vec2 p) const;

  /// The same at grid node k (any kind of weight).
  double value_at(const Grid2D& g, std::size_t k) const;
  Vec2 gradient_at(const Grid2D& g, std::size_t k) const;
  Sym2 hessian_at(const Grid2D& g, std::size_t k) const;
  double laplacian_at(const Grid2D& g, std::size_t k) const;
  Vec2 laplacian_gradient_at(const Grid2D& g, std::size_t k) const;

  ConvexWeight shifted(double delta) const;
  ConvexWeight scaled(double factor) const;

 private:
  ConvexWeight() = default;
  Vec2 x0_;
  double scale_ = 1.0;
  double shift_ = 0.0;
  std::optional<ScalarField> samples_;
};

struct CarlemanConstants {
  double rho = 0.0;
  double r = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  double B_ell = 0.0;
  double beta_ell = 0.0;
  double C_F = 0.0;
  double tau = 0.0;
  double T_min = 0.0;
};

/// Margin turning grid minima into strict bounds.
inline constexpr double kConvexitySafety = 0.99;

/// 0.99 min over M of the smallest eigenvalue of the g-Hessian of l
/// relative to g = c^-2 dx^2. M is sampled at the interior nodes and the
/// boundary samples. Throws HypothesisError when the result is not positive.
double metric_hessian_bound(const ConvexWeight& ell, const SpeedField& c, const DomainMask& mask);

/// 0.99 min over M of |grad l|_g = c |dl|. Throws HypothesisError when l has
/// a critical point in M.
double gradient_bound(const ConvexWeight& ell, const SpeedField& c, const DomainMask& mask);

/// max over M of |grad_g (c^2 Lap l)|_g = c |d(c^2 Lap l)|.
double weighted_laplacian_gradient_max(const ConvexWeight& ell, const SpeedField& c, const DomainMask& mask);

CarlemanConstants compute_constants(const ConvexWeight& ell, const SpeedField& c, const DomainMask& mask,
                                    double C_F);

/// tau = max(3 / rho, C1 / (2 rho r^2), 1).
double carleman_tau(double rho, double r, double C1);
/// 2 C_F (2 C2^2 tau + C3) exp((B - beta) tau) tau.
double observability_threshold(const CarlemanConstants& k);

struct FriedrichsEstimate {
  double C_F = 0.0;       // max(1, 1.05 / lambda_min)
  double raw = 0.0;       // 1 / lambda_min
  double lambda_min = 0.0;
  int iterations = 0;
};

/// Smallest generalised eigenvalue of (int |grad phi|^2 dm + int_dM phi^2 dn,
/// int phi^2 dm) on bilinear elements over the cells meeting M, by inverse
/// power iteration to relative 1e-8.
FriedrichsEstimate friedrichs_estimate(const SpeedField& c, const DomainMask& mask);
double friedrichs_constant(const SpeedField& c, const DomainMask& mask);

/// Space-time test function with its exact value only; every derivative in
/// the check is taken numerically.
using SpaceTimeFunction = std::function<double(double t, Vec2 x)>;

/// (1 + 0.3 x - 0.2 y + 0.5 t x) exp(-|x - a|^2 / (2 s^2) - (t - t0)^2 / (2 s^2)).
SpaceTimeFunction synthetic_wave(Vec2 a = {0.1, -0.05}, double s = 0.35, double t0 = 0.5);

struct CarlemanCheckSample {
  ScalarField residual;  // LHS - RHS at the middle time level
  ScalarField theta;     // the field called vartheta, same level
  ScalarField Y_norm;    // |Y|_g, same level
  double min_residual = 0.0;
  double violating_fraction = 0.0;  // residual < -delta
  long n_points = 0;
  long n_violations = 0;
  double max_delta = 0.0;
  double C1 = 0.0;
};

struct CarlemanCheckGrid {
  int n_steps = 256;
  double duration = 1.0;
};

/// Evaluates both sides of the pointwise Carleman inequality at every
/// interior node of M and every time level, with nested central differences
/// of stride 1; the discretisation error is bounded by comparison with
/// stride 2 (Richardson) plus a round-off floor. Throws HypothesisError when
/// tau <= 0 or rho <= 0.
CarlemanCheckSample pointwise_carleman_check(const SpaceTimeFunction& u, const ConvexWeight& ell,
                                             const SpeedField& c, const DomainMask& mask, double tau,
                                             double rho, const CarlemanCheckGrid& grid = {});

}  // namespace patlab
