#pragma once

#include <memory>
#include <span>

#include "patlab/geometry.hpp"

namespace patlab {

struct HarmonicOptions {
  double tolerance = 1e-14;  // relative residual
  int max_iterations = 20000;
};

struct TimeReversalOptions {
  double cfl_safety = 0.9;
  /// Start from zero instead of the harmonic extension of the final data.
  /// Baseline for comparisons only.
  bool zero_final_data = false;
  HarmonicOptions harmonic;
};

/// Discrete Dirichlet problem on M. Interior nodes use the Shortley-Weller
/// five-point stencil with the exact circle crossings as boundary points;
/// the values there come from periodic linear interpolation of the angle
/// samples. Nodes outside M that the stencil touches receive a linear
/// extrapolation through the boundary. Nodes outside the domain stay 0.
ScalarField harmonic_extension(std::span<const double> boundary_values, const DomainMask& mask,
                               const HarmonicOptions& options = {});

/// Backward wave solve on M driven by Dirichlet data h, started at t = T
/// from the harmonic extension of h(T) with zero velocity. Returns v(0) on
/// the domain nodes.
ScalarField time_reverse(const BoundaryTrace& h, const SpeedField& c0, const DomainMask& mask,
                         const TimeReversalOptions& options = {});

/// Reusable form of time_reverse: the stencil tables, boundary coupling and
/// Laplace matrix are built once per (c0, mask).
class TimeReversal {
 public:
  TimeReversal(const SpeedField& c0, const DomainMask& mask, const TimeReversalOptions& options = {});
  ~TimeReversal();
  TimeReversal(TimeReversal&&) noexcept;
  TimeReversal& operator=(TimeReversal&&) noexcept;

  ScalarField apply(const BoundaryTrace& h) const;
  ScalarField harmonic(std::span<const double> boundary_values) const;

  const DomainMask& mask() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace patlab
