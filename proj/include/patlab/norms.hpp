#pragma once

#include "patlab/geometry.hpp"

namespace patlab {

/// Discrete H1(M) norm: sqrt(sum_k a_k (u^2 + |grad_h u|^2) h^2) over the
/// mask's weighted nodes, a_k the exact area fraction of node k's dual cell
/// inside M. Central differences where both neighbours are in the domain,
/// one-sided otherwise.
double h1_norm(const ScalarField& field, const DomainMask& mask);

/// Same quadrature, value term only.
double l2_norm(const ScalarField& field, const DomainMask& mask);

/// H^s(K) norm via Fourier multipliers. K's bounding box is embedded in a
/// periodic box of twice its side, transformed, and weighted by
/// (1 + |xi|^2)^s; normalised so that s = 0 is the discrete L2 norm
/// sqrt(sum u^2 h^2). s must be 0, 1, 2 or 3.
double hs_norm_compact(const ScalarField& field, const CompactSupport& support, int s);

/// Discrete H1((0,T) x dM) norm of a boundary trace: value, time derivative
/// and arclength derivative (central differences, periodic in angle,
/// one-sided at the time ends), trapezoidal weights in time.
double trace_h1_norm(const BoundaryTrace& trace);

/// L2((0,T) x dM) norm with the same quadrature.
double trace_l2_norm(const BoundaryTrace& trace);

}  // namespace patlab
