#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "patlab/geometry.hpp"

namespace patlab {

/// Four-node bilinear weights for one off-grid point.
struct BilinearStencil {
  std::array<std::size_t, 4> nodes{};
  std::array<double, 4> weights{};

  double apply(std::span<const double> v) const {
    return weights[0] * v[nodes[0]] + weights[1] * v[nodes[1]] + weights[2] * v[nodes[2]] +
           weights[3] * v[nodes[3]];
  }
};

/// Sixteen-node Catmull-Rom (Keys, a = -1/2) stencil. The interpolant is C1
/// and third-order accurate; its gradient is second-order accurate.
struct CubicStencil {
  std::size_t base = 0;  // node (i - 1, j - 1)
  std::size_t stride = 0;
  std::array<double, 4> wx{}, wy{}, dwx{}, dwy{};

  double value(std::span<const double> v) const;
  Vec2 gradient(std::span<const double> v) const;
};

/// Throws GeometryError when p is too close to the grid edge.
BilinearStencil bilinear_stencil(const Grid2D& grid, Vec2 p);
CubicStencil cubic_stencil(const Grid2D& grid, Vec2 p);

double interpolate_bilinear(const ScalarField& f, Vec2 p);
double interpolate_cubic(const ScalarField& f, Vec2 p);
Vec2 gradient_cubic(const ScalarField& f, Vec2 p);

/// Speed evaluation at arbitrary points: exact when the field carries an
/// analytic model, Catmull-Rom otherwise.
class SpeedSampler {
 public:
  explicit SpeedSampler(const SpeedField& c, bool prefer_model = true);

  double value(Vec2 p) const;
  Vec2 gradient(Vec2 p) const;
  bool analytic() const { return model_ != nullptr; }
  const Grid2D& grid() const { return field_->grid(); }

 private:
  const SpeedField* field_;
  const SpeedModel* model_;
};

}  // namespace patlab
