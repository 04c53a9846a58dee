#include "patlab/interpolation.hpp"

#include <cmath>

namespace patlab {

namespace {

void catmull_rom_weights(double t, std::array<double, 4>& w, std::array<double, 4>& dw) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
  w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
  w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
  dw[0] = 0.5 * (-3.0 * t2 + 4.0 * t - 1.0);
  dw[1] = 0.5 * (9.0 * t2 - 10.0 * t);
  dw[2] = 0.5 * (-9.0 * t2 + 8.0 * t + 1.0);
  dw[3] = 0.5 * (3.0 * t2 - 2.0 * t);
}

void locate(const Grid2D& grid, Vec2 p, int margin, int& i, int& j, double& tx, double& ty) {
  const double u = (p.x - grid.origin().x) / grid.h();
  const double v = (p.y - grid.origin().y) / grid.h();
  i = static_cast<int>(std::floor(u));
  j = static_cast<int>(std::floor(v));
  if (!(std::isfinite(u) && std::isfinite(v)) || i < margin || j < margin ||
      i + 1 + margin > grid.nx() || j + 1 + margin > grid.ny())
    throw GeometryError("interpolation point outside the usable grid region");
  tx = u - i;
  ty = v - j;
}

}  // namespace

double CubicStencil::value(std::span<const double> v) const {
  double s = 0.0;
  for (int b = 0; b < 4; ++b) {
    const std::size_t row = base + static_cast<std::size_t>(b) * stride;
    double r = 0.0;
    for (int a = 0; a < 4; ++a) r += wx[a] * v[row + static_cast<std::size_t>(a)];
    s += wy[b] * r;
  }
  return s;
}

Vec2 CubicStencil::gradient(std::span<const double> v) const {
  Vec2 g;
  for (int b = 0; b < 4; ++b) {
    const std::size_t row = base + static_cast<std::size_t>(b) * stride;
    double rx = 0.0;
    double r = 0.0;
    for (int a = 0; a < 4; ++a) {
      const double val = v[row + static_cast<std::size_t>(a)];
      rx += dwx[a] * val;
      r += wx[a] * val;
    }
    g.x += wy[b] * rx;
    g.y += dwy[b] * r;
  }
  return g;
}

BilinearStencil bilinear_stencil(const Grid2D& grid, Vec2 p) {
  int i, j;
  double tx, ty;
  locate(grid, p, 0, i, j, tx, ty);
  BilinearStencil s;
  s.nodes = {grid.index(i, j), grid.index(i + 1, j), grid.index(i, j + 1), grid.index(i + 1, j + 1)};
  s.weights = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  return s;
}

CubicStencil cubic_stencil(const Grid2D& grid, Vec2 p) {
  int i, j;
  double tx, ty;
  locate(grid, p, 1, i, j, tx, ty);
  CubicStencil s;
  s.base = grid.index(i - 1, j - 1);
  s.stride = static_cast<std::size_t>(grid.width());
  catmull_rom_weights(tx, s.wx, s.dwx);
  catmull_rom_weights(ty, s.wy, s.dwy);
  for (auto& w : s.dwx) w /= grid.h();
  for (auto& w : s.dwy) w /= grid.h();
  return s;
}

double interpolate_bilinear(const ScalarField& f, Vec2 p) {
  return bilinear_stencil(f.grid(), p).apply(f.values());
}

double interpolate_cubic(const ScalarField& f, Vec2 p) {
  return cubic_stencil(f.grid(), p).value(f.values());
}

Vec2 gradient_cubic(const ScalarField& f, Vec2 p) {
  return cubic_stencil(f.grid(), p).gradient(f.values());
}

SpeedSampler::SpeedSampler(const SpeedField& c, bool prefer_model)
    : field_(&c), model_(prefer_model ? c.model() : nullptr) {}

double SpeedSampler::value(Vec2 p) const {
  if (model_) return model_->value(p);
  return interpolate_cubic(field_->values(), p);
}

Vec2 SpeedSampler::gradient(Vec2 p) const {
  if (model_) return model_->gradient(p);
  return gradient_cubic(field_->values(), p);
}

}  // namespace patlab
