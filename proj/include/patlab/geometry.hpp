#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "patlab/errors.hpp"

namespace patlab {

/// Spatial dimension. The conformal weight mu = c^(n-2) and the Riemannian
/// volume c^(-n) dx are written in terms of it; only n = 2 is supported.
inline constexpr int kSpaceDim = 2;

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  friend Vec2 operator+(Vec2 a, Vec2 b) { return a += b; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return a -= b; }
  friend Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Uniform node-centred grid. nx, ny count cells, so there are
/// (nx + 1) x (ny + 1) nodes; node (i, j) sits at origin + h (i, j).
class Grid2D {
 public:
  Grid2D(int nx, int ny, double h, Vec2 origin);

  /// Smallest square grid with a node at `center` covering
  /// [center - half_width, center + half_width]^2.
  static Grid2D centered(double half_width, double h, Vec2 center = {});

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int width() const { return nx_ + 1; }
  int height() const { return ny_ + 1; }
  double h() const { return h_; }
  Vec2 origin() const { return origin_; }
  Vec2 upper() const { return {origin_.x + nx_ * h_, origin_.y + ny_ * h_}; }
  std::size_t size() const {
    return static_cast<std::size_t>(width()) * static_cast<std::size_t>(height());
  }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(width()) +
           static_cast<std::size_t>(i);
  }
  int col(std::size_t k) const { return static_cast<int>(k % width()); }
  int row(std::size_t k) const { return static_cast<int>(k / width()); }
  Vec2 node(int i, int j) const { return {origin_.x + i * h_, origin_.y + j * h_}; }
  Vec2 node(std::size_t k) const { return node(col(k), row(k)); }

  /// Distance from p to the nearest edge of the grid box (negative outside).
  double distance_to_edge(Vec2 p) const;

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  int nx_;
  int ny_;
  double h_;
  Vec2 origin_;
};

/// Sampled real function on a Grid2D.
class ScalarField {
 public:
  explicit ScalarField(Grid2D grid, double fill = 0.0);
  ScalarField(Grid2D grid, std::vector<double> values);

  template <class F>
  static ScalarField sample(const Grid2D& grid, F&& f) {
    ScalarField out(grid);
    for (int j = 0; j < grid.height(); ++j)
      for (int i = 0; i < grid.width(); ++i) out(i, j) = f(grid.node(i, j));
    return out;
  }

  const Grid2D& grid() const { return grid_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }

  double max_abs() const;
  double min() const;
  double max() const;
  bool all_finite() const;

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);
  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
  friend ScalarField operator*(ScalarField a, double s) { return a *= s; }

 private:
  Grid2D grid_;
  std::vector<double> values_;
};

/// Throws PreconditionError unless `field` lives on `grid`.
void require_grid(const ScalarField& field, const Grid2D& grid, const char* what);

/// C-infinity bump exp(1 - 1/(1 - |x - center|^2 / radius^2)), equal to 1 at
/// the centre and identically 0 outside the open disk of the given radius.
double bump_profile(Vec2 x, Vec2 center, double radius);
Vec2 bump_gradient(Vec2 x, Vec2 center, double radius);

struct SpeedBump {
  Vec2 center;
  double radius = 0.0;
  double amplitude = 0.0;
};

/// Smooth radial step: amplitude * S((|x| - start) / width) with S a
/// C-infinity transition from 0 to 1.
struct RadialRamp {
  double start = 0.0;
  double width = 1.0;
  double amplitude = 0.0;
};

/// Analytic speed c(x) = background * (1 + sum_k a_k psi_k(x) + ramp(|x|)).
/// Kept alongside the sampled field so that ray tracing can use exact
/// gradients when the speed came from a closed-form description.
class SpeedModel {
 public:
  explicit SpeedModel(double background, std::vector<SpeedBump> bumps = {},
                      std::optional<RadialRamp> ramp = std::nullopt);

  double background() const { return background_; }
  const std::vector<SpeedBump>& bumps() const { return bumps_; }
  const std::optional<RadialRamp>& ramp() const { return ramp_; }

  double value(Vec2 x) const;
  Vec2 gradient(Vec2 x) const;

 private:
  double background_;
  std::vector<SpeedBump> bumps_;
  std::optional<RadialRamp> ramp_;
};

class DomainMask;
struct CompactSupport;

/// Strictly positive sampled speed.
class SpeedField {
 public:
  explicit SpeedField(ScalarField values, std::shared_ptr<const SpeedModel> model = nullptr);

  static SpeedField constant(const Grid2D& grid, double c);
  static SpeedField from_model(const Grid2D& grid, SpeedModel model);

  const ScalarField& values() const { return values_; }
  const Grid2D& grid() const { return values_.grid(); }
  double operator[](std::size_t k) const { return values_[k]; }
  double c_min() const { return c_min_; }
  double c_max() const { return c_max_; }
  /// Closed-form description, when the field was sampled from one.
  const SpeedModel* model() const { return model_.get(); }

  /// c (1 + eps psi) on the same grid. The analytic model is dropped.
  SpeedField perturbed(const ScalarField& psi, double eps) const;

  /// True when every node outside K carries the reference value (to tol).
  bool equals_reference_outside(const CompactSupport& support, double reference,
                                double tol = 1e-12) const;

 private:
  ScalarField values_;
  std::shared_ptr<const SpeedModel> model_;
  double c_min_;
  double c_max_;
};

enum class NodeClass : std::uint8_t { exterior, interior, near_boundary };

struct BoundarySample {
  double theta;
  double arclength;
  Vec2 point;
  Vec2 normal;  // outward unit normal
};

/// The disk M on a grid. Interior nodes lie strictly inside the circle;
/// near-boundary nodes are the nodes on or outside it that either neighbour
/// an interior node or whose dual cell overlaps the disk.
class DomainMask {
 public:
  DomainMask(Grid2D grid, Vec2 center, double radius, int n_theta);

  const Grid2D& grid() const { return grid_; }
  Vec2 center() const { return center_; }
  double radius() const { return radius_; }

  NodeClass node_class(std::size_t k) const { return classes_[k]; }
  NodeClass node_class(int i, int j) const { return classes_[grid_.index(i, j)]; }
  bool in_domain(std::size_t k) const { return classes_[k] != NodeClass::exterior; }

  const std::vector<std::size_t>& interior_nodes() const { return interior_; }
  const std::vector<std::size_t>& near_boundary_nodes() const { return near_boundary_; }

  /// Nodes whose dual cell [x - h/2, x + h/2]^2 meets the disk, with the
  /// exact area fraction of the overlap. Quadrature over M uses these.
  const std::vector<std::size_t>& weighted_nodes() const { return weighted_; }
  const std::vector<double>& area_fractions() const { return fractions_; }

  const std::vector<BoundarySample>& samples() const { return samples_; }
  int n_theta() const { return static_cast<int>(samples_.size()); }
  double arclength_step() const { return 2.0 * kPi * radius_ / n_theta(); }

  double distance_from_center(Vec2 p) const { return norm(p - center_); }
  double angle_of(Vec2 p) const;

 private:
  Grid2D grid_;
  Vec2 center_;
  double radius_;
  std::vector<NodeClass> classes_;
  std::vector<std::size_t> interior_;
  std::vector<std::size_t> near_boundary_;
  std::vector<std::size_t> weighted_;
  std::vector<double> fractions_;
  std::vector<BoundarySample> samples_;
};

/// The concentric disk K inside M.
struct CompactSupport {
  Vec2 center;
  double radius;
  double margin;  // R_M - R_K

  bool contains(Vec2 p) const { return norm(p - center) <= radius; }
};

/// Builds M (radius R_M) and K (radius R_K), both centred at the origin.
/// Boundary samples sit at angles 2 pi k / n_theta.
std::pair<DomainMask, CompactSupport> build_disk_domain(const Grid2D& grid, double R_M,
                                                        double R_K, int n_theta);

/// Smallest multiple of 4 that is >= 2 pi R / h and >= 64.
int default_n_theta(double R_M, double h);

/// Exact area of [x0, x1] x [y0, y1] intersected with the disk of radius r
/// centred at the origin.
double rect_disk_area(double x0, double x1, double y0, double y1, double r);

/// Largest |f| outside K relative to max |f|; 0 for the zero field.
double support_violation(const ScalarField& f, const CompactSupport& support);

/// Throws PreconditionError when f is not supported in K up to the 1e-12
/// relative tolerance.
void require_support(const ScalarField& f, const CompactSupport& support, const char* what);

/// Periodic linear interpolation of equispaced samples on [0, 2 pi).
double interpolate_periodic(std::span<const double> samples, double theta);

/// Space-time record on (0, T) x dM: row n holds time t_n = n dt and column
/// k holds angle 2 pi k / n_theta. T = (n_times - 1) dt.
class BoundaryTrace {
 public:
  BoundaryTrace(int n_times, int n_theta, double dt, double radius);

  int n_times() const { return n_times_; }
  int n_theta() const { return n_theta_; }
  double dt() const { return dt_; }
  double duration() const { return dt_ * (n_times_ - 1); }
  double radius() const { return radius_; }
  double theta(int k) const { return 2.0 * kPi * k / n_theta_; }
  double time(int n) const { return n * dt_; }

  double& at(int n, int k) { return values_[index(n, k)]; }
  double at(int n, int k) const { return values_[index(n, k)]; }
  std::span<double> row(int n) { return {values_.data() + index(n, 0), std::size_t(n_theta_)}; }
  std::span<const double> row(int n) const {
    return {values_.data() + index(n, 0), std::size_t(n_theta_)};
  }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double max_abs() const;
  bool all_finite() const;
  bool same_layout(const BoundaryTrace& o) const;

  BoundaryTrace& operator+=(const BoundaryTrace& o);
  BoundaryTrace& operator-=(const BoundaryTrace& o);
  BoundaryTrace& operator*=(double s);
  friend BoundaryTrace operator-(BoundaryTrace a, const BoundaryTrace& b) { return a -= b; }
  friend BoundaryTrace operator+(BoundaryTrace a, const BoundaryTrace& b) { return a += b; }
  friend BoundaryTrace operator*(double s, BoundaryTrace a) { return a *= s; }

  /// Linear-in-time resampling onto a new step over the same duration.
  BoundaryTrace resampled(int n_times) const;

 private:
  std::size_t index(int n, int k) const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(n_theta_) +
           static_cast<std::size_t>(k);
  }

  int n_times_;
  int n_theta_;
  double dt_;
  double radius_;
  std::vector<double> values_;
};

}  // namespace patlab
