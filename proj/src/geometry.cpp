#include "patlab/geometry.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace patlab {

Grid2D::Grid2D(int nx, int ny, double h, Vec2 origin) : nx_(nx), ny_(ny), h_(h), origin_(origin) {
  if (nx < 32 || ny < 32)
    throw PreconditionError("Grid2D: nx and ny must be >= 32, got " + std::to_string(nx) + "x" +
                            std::to_string(ny));
  if (!(h > 0.0) || !std::isfinite(h)) throw PreconditionError("Grid2D: spacing must be positive");
}

Grid2D Grid2D::centered(double half_width, double h, Vec2 center) {
  if (!(h > 0.0)) throw PreconditionError("Grid2D::centered: spacing must be positive");
  int m = static_cast<int>(std::ceil(half_width / h - 1e-9));
  m = std::max(m, 16);
  return Grid2D(2 * m, 2 * m, h, {center.x - m * h, center.y - m * h});
}

double Grid2D::distance_to_edge(Vec2 p) const {
  const Vec2 hi = upper();
  return std::min({p.x - origin_.x, hi.x - p.x, p.y - origin_.y, hi.y - p.y});
}

ScalarField::ScalarField(Grid2D grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

ScalarField::ScalarField(Grid2D grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw PreconditionError("ScalarField: value count does not match grid");
}

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_grid(o, grid_, "ScalarField::operator+=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_grid(o, grid_, "ScalarField::operator-=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

void require_grid(const ScalarField& field, const Grid2D& grid, const char* what) {
  if (!(field.grid() == grid)) throw PreconditionError(std::string(what) + ": mismatched grids");
}

double bump_profile(Vec2 x, Vec2 center, double radius) {
  const Vec2 d = x - center;
  const double q = dot(d, d) / (radius * radius);
  if (q >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - q));
}

Vec2 bump_gradient(Vec2 x, Vec2 center, double radius) {
  const Vec2 d = x - center;
  const double q = dot(d, d) / (radius * radius);
  if (q >= 1.0) return {};
  const double psi = std::exp(1.0 - 1.0 / (1.0 - q));
  const double dpsi_dq = -psi / ((1.0 - q) * (1.0 - q));
  return (2.0 * dpsi_dq / (radius * radius)) * d;
}

namespace {

double smooth_step(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / s);
  const double b = std::exp(-1.0 / (1.0 - s));
  return a / (a + b);
}

double smooth_step_derivative(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / s);
  const double b = std::exp(-1.0 / (1.0 - s));
  const double da = a / (s * s);
  const double db = -b / ((1.0 - s) * (1.0 - s));
  return (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
}

}  // namespace

SpeedModel::SpeedModel(double background, std::vector<SpeedBump> bumps,
                       std::optional<RadialRamp> ramp)
    : background_(background), bumps_(std::move(bumps)), ramp_(ramp) {
  if (!(background > 0.0)) throw PreconditionError("SpeedModel: background speed must be positive");
  for (const auto& b : bumps_)
    if (!(b.radius > 0.0)) throw PreconditionError("SpeedModel: bump radius must be positive");
  if (ramp_ && !(ramp_->width > 0.0))
    throw PreconditionError("SpeedModel: ramp width must be positive");
}

double SpeedModel::value(Vec2 x) const {
  double s = 1.0;
  for (const auto& b : bumps_) s += b.amplitude * bump_profile(x, b.center, b.radius);
  if (ramp_) s += ramp_->amplitude * smooth_step((norm(x) - ramp_->start) / ramp_->width);
  return background_ * s;
}

Vec2 SpeedModel::gradient(Vec2 x) const {
  Vec2 g;
  for (const auto& b : bumps_) g += b.amplitude * bump_gradient(x, b.center, b.radius);
  if (ramp_) {
    const double r = norm(x);
    if (r > 0.0) {
      const double ds = smooth_step_derivative((r - ramp_->start) / ramp_->width) / ramp_->width;
      g += (ramp_->amplitude * ds / r) * x;
    }
  }
  return background_ * g;
}

SpeedField::SpeedField(ScalarField values, std::shared_ptr<const SpeedModel> model)
    : values_(std::move(values)), model_(std::move(model)) {
  if (!values_.all_finite()) throw PreconditionError("SpeedField: non-finite speed value");
  c_min_ = values_.min();
  c_max_ = values_.max();
  if (!(c_min_ > 0.0)) throw PreconditionError("SpeedField: speed must be strictly positive");
}

SpeedField SpeedField::constant(const Grid2D& grid, double c) {
  return SpeedField(ScalarField(grid, c), std::make_shared<SpeedModel>(c));
}

SpeedField SpeedField::from_model(const Grid2D& grid, SpeedModel model) {
  auto shared = std::make_shared<const SpeedModel>(std::move(model));
  auto values = ScalarField::sample(grid, [&](Vec2 p) { return shared->value(p); });
  return SpeedField(std::move(values), std::move(shared));
}

SpeedField SpeedField::perturbed(const ScalarField& psi, double eps) const {
  require_grid(psi, grid(), "SpeedField::perturbed");
  ScalarField out = values_;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= 1.0 + eps * psi[k];
  return SpeedField(std::move(out));
}

bool SpeedField::equals_reference_outside(const CompactSupport& support, double reference,
                                          double tol) const {
  const Grid2D& g = grid();
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (support.contains(g.node(k))) continue;
    if (std::abs(values_[k] - reference) > tol * reference) return false;
  }
  return true;
}

double rect_disk_area(double x0, double x1, double y0, double y1, double r) {
  const double a = std::max(x0, -r);
  const double b = std::min(x1, r);
  if (!(a < b) || !(y0 < y1)) return 0.0;

  std::vector<double> cuts{a, b};
  for (double y : {y0, y1}) {
    if (std::abs(y) < r) {
      const double xc = std::sqrt(r * r - y * y);
      for (double x : {-xc, xc})
        if (x > a && x < b) cuts.push_back(x);
    }
  }
  std::sort(cuts.begin(), cuts.end());

  auto chord = [r](double x) { return std::sqrt(std::max(0.0, r * r - x * x)); };
  auto chord_integral = [r, &chord](double x) {
    const double xr = std::clamp(x / r, -1.0, 1.0);
    return 0.5 * (x * chord(x) + r * r * std::asin(xr));
  };

  double area = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = cuts[k];
    const double hi = cuts[k + 1];
    if (!(hi > lo)) continue;
    const double s = chord(0.5 * (lo + hi));
    const bool top_is_chord = s < y1;
    const bool bottom_is_chord = -s > y0;
    const double top = top_is_chord ? s : y1;
    const double bottom = bottom_is_chord ? -s : y0;
    if (top <= bottom) continue;
    const double dx = hi - lo;
    const double dF = chord_integral(hi) - chord_integral(lo);
    const double int_top = top_is_chord ? dF : y1 * dx;
    const double int_bottom = bottom_is_chord ? -dF : y0 * dx;
    area += int_top - int_bottom;
  }
  return area;
}

DomainMask::DomainMask(Grid2D grid, Vec2 center, double radius, int n_theta)
    : grid_(grid), center_(center), radius_(radius) {
  if (!(radius > 0.0)) throw GeometryError("DomainMask: radius must be positive");
  if (n_theta < 64) throw GeometryError("DomainMask: need at least 64 boundary samples");
  const double h = grid.h();
  if (grid.distance_to_edge(center) < radius + 3.0 * h)
    throw GeometryError("DomainMask: disk of radius " + std::to_string(radius) +
                        " does not fit in the grid with padding");

  const std::size_t n = grid.size();
  classes_.assign(n, NodeClass::exterior);
  std::vector<double> fraction(n, 0.0);
  const double cell = h * h;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 p = grid.node(k) - center;
    const double r = norm(p);
    if (r < radius) classes_[k] = NodeClass::interior;
    if (r + h < radius) {
      fraction[k] = 1.0;
    } else if (r - h < radius) {
      fraction[k] =
          rect_disk_area(p.x - 0.5 * h, p.x + 0.5 * h, p.y - 0.5 * h, p.y + 0.5 * h, radius) / cell;
    }
  }

  const int w = grid.width();
  for (int j = 1; j + 1 < grid.height(); ++j) {
    for (int i = 1; i + 1 < w; ++i) {
      const std::size_t k = grid.index(i, j);
      if (classes_[k] == NodeClass::interior) continue;
      const bool touches = classes_[k - 1] == NodeClass::interior ||
                           classes_[k + 1] == NodeClass::interior ||
                           classes_[k - w] == NodeClass::interior ||
                           classes_[k + w] == NodeClass::interior;
      if (touches || fraction[k] > 0.0) classes_[k] = NodeClass::near_boundary;
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (classes_[k] == NodeClass::interior) interior_.push_back(k);
    if (classes_[k] == NodeClass::near_boundary) near_boundary_.push_back(k);
    if (fraction[k] > 0.0) {
      weighted_.push_back(k);
      fractions_.push_back(fraction[k]);
    }
  }
  if (interior_.empty()) throw GeometryError("DomainMask: no interior nodes");

  samples_.reserve(static_cast<std::size_t>(n_theta));
  for (int k = 0; k < n_theta; ++k) {
    const double theta = 2.0 * kPi * k / n_theta;
    const Vec2 nrm{std::cos(theta), std::sin(theta)};
    samples_.push_back({theta, radius * theta, center + radius * nrm, nrm});
  }
}

double DomainMask::angle_of(Vec2 p) const {
  const Vec2 d = p - center_;
  double a = std::atan2(d.y, d.x);
  if (a < 0.0) a += 2.0 * kPi;
  return a;
}

std::pair<DomainMask, CompactSupport> build_disk_domain(const Grid2D& grid, double R_M, double R_K,
                                                        int n_theta) {
  if (!(R_K > 0.0)) throw GeometryError("build_disk_domain: R_K must be positive");
  if (!(R_K < R_M)) throw GeometryError("build_disk_domain: R_K must be smaller than R_M");
  if (R_M - R_K < 4.0 * grid.h())
    throw GeometryError("build_disk_domain: R_M - R_K must be at least 4h");
  DomainMask mask(grid, {}, R_M, n_theta);
  return {std::move(mask), CompactSupport{{}, R_K, R_M - R_K}};
}

int default_n_theta(double R_M, double h) {
  int n = static_cast<int>(std::ceil(2.0 * kPi * R_M / h));
  n = (n + 3) / 4 * 4;
  return std::max(n, 64);
}

double support_violation(const ScalarField& f, const CompactSupport& support) {
  const double peak = f.max_abs();
  if (peak == 0.0) return 0.0;
  double outside = 0.0;
  const Grid2D& g = f.grid();
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!support.contains(g.node(k))) outside = std::max(outside, std::abs(f[k]));
  return outside / peak;
}

void require_support(const ScalarField& f, const CompactSupport& support, const char* what) {
  if (support_violation(f, support) > 1e-12)
    throw PreconditionError(std::string(what) + ": field is not supported in K");
}

double interpolate_periodic(std::span<const double> samples, double theta) {
  const int n = static_cast<int>(samples.size());
  double u = theta / (2.0 * kPi) * n;
  u -= n * std::floor(u / n);
  int k = static_cast<int>(std::floor(u));
  const double w = u - k;
  k %= n;
  const int k1 = (k + 1) % n;
  return (1.0 - w) * samples[static_cast<std::size_t>(k)] + w * samples[static_cast<std::size_t>(k1)];
}

BoundaryTrace::BoundaryTrace(int n_times, int n_theta, double dt, double radius)
    : n_times_(n_times), n_theta_(n_theta), dt_(dt), radius_(radius) {
  if (n_times < 1 || n_theta < 1) throw PreconditionError("BoundaryTrace: empty layout");
  if (!(dt > 0.0)) throw PreconditionError("BoundaryTrace: dt must be positive");
  values_.assign(static_cast<std::size_t>(n_times) * static_cast<std::size_t>(n_theta), 0.0);
}

double BoundaryTrace::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool BoundaryTrace::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool BoundaryTrace::same_layout(const BoundaryTrace& o) const {
  return n_times_ == o.n_times_ && n_theta_ == o.n_theta_ && dt_ == o.dt_ && radius_ == o.radius_;
}

BoundaryTrace& BoundaryTrace::operator+=(const BoundaryTrace& o) {
  if (!same_layout(o)) throw PreconditionError("BoundaryTrace: layout mismatch");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
  return *this;
}

BoundaryTrace& BoundaryTrace::operator-=(const BoundaryTrace& o) {
  if (!same_layout(o)) throw PreconditionError("BoundaryTrace: layout mismatch");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
  return *this;
}

BoundaryTrace& BoundaryTrace::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

BoundaryTrace BoundaryTrace::resampled(int n_times) const {
  if (n_times < 2) throw PreconditionError("BoundaryTrace::resampled: need at least two times");
  const double T = duration();
  BoundaryTrace out(n_times, n_theta_, T / (n_times - 1), radius_);
  for (int n = 0; n < n_times; ++n) {
    const double u = out.time(n) / dt_;
    int m = std::clamp(static_cast<int>(std::floor(u)), 0, n_times_ - 1);
    if (m == n_times_ - 1) m = std::max(0, n_times_ - 2);
    const double w = std::clamp(u - m, 0.0, 1.0);
    for (int k = 0; k < n_theta_; ++k)
      out.at(n, k) = (1.0 - w) * at(m, k) + (n_times_ > 1 ? w * at(m + 1, k) : 0.0);
  }
  return out;
}

}  // namespace patlab
