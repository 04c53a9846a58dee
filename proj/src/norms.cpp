#include "patlab/norms.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <memory>
#include <mutex>

namespace patlab {

namespace {

// One-sided or central difference along a stride; 0 when no neighbour is in the domain.
double difference(const ScalarField& u, const DomainMask& mask, std::size_t k, std::size_t stride,
                  double h) {
  const bool has_minus = k >= stride && mask.in_domain(k - stride);
  const bool has_plus = k + stride < u.size() && mask.in_domain(k + stride);
  if (has_minus && has_plus) return (u[k + stride] - u[k - stride]) / (2.0 * h);
  if (has_plus) return (u[k + stride] - u[k]) / h;
  if (has_minus) return (u[k] - u[k - stride]) / h;
  return 0.0;
}

double disk_sum(const ScalarField& u, const DomainMask& mask, bool with_gradient) {
  require_grid(u, mask.grid(), "h1_norm");
  const double h = mask.grid().h();
  const auto w = static_cast<std::size_t>(mask.grid().width());
  const auto& nodes = mask.weighted_nodes();
  const auto& frac = mask.area_fractions();
  double sum = 0.0;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const std::size_t k = nodes[n];
    double term = u[k] * u[k];
    if (with_gradient) {
      const double gx = difference(u, mask, k, 1, h);
      const double gy = difference(u, mask, k, w, h);
      term += gx * gx + gy * gy;
    }
    sum += frac[n] * term;
  }
  return sum * h * h;
}

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace

double h1_norm(const ScalarField& field, const DomainMask& mask) {
  return std::sqrt(disk_sum(field, mask, true));
}

double l2_norm(const ScalarField& field, const DomainMask& mask) {
  return std::sqrt(disk_sum(field, mask, false));
}

double hs_norm_compact(const ScalarField& field, const CompactSupport& support, int s) {
  if (s < 0 || s > 3) throw PreconditionError("hs_norm_compact: s must be 0, 1, 2 or 3");
  require_support(field, support, "hs_norm_compact");

  const Grid2D& g = field.grid();
  const double h = g.h();
  const auto lo_i = static_cast<int>(std::floor((support.center.x - support.radius - g.origin().x) / h));
  const auto lo_j = static_cast<int>(std::floor((support.center.y - support.radius - g.origin().y) / h));
  const int side = static_cast<int>(std::ceil(2.0 * support.radius / h)) + 2;
  const int n = 2 * side;

  std::vector<std::complex<double>> data(static_cast<std::size_t>(n) * n);
  for (int b = 0; b < side; ++b) {
    for (int a = 0; a < side; ++a) {
      const int i = lo_i + a;
      const int j = lo_j + b;
      if (i < 0 || j < 0 || i > g.nx() || j > g.ny()) continue;
      data[static_cast<std::size_t>(b) * n + a] = field(i, j);
    }
  }

  auto* raw = reinterpret_cast<fftw_complex*>(data.data());
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_2d(n, n, raw, raw, FFTW_FORWARD, FFTW_ESTIMATE));
  }
  fftw_execute(plan.get());

  const double dk = 2.0 * kPi / (n * h);
  double sum = 0.0;
  for (int b = 0; b < n; ++b) {
    const double ky = dk * (b < n / 2 ? b : b - n);
    for (int a = 0; a < n; ++a) {
      const double kx = dk * (a < n / 2 ? a : a - n);
      const double weight = std::pow(1.0 + kx * kx + ky * ky, s);
      sum += weight * std::norm(data[static_cast<std::size_t>(b) * n + a]);
    }
  }
  return std::sqrt(sum / (static_cast<double>(n) * n) * h * h);
}

namespace {

double trace_sum(const BoundaryTrace& trace, bool with_derivatives) {
  const int nt = trace.n_times();
  const int na = trace.n_theta();
  if (nt < 3 || na < 3) throw PreconditionError("trace_h1_norm: need at least 3 times and 3 angles");
  const double dt = trace.dt();
  const double ds = 2.0 * kPi * trace.radius() / na;
  double sum = 0.0;
  for (int n = 0; n < nt; ++n) {
    const double wt = (n == 0 || n == nt - 1) ? 0.5 * dt : dt;
    double row = 0.0;
    for (int k = 0; k < na; ++k) {
      const double v = trace.at(n, k);
      double term = v * v;
      if (with_derivatives) {
        double d_t;
        if (n == 0)
          d_t = (trace.at(1, k) - v) / dt;
        else if (n == nt - 1)
          d_t = (v - trace.at(n - 1, k)) / dt;
        else
          d_t = (trace.at(n + 1, k) - trace.at(n - 1, k)) / (2.0 * dt);
        const double d_s = (trace.at(n, (k + 1) % na) - trace.at(n, (k + na - 1) % na)) / (2.0 * ds);
        term += d_t * d_t + d_s * d_s;
      }
      row += term;
    }
    sum += wt * ds * row;
  }
  return sum;
}

}  // namespace

double trace_h1_norm(const BoundaryTrace& trace) { return std::sqrt(trace_sum(trace, true)); }

double trace_l2_norm(const BoundaryTrace& trace) { return std::sqrt(trace_sum(trace, false)); }

}  // namespace patlab
