#include "patlab/forward_solver.hpp"

#include <algorithm>
#include <cfloat>
#include <limits>
#include <optional>

#include "patlab/interpolation.hpp"

namespace patlab {

SourceTerm::SourceTerm(Grid2D grid, std::vector<std::size_t> nodes, std::vector<double> weights,
                       std::vector<double> values, int n_levels)
    : grid_(grid),
      nodes_(std::move(nodes)),
      weights_(std::move(weights)),
      values_(std::move(values)),
      n_levels_(n_levels) {}

SourceTerm SourceTerm::separable(ScalarField profile, std::vector<double> time_samples) {
  if (!profile.all_finite()) throw PreconditionError("SourceTerm: non-finite profile");
  std::vector<std::size_t> nodes;
  std::vector<double> weights;
  for (std::size_t k = 0; k < profile.size(); ++k) {
    if (profile[k] != 0.0) {
      nodes.push_back(k);
      weights.push_back(profile[k]);
    }
  }
  const int n = static_cast<int>(time_samples.size());
  return SourceTerm(profile.grid(), std::move(nodes), std::move(weights), std::move(time_samples), n);
}

SourceTerm SourceTerm::sampled(Grid2D grid, std::vector<std::size_t> nodes, std::vector<double> values) {
  int n_levels = std::numeric_limits<int>::max();
  if (!nodes.empty()) {
    if (values.size() % nodes.size() != 0)
      throw PreconditionError("SourceTerm: value count is not a multiple of the node count");
    n_levels = static_cast<int>(values.size() / nodes.size());
  }
  for (std::size_t k : nodes)
    if (k >= grid.size()) throw PreconditionError("SourceTerm: node index outside the grid");
  return SourceTerm(grid, std::move(nodes), {}, std::move(values), n_levels);
}

void SourceTerm::accumulate(int level, double scale, std::span<double> out) const {
  if (nodes_.empty()) return;
  if (level < 0 || level >= n_levels_) throw PreconditionError("SourceTerm: level out of range");
  if (!weights_.empty()) {
    const double s = scale * values_[static_cast<std::size_t>(level)];
    for (std::size_t j = 0; j < nodes_.size(); ++j) out[nodes_[j]] += s * weights_[j];
    return;
  }
  const std::size_t m = nodes_.size();
  const double* row = values_.data() + static_cast<std::size_t>(level) * m;
  for (std::size_t j = 0; j < m; ++j) out[nodes_[j]] += scale * row[j];
}

SourceTerm SourceTerm::scaled(double alpha) const {
  SourceTerm out = *this;
  if (!out.weights_.empty())
    for (double& w : out.weights_) w *= alpha;
  else
    for (double& v : out.values_) v *= alpha;
  return out;
}

double cfl_timestep(double c_max, double h, double safety) {
  if (!(safety > 0.0 && safety < 1.0)) throw PreconditionError("cfl_timestep: safety must lie in (0, 1)");
  if (!(c_max > 0.0) || !(h > 0.0)) throw PreconditionError("cfl_timestep: c_max and h must be positive");
  return safety * h / (c_max * std::sqrt(2.0));
}

double cfl_timestep(const SpeedField& c, double h, double safety) {
  return cfl_timestep(c.c_max(), h, safety);
}

TimeGrid plan_time_grid(const SpeedField& c, double T, const SolverOptions& options) {
  if (!(T > 0.0) || !std::isfinite(T)) throw PreconditionError("time window must be positive");
  const double vmax = std::max(c.c_max(), options.max_speed);
  const double dt_cfl = cfl_timestep(vmax, c.grid().h(), options.cfl_safety);
  const int steps = std::max(static_cast<int>(std::ceil(T / dt_cfl - 1e-12)), 1);
  return {T / steps, steps};
}

double required_padding(double c_max, double T, double h) { return 0.5 * c_max * T + 5.0 * h; }

namespace {

struct Box {
  int i0 = 1, i1 = 0, j0 = 1, j1 = 0;  // inclusive; empty when i0 > i1

  bool empty() const { return i0 > i1 || j0 > j1; }
  void include(int i, int j) {
    if (empty()) {
      i0 = i1 = i;
      j0 = j1 = j;
      return;
    }
    i0 = std::min(i0, i);
    i1 = std::max(i1, i);
    j0 = std::min(j0, j);
    j1 = std::max(j1, j);
  }
  // One node of growth per step keeps every possibly non-zero entry inside.
  void grow(const Grid2D& g) {
    if (empty()) return;
    i0 = std::max(i0 - 1, 1);
    j0 = std::max(j0 - 1, 1);
    i1 = std::min(i1 + 1, g.nx() - 1);
    j1 = std::min(j1 + 1, g.ny() - 1);
  }
};

// Leapfrog over the box; `first` selects the Taylor start u1 = u0 + coef lap(u0) / 2.
void stencil_update(const ScalarField& prev, const ScalarField& cur, ScalarField& next,
                    const std::vector<double>& coef, const Box& box, bool first) {
  if (box.empty()) return;
  const auto w = static_cast<std::size_t>(cur.grid().width());
  const double* u = cur.values().data();
  const double* p = prev.values().data();
  double* out = next.values().data();
  const double* a = coef.data();
  for (int j = box.j0; j <= box.j1; ++j) {
    const std::size_t row = static_cast<std::size_t>(j) * w;
    for (int i = box.i0; i <= box.i1; ++i) {
      const std::size_t k = row + static_cast<std::size_t>(i);
      const double lap = u[k - 1] + u[k + 1] + u[k - w] + u[k + w] - 4.0 * u[k];
      out[k] = first ? u[k] + 0.5 * a[k] * lap : 2.0 * u[k] - p[k] + a[k] * lap;
    }
  }
}

class EnergyMonitor {
 public:
  EnergyMonitor(const SpeedField& c, const DomainMask& mask) : mask_(mask), c_(c) {
    for (const auto& s : mask.samples()) stencils_.push_back(cubic_stencil(mask.grid(), s.point));
  }

  // Energy and flux at one level; u_t from the neighbouring levels, zero
  // when `at_rest`.
  void record(const ScalarField& prev, const ScalarField& cur, const ScalarField& next, double dt,
              bool at_rest, std::vector<double>& energy, std::vector<double>& flux) const {
    const double inv = at_rest ? 0.0 : 1.0 / (2.0 * dt);
    const Grid2D& g = mask_.grid();
    const auto w = static_cast<std::size_t>(g.width());
    const double h = g.h();
    const auto& nodes = mask_.weighted_nodes();
    const auto& frac = mask_.area_fractions();
    double e = 0.0;
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const std::size_t k = nodes[n];
      const double ut = (next[k] - prev[k]) * inv;
      const double gx = (cur[k + 1] - cur[k - 1]) / (2.0 * h);
      const double gy = (cur[k + w] - cur[k - w]) / (2.0 * h);
      e += frac[n] * (ut * ut / (c_[k] * c_[k]) + gx * gx + gy * gy);
    }
    energy.push_back(e * h * h);

    double f = 0.0;
    if (!at_rest) {
      const auto& samples = mask_.samples();
      for (std::size_t s = 0; s < samples.size(); ++s) {
        const double dn = dot(stencils_[s].gradient(cur.values()), samples[s].normal);
        const double ut = (stencils_[s].value(next.values()) - stencils_[s].value(prev.values())) * inv;
        f += dn * ut;
      }
    }
    flux.push_back(f * mask_.arclength_step());
  }

 private:
  const DomainMask& mask_;
  const SpeedField& c_;
  std::vector<CubicStencil> stencils_;
};

void check_setup(const SpeedField& c, double T, const DomainMask& mask, const SolverOptions& options) {
  if (!(c.grid() == mask.grid())) throw PreconditionError("speed and mask live on different grids");
  if (!(T > 0.0)) throw PreconditionError("time window must be positive");
  const double vmax = std::max(c.c_max(), options.max_speed);
  const double pad = mask.grid().distance_to_edge(mask.center()) - mask.radius();
  if (pad < required_padding(vmax, T, mask.grid().h()))
    throw PreconditionError("insufficient padding: edge reflections would reach the boundary before T");
}

SimulationRun evolve(const ScalarField& u0, const SourceTerm* F, const SpeedField& c, double T,
                     const DomainMask& mask, const SolverOptions& options) {
  const Grid2D& g = mask.grid();
  const TimeGrid tg = plan_time_grid(c, T, options);
  const double dt = tg.dt;
  const int N = tg.steps;
  if (F && F->n_levels() < N + 1)
    throw PreconditionError("source term does not cover every solver time level");

  std::vector<double> coef(g.size());
  const double r2 = dt * dt / (g.h() * g.h());
  for (std::size_t k = 0; k < coef.size(); ++k) coef[k] = r2 * c[k] * c[k];

  Box box;
  for (std::size_t k = 0; k < u0.size(); ++k)
    if (u0[k] != 0.0) box.include(g.col(k), g.row(k));
  if (F)
    for (std::size_t k : F->nodes()) box.include(g.col(k), g.row(k));
  if (!box.empty()) {
    box.i0 = std::max(box.i0, 1);
    box.j0 = std::max(box.j0, 1);
    box.i1 = std::min(box.i1, g.nx() - 1);
    box.j1 = std::min(box.j1, g.ny() - 1);
  }

  std::vector<BilinearStencil> probes;
  for (const auto& s : mask.samples()) probes.push_back(bilinear_stencil(g, s.point));

  SimulationRun run{BoundaryTrace(N + 1, mask.n_theta(), dt, mask.radius()),
                    WaveState{ScalarField(g), ScalarField(g), T}, dt, N, {}, {}};
  std::optional<EnergyMonitor> monitor;
  if (options.record_flux) {
    monitor.emplace(c, mask);
    run.energy_log.reserve(static_cast<std::size_t>(N) + 1);
    run.flux_log.reserve(static_cast<std::size_t>(N) + 1);
  }

  ScalarField prev(g), cur = u0, next(g);
  for (int n = 0; n <= N; ++n) {
    auto row = run.trace.row(n);
    for (std::size_t s = 0; s < probes.size(); ++s) row[s] = probes[s].apply(cur.values());
    if (options.observer) options.observer(n, cur);
    if (options.snapshot_sink && options.snapshot_stride > 0 && n % options.snapshot_stride == 0)
      options.snapshot_sink(n, cur);

    box.grow(g);
    stencil_update(prev, cur, next, coef, box, n == 0);
    if (F) F->accumulate(n, n == 0 ? 0.5 * dt * dt : dt * dt, next.values());

    if (monitor) monitor->record(prev, cur, next, dt, n == 0, run.energy_log, run.flux_log);
    if (n == N) {
      run.final_state.u = cur;
      for (std::size_t k = 0; k < g.size(); ++k)
        run.final_state.u_t[k] = (next[k] - prev[k]) / (2.0 * dt);
    }
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  return run;
}

}  // namespace

SimulationRun propagate_free(const ScalarField& f, const SpeedField& c, double T, const DomainMask& mask,
                             const CompactSupport& support, const SolverOptions& options) {
  require_grid(f, mask.grid(), "propagate_free");
  check_setup(c, T, mask, options);
  if (!f.all_finite()) throw PreconditionError("propagate_free: non-finite initial data");
  require_support(f, support, "propagate_free");
  return evolve(f, nullptr, c, T, mask, options);
}

SimulationRun propagate_source(const SourceTerm& F, const SpeedField& c0, double T, const DomainMask& mask,
                               const CompactSupport& support, const SolverOptions& options) {
  if (!(F.grid() == mask.grid())) throw PreconditionError("propagate_source: source on a different grid");
  check_setup(c0, T, mask, options);
  for (std::size_t k : F.nodes())
    if (!support.contains(mask.grid().node(k)))
      throw PreconditionError("propagate_source: source not supported in K");
  return evolve(ScalarField(mask.grid()), &F, c0, T, mask, options);
}

void leapfrog_step(const ScalarField& prev, const ScalarField& cur, ScalarField& next, const SpeedField& c,
                   double dt) {
  const Grid2D& g = cur.grid();
  require_grid(prev, g, "leapfrog_step");
  require_grid(next, g, "leapfrog_step");
  if (!(c.grid() == g)) throw PreconditionError("leapfrog_step: speed on a different grid");
  std::vector<double> coef(g.size());
  const double r2 = dt * dt / (g.h() * g.h());
  for (std::size_t k = 0; k < coef.size(); ++k) coef[k] = r2 * c[k] * c[k];
  std::fill(next.values().begin(), next.values().end(), 0.0);
  stencil_update(prev, cur, next, coef, Box{1, g.nx() - 1, 1, g.ny() - 1}, false);
}

double domain_energy(const ScalarField& u, const ScalarField& u_t, const SpeedField& c, const DomainMask& mask) {
  require_grid(u, mask.grid(), "domain_energy");
  require_grid(u_t, mask.grid(), "domain_energy");
  const Grid2D& g = mask.grid();
  const auto w = static_cast<std::size_t>(g.width());
  const double h = g.h();
  const auto& nodes = mask.weighted_nodes();
  const auto& frac = mask.area_fractions();
  double e = 0.0;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const std::size_t k = nodes[n];
    const double gx = (u[k + 1] - u[k - 1]) / (2.0 * h);
    const double gy = (u[k + w] - u[k - w]) / (2.0 * h);
    e += frac[n] * (u_t[k] * u_t[k] / (c[k] * c[k]) + gx * gx + gy * gy);
  }
  return e * h * h;
}

double flux_identity_residual(const SimulationRun& run, const SpeedField& c, const DomainMask& mask) {
  if (run.energy_log.empty() || run.energy_log.size() != run.flux_log.size())
    throw PreconditionError("flux_identity_residual: run was recorded without the flux log");
  if (!(c.grid() == mask.grid())) throw PreconditionError("flux_identity_residual: mismatched grids");
  const double e0 = run.energy_log.front();
  double integral = 0.0;
  double worst = 0.0;
  for (std::size_t n = 1; n < run.energy_log.size(); ++n) {
    integral += 0.5 * run.dt * (run.flux_log[n - 1] + run.flux_log[n]);
    worst = std::max(worst, std::abs(run.energy_log[n] - e0 - 2.0 * integral));
  }
  return worst / std::max(e0, DBL_MIN);
}

}  // namespace patlab
