#pragma once

#include <functional>
#include <vector>

#include "patlab/geometry.hpp"

namespace patlab {

struct SolverOptions {
  double cfl_safety = 0.9;
  /// Speed used for the CFL step when larger than c_max. Lets runs with
  /// different speeds share one time grid.
  double max_speed = 0.0;
  /// Record energy over M and the boundary flux integrand each level.
  bool record_flux = false;
  /// Call snapshot_sink every `snapshot_stride` levels (0 = never).
  int snapshot_stride = 0;
  std::function<void(int level, const ScalarField& u)> snapshot_sink;
  /// Called with u at every level 0..N, before the step that leaves it.
  std::function<void(int level, const ScalarField& u)> observer;
};

struct TimeGrid {
  double dt;
  int steps;  // T = steps * dt
};

struct WaveState {
  ScalarField u;
  ScalarField u_t;  // centred difference of the neighbouring levels
  double t = 0.0;
};

struct SimulationRun {
  BoundaryTrace trace;  // steps + 1 rows, t_n = n dt
  WaveState final_state;
  double dt = 0.0;
  int steps = 0;
  /// E at levels 0..steps and the flux integral over dM at the same levels;
  /// empty unless SolverOptions::record_flux.
  std::vector<double> energy_log;
  std::vector<double> flux_log;
};

/// Right-hand side of the inhomogeneous equation, given at the solver's time
/// levels 0..N.
class SourceTerm {
 public:
  /// F(t_n, x) = profile(x) * time_samples[n].
  static SourceTerm separable(ScalarField profile, std::vector<double> time_samples);
  /// F(t_n, node[j]) = values[n * nodes.size() + j], zero elsewhere.
  static SourceTerm sampled(Grid2D grid, std::vector<std::size_t> nodes, std::vector<double> values);

  const Grid2D& grid() const { return grid_; }
  int n_levels() const { return n_levels_; }
  const std::vector<std::size_t>& nodes() const { return nodes_; }

  /// out[node] += scale * F(t_level, node).
  void accumulate(int level, double scale, std::span<double> out) const;
  SourceTerm scaled(double alpha) const;

 private:
  SourceTerm(Grid2D grid, std::vector<std::size_t> nodes, std::vector<double> weights,
             std::vector<double> values, int n_levels);

  Grid2D grid_;
  std::vector<std::size_t> nodes_;
  std::vector<double> weights_;  // separable: profile on nodes_; sampled: empty
  std::vector<double> values_;   // separable: one per level; sampled: levels x nodes
  int n_levels_;
};

/// dt = safety * h / (c_max sqrt 2). Requires 0 < safety < 1.
double cfl_timestep(const SpeedField& c, double h, double safety);
double cfl_timestep(double c_max, double h, double safety);

/// The time grid a run over [0, T] uses: the CFL step rounded down so that
/// an integer number of steps lands on T.
TimeGrid plan_time_grid(const SpeedField& c, double T, const SolverOptions& options = {});

/// Padding the box needs around M so that edge reflections cannot reach dM
/// before T: c_max T / 2 + 5h.
double required_padding(double c_max, double T, double h);

/// Leapfrog solution of u_tt = c^2 Lap u with u(0) = f, u_t(0) = 0 on the
/// grid box with zero Dirichlet edges; records u at the boundary samples.
SimulationRun propagate_free(const ScalarField& f, const SpeedField& c, double T,
                             const DomainMask& mask, const CompactSupport& support,
                             const SolverOptions& options = {});

/// w_tt = c0^2 Lap w + F, zero Cauchy data. F must live on the solver's time
/// levels (see plan_time_grid) and be supported in K.
SimulationRun propagate_source(const SourceTerm& F, const SpeedField& c0, double T,
                               const DomainMask& mask, const CompactSupport& support,
                               const SolverOptions& options = {});

/// next = 2 cur - prev + dt^2 c^2 Lap_h cur on interior nodes, zero on the
/// box edge.
void leapfrog_step(const ScalarField& prev, const ScalarField& cur, ScalarField& next,
                   const SpeedField& c, double dt);

/// max_n |E_n - E_0 - 2 int_0^{t_n} flux| / max(E_0, tiny), trapezoidal in time.
double flux_identity_residual(const SimulationRun& run, const SpeedField& c, const DomainMask& mask);

/// E = sum_k a_k (u_t^2 / c^2 + |grad_h u|^2) h^2 over the cut-cell weights of M.
double domain_energy(const ScalarField& u, const ScalarField& u_t, const SpeedField& c,
                     const DomainMask& mask);

}  // namespace patlab
