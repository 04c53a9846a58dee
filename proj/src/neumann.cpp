#include "patlab/neumann.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <thread>

#include "patlab/field_io.hpp"
#include "patlab/norms.hpp"

namespace patlab {

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::tolerance: return "tolerance";
    case StopReason::max_terms: return "max_terms";
    case StopReason::divergence: return "divergence";
  }
  return "unknown";
}

NeumannOperator::NeumannOperator(const SpeedField& c0, double T, const DomainMask& mask, SolverOptions solver,
                                 TimeReversalOptions reversal)
    : c0_(c0),
      T_(T),
      solver_(std::move(solver)),
      reversal_(c0, mask, [&] {
        reversal.cfl_safety = solver_.cfl_safety;
        return reversal;
      }()),
      disk_{mask.center(), mask.radius(), 0.0} {
  if (!(T > 0.0)) throw PreconditionError("Neumann operator: T must be positive");
  solver_.record_flux = false;
  solver_.observer = nullptr;
  solver_.snapshot_sink = nullptr;
}

ScalarField NeumannOperator::restrict_to_domain(const ScalarField& f) const {
  ScalarField out = f;
  const Grid2D& g = out.grid();
  for (std::size_t k = 0; k < out.size(); ++k)
    if (norm(g.node(k) - disk_.center) >= disk_.radius) out[k] = 0.0;
  return out;
}

BoundaryTrace NeumannOperator::measure(const ScalarField& f) const {
  return propagate_free(restrict_to_domain(f), c0_, T_, mask(), disk_, solver_).trace;
}

ScalarField NeumannOperator::reverse(const BoundaryTrace& h) const { return reversal_.apply(h); }

ScalarField NeumannOperator::apply(const ScalarField& f) const {
  const ScalarField g = restrict_to_domain(f);
  return g - reverse(measure(g));
}

ScalarField apply_K(const ScalarField& f, const SpeedField& c0, double T, const DomainMask& mask,
                    const CompactSupport& support) {
  require_support(f, support, "apply_K");
  return NeumannOperator(c0, T, mask).apply(f);
}

Reconstruction reconstruct(const BoundaryTrace& h, const NeumannOperator& op, double tol, int m_max,
                           const ScalarField* truth) {
  if (!(tol > 0.0)) throw PreconditionError("reconstruct: tol must be positive");
  if (m_max < 1) throw PreconditionError("reconstruct: m_max must be at least 1");
  if (std::abs(h.duration() - op.T()) > h.dt() * (1.0 + 1e-9))
    throw PreconditionError("reconstruct: trace duration differs from T by more than one step");
  const DomainMask& mask = op.mask();

  ReconstructionReport report;
  ScalarField g = op.reverse(h);
  ScalarField sum = g;
  double g_norm = h1_norm(g, mask);
  report.iterate_norms.push_back(g_norm);
  report.partial_sum_norms.push_back(g_norm);

  int increases = 0;
  int m = 0;
  if (g_norm == 0.0) {
    report.stop_reason = StopReason::tolerance;
  } else {
    while (true) {
      ++m;
      g = op.apply(g);
      sum += g;
      const double next = h1_norm(g, mask);
      const double s = h1_norm(sum, mask);
      increases = next > g_norm ? increases + 1 : 0;
      g_norm = next;
      report.iterate_norms.push_back(next);
      report.partial_sum_norms.push_back(s);
      if (next <= tol * s) {
        report.stop_reason = StopReason::tolerance;
        break;
      }
      if (increases >= 3) {
        report.stop_reason = StopReason::divergence;
        break;
      }
      if (m >= m_max) {
        report.stop_reason = StopReason::max_terms;
        break;
      }
    }
  }
  report.m_used = m;

  if (m >= 1) {
    const double prev = report.iterate_norms[std::size_t(m) - 1];
    const double q = prev > 0.0 ? g_norm / prev : std::numeric_limits<double>::infinity();
    report.tail_bound = q < 1.0 ? q / (1.0 - q) * g_norm : std::numeric_limits<double>::infinity();
  }
  if (truth) {
    require_grid(*truth, mask.grid(), "reconstruct");
    const double ref = h1_norm(*truth, mask);
    const double err = h1_norm(sum - *truth, mask);
    report.rel_error_h1 = ref > 0.0 ? err / ref : err;
  }
  return {std::move(sum), std::move(report)};
}

Reconstruction reconstruct(const BoundaryTrace& h, const SpeedField& c0, double T, const DomainMask& mask,
                           double tol, int m_max, const ScalarField* truth) {
  return reconstruct(h, NeumannOperator(c0, T, mask), tol, m_max, truth);
}

namespace {

void validate_perturbation(const ScalarField& psi, const CompactSupport& support) {
  require_support(psi, support, "perturbation");
  if (std::abs(psi.max_abs() - 1.0) > 1e-12)
    throw PreconditionError("perturbation profile must have unit sup-norm");
}

// Largest c_max over the family, so that every run shares one time grid.
double family_max_speed(const SpeedField& c0, const std::vector<double>& eps) {
  double vmax = c0.c_max();
  for (double e : eps)
    if (std::abs(e) <= kMaxPerturbation) vmax = std::max(vmax, c0.c_max() * (1.0 + std::abs(e)));
  return vmax;
}

template <class Task>
void run_indexed(std::size_t n, int threads, Task&& task) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) task(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<StabilityRow> stability_experiment(const ScalarField& f, const SpeedField& c0,
                                               const PerturbationSpec& pert, const DomainMask& mask,
                                               const CompactSupport& support, const StabilitySetup& setup) {
  require_support(f, support, "stability_experiment");
  validate_perturbation(pert.psi, support);
  if (!std::isfinite(hs_norm_compact(f, support, 3)))
    throw HypothesisError("stability_experiment: source has no finite H3 norm");

  SolverOptions solver;
  solver.cfl_safety = setup.cfl_safety;
  solver.max_speed = family_max_speed(c0, pert.eps);
  double psi_c0 = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) psi_c0 = std::max(psi_c0, std::abs(c0[k] * pert.psi[k]));

  std::vector<StabilityRow> rows(pert.eps.size());
  run_indexed(rows.size(), setup.threads, [&](std::size_t i) {
    StabilityRow& row = rows[i];
    row.eps = pert.eps[i];
    row.ratio = std::numeric_limits<double>::quiet_NaN();
    if (std::abs(row.eps) > kMaxPerturbation) {
      row.stop_reason = "invalid: |eps| exceeds the C1-smallness bound";
      return;
    }
    std::optional<SpeedField> c;
    try {
      c.emplace(c0.perturbed(pert.psi, row.eps));
    } catch (const Error& e) {
      row.stop_reason = std::string("invalid: ") + e.what();
      return;
    }
    for (std::size_t k = 0; k < f.size(); ++k) row.sup_c_diff = std::max(row.sup_c_diff, std::abs((*c)[k] - c0[k]));

    const SimulationRun run = propagate_free(f, *c, setup.T, mask, support, solver);
    row.trace_h1 = trace_h1_norm(run.trace);
    const NeumannOperator op(c0, setup.T, mask, solver);
    const Reconstruction rec = reconstruct(run.trace, op, setup.tol, setup.m_max);
    row.err_h1 = h1_norm(rec.field - f, mask);
    row.m_used = rec.report.m_used;
    row.stop_reason = to_string(rec.report.stop_reason);
    if (row.eps != 0.0 && row.trace_h1 > 0.0)
      row.ratio = row.err_h1 / (std::abs(row.eps) * psi_c0 * std::sqrt(row.trace_h1));
  });
  return rows;
}

std::vector<AmplitudeRow> amplitude_sweep(const ScalarField& f, const SpeedField& c0, const ScalarField& psi,
                                          double eps, const std::vector<double>& amplitudes,
                                          const DomainMask& mask, const CompactSupport& support,
                                          const StabilitySetup& setup) {
  require_support(f, support, "amplitude_sweep");
  validate_perturbation(psi, support);
  if (std::abs(eps) > kMaxPerturbation) throw PreconditionError("amplitude_sweep: |eps| exceeds 0.05");
  SolverOptions solver;
  solver.cfl_safety = setup.cfl_safety;
  solver.max_speed = family_max_speed(c0, {eps});
  const SpeedField c = c0.perturbed(psi, eps);

  std::vector<AmplitudeRow> rows(amplitudes.size());
  run_indexed(rows.size(), setup.threads, [&](std::size_t i) {
    const ScalarField fa = amplitudes[i] * f;
    const SimulationRun run = propagate_free(fa, c, setup.T, mask, support, solver);
    const NeumannOperator op(c0, setup.T, mask, solver);
    const Reconstruction rec = reconstruct(run.trace, op, setup.tol, setup.m_max);
    AmplitudeRow& row = rows[i];
    row.amplitude = amplitudes[i];
    row.eps = eps;
    row.trace_h1 = trace_h1_norm(run.trace);
    row.err_h1 = h1_norm(rec.field - fa, mask);
    row.ratio_sqrt = row.trace_h1 > 0.0 ? row.err_h1 / std::sqrt(row.trace_h1) : 0.0;
    row.ratio_linear = row.trace_h1 > 0.0 ? row.err_h1 / row.trace_h1 : 0.0;
  });
  return rows;
}

void write_stability_csv(const std::vector<StabilityRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "eps,sup_c_diff,trace_h1,err_h1,ratio,m_used,stop_reason\n";
  for (const auto& r : rows)
    out << format_number(r.eps) << ',' << format_number(r.sup_c_diff) << ',' << format_number(r.trace_h1) << ','
        << format_number(r.err_h1) << ',' << format_number(r.ratio) << ',' << r.m_used << ',' << r.stop_reason
        << '\n';
}

void write_amplitude_csv(const std::vector<AmplitudeRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "amplitude,eps,trace_h1,err_h1,ratio_sqrt,ratio_linear\n";
  for (const auto& r : rows)
    out << format_number(r.amplitude) << ',' << format_number(r.eps) << ',' << format_number(r.trace_h1) << ','
        << format_number(r.err_h1) << ',' << format_number(r.ratio_sqrt) << ',' << format_number(r.ratio_linear)
        << '\n';
}

ScalarField random_smooth_field(const Grid2D& grid, const CompactSupport& support, std::uint64_t seed,
                                int n_bumps) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  struct Bump {
    Vec2 center;
    double radius;
    double amplitude;
  };
  std::vector<Bump> bumps;
  for (int b = 0; b < n_bumps; ++b) {
    const double radius = support.radius * (0.25 + 0.2 * unit(rng));
    const double reach = 0.98 * support.radius - radius;
    const double r = reach * std::sqrt(unit(rng));
    const double a = 2.0 * kPi * unit(rng);
    bumps.push_back({support.center + Vec2{r * std::cos(a), r * std::sin(a)}, radius, gauss(rng)});
  }
  return ScalarField::sample(grid, [&](Vec2 p) {
    double v = 0.0;
    for (const auto& b : bumps) v += b.amplitude * bump_profile(p, b.center, b.radius);
    return v;
  });
}

double operator_norm_estimate(const NeumannOperator& op, const ScalarField& start, int iters) {
  if (iters < 5) throw PreconditionError("operator_norm_estimate: at least 5 iterations");
  const DomainMask& mask = op.mask();
  ScalarField x = op.restrict_to_domain(start);
  double nx = h1_norm(x, mask);
  if (nx == 0.0) throw PreconditionError("operator_norm_estimate: zero start field");
  x *= 1.0 / nx;
  double factor = 0.0;
  for (int it = 0; it < iters; ++it) {
    ScalarField y = op.apply(x);
    factor = h1_norm(y, mask);  // |x| = 1
    if (factor == 0.0) return 0.0;
    x = (1.0 / factor) * std::move(y);
  }
  return factor;
}

double operator_norm_estimate(const SpeedField& c0, double T, const DomainMask& mask,
                              const CompactSupport& support, int iters, std::uint64_t seed) {
  const NeumannOperator op(c0, T, mask);
  return operator_norm_estimate(op, random_smooth_field(mask.grid(), support, seed), iters);
}

}  // namespace patlab
