#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "patlab/forward_solver.hpp"
#include "patlab/time_reversal.hpp"

namespace patlab {

enum class StopReason { tolerance, max_terms, divergence };
const char* to_string(StopReason reason);

struct ReconstructionReport {
  std::vector<double> iterate_norms;      // |K^m A h|_H1, m = 0..m_used
  std::vector<double> partial_sum_norms;  // |sum_{j<=m} K^j A h|_H1
  int m_used = 0;
  StopReason stop_reason = StopReason::tolerance;
  /// q / (1 - q) |g_m| with q the last iterate ratio; infinite when q >= 1.
  double tail_bound = 0.0;
  std::optional<double> rel_error_h1;
};

struct Reconstruction {
  ScalarField field;
  ReconstructionReport report;
};

/// K = 1 - A Lambda for a fixed (c0, T, M). Fields are restricted to the
/// open disk M before the forward leg.
class NeumannOperator {
 public:
  NeumannOperator(const SpeedField& c0, double T, const DomainMask& mask, SolverOptions solver = {},
                  TimeReversalOptions reversal = {});

  BoundaryTrace measure(const ScalarField& f) const;  // Lambda_{c0}
  ScalarField reverse(const BoundaryTrace& h) const;  // A_{c0}
  ScalarField apply(const ScalarField& f) const;      // K_{c0}
  ScalarField restrict_to_domain(const ScalarField& f) const;

  double T() const { return T_; }
  const DomainMask& mask() const { return reversal_.mask(); }
  const SpeedField& speed() const { return c0_; }

 private:
  SpeedField c0_;
  double T_;
  SolverOptions solver_;
  TimeReversal reversal_;
  CompactSupport disk_;
};

/// f - A_{c0} Lambda_{c0} f for f supported in K.
ScalarField apply_K(const ScalarField& f, const SpeedField& c0, double T, const DomainMask& mask,
                    const CompactSupport& support);

/// Truncated Neumann series sum_m K^m A h. Stops when |g_m| <= tol |sum|,
/// after m_max terms, or when |g_m| grows three times in a row.
Reconstruction reconstruct(const BoundaryTrace& h, const NeumannOperator& op, double tol, int m_max,
                           const ScalarField* truth = nullptr);
Reconstruction reconstruct(const BoundaryTrace& h, const SpeedField& c0, double T, const DomainMask& mask,
                           double tol, int m_max, const ScalarField* truth = nullptr);

/// c - c0 = eps c0 psi with psi supported in K and max |psi| = 1.
struct PerturbationSpec {
  ScalarField psi;
  std::vector<double> eps;
};

inline constexpr double kMaxPerturbation = 0.05;

struct StabilityRow {
  double eps = 0.0;
  double sup_c_diff = 0.0;
  double trace_h1 = 0.0;
  double err_h1 = 0.0;
  double ratio = 0.0;  // err / (eps |c0 psi|_inf sqrt(trace_h1)); NaN at eps = 0
  int m_used = 0;
  std::string stop_reason;  // or "invalid: ..." when the row's hypotheses fail
};

struct StabilitySetup {
  double T = 0.0;
  double tol = 1e-3;
  int m_max = 30;
  int threads = 1;
  double cfl_safety = 0.9;
};

/// One row per eps: simulate with c_eps = c0 (1 + eps psi), reconstruct with
/// c0, compare with f. Rows are independent and may run on several threads.
std::vector<StabilityRow> stability_experiment(const ScalarField& f, const SpeedField& c0,
                                               const PerturbationSpec& pert, const DomainMask& mask,
                                               const CompactSupport& support, const StabilitySetup& setup);

struct AmplitudeRow {
  double amplitude = 0.0;
  double eps = 0.0;
  double trace_h1 = 0.0;
  double err_h1 = 0.0;
  double ratio_sqrt = 0.0;    // err / sqrt(trace_h1)
  double ratio_linear = 0.0;  // err / trace_h1
};

/// Fixed eps, source scaled by each amplitude.
std::vector<AmplitudeRow> amplitude_sweep(const ScalarField& f, const SpeedField& c0, const ScalarField& psi,
                                          double eps, const std::vector<double>& amplitudes,
                                          const DomainMask& mask, const CompactSupport& support,
                                          const StabilitySetup& setup);

void write_stability_csv(const std::vector<StabilityRow>& rows, const std::filesystem::path& path);
void write_amplitude_csv(const std::vector<AmplitudeRow>& rows, const std::filesystem::path& path);

/// Sum of a few Gaussian bumps with random centres, widths and signs, all
/// vanishing outside K.
ScalarField random_smooth_field(const Grid2D& grid, const CompactSupport& support, std::uint64_t seed,
                                int n_bumps = 5);

/// Power iteration for the H1 growth factor of K. Returns |K x| / |x| at
/// the last iterate.
double operator_norm_estimate(const NeumannOperator& op, const ScalarField& start, int iters);
double operator_norm_estimate(const SpeedField& c0, double T, const DomainMask& mask,
                              const CompactSupport& support, int iters, std::uint64_t seed);

}  // namespace patlab
