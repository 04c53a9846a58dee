#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "patlab/config.hpp"
#include "patlab/geometry.hpp"

namespace patlab {

/// Everything a subcommand needs, built from a validated config.
struct Scenario {
  ScenarioConfig config;
  Grid2D grid;
  DomainMask mask;
  CompactSupport support;
  SpeedField c;   // speed described by the config
  SpeedField c0;  // constant background
  ScalarField f;  // Gaussian source, zero outside K
  double T = 0.0;
  double max_exit_time = 0.0;  // only filled when T was derived from rays
};

/// Small box around M for ray and boundary work (no wave propagation).
Grid2D geometry_grid(const ScenarioConfig& config);

/// Sizes the grid for wave propagation over [0, T], resolving T = "auto"
/// from the ray scan first. Trapped rays raise HypothesisError.
Scenario build_scenario(const ScenarioConfig& config);

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  int threads = 1;
  bool emit_gnuplot = false;
  std::optional<int> snapshot_stride;  // overrides solver.snapshot_stride
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitHypothesis = 2;

const std::vector<std::string>& subcommand_names();

/// Runs one subcommand and writes its artifacts plus manifest.json into
/// options.out. Returns 0, 1 (error; artifacts other than the manifest are
/// removed) or 2 (a hypothesis fails; the report is kept). Messages go to
/// `log`.
int run_subcommand(const std::string& name, const RunOptions& options, std::ostream& log);

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quick contract checks on a coarse version of the configured geometry.
std::vector<SelftestCheck> run_selftest(const ScenarioConfig& config);

}  // namespace patlab
