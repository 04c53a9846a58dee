#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "patlab/errors.hpp"
#include "patlab/geometry.hpp"

namespace patlab {

/// Schema violations, one message per offending field ("domain.R_M: missing").
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct GridConfig {
  double h = 0.0;
  std::optional<int> nx;  // cell counts; sized from the padding rule when absent
  std::optional<int> ny;
};

struct DomainConfig {
  double R_M = 0.0;
  double R_K = 0.0;
  std::optional<int> N_theta;
};

struct SpeedConfig {
  double background = 1.0;
  std::vector<SpeedBump> bumps;
  std::optional<RadialRamp> ramp;
};

struct SourceConfig {
  Vec2 center;
  double width = 0.1;
  double amplitude = 1.0;
};

struct TimeConfig {
  std::optional<double> T;  // absent: factor x max exit time
  double factor = 2.2;
};

struct SolverConfig {
  double cfl_safety = 0.9;
  int snapshot_stride = 0;
};

struct ReconstructionConfig {
  double tol = 1e-3;
  int m_max = 20;
};

struct PerturbationConfig {
  Vec2 center;
  double radius = 0.0;
  std::vector<double> eps;
  std::vector<double> amplitudes;
};

struct GeodesicsConfig {
  int n_points = 50;
  int n_dirs = 72;
  double dt = 0.005;
};

struct ScenarioConfig {
  GridConfig grid;
  DomainConfig domain;
  SpeedConfig speed;
  SourceConfig source;
  TimeConfig time;
  SolverConfig solver;
  ReconstructionConfig reconstruction;
  PerturbationConfig perturbation;
  Vec2 weight_x0;
  GeodesicsConfig geodesics;
  std::uint64_t seed = 0;
};

/// Strict parse: unknown keys, missing keys, wrong types and inconsistent
/// radii are all collected and thrown together as ConfigError.
ScenarioConfig parse_config(const nlohmann::json& doc);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Canonical form with every default filled in; two documents describing
/// the same scenario map to the same JSON.
nlohmann::json to_json(const ScenarioConfig& config);

/// FNV-1a (64 bit) of the canonical dump (sorted keys, no whitespace).
std::uint64_t config_hash(const ScenarioConfig& config);
std::string hash_hex(std::uint64_t hash);

}  // namespace patlab
