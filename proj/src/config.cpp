#include "patlab/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace patlab {

namespace {

using nlohmann::json;

std::string join_problems(const std::vector<std::string>& problems) {
  std::string msg = "invalid config:";
  for (const auto& p : problems) msg += "\n  " + p;
  return msg;
}

/// Walks the document and records every violation instead of stopping at
/// the first one.
class Reader {
 public:
  std::vector<std::string> problems;

  void fail(const std::string& path, const std::string& what) { problems.push_back(path + ": " + what); }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  /// Flags keys of `obj` outside `allowed`.
  void known_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
      if (!ok.count(key)) fail(join(path, key), "unknown field");
  }

  const json* object(const json& parent, const std::string& path, const char* key, bool required = true) {
    const std::string p = join(path, key);
    if (!parent.contains(key)) {
      if (required) fail(p, "missing");
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      fail(p, "expected an object");
      return nullptr;
    }
    return &v;
  }

  std::optional<double> number(const json& obj, const std::string& path, const char* key, bool required = true) {
    const std::string p = join(path, key);
    if (!obj.contains(key)) {
      if (required) fail(p, "missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_number()) {
      fail(p, "expected a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      fail(p, "not finite");
      return std::nullopt;
    }
    return d;
  }

  std::optional<long long> integer(const json& obj, const std::string& path, const char* key,
                                   bool required = true) {
    const std::string p = join(path, key);
    if (!obj.contains(key)) {
      if (required) fail(p, "missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(p, "expected an integer");
      return std::nullopt;
    }
    return v.get<long long>();
  }

  std::optional<Vec2> point(const json& obj, const std::string& path, const char* key, bool required = true) {
    const std::string p = join(path, key);
    if (!obj.contains(key)) {
      if (required) fail(p, "missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(p, "expected [x, y]");
      return std::nullopt;
    }
    return Vec2{v[0].get<double>(), v[1].get<double>()};
  }

  std::optional<std::vector<double>> numbers(const json& obj, const std::string& path, const char* key,
                                             bool required = true) {
    const std::string p = join(path, key);
    if (!obj.contains(key)) {
      if (required) fail(p, "missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_array()) {
      fail(p, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        fail(p + "[" + std::to_string(i) + "]", "expected a number");
        return std::nullopt;
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  template <class T, class Pred>
  void check(const std::optional<T>& v, const std::string& path, Pred pred, const char* what) {
    if (v && !pred(*v)) fail(path, what);
  }
};

template <class T, class U>
void assign(T& dst, const std::optional<U>& v) {
  if (v) dst = static_cast<T>(*v);
}

bool positive(double v) { return v > 0.0; }

json point_json(Vec2 p) { return json::array({p.x, p.y}); }

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error(join_problems(problems)), problems_(std::move(problems)) {}

ScenarioConfig parse_config(const json& doc) {
  Reader r;
  ScenarioConfig cfg;
  if (!doc.is_object()) throw ConfigError({"<root>: expected an object"});
  r.known_keys(doc, "", {"grid", "domain", "speed", "source", "time", "solver", "reconstruction",
                         "perturbation", "weight", "geodesics", "seeds"});

  if (const json* g = r.object(doc, "", "grid")) {
    r.known_keys(*g, "grid", {"h", "nx", "ny"});
    const auto h = r.number(*g, "grid", "h");
    r.check(h, "grid.h", positive, "must be positive");
    assign(cfg.grid.h, h);
    const auto nx = r.integer(*g, "grid", "nx", false);
    const auto ny = r.integer(*g, "grid", "ny", false);
    r.check(nx, "grid.nx", [](long long v) { return v >= 8 && v <= 1 << 14; }, "must lie in [8, 16384]");
    r.check(ny, "grid.ny", [](long long v) { return v >= 8 && v <= 1 << 14; }, "must lie in [8, 16384]");
    if (nx.has_value() != ny.has_value()) r.fail("grid", "nx and ny must be given together");
    if (nx) cfg.grid.nx = int(*nx);
    if (ny) cfg.grid.ny = int(*ny);
  }

  if (const json* d = r.object(doc, "", "domain")) {
    r.known_keys(*d, "domain", {"R_M", "R_K", "N_theta"});
    const auto rm = r.number(*d, "domain", "R_M");
    const auto rk = r.number(*d, "domain", "R_K");
    r.check(rm, "domain.R_M", positive, "must be positive");
    r.check(rk, "domain.R_K", positive, "must be positive");
    if (rm && rk && !(*rk < *rm)) r.fail("domain.R_K", "must be smaller than domain.R_M");
    assign(cfg.domain.R_M, rm);
    assign(cfg.domain.R_K, rk);
    const auto nt = r.integer(*d, "domain", "N_theta", false);
    r.check(nt, "domain.N_theta", [](long long v) { return v >= 8; }, "must be at least 8");
    if (nt) cfg.domain.N_theta = int(*nt);
  }
  if (cfg.grid.h > 0.0 && cfg.domain.R_M > 0.0 && cfg.grid.h > cfg.domain.R_M / 8.0)
    r.fail("grid.h", "too coarse: need at least 8 cells across domain.R_M");

  const double R_K = cfg.domain.R_K;
  auto inside_K = [&](Vec2 c, double radius) { return R_K <= 0.0 || norm(c) + radius <= R_K * (1.0 + 1e-12); };

  if (const json* s = r.object(doc, "", "speed")) {
    r.known_keys(*s, "speed", {"background", "bumps", "ramp"});
    const auto bg = r.number(*s, "speed", "background");
    r.check(bg, "speed.background", positive, "must be positive");
    assign(cfg.speed.background, bg);
    if (s->contains("bumps")) {
      const json& bumps = s->at("bumps");
      if (!bumps.is_array()) {
        r.fail("speed.bumps", "expected an array");
      } else {
        for (std::size_t i = 0; i < bumps.size(); ++i) {
          const std::string p = "speed.bumps[" + std::to_string(i) + "]";
          if (!bumps[i].is_object()) {
            r.fail(p, "expected an object");
            continue;
          }
          r.known_keys(bumps[i], p, {"center", "radius", "amplitude"});
          SpeedBump b;
          const auto c = r.point(bumps[i], p, "center");
          const auto rad = r.number(bumps[i], p, "radius");
          const auto amp = r.number(bumps[i], p, "amplitude");
          r.check(rad, p + ".radius", positive, "must be positive");
          r.check(amp, p + ".amplitude", [](double a) { return a > -1.0; }, "must exceed -1");
          assign(b.center, c);
          assign(b.radius, rad);
          assign(b.amplitude, amp);
          if (c && rad && !inside_K(*c, *rad)) r.fail(p, "support must lie inside domain.R_K");
          cfg.speed.bumps.push_back(b);
        }
      }
    } else {
      r.fail("speed.bumps", "missing");
    }
    if (const json* ramp = r.object(*s, "speed", "ramp", false)) {
      r.known_keys(*ramp, "speed.ramp", {"start", "width", "amplitude"});
      RadialRamp rr;
      const auto st = r.number(*ramp, "speed.ramp", "start");
      const auto w = r.number(*ramp, "speed.ramp", "width");
      const auto a = r.number(*ramp, "speed.ramp", "amplitude");
      r.check(st, "speed.ramp.start", [](double v) { return v >= 0.0; }, "must be non-negative");
      r.check(w, "speed.ramp.width", positive, "must be positive");
      r.check(a, "speed.ramp.amplitude", [](double v) { return v > -1.0; }, "must exceed -1");
      assign(rr.start, st);
      assign(rr.width, w);
      assign(rr.amplitude, a);
      cfg.speed.ramp = rr;
    }
  }

  if (const json* s = r.object(doc, "", "source")) {
    r.known_keys(*s, "source", {"center", "width", "amplitude"});
    const auto c = r.point(*s, "source", "center");
    const auto w = r.number(*s, "source", "width");
    const auto a = r.number(*s, "source", "amplitude");
    r.check(w, "source.width", positive, "must be positive");
    if (c && R_K > 0.0 && norm(*c) >= R_K) r.fail("source.center", "must lie inside domain.R_K");
    assign(cfg.source.center, c);
    assign(cfg.source.width, w);
    assign(cfg.source.amplitude, a);
  }

  if (const json* t = r.object(doc, "", "time")) {
    r.known_keys(*t, "time", {"T", "factor"});
    if (!t->contains("T")) {
      r.fail("time.T", "missing");
    } else if (t->at("T").is_string()) {
      if (t->at("T").get<std::string>() != "auto") r.fail("time.T", "expected a number or \"auto\"");
    } else {
      const auto T = r.number(*t, "time", "T");
      r.check(T, "time.T", positive, "must be positive");
      cfg.time.T = T;
    }
    const auto f = r.number(*t, "time", "factor", false);
    r.check(f, "time.factor", [](double v) { return v >= 1.0; }, "must be at least 1");
    assign(cfg.time.factor, f);
  }

  if (const json* s = r.object(doc, "", "solver")) {
    r.known_keys(*s, "solver", {"cfl_safety", "snapshot_stride"});
    const auto cfl = r.number(*s, "solver", "cfl_safety");
    r.check(cfl, "solver.cfl_safety", [](double v) { return v > 0.0 && v < 1.0; }, "must lie in (0, 1)");
    assign(cfg.solver.cfl_safety, cfl);
    const auto st = r.integer(*s, "solver", "snapshot_stride", false);
    r.check(st, "solver.snapshot_stride", [](long long v) { return v >= 0; }, "must be non-negative");
    assign(cfg.solver.snapshot_stride, st);
  }

  if (const json* s = r.object(doc, "", "reconstruction")) {
    r.known_keys(*s, "reconstruction", {"tol", "m_max"});
    const auto tol = r.number(*s, "reconstruction", "tol");
    const auto m = r.integer(*s, "reconstruction", "m_max");
    r.check(tol, "reconstruction.tol", positive, "must be positive");
    r.check(m, "reconstruction.m_max", [](long long v) { return v >= 1 && v <= 1000; }, "must lie in [1, 1000]");
    assign(cfg.reconstruction.tol, tol);
    assign(cfg.reconstruction.m_max, m);
  }

  if (const json* s = r.object(doc, "", "perturbation")) {
    r.known_keys(*s, "perturbation", {"bump", "eps", "amplitudes"});
    if (const json* b = r.object(*s, "perturbation", "bump")) {
      r.known_keys(*b, "perturbation.bump", {"center", "radius"});
      const auto c = r.point(*b, "perturbation.bump", "center");
      const auto rad = r.number(*b, "perturbation.bump", "radius");
      r.check(rad, "perturbation.bump.radius", positive, "must be positive");
      if (c && rad && !inside_K(*c, *rad)) r.fail("perturbation.bump", "support must lie inside domain.R_K");
      assign(cfg.perturbation.center, c);
      assign(cfg.perturbation.radius, rad);
    }
    const auto eps = r.numbers(*s, "perturbation", "eps");
    if (eps) {
      for (std::size_t i = 0; i < eps->size(); ++i)
        if ((*eps)[i] < 0.0) r.fail("perturbation.eps[" + std::to_string(i) + "]", "must be non-negative");
      cfg.perturbation.eps = *eps;
    }
    const auto amps = r.numbers(*s, "perturbation", "amplitudes", false);
    if (amps) {
      for (std::size_t i = 0; i < amps->size(); ++i)
        if (!((*amps)[i] > 0.0)) r.fail("perturbation.amplitudes[" + std::to_string(i) + "]", "must be positive");
      cfg.perturbation.amplitudes = *amps;
    }
  }

  if (const json* w = r.object(doc, "", "weight")) {
    r.known_keys(*w, "weight", {"x0"});
    assign(cfg.weight_x0, r.point(*w, "weight", "x0"));
  }

  if (const json* g = r.object(doc, "", "geodesics")) {
    r.known_keys(*g, "geodesics", {"n_points", "n_dirs", "dt"});
    const auto np = r.integer(*g, "geodesics", "n_points");
    const auto nd = r.integer(*g, "geodesics", "n_dirs");
    const auto dt = r.number(*g, "geodesics", "dt");
    r.check(np, "geodesics.n_points", [](long long v) { return v >= 1; }, "must be at least 1");
    r.check(nd, "geodesics.n_dirs", [](long long v) { return v >= 1; }, "must be at least 1");
    r.check(dt, "geodesics.dt", positive, "must be positive");
    assign(cfg.geodesics.n_points, np);
    assign(cfg.geodesics.n_dirs, nd);
    assign(cfg.geodesics.dt, dt);
  }

  if (const json* s = r.object(doc, "", "seeds")) {
    r.known_keys(*s, "seeds", {"random"});
    const auto seed = r.integer(*s, "seeds", "random");
    r.check(seed, "seeds.random", [](long long v) { return v >= 0; }, "must be non-negative");
    assign(cfg.seed, seed);
  }

  if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open"});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  return parse_config(doc);
}

json to_json(const ScenarioConfig& c) {
  json grid = {{"h", c.grid.h}};
  if (c.grid.nx) grid["nx"] = *c.grid.nx;
  if (c.grid.ny) grid["ny"] = *c.grid.ny;
  json domain = {{"R_M", c.domain.R_M}, {"R_K", c.domain.R_K}};
  if (c.domain.N_theta) domain["N_theta"] = *c.domain.N_theta;
  json bumps = json::array();
  for (const auto& b : c.speed.bumps)
    bumps.push_back({{"center", point_json(b.center)}, {"radius", b.radius}, {"amplitude", b.amplitude}});
  json speed = {{"background", c.speed.background}, {"bumps", bumps}};
  if (c.speed.ramp)
    speed["ramp"] = {{"start", c.speed.ramp->start}, {"width", c.speed.ramp->width},
                     {"amplitude", c.speed.ramp->amplitude}};
  json time = {{"factor", c.time.factor}};
  if (c.time.T)
    time["T"] = *c.time.T;
  else
    time["T"] = "auto";
  json pert = {{"bump", {{"center", point_json(c.perturbation.center)}, {"radius", c.perturbation.radius}}},
               {"eps", c.perturbation.eps},
               {"amplitudes", c.perturbation.amplitudes}};
  return {
      {"grid", grid},
      {"domain", domain},
      {"speed", speed},
      {"source",
       {{"center", point_json(c.source.center)}, {"width", c.source.width}, {"amplitude", c.source.amplitude}}},
      {"time", time},
      {"solver", {{"cfl_safety", c.solver.cfl_safety}, {"snapshot_stride", c.solver.snapshot_stride}}},
      {"reconstruction", {{"tol", c.reconstruction.tol}, {"m_max", c.reconstruction.m_max}}},
      {"perturbation", pert},
      {"weight", {{"x0", point_json(c.weight_x0)}}},
      {"geodesics", {{"n_points", c.geodesics.n_points}, {"n_dirs", c.geodesics.n_dirs}, {"dt", c.geodesics.dt}}},
      {"seeds", {{"random", c.seed}}},
  };
}

std::uint64_t config_hash(const ScenarioConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace patlab
