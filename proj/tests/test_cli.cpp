#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "patlab/config.hpp"
#include "patlab/experiments.hpp"

using namespace patlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json default_config() {
  std::ifstream in(PATLAB_DEFAULT_CONFIG);
  return json::parse(in);
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("patlab_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

int run(const std::string& name, const fs::path& config, const fs::path& out, std::string* log = nullptr,
        bool gnuplot = false, std::optional<int> stride = std::nullopt) {
  std::ostringstream os;
  RunOptions opt;
  opt.config = config;
  opt.out = out;
  opt.threads = 2;
  opt.emit_gnuplot = gnuplot;
  opt.snapshot_stride = stride;
  const int code = run_subcommand(name, opt, os);
  if (log) *log = os.str();
  return code;
}

std::set<std::string> files_in(const fs::path& dir) {
  std::set<std::string> s;
  for (const auto& e : fs::directory_iterator(dir)) s.insert(e.path().filename().string());
  return s;
}

json coarse_config() {
  json j = default_config();
  j["grid"]["h"] = 0.04;
  return j;
}

}  // namespace

TEST_CASE("selftest on the bundled config") {
  TempDir t("selftest");
  CHECK(run("selftest", PATLAB_DEFAULT_CONFIG, t.path / "out") == kExitOk);
  const json report = read_json(t.path / "out" / "selftest.json");
  CHECK(report["failed"] == 0);
  CHECK(report["checks"].size() >= 5);
  const json manifest = read_json(t.path / "out" / "manifest.json");
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["subcommand"] == "selftest");
}

TEST_CASE("stability on the bundled config writes four rows and a manifest") {
  TempDir t("stability");
  const fs::path out = t.path / "out";
  CHECK(run("stability", PATLAB_DEFAULT_CONFIG, out) == kExitOk);
  std::ifstream in(out / "stability.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("eps,", 0) == 0);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);

  const json manifest = read_json(out / "manifest.json");
  for (const char* key : {"config_hash", "versions", "wall_time_s", "artifacts", "config", "status"})
    CHECK(manifest.contains(key));
  CHECK(manifest["config_hash"] == hash_hex(config_hash(load_config(PATLAB_DEFAULT_CONFIG))));
  for (const auto& a : manifest["artifacts"]) CHECK(fs::exists(out / a.get<std::string>()));
}

TEST_CASE("a missing field is named and fails the run") {
  TempDir t("missing");
  json j = default_config();
  j["domain"].erase("R_M");
  std::string log;
  CHECK(run("forward", write_config(t.path, j), t.path / "out", &log) == kExitError);
  CHECK(log.find("domain.R_M") != std::string::npos);
  const json manifest = read_json(t.path / "out" / "manifest.json");
  CHECK(manifest["exit_code"] == 1);
  CHECK(manifest["config_errors"].dump().find("domain.R_M") != std::string::npos);
  CHECK(files_in(t.path / "out") == std::set<std::string>{"manifest.json"});

  j = default_config();
  j["grid"]["bogus"] = 1;
  j["source"]["width"] = -1.0;
  try {
    parse_config(j);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("grid.bogus") != std::string::npos);
    CHECK(what.find("source.width") != std::string::npos);
  }
  CHECK(run("forward", t.path / "does_not_exist.json", t.path / "out2") == kExitError);
  CHECK(run("nonsense", PATLAB_DEFAULT_CONFIG, t.path / "out3") == kExitError);
}

TEST_CASE("reruns are byte-identical") {
  TempDir t("rerun");
  const fs::path cfg = write_config(t.path, coarse_config());
  for (const std::string name : {"forward", "geodesics", "convexity", "carleman", "reconstruct"}) {
    CAPTURE(name);
    const fs::path a = t.path / (name + "_a"), b = t.path / (name + "_b");
    REQUIRE(run(name, cfg, a) == kExitOk);
    REQUIRE(run(name, cfg, b) == kExitOk);
    const auto files = files_in(a);
    CHECK(files == files_in(b));
    for (const std::string& f : files) {
      if (f == "manifest.json") continue;
      CAPTURE(f);
      CHECK(slurp(a / f) == slurp(b / f));
    }
    json ma = read_json(a / "manifest.json"), mb = read_json(b / "manifest.json");
    ma.erase("wall_time_s");
    mb.erase("wall_time_s");
    ma.erase("config_path");
    mb.erase("config_path");
    CHECK(ma == mb);
  }
}

TEST_CASE("the config hash tracks every field") {
  const json base = default_config();
  const auto h0 = config_hash(parse_config(base));
  CHECK(config_hash(parse_config(base)) == h0);
  // Reformatting and key order do not matter; defaults written out do not either.
  json same = json::parse(base.dump());
  same["solver"]["cfl_safety"] = 0.9;
  CHECK(config_hash(parse_config(same)) == h0);

  std::set<std::uint64_t> seen{h0};
  auto changed = [&](auto edit) {
    json j = base;
    edit(j);
    const auto h = config_hash(parse_config(j));
    CHECK(h != h0);
    CHECK(seen.insert(h).second);
  };
  changed([](json& j) { j["grid"]["h"] = 0.021; });
  changed([](json& j) { j["domain"]["R_K"] = 0.75; });
  changed([](json& j) { j["speed"]["bumps"][0]["amplitude"] = 0.051; });
  changed([](json& j) { j["source"]["center"][1] = 0.0; });
  changed([](json& j) { j["time"]["T"] = 4.0; });
  changed([](json& j) { j["time"]["factor"] = 2.3; });
  changed([](json& j) { j["solver"]["snapshot_stride"] = 5; });
  changed([](json& j) { j["reconstruction"]["m_max"] = 21; });
  changed([](json& j) { j["perturbation"]["eps"].push_back(0.03); });
  changed([](json& j) { j["weight"]["x0"][0] = 2.5; });
  changed([](json& j) { j["geodesics"]["n_dirs"] = 73; });
  changed([](json& j) { j["seeds"]["random"] = 1; });
}

TEST_CASE("hypothesis failures exit with 2 and keep the report") {
  TempDir t("hypothesis");
  json j = coarse_config();
  j["weight"]["x0"] = {0.2, 0.1};  // inside M: the weight has a critical point
  CHECK(run("carleman", write_config(t.path, j), t.path / "carleman") == kExitHypothesis);
  CHECK(fs::exists(t.path / "carleman" / "carleman.json"));
  CHECK(read_json(t.path / "carleman" / "manifest.json")["exit_code"] == 2);

  j = coarse_config();
  j["speed"]["ramp"] = {{"start", 0.75}, {"width", 0.4}, {"amplitude", 0.5}};
  CHECK(run("convexity", write_config(t.path, j), t.path / "convexity") == kExitHypothesis);
  const json report = read_json(t.path / "convexity" / "convexity.json");
  CHECK(report["formula_convex"] == false);
}

TEST_CASE("gnuplot scripts and snapshots on request") {
  TempDir t("extras");
  const fs::path cfg = write_config(t.path, coarse_config());
  CHECK(run("forward", cfg, t.path / "plain") == kExitOk);
  CHECK(run("forward", cfg, t.path / "extras", nullptr, true, 40) == kExitOk);
  const auto plain = files_in(t.path / "plain"), extras = files_in(t.path / "extras");
  int gp = 0, snaps = 0;
  for (const auto& f : plain) CHECK(f.find(".gp") == std::string::npos);
  for (const auto& f : extras) {
    if (f.ends_with(".gp")) ++gp;
    if (f.rfind("snapshot_", 0) == 0 && f.ends_with(".pgm")) ++snaps;
  }
  CHECK(gp == 1);
  CHECK(snaps >= 2);
  CHECK(fs::exists(t.path / "extras" / "energy.gp"));
}

TEST_CASE("command-line front end") {
  TempDir t("binary");
  const std::string cli = PATLAB_CLI;
  auto sh = [](const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  CHECK(sh(cli + " selftest --config " + std::string(PATLAB_DEFAULT_CONFIG) + " --out " + (t.path / "a").string()) ==
        0);
  CHECK(sh(cli + " selftest --out " + (t.path / "b").string()) == 1);
  CHECK(sh(cli + " frobnicate") == 1);
  CHECK(sh(cli + " selftest --config " + std::string(PATLAB_DEFAULT_CONFIG) + " --out " + (t.path / "c").string() +
           " --threads zero") == 1);
}
