#include "patlab/field_io.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace patlab {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_number: conversion failed");
  return std::string(buf, end);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

void write_pgm(const ScalarField& field, const std::filesystem::path& path) {
  const Grid2D& g = field.grid();
  const double lo = field.min();
  const double hi = field.max();
  const double span = hi > lo ? hi - lo : 1.0;

  auto out = open_out(path, true);
  out << "P5\n" << g.width() << ' ' << g.height() << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(g.width()) * 2);
  for (int j = g.height() - 1; j >= 0; --j) {
    for (int i = 0; i < g.width(); ++i) {
      const double q = std::round((field(i, j) - lo) / span * 65535.0);
      const auto s = static_cast<std::uint16_t>(std::clamp(q, 0.0, 65535.0));
      row[2 * static_cast<std::size_t>(i)] = static_cast<unsigned char>(s >> 8);
      row[2 * static_cast<std::size_t>(i) + 1] = static_cast<unsigned char>(s & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }

  nlohmann::ordered_json meta;
  meta["nx"] = g.nx();
  meta["ny"] = g.ny();
  meta["h"] = g.h();
  meta["origin"] = {g.origin().x, g.origin().y};
  meta["value_min"] = lo;
  meta["value_max"] = hi;
  meta["maxval"] = 65535;
  meta["row_order"] = "top_is_max_y";
  open_out(sidecar(path)) << meta.dump(2) << '\n';
}

ScalarField read_pgm(const std::filesystem::path& path) {
  std::ifstream meta_in(sidecar(path));
  if (!meta_in) throw Error("missing PGM sidecar for " + path.string());
  const auto meta = nlohmann::json::parse(meta_in);
  Grid2D g(meta.at("nx").get<int>(), meta.at("ny").get<int>(), meta.at("h").get<double>(),
           {meta.at("origin")[0].get<double>(), meta.at("origin")[1].get<double>()});
  const double lo = meta.at("value_min").get<double>();
  const double hi = meta.at("value_max").get<double>();
  const double span = hi > lo ? hi - lo : 1.0;

  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P5" || w != g.width() || h != g.height() || maxval != 65535)
    throw Error("unexpected PGM header in " + path.string());

  ScalarField field(g);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 2);
  for (int j = h - 1; j >= 0; --j) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw Error("truncated PGM " + path.string());
    for (int i = 0; i < w; ++i) {
      const unsigned s = (unsigned(row[2 * std::size_t(i)]) << 8) | row[2 * std::size_t(i) + 1];
      field(i, j) = lo + span * s / 65535.0;
    }
  }
  return field;
}

void write_field_csv(const ScalarField& field, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "x,y,value\n";
  const Grid2D& g = field.grid();
  for (int j = 0; j < g.height(); ++j)
    for (int i = 0; i < g.width(); ++i) {
      const Vec2 p = g.node(i, j);
      out << format_number(p.x) << ',' << format_number(p.y) << ',' << format_number(field(i, j))
          << '\n';
    }
}

void write_trace_csv(const BoundaryTrace& trace, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "t,theta,value\n";
  for (int n = 0; n < trace.n_times(); ++n)
    for (int k = 0; k < trace.n_theta(); ++k)
      out << format_number(trace.time(n)) << ',' << format_number(trace.theta(k)) << ','
          << format_number(trace.at(n, k)) << '\n';
}

BoundaryTrace read_trace_csv(const std::filesystem::path& path, double radius) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "t,theta,value") throw Error("unexpected trace CSV header in " + path.string());

  std::vector<double> times, values;
  int n_theta = 0;
  double first_t = 0.0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    const double t = std::stod(a);
    if (first) {
      first_t = t;
      first = false;
    }
    if (t == first_t) ++n_theta;
    if (times.empty() || times.back() != t) times.push_back(t);
    values.push_back(std::stod(c));
  }
  if (n_theta == 0 || times.size() < 2 || values.size() != times.size() * std::size_t(n_theta))
    throw Error("malformed trace CSV " + path.string());
  BoundaryTrace trace(static_cast<int>(times.size()), n_theta, times[1] - times[0], radius);
  std::copy(values.begin(), values.end(), trace.values().begin());
  return trace;
}

}  // namespace patlab
