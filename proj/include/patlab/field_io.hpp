#pragma once

#include <filesystem>
#include <string>

#include "patlab/geometry.hpp"

namespace patlab {

/// Writes a 16-bit binary PGM (P5, maxval 65535, big-endian samples, top
/// row = largest y) and a sidecar `<path>.json` carrying the grid metadata
/// and the value range mapped onto [0, 65535].
void write_pgm(const ScalarField& field, const std::filesystem::path& path);

/// Reads a PGM written by write_pgm back, using its sidecar. Values are
/// quantised to the 16-bit range.
ScalarField read_pgm(const std::filesystem::path& path);

/// CSV with header `x,y,value`, one row per node, i fastest.
void write_field_csv(const ScalarField& field, const std::filesystem::path& path);

/// CSV with header `t,theta,value`, one row per (time, angle), angle fastest.
void write_trace_csv(const BoundaryTrace& trace, const std::filesystem::path& path);
BoundaryTrace read_trace_csv(const std::filesystem::path& path, double radius);

/// Shortest round-trip decimal representation, used by every CSV/JSON writer
/// so that reruns are byte-identical.
std::string format_number(double v);

}  // namespace patlab
