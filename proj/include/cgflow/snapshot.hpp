#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cgflow/grid.hpp"

namespace cgflow {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

struct Snapshot {
  Grid grid;
  double t = 0.0;
  std::vector<RealField> fields;
};

// Bit-exact snapshot format: ASCII header
//   CGFLOW1\n
//   dims d N1 [N2 [N3]]\n
//   fields k\n
//   t <decimal>\n
// then k * prod(N_i) little-endian IEEE-754 doubles, row-major,
// component-major.
void write_snapshot(const std::filesystem::path& path,
                    const std::vector<RealField>& fields, double t);
Snapshot read_snapshot(const std::filesystem::path& path);

}  // namespace cgflow
