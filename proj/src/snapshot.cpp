#include "cgflow/snapshot.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cgflow {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

void write_le_double(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) {
    b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_le_double(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_snapshot(const std::filesystem::path& path,
                    const std::vector<RealField>& fields, double t) {
  if (fields.empty()) throw Error("snapshot needs at least one field");
  const Grid& g = fields[0].grid();
  for (const auto& f : fields) {
    require_same_grid(f.grid(), g, "write_snapshot");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open snapshot file for writing: " + path.string());
  out << "CGFLOW1\n";
  out << "dims " << g.dims;
  for (int a = 0; a < g.dims; ++a) out << " " << g.modes[a];
  out << "\n";
  out << "fields " << fields.size() << "\n";
  out << "t " << format_double(t) << "\n";
  for (const auto& f : fields) {
    for (std::size_t i = 0; i < f.size(); ++i) write_le_double(out, f[i]);
  }
  if (!out) throw Error("snapshot write failed: " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open snapshot file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "CGFLOW1") {
    throw Error("bad snapshot magic in " + path.string());
  }
  if (!std::getline(in, line)) throw Error("truncated snapshot header");
  std::istringstream dims_line(line);
  std::string word;
  int d = 0;
  dims_line >> word >> d;
  if (word != "dims" || d < 1 || d > 3) throw Error("bad snapshot dims line");
  std::vector<int> modes(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    if (!(dims_line >> modes[static_cast<std::size_t>(a)])) {
      throw Error("bad snapshot dims line");
    }
  }
  if (!std::getline(in, line)) throw Error("truncated snapshot header");
  std::istringstream fields_line(line);
  std::size_t k = 0;
  fields_line >> word >> k;
  if (word != "fields" || k == 0) throw Error("bad snapshot fields line");
  if (!std::getline(in, line)) throw Error("truncated snapshot header");
  if (line.rfind("t ", 0) != 0) throw Error("bad snapshot time line");
  double t = 0.0;
  {
    const std::string tv = line.substr(2);
    auto res = std::from_chars(tv.data(), tv.data() + tv.size(), t);
    if (res.ec != std::errc()) throw Error("bad snapshot time value");
  }

  Snapshot snap;
  snap.grid = Grid::make(modes);
  snap.t = t;
  const std::size_t n = snap.grid.point_count();
  for (std::size_t f = 0; f < k; ++f) {
    RealField field(snap.grid);
    for (std::size_t i = 0; i < n; ++i) field[i] = read_le_double(in);
    if (!in) throw Error("snapshot payload truncated: " + path.string());
    snap.fields.push_back(std::move(field));
  }
  return snap;
}

}  // namespace cgflow
