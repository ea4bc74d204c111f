#pragma once

// Snapshot files and CSV output.
//
// Snapshot layout (all little-endian):
//   offset 0   uint32  format version (kSnapshotVersion)
//   offset 4   uint32  n_points
//   offset 8   float64 alpha
//   offset 16  float64 t
//   offset 24  float64 M (mass)
//   offset 32  float64[n] u, then float64[n] rho, then float64[n] e

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "falign/errors.hpp"
#include "falign/model.hpp"

namespace falign {

inline constexpr std::uint32_t kSnapshotVersion = 1;

struct SnapshotFile {
  State state;
  Field e;
  double mass = 0.0;
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_uint(const std::string& in, std::size_t& pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) throw FormatError("snapshot truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

inline double get_f64(const std::string& in, std::size_t& pos) { return std::bit_cast<double>(get_uint(in, pos, 8)); }

/// Write `content` to a sibling temporary and rename it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace detail

inline std::string encode_snapshot(const State& s, const Field& e) {
  s.u.check_same(s.rho);
  s.u.check_same(e);
  std::string out;
  out.reserve(32 + 24 * s.u.size());
  detail::put_u32(out, kSnapshotVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(s.u.size()));
  detail::put_f64(out, s.alpha);
  detail::put_f64(out, s.t);
  detail::put_f64(out, mass(s));
  for (const Field* f : {&s.u, &s.rho, &e})
    for (double v : f->samples()) detail::put_f64(out, v);
  return out;
}

inline SnapshotFile decode_snapshot(const std::string& bytes, std::size_t padding = 2) {
  std::size_t pos = 0;
  const auto version = static_cast<std::uint32_t>(detail::get_uint(bytes, pos, 4));
  if (version != kSnapshotVersion)
    throw FormatError("unsupported snapshot version " + std::to_string(version));
  const auto n = static_cast<std::size_t>(detail::get_uint(bytes, pos, 4));
  const double alpha = detail::get_f64(bytes, pos);
  const double t = detail::get_f64(bytes, pos);
  const double M = detail::get_f64(bytes, pos);
  if (bytes.size() != 32 + 24 * n) throw FormatError("snapshot size does not match header");
  const TorusGrid grid(n, padding);
  auto read_field = [&] {
    std::vector<double> v(n);
    for (double& x : v) x = detail::get_f64(bytes, pos);
    return Field(grid, std::move(v));
  };
  Field u = read_field();
  Field rho = read_field();
  Field e = read_field();
  return {State{std::move(u), std::move(rho), t, alpha}, std::move(e), M};
}

inline void save_snapshot(const std::filesystem::path& path, const State& s, const Field& e) {
  detail::write_atomic(path, encode_snapshot(s, e));
}

inline SnapshotFile load_snapshot(const std::filesystem::path& path, std::size_t padding = 2) {
  return decode_snapshot(detail::read_file(path), padding);
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(const std::vector<double>& row) {
    if (row.size() != header_.size()) throw Error("CSV row width does not match header");
    rows_.push_back(row);
  }

  std::size_t rows() const noexcept { return rows_.size(); }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
    out += '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_double(r[i]);
      out += '\n';
    }
    return out;
  }

  void write(const std::filesystem::path& path) const { detail::write_atomic(path, str()); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

}  // namespace falign
