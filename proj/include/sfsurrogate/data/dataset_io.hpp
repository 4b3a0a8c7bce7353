#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sfsurrogate/data/dataset.hpp"

namespace sfs::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written little-endian from native memory");

/// Little-endian primitive writer over an output stream.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void bytes(const void* p, std::size_t n) {
    os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os_) throw IoError("write failed");
  }
  void u16(std::uint16_t v) { bytes(&v, sizeof v); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void f64s(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw FormatError(what_ + " is truncated");
  }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return get<double>(); }
  void f64s(std::span<double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  std::string str(std::size_t max_len = 1 << 20) {
    const auto n = u32();
    if (n > max_len) throw FormatError(what_ + " has an implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void expect_magic(std::string_view magic) {
    std::string got(magic.size(), '\0');
    bytes(got.data(), got.size());
    if (got != magic) {
      throw FormatError(what_ + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
  }
  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  template <typename T>
  T get() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }

  std::istream& is_;
  std::string what_;
};

inline constexpr std::string_view dataset_magic = "SFDS1";
inline constexpr std::uint16_t dataset_version = 1;

/// SFDS1 layout: magic, version u16, count u32, then per sample ordinal u32,
/// r1 r2 r3 bf t as f64, the 3 x 199 x 199 input stack (channel-major) and
/// the 50 x 50 target (row-major). All little-endian.
inline void write_dataset(const std::filesystem::path& path, const std::vector<data::Sample>& samples) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  BinaryWriter w(os);
  w.bytes(dataset_magic.data(), dataset_magic.size());
  w.u16(dataset_version);
  w.u32(static_cast<std::uint32_t>(samples.size()));
  for (const auto& s : samples) {
    w.u32(static_cast<std::uint32_t>(s.design.ordinal));
    for (double v : {s.design.r1, s.design.r2, s.design.r3, s.design.bf, s.design.t}) w.f64(v);
    w.f64s(s.input.values);
    w.f64s(s.target.values());
  }
  os.flush();
  if (!os) throw IoError("failed writing " + path.string());
}

inline std::vector<data::Sample> read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  BinaryReader r(is, "dataset " + path.string());
  r.expect_magic(dataset_magic);
  if (const auto v = r.u16(); v != dataset_version) {
    throw FormatError("unsupported dataset version " + std::to_string(v));
  }
  const std::uint32_t count = r.u32();
  std::vector<data::Sample> out(count);
  for (auto& s : out) {
    const std::uint32_t ordinal = r.u32();
    std::array<double, 5> scalars{};
    for (auto& v : scalars) v = r.f64();
    s.design = data::design_from_scalars(ordinal, scalars[0], scalars[1], scalars[2], scalars[3],
                                         scalars[4]);
    r.f64s(s.input.values);
    std::vector<double> target(data::GeometrySpec::output_grid * data::GeometrySpec::output_grid);
    r.f64s(target);
    s.target = data::Field2D(data::GeometrySpec::output_grid, data::GeometrySpec::output_grid,
                             std::move(target));
    s.max_peeq = s.target.max();
  }
  if (!r.at_end()) throw FormatError("dataset " + path.string() + " has trailing bytes");
  return out;
}

}  // namespace sfs::io
