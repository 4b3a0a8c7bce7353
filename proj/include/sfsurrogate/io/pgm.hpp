#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "sfsurrogate/data/field.hpp"
#include "sfsurrogate/error.hpp"

namespace sfs::io {

enum class Normalization {
  global,     // caller-supplied [lo, hi] shared across images
  per_image,  // this image's [min, max]
  symmetric,  // [-m, m] with m = max |v|, so 0 maps to 128
};

struct GrayImage {
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
  bool operator==(const GrayImage&) const = default;
};

inline std::uint8_t quantize(double v, double lo, double hi) {
  if (!(hi > lo)) return 0;
  const double q = std::round((v - lo) / (hi - lo) * 255.0);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

/// A constant image quantizes to 0 under per-image normalization; a zero
/// image quantizes to 128 under symmetric normalization.
inline GrayImage to_gray(const data::Field2D& f, Normalization mode, double lo = 0.0,
                         double hi = 1.0) {
  GrayImage img{f.rows(), f.cols(), std::vector<std::uint8_t>(f.size())};
  const auto v = f.values();
  if (mode == Normalization::symmetric) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    for (std::size_t i = 0; i < v.size(); ++i) {
      img.pixels[i] = m > 0.0 ? quantize(v[i], -m, m) : 128;
    }
    return img;
  }
  if (mode == Normalization::per_image) {
    lo = f.min();
    hi = f.max();
  }
  for (std::size_t i = 0; i < v.size(); ++i) img.pixels[i] = quantize(v[i], lo, hi);
  return img;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "P5\n" << img.cols << ' ' << img.rows << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char ch;
    while (is.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(is, skip);
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!t.empty()) break;
      } else {
        t += ch;
      }
    }
    if (t.empty()) throw FormatError(path.string() + ": truncated PGM header");
    return t;
  };
  if (token() != "P5") throw FormatError(path.string() + " is not a binary PGM");
  GrayImage img;
  try {
    img.cols = std::stoul(token());
    img.rows = std::stoul(token());
    if (std::stoul(token()) != 255) throw FormatError(path.string() + ": only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw FormatError(path.string() + ": malformed PGM header");
  }
  img.pixels.resize(img.rows * img.cols);
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(is.gcount()) != img.pixels.size()) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  return img;
}

}  // namespace sfs::io
