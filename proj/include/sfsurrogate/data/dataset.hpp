#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include "sfsurrogate/data/design.hpp"
#include "sfsurrogate/data/field.hpp"
#include "sfsurrogate/data/oracle.hpp"
#include "sfsurrogate/data/rasterize.hpp"

namespace sfs::data {

struct Sample {
  DesignPoint design;
  InputStack input;
  Field2D target;
  double max_peeq = 0.0;
};

inline Sample generate_sample(const DesignPoint& design) {
  Sample s;
  s.design = design;
  s.input = rasterize_inputs(design);
  s.target = oracle_strain_field(design);
  s.max_peeq = s.target.max();
  return s;
}

/// Samples in the order of `designs`, regardless of worker count.
inline std::vector<Sample> build_dataset(const std::vector<DesignPoint>& designs,
                                         unsigned workers = 1) {
  std::vector<Sample> out(designs.size());
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(designs.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < designs.size(); ++i) out[i] = generate_sample(designs[i]);
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < designs.size(); i += workers) out[i] = generate_sample(designs[i]);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

/// Desk-scale subset: every `stride`-th binder force level starting at the
/// first (stride 4 keeps 0.25, 1.25, 2.25, 3.25, 4.25 MPa; 270 designs).
inline std::vector<DesignPoint> binder_force_subset(const std::vector<DesignPoint>& designs,
                                                    std::size_t stride) {
  if (stride < 1) throw ConfigError("binder force stride must be >= 1");
  std::vector<DesignPoint> out;
  for (const auto& d : designs) {
    if ((d.bf_index - 1) % stride == 0) out.push_back(d);
  }
  return out;
}

/// Index partition of a dataset.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline std::size_t test_count_for(std::size_t n, double test_ratio) {
  if (!(test_ratio > 0.0 && test_ratio < 1.0)) {
    throw ConfigError("test ratio must lie strictly between 0 and 1");
  }
  const auto test = static_cast<std::size_t>(std::lround(static_cast<double>(n) * test_ratio));
  if (test == 0 || test >= n) {
    throw ConfigError("split of " + std::to_string(n) + " samples leaves an empty side");
  }
  return test;
}

/// Seeded uniform shuffle; the first part trains, the last `test_ratio` tests.
inline Split split_interpolation(std::size_t n, std::uint64_t seed, double test_ratio = 0.10) {
  const std::size_t test = test_count_for(n, test_ratio);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 engine(seed);
  std::shuffle(order.begin(), order.end(), engine);
  Split s;
  s.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(test));
  s.test.assign(order.end() - static_cast<std::ptrdiff_t>(test), order.end());
  return s;
}

/// Unshuffled cut: the trailing `test_ratio` of the enumeration order tests,
/// so the last geometries are never trained on. Requires increasing ordinals.
inline Split split_extrapolation(const std::vector<DesignPoint>& designs,
                                 double test_ratio = 0.10) {
  for (std::size_t i = 1; i < designs.size(); ++i) {
    if (designs[i].ordinal <= designs[i - 1].ordinal) {
      throw ConfigError("extrapolation split needs samples in enumeration order (ordinal " +
                        std::to_string(designs[i].ordinal) + " follows " +
                        std::to_string(designs[i - 1].ordinal) + ")");
    }
  }
  const std::size_t n = designs.size();
  const std::size_t test = test_count_for(n, test_ratio);
  Split s;
  for (std::size_t i = 0; i < n; ++i) (i < n - test ? s.train : s.test).push_back(i);
  return s;
}

inline std::vector<DesignPoint> designs_of(const std::vector<Sample>& samples) {
  std::vector<DesignPoint> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.design);
  return out;
}

}  // namespace sfs::data
