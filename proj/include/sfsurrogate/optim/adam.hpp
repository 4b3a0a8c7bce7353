#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sfsurrogate/nn/parameters.hpp"

namespace sfs::optim {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates, one buffer per parameter tensor.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static AdamState for_parameters(const nn::ParameterSet& params) {
    AdamState s;
    for (const auto& p : params.parameters()) {
      s.m.emplace_back(p.tensor.numel(), 0.0);
      s.v.emplace_back(p.tensor.numel(), 0.0);
    }
    return s;
  }
};

/// One bias-corrected Adam update using the gradients currently stored on
/// the parameters.
inline void adam_step(nn::ParameterSet& params, AdamState& state, const AdamOptions& opt) {
  const auto& list = params.parameters();
  if (state.m.size() != list.size() || state.v.size() != list.size()) {
    throw ShapeError("Adam state tracks " + std::to_string(state.m.size()) +
                     " tensors, model has " + std::to_string(list.size()));
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (state.m[i].size() != list[i].tensor.numel() ||
        state.v[i].size() != list[i].tensor.numel()) {
      throw ShapeError("Adam state shape mismatch for " + list[i].name);
    }
  }
  if (state.step == std::numeric_limits<std::uint64_t>::max()) {
    throw StateError("Adam step counter overflow");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < list.size(); ++i) {
    Tensor param = list[i].tensor;
    auto theta = param.mutable_data();
    auto g = param.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g[k];
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      theta[k] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
    param.check_all_finite("adam_step(" + list[i].name + ")");
  }
}

}  // namespace sfs::optim
