#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sfsurrogate/data/dataset_io.hpp"
#include "sfsurrogate/nn/parameters.hpp"
#include "sfsurrogate/optim/adam.hpp"

namespace sfs::harness {

inline constexpr std::string_view checkpoint_magic = "SFSM1";
inline constexpr std::uint16_t checkpoint_version = 1;

struct CheckpointInfo {
  std::string config_digest;
  std::uint64_t epoch = 0;
};

namespace detail {

inline void write_tensors(io::BinaryWriter& w, const std::vector<nn::NamedTensor>& list) {
  w.u32(static_cast<std::uint32_t>(list.size()));
  for (const auto& [name, t] : list) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u64(d);
    w.f64s(t.data());
  }
}

/// Reads a tensor list and checks names and shapes against `expected`
/// before anything is overwritten.
inline std::vector<std::vector<double>> read_tensors(io::BinaryReader& r,
                                                     const std::vector<nn::NamedTensor>& expected,
                                                     const char* what) {
  const auto n = r.u32();
  if (n != expected.size()) {
    throw ShapeError(std::string("checkpoint holds ") + std::to_string(n) + " " + what +
                     ", model has " + std::to_string(expected.size()));
  }
  std::vector<std::vector<double>> values;
  for (const auto& [name, t] : expected) {
    const std::string got = r.str();
    if (got != name) throw ShapeError("checkpoint tensor \"" + got + "\" where model expects \"" + name + "\"");
    const auto rank = r.u32();
    if (rank > 8) throw FormatError("checkpoint tensor " + got + " has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    if (shape != t.shape()) {
      throw ShapeError("checkpoint tensor " + name + " has shape " + shape_str(shape) +
                       ", model expects " + shape_str(t.shape()));
    }
    values.emplace_back(t.numel());
    r.f64s(values.back());
  }
  return values;
}

}  // namespace detail

/// SFSM1: magic, version u16, config digest, epoch u64, parameters, buffers,
/// then the Adam step count and moments. Tensors carry name, rank, extents
/// (u64) and little-endian f64 values.
inline void save_checkpoint(const std::filesystem::path& path, const nn::ParameterSet& params,
                            const optim::AdamState& adam, const CheckpointInfo& info) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  io::BinaryWriter w(os);
  w.bytes(checkpoint_magic.data(), checkpoint_magic.size());
  w.u16(checkpoint_version);
  w.str(info.config_digest);
  w.u64(info.epoch);
  detail::write_tensors(w, params.parameters());
  detail::write_tensors(w, params.buffers());
  w.u64(adam.step);
  w.u32(static_cast<std::uint32_t>(adam.m.size()));
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    w.u64(adam.m[i].size());
    w.f64s(adam.m[i]);
    w.f64s(adam.v[i]);
  }
  os.flush();
  if (!os) throw IoError("failed writing " + path.string());
}

/// Restores parameters, buffers and (when `adam` is given) optimizer state.
/// Nothing is modified unless the whole file validates.
inline CheckpointInfo load_checkpoint(const std::filesystem::path& path, nn::ParameterSet& params,
                                      optim::AdamState* adam = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  io::BinaryReader r(is, "checkpoint " + path.string());
  r.expect_magic(checkpoint_magic);
  if (const auto v = r.u16(); v != checkpoint_version) {
    throw FormatError("unsupported checkpoint version " + std::to_string(v));
  }
  CheckpointInfo info;
  info.config_digest = r.str(256);
  info.epoch = r.u64();
  auto pvals = detail::read_tensors(r, params.parameters(), "parameters");
  auto bvals = detail::read_tensors(r, params.buffers(), "buffers");
  optim::AdamState state;
  state.step = r.u64();
  const auto count = r.u32();
  if (count != params.parameters().size()) {
    throw ShapeError("checkpoint Adam state tracks " + std::to_string(count) + " tensors");
  }
  for (std::size_t i = 0; i < count; ++i) {
    const auto n = r.u64();
    if (n != params.parameters()[i].tensor.numel()) {
      throw ShapeError("checkpoint Adam moments for " + params.parameters()[i].name + " have " +
                       std::to_string(n) + " values");
    }
    state.m.emplace_back(n);
    state.v.emplace_back(n);
    r.f64s(state.m.back());
    r.f64s(state.v.back());
  }
  if (!r.at_end()) throw FormatError("checkpoint " + path.string() + " has trailing bytes");

  auto commit = [](const std::vector<nn::NamedTensor>& list, std::vector<std::vector<double>>& vals) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      Tensor t = list[i].tensor;
      std::copy(vals[i].begin(), vals[i].end(), t.mutable_data().begin());
    }
  };
  commit(params.parameters(), pvals);
  commit(params.buffers(), bvals);
  if (adam) *adam = std::move(state);
  return info;
}

}  // namespace sfs::harness
