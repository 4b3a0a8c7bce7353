#include <gtest/gtest.h>

#include <cmath>

#include "sfsurrogate/gradcheck.hpp"
#include "sfsurrogate/nn/blocks.hpp"
#include "sfsurrogate/nn/mlp.hpp"
#include "sfsurrogate/nn/unet.hpp"
#include "support.hpp"

using namespace sfs;
using namespace sfs::nn;
using sfs::test::projection;
using sfs::test::random_tensor;

namespace {

void fill_all(ParameterSet& params, double v) {
  for (auto& p : params.parameters()) {
    Tensor t = p.tensor;
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), v);
  }
}

UNetConfig eighth() {
  UNetConfig c;
  c.width_multiplier = 0.125;
  return c;
}

}  // namespace

TEST(Mlp, RequiresSixHiddenLayers) {
  MlpConfig c;
  c.hidden_widths = {16};
  EXPECT_THROW(Mlp{c}, ConfigError);
  c.hidden_widths = {4, 4, 4, 0, 4, 4};
  EXPECT_THROW(Mlp{c}, ConfigError);
}

TEST(Mlp, ZeroParametersGiveZeroOutput) {
  Mlp m;
  fill_all(m.parameters(), 0.0);
  Tape tape(Tape::Mode::inference);
  Tensor y = m.forward(tape, random_tensor({5, 3}, 1));
  ASSERT_EQ(y.shape(), (Shape{5, 1}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, UnitChainPassesPositiveInputThrough) {
  MlpConfig c;
  c.hidden_widths = {1, 1, 1, 1, 1, 1};
  Mlp m(c);
  for (auto& p : m.parameters().parameters()) {
    Tensor t = p.tensor;
    const double v = p.name.ends_with(".weight") ? 1.0 : 0.0;
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), v);
  }
  Tape tape(Tape::Mode::inference);
  EXPECT_EQ(m.forward(tape, Tensor(Shape{1, 3}, std::vector<double>{2.0, 0.0, 0.0})).item(), 2.0);
  EXPECT_EQ(m.forward(tape, Tensor(Shape{1, 3}, std::vector<double>{-2.0, 0.0, 0.0})).item(), 0.0);
}

TEST(Mlp, IdenticalRowsGiveIdenticalOutputs) {
  Mlp m;
  m.init_parameters(3);
  Tensor x(Shape{4, 3}, std::vector<double>{0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1, 0.2, 0.3});
  Tape tape(Tape::Mode::inference);
  Tensor y = m.forward(tape, x);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(y[i], y[0]);
}

TEST(Mlp, ParameterCountAndInputModes) {
  MlpConfig c;
  EXPECT_EQ(Mlp(c).parameters().parameter_count(), Mlp::expected_parameter_count(c));
  // 3*64+64 + 64*128+128 + 128*256+256 + 256*256+256 + 256*128+128 + 128*64+64 + 64+1
  EXPECT_EQ(Mlp::expected_parameter_count(c), 148609u);
  c.input_mode = MlpInputMode::radii_bf_t;
  Mlp five(c);
  Tape tape(Tape::Mode::inference);
  EXPECT_EQ(five.forward(tape, Tensor(Shape{2, 5})).shape(), (Shape{2, 1}));
  EXPECT_THROW(five.forward(tape, Tensor(Shape{2, 3})), ShapeError);
}

TEST(SeBlock, ZeroedStagesAddHalf) {
  ParameterSet params;
  SeBlock se(params, "se", 32);
  fill_all(params, 0.0);
  Tape tape(Tape::Mode::inference);
  Tensor u = random_tensor({2, 32, 3, 5}, 4);
  Tensor v = se.forward(tape, u);
  for (std::size_t i = 0; i < u.numel(); ++i) EXPECT_EQ(v[i], u[i] + 0.5);
  Tensor z = se.forward(tape, Tensor(Shape{1, 32, 2, 2}, 0.0));
  for (double x : z.data()) EXPECT_EQ(x, 0.5);
}

TEST(SeBlock, ExcitationIsConstantPerChannel) {
  ParameterSet params;
  SeBlock se(params, "se", 16, 4);
  params.initialize(5);
  Tape tape(Tape::Mode::inference);
  Tensor u = random_tensor({2, 16, 4, 7}, 6);
  Tensor v = se.forward(tape, u);
  ASSERT_EQ(v.shape(), u.shape());
  const std::size_t plane = 28;
  for (std::size_t bc = 0; bc < 32; ++bc) {
    const double e0 = v[bc * plane] - u[bc * plane];
    EXPECT_GT(e0, 0.0);
    EXPECT_LT(e0, 1.0);
    for (std::size_t k = 1; k < plane; ++k) EXPECT_NEAR(v[bc * plane + k] - u[bc * plane + k], e0, 1e-12);
  }
}

TEST(SeBlock, HiddenWidthFloorsAtOne) {
  EXPECT_EQ(SeBlock::hidden_width(512, 16), 32u);
  EXPECT_EQ(SeBlock::hidden_width(64, 16), 4u);
  EXPECT_EQ(SeBlock::hidden_width(8, 16), 1u);
  EXPECT_THROW(SeBlock::hidden_width(8, 0), ConfigError);
}

TEST(SeBlock, RejectsChannelMismatch) {
  ParameterSet params;
  SeBlock se(params, "se", 8);
  Tape tape;
  EXPECT_THROW(se.forward(tape, Tensor(Shape{1, 4, 2, 2})), ShapeError);
}

TEST(ResSeBlock, ZeroedInnerPathAddsHalf) {
  ParameterSet params;
  ResSeBlock block(params, "res", 8);
  fill_all(params, 0.0);
  Tensor x = random_tensor({2, 8, 5, 5}, 7, 1.0, true);
  Tape tape;
  Tensor y = block.forward(tape, x, Phase::train);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i] + 0.5);
  Tensor loss = sum(tape, y);
  backward(loss, tape);
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(ResSeBlock, PreservesShape) {
  ParameterSet params;
  ResSeBlock block(params, "res", 12, 4);
  params.initialize(1);
  Tape tape(Tape::Mode::inference);
  EXPECT_EQ(block.forward(tape, random_tensor({3, 12, 7, 6}, 2), Phase::train).shape(), (Shape{3, 12, 7, 6}));
}

TEST(ResSeBlock, GradientCheckOverSeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ParameterSet params;
    ResSeBlock block(params, "res", 8, 4);
    params.initialize(seed);
    // Move gammas/betas and biases off their init values so every path is exercised.
    for (auto& p : params.parameters()) {
      if (p.name.ends_with(".weight")) continue;
      Tensor t = p.tensor;
      auto noise = sfs::test::normal_values(t.numel(), seed + 100, 0.3);
      for (std::size_t i = 0; i < t.numel(); ++i) t.mutable_data()[i] += noise[i];
    }
    Tensor x = random_tensor({2, 8, 4, 4}, seed);
    // A conv bias feeding train-phase batch norm is cancelled by the batch
    // mean, so its gradient is exactly zero and central differences see only
    // rounding noise. Those are checked separately.
    std::vector<Tensor> leaves{x}, cancelled;
    for (const auto& p : params.parameters()) {
      const bool before_bn = p.name.find(".conv") != std::string::npos && p.name.ends_with(".bias");
      (before_bn ? cancelled : leaves).push_back(p.tensor);
    }
    const auto w = projection(x.numel(), seed);
    auto f = [&](Tape& t) { return weighted_sum(t, block.forward(t, x, Phase::train), w); };
    auto r = finite_diff_grad_check(f, leaves);
    EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
    EXPECT_GT(r.checked, x.numel());
    ASSERT_EQ(cancelled.size(), 2u);
    for (auto& b : cancelled) {
      b.set_requires_grad(true);
      b.zero_grad();
    }
    Tape tape;
    Tensor loss = f(tape);
    backward(loss, tape);
    for (const auto& b : cancelled)
      for (double g : b.grad()) EXPECT_NEAR(g, 0.0, 1e-10);
  }
}

TEST(Init, SeedDeterminesParameters) {
  Mlp a, b, c;
  a.init_parameters(9);
  b.init_parameters(9);
  c.init_parameters(10);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.parameters().parameters().size(); ++i) {
    const auto& pa = a.parameters().parameters()[i].tensor;
    const auto& pb = b.parameters().parameters()[i].tensor;
    const auto& pc = c.parameters().parameters()[i].tensor;
    EXPECT_TRUE(std::equal(pa.data().begin(), pa.data().end(), pb.data().begin()));
    any_diff |= !std::equal(pa.data().begin(), pa.data().end(), pc.data().begin());
  }
  EXPECT_TRUE(any_diff);
}

TEST(Init, HeUniformBoundsZeroBiasesUnitGammas) {
  UNet net(eighth());
  net.init_parameters(4);
  const auto& params = net.parameters();
  for (std::size_t i = 0; i < params.parameters().size(); ++i) {
    const auto& [name, t] = params.parameters()[i];
    if (name.ends_with(".weight")) {
      const double bound = std::sqrt(6.0 / static_cast<double>(params.fan_in(i)));
      for (double v : t.data()) EXPECT_LE(std::abs(v), bound) << name;
    } else if (name.ends_with(".bias") || name.ends_with(".beta")) {
      for (double v : t.data()) EXPECT_EQ(v, 0.0) << name;
    } else if (name.ends_with(".gamma")) {
      for (double v : t.data()) EXPECT_EQ(v, 1.0) << name;
    }
  }
}

TEST(Init, FanInCountsKernelTaps) {
  ParameterSet params;
  ConvUnit conv(params, "c", ConvUnit::Kind::conv, 3, 8, ConvGeometry::square(5, 1, 2), false, false);
  ConvUnit up(params, "u", ConvUnit::Kind::transpose, 4, 2, ConvGeometry::square(3, 2, 0), false, false);
  EXPECT_EQ(params.fan_in(0), 3u * 25u);
  EXPECT_EQ(params.fan_in(2), 4u * 9u);
}

TEST(UNet, ShapeChainAndOutput) {
  UNet net(eighth());
  net.init_parameters(1);
  Tape tape(Tape::Mode::inference);
  Tensor y = net.forward(tape, random_tensor({1, 3, 199, 199}, 2), Phase::train);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 50, 50}));
  const std::vector<std::size_t> expected{199, 100, 50, 25, 25, 12, 12, 12, 12, 12, 25, 25, 25, 50, 50};
  EXPECT_EQ(net.last_stage_sizes(), expected);
  EXPECT_EQ(net.last_stage_sizes()[1], 100u);
  EXPECT_EQ(net.last_stage_sizes()[2], 50u);
  EXPECT_EQ(net.last_stage_sizes()[3], 25u);
  EXPECT_EQ(net.last_stage_sizes()[5], 12u);
}

TEST(UNet, DeterministicForward) {
  UNet net(eighth());
  net.init_parameters(1);
  Tensor x = random_tensor({1, 3, 199, 199}, 3);
  Tape t1(Tape::Mode::inference), t2(Tape::Mode::inference);
  Tensor a = net.forward(t1, x, Phase::train), b = net.forward(t2, x, Phase::train);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(UNet, RejectsWrongInputSize) {
  UNet net(eighth());
  Tape tape;
  EXPECT_THROW(net.forward(tape, Tensor(Shape{1, 3, 198, 198}), Phase::train), ShapeError);
  EXPECT_THROW(net.forward(tape, Tensor(Shape{1, 2, 199, 199}), Phase::train), ShapeError);
}

TEST(UNet, MistranscribedTableFailsConstruction) {
  UNetConfig c = eighth();
  c.down[1] = ConvGeometry::square(9, 2, 5);
  EXPECT_THROW(UNet{c}, ConfigError);
  c = eighth();
  c.up[6] = ConvGeometry::square(5, 2, 2);
  EXPECT_THROW(UNet{c}, ConfigError);
}

TEST(UNet, ParameterCountFromChannelTable) {
  // Independent recount for width 1/8 with concatenating skips.
  const std::size_t d[] = {8, 16, 32, 64, 64, 64, 64};
  const std::size_t dk[] = {1, 11, 8, 6, 3, 3, 3};
  const std::size_t u_out[] = {64, 64, 64, 32, 32, 16, 8, 1};
  const std::size_t uk[] = {3, 3, 3, 3, 3, 3, 6, 3};
  std::size_t n = 0, in = 3;
  for (int i = 0; i < 7; ++i) {
    n += in * d[i] * dk[i] * dk[i] + 3 * d[i];
    in = d[i];
  }
  const std::size_t se_hidden = 64 / 16;
  n += 6 * (2 * (64 * 64 * 9 + 3 * 64) + 2 * se_hidden * 64 + se_hidden + 64);
  for (int i = 0; i < 8; ++i) {
    if (i == 4) in += d[4];
    if (i == 7) in += d[2];
    n += in * u_out[i] * uk[i] * uk[i] + (i == 7 ? 1 : 3) * u_out[i];
    in = u_out[i];
  }
  UNet net(eighth());
  EXPECT_EQ(net.parameters().parameter_count(), n);
  EXPECT_EQ(UNet::expected_parameter_count(eighth()), n);
}

TEST(UNet, AdditiveSkipsAlsoProduceTheOutputShape) {
  UNetConfig c = eighth();
  c.skip = SkipMode::add;
  UNet net(c);
  net.init_parameters(2);
  Tape tape(Tape::Mode::inference);
  EXPECT_EQ(net.forward(tape, random_tensor({1, 3, 199, 199}, 1), Phase::train).shape(),
            (Shape{1, 1, 50, 50}));
}

TEST(UNet, BackwardReachesEveryParameter) {
  UNet net(eighth());
  net.init_parameters(6);
  net.parameters().zero_grad();
  Tape tape;
  Tensor y = net.forward(tape, random_tensor({2, 3, 199, 199}, 7), Phase::train);
  Tensor loss = mse_loss(tape, y, Tensor(Shape{2, 1, 50, 50}, 0.3));
  backward(loss, tape);
  for (const auto& [name, t] : net.parameters().parameters()) {
    double norm = 0.0;
    for (double g : t.grad()) norm += g * g;
    EXPECT_GT(norm, 0.0) << name;
  }
}
