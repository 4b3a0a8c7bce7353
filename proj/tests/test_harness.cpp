#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sfsurrogate/harness/checkpoint.hpp"
#include "sfsurrogate/harness/config.hpp"
#include "sfsurrogate/harness/experiment.hpp"
#include "sfsurrogate/harness/manifest.hpp"
#include "sfsurrogate/io/csv.hpp"
#include "sfsurrogate/io/digest.hpp"
#include "sfsurrogate/io/pgm.hpp"
#include "support.hpp"

using namespace sfs;
using namespace sfs::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "sfs_harness_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Twenty designs spread over the table, in ordinal order.
const fs::path& tiny_dataset() {
  static const fs::path path = [] {
    const auto all = data::enumerate_design_space();
    std::vector<data::DesignPoint> pick;
    for (std::size_t i = 0; i < all.size(); i += 54) pick.push_back(all[i]);
    const auto p = scratch("dataset") / "tiny.sfds";
    io::write_dataset(p, data::build_dataset(pick));
    return p;
  }();
  return path;
}

ExperimentConfig tiny_run(ModelKind model, const fs::path& out) {
  ExperimentConfig c;
  c.model = model;
  c.dataset = tiny_dataset();
  c.output_dir = out;
  c.epochs = model == ModelKind::mlp ? 30 : 1;
  c.batch_size = 6;
  c.eval_every = 10;
  c.width_multiplier = 0.125;
  c.seed = 5;
  return c;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
  ExperimentConfig c;
  EXPECT_EQ(c.batch_size, 54u);
  EXPECT_EQ(c.epochs, 8000u);
  EXPECT_EQ(c.learning_rate, 1e-3);
  c.model = ModelKind::mlp;
  c.task = Task::extrapolation;
  c.seed = 12;
  c.learning_rate = 3.0e-4;
  c.width_multiplier = 0.125;
  c.skip = nn::SkipMode::add;
  c.dataset = "data/set.sfds";
  c.output_dir = "out dir";
  EXPECT_EQ(ExperimentConfig::parse(c.serialize()), c);
}

TEST(Config, ParseCommentsWhitespaceAndErrors) {
  const auto c = ExperimentConfig::parse("# run\n\n  model = mlp \r\ntask=extrapolation\nepochs=7\n");
  EXPECT_EQ(c.model, ModelKind::mlp);
  EXPECT_EQ(c.task, Task::extrapolation);
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_THROW(ExperimentConfig::parse("epochs=0\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("batch_size=-3\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("epochs=12x\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("colour=blue\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("model=cnn\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("just words\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("test_ratio=1\n"), ConfigError);
}

TEST(Config, DigestIgnoresPlacementOnly) {
  ExperimentConfig a, b;
  b.output_dir = "elsewhere";
  b.workers = 4;
  b.dataset = "x.sfds";
  EXPECT_EQ(a.digest(), b.digest());
  b.seed = 1;
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 64u);
}

TEST(Config, Presets) {
  const auto s = preset("small", ModelKind::res_se_unet, Task::interpolation);
  EXPECT_EQ(s.width_multiplier, 0.125);
  EXPECT_EQ(s.epochs, 300u);
  EXPECT_EQ(s.bf_stride, 4u);
  EXPECT_EQ(preset("full", ModelKind::mlp, Task::interpolation).epochs, 8000u);
  EXPECT_EQ(preset("full", ModelKind::mlp, Task::extrapolation).epochs, 4000u);
  EXPECT_THROW(preset("huge", ModelKind::mlp, Task::interpolation), ConfigError);
}

TEST(Digest, KnownVectors) {
  EXPECT_EQ(io::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Csv, QuotingAndParsing) {
  EXPECT_EQ(io::csv_field("plain"), "plain");
  EXPECT_EQ(io::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(io::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  const auto rows = io::parse_csv("a,\"b,c\",\"d\"\"e\"\r\n1,2,\"line\r\nbreak\"\r\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b,c", "d\"e"}));
  EXPECT_EQ(rows[1][2], "line\r\nbreak");
}

TEST(Csv, WriterRoundTripsDoubles) {
  const auto path = scratch("csv") / "t.csv";
  const std::vector<double> values{0.1, -1.0 / 3.0, 6.02214076e23, 5e-324};
  {
    io::CsvWriter w(path, {"k", "v"});
    for (std::size_t i = 0; i < values.size(); ++i) w.row({"x," + std::to_string(i), io::format_double(values[i])});
    EXPECT_THROW(w.row({"only one"}), FormatError);
    w.close();
  }
  const auto rows = io::parse_csv(slurp(path));
  ASSERT_EQ(rows.size(), values.size() + 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    EXPECT_EQ(rows[i + 1][0], "x," + std::to_string(i));
    EXPECT_EQ(io::parse_double(rows[i + 1][1]), values[i]);
  }
  EXPECT_THROW(io::parse_double("1.5x"), FormatError);
}

TEST(Pgm, NormalizationExamples) {
  const data::Field2D flat(3, 3, 0.42), zero(4, 4, 0.0);
  const auto g = io::to_gray(flat, io::Normalization::per_image);
  for (auto p : g.pixels) EXPECT_EQ(p, g.pixels[0]);
  for (auto p : io::to_gray(zero, io::Normalization::symmetric).pixels) EXPECT_EQ(p, 128);
  data::Field2D ramp(1, 3, std::vector<double>{-2.0, 0.0, 2.0});
  const auto s = io::to_gray(ramp, io::Normalization::symmetric);
  EXPECT_EQ(s.pixels, (std::vector<std::uint8_t>{0, 128, 255}));
  const auto p = io::to_gray(data::Field2D(1, 3, std::vector<double>{1.0, 1.5, 2.0}), io::Normalization::per_image);
  EXPECT_EQ(p.pixels, (std::vector<std::uint8_t>{0, 128, 255}));
  EXPECT_EQ(io::quantize(5.0, 0.0, 1.0), 255);
  EXPECT_EQ(io::quantize(-5.0, 0.0, 1.0), 0);
}

TEST(Pgm, WriteReadRoundTrip) {
  const auto dir = scratch("pgm");
  data::Field2D f(50, 50, sfs::test::normal_values(2500, 3));
  const auto img = io::to_gray(f, io::Normalization::per_image);
  io::write_pgm(dir / "f.pgm", img);
  EXPECT_EQ(io::read_pgm(dir / "f.pgm"), img);
  EXPECT_EQ(fs::file_size(dir / "f.pgm"), std::string("P5\n50 50\n255\n").size() + 2500);
  {
    std::ofstream os(dir / "bad.pgm", std::ios::binary);
    os << "P2\n2 2\n255\n0 0 0 0\n";
  }
  EXPECT_THROW(io::read_pgm(dir / "bad.pgm"), FormatError);
  {
    std::ofstream os(dir / "short.pgm", std::ios::binary);
    os << "P5\n# note\n4 4\n255\nabc";
  }
  EXPECT_THROW(io::read_pgm(dir / "short.pgm"), FormatError);
}

TEST(Checkpoint, RoundTripGivesBitwiseForward) {
  const auto dir = scratch("ckpt");
  nn::UNetConfig uc;
  uc.width_multiplier = 0.125;
  nn::UNet net(uc);
  net.init_parameters(8);
  const Tensor x = sfs::test::random_tensor({2, 3, 199, 199}, 4);
  {
    // Populate running moments so eval phase is meaningful.
    Tape t(Tape::Mode::inference);
    net.forward(t, x, Phase::train);
  }
  optim::AdamState adam = optim::AdamState::for_parameters(net.parameters());
  adam.step = 17;
  adam.m[3][2] = 0.25;
  adam.v[5][1] = 1.5;
  save_checkpoint(dir / "c.sfsm", net.parameters(), adam, {"digest-abc", 42});

  nn::UNet other(uc);
  other.init_parameters(99);
  optim::AdamState loaded;
  const auto info = load_checkpoint(dir / "c.sfsm", other.parameters(), &loaded);
  EXPECT_EQ(info.config_digest, "digest-abc");
  EXPECT_EQ(info.epoch, 42u);
  EXPECT_EQ(loaded.step, 17u);
  EXPECT_EQ(loaded.m, adam.m);
  EXPECT_EQ(loaded.v, adam.v);
  Tape t1(Tape::Mode::inference), t2(Tape::Mode::inference);
  const Tensor a = net.forward(t1, x, Phase::eval), b = other.forward(t2, x, Phase::eval);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Checkpoint, RejectsCorruptionAndMismatch) {
  const auto dir = scratch("ckpt_bad");
  nn::Mlp mlp;
  mlp.init_parameters(1);
  const auto adam = optim::AdamState::for_parameters(mlp.parameters());
  save_checkpoint(dir / "m.sfsm", mlp.parameters(), adam, {"d", 1});

  nn::UNetConfig uc;
  uc.width_multiplier = 0.125;
  nn::UNet net(uc);
  EXPECT_THROW(load_checkpoint(dir / "m.sfsm", net.parameters()), ShapeError);

  nn::Mlp target;
  target.init_parameters(2);
  const std::vector<double> before(target.parameters().parameters()[0].tensor.data().begin(),
                                   target.parameters().parameters()[0].tensor.data().end());
  fs::copy_file(dir / "m.sfsm", dir / "cut.sfsm");
  fs::resize_file(dir / "cut.sfsm", fs::file_size(dir / "cut.sfsm") - 3);
  EXPECT_THROW(load_checkpoint(dir / "cut.sfsm", target.parameters()), FormatError);
  // A refused load leaves the model untouched.
  EXPECT_TRUE(std::equal(before.begin(), before.end(), target.parameters().parameters()[0].tensor.data().begin()));

  fs::copy_file(dir / "m.sfsm", dir / "magic.sfsm");
  {
    std::fstream f(dir / "magic.sfsm", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.put('Z');
  }
  EXPECT_THROW(load_checkpoint(dir / "magic.sfsm", target.parameters()), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "absent.sfsm", target.parameters()), IoError);
}

TEST(Manifest, SerializeParseVerify) {
  const auto dir = scratch("manifest");
  {
    std::ofstream(dir / "a.txt") << "alpha";
  }
  Manifest m;
  m.set("format", "x/1");
  m.set("key", "value with = sign");
  m.add_file(dir, "a.txt");
  EXPECT_EQ(m.get("file.a.txt"), io::sha256_hex("alpha"));
  EXPECT_EQ(Manifest::parse(m.serialize()).serialize(), m.serialize());
  EXPECT_EQ(Manifest::parse(m.serialize()).get("key"), "value with = sign");
  std::ofstream(dir / manifest_name) << m.serialize();
  EXPECT_TRUE(verify_manifest(dir).empty());
  std::ofstream(dir / "a.txt") << "beta";
  EXPECT_EQ(verify_manifest(dir), (std::vector<std::string>{"a.txt"}));
  EXPECT_THROW(m.get("missing"), FormatError);
}

TEST(Stats, MedianAndMcmpeFraction) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  const auto s = mpe_stats({-0.05, 0.01, 0.03, -0.02});
  EXPECT_DOUBLE_EQ(s.median_abs_mpe, 0.025);
  EXPECT_DOUBLE_EQ(s.max_abs_mpe, 0.05);
  EXPECT_DOUBLE_EQ(s.fraction_within_mcmpe, 0.75);
  EXPECT_EQ(s.count, 4u);
}

TEST(RunExperiment, MlpArtifactsAreCompleteAndDeterministic) {
  const auto root = scratch("mlp_runs");
  const auto a = run_experiment(tiny_run(ModelKind::mlp, root / "a"));
  run_experiment(tiny_run(ModelKind::mlp, root / "b"));
  for (const char* f : {metrics_name, "mpe_train.csv", "mpe_test.csv", "mpe_train_sorted.csv",
                        "mpe_test_sorted.csv", checkpoint_name, manifest_name}) {
    EXPECT_TRUE(fs::exists(root / "a" / f)) << f;
  }
  EXPECT_EQ(slurp(root / "a" / metrics_name), slurp(root / "b" / metrics_name));
  EXPECT_EQ(slurp(root / "a" / "mpe_test.csv"), slurp(root / "b" / "mpe_test.csv"));
  EXPECT_TRUE(verify_manifest(root / "a").empty());

  const auto rows = io::parse_csv(slurp(root / "a" / metrics_name));
  EXPECT_EQ(rows[0], (std::vector<std::string>{"epoch", "train_mse", "test_mse", "test_lmse"}));
  EXPECT_EQ(rows.size(), 4u);
  EXPECT_EQ(a.result.series.size(), 3u);

  for (const char* f : {"mpe_train_sorted.csv", "mpe_test_sorted.csv"}) {
    const auto col = read_mpe_column(root / "a" / f);
    EXPECT_TRUE(std::is_sorted(col.begin(), col.end())) << f;
  }
  const auto m = Manifest::load(root / "a" / manifest_name);
  EXPECT_EQ(m.get("train_size"), "18");
  EXPECT_EQ(m.get("test_size"), "2");
  EXPECT_EQ(config_from_manifest(m).digest(), tiny_run(ModelKind::mlp, root / "a").digest());
  EXPECT_TRUE(completed_run_matches(root / "a", tiny_run(ModelKind::mlp, root / "a")));
  auto changed = tiny_run(ModelKind::mlp, root / "a");
  changed.seed = 6;
  EXPECT_FALSE(completed_run_matches(root / "a", changed));

  const auto ev = evaluate_run(root / "a");
  EXPECT_EQ(ev.test.mpe, a.result.final_test.mpe);
}

TEST(RunExperiment, CompareRefusesDifferentSplitsAndIsZeroOnItself) {
  const auto root = scratch("compare");
  run_experiment(tiny_run(ModelKind::mlp, root / "a"));
  auto other = tiny_run(ModelKind::mlp, root / "b");
  other.split_seed = 9;
  run_experiment(other);
  const auto self = compare_runs(root / "a", root / "a", root / "fig");
  EXPECT_EQ(self.delta_median_abs_mpe, 0.0);
  EXPECT_EQ(self.delta_max_abs_mpe, 0.0);
  EXPECT_EQ(self.delta_fraction_within_mcmpe, 0.0);
  EXPECT_EQ(self.delta_final_test_lmse, 0.0);
  EXPECT_TRUE(fs::exists(root / "fig" / "sorted_mpe.csv"));
  EXPECT_TRUE(fs::exists(root / "fig" / "lmse.csv"));
  EXPECT_THROW(compare_runs(root / "a", root / "b"), ConfigError);
}

TEST(RunExperiment, UNetRunExportsFieldImages) {
  const auto root = scratch("unet_run");
  auto cfg = tiny_run(ModelKind::res_se_unet, root / "run");
  run_experiment(cfg);
  std::size_t checkpoints = 0, manifests = 0;
  for (const auto& e : fs::directory_iterator(root / "run")) {
    checkpoints += e.path().extension() == ".sfsm";
    manifests += e.path().filename() == manifest_name;
  }
  EXPECT_EQ(checkpoints, 1u);
  EXPECT_EQ(manifests, 1u);
  const auto names = export_fields(root / "run", root / "fields");
  EXPECT_EQ(names.size(), 9u);
  for (const auto& n : names) {
    const auto img = io::read_pgm(root / "fields" / n);
    EXPECT_EQ(img.rows, 50u);
    EXPECT_EQ(img.cols, 50u);
  }
  EXPECT_THROW(export_fields(root / "run", root / "fields", {1}), ConfigError);
}

TEST(RunExperiment, FieldExportNeedsImageRun) {
  const auto root = scratch("mlp_export");
  run_experiment(tiny_run(ModelKind::mlp, root / "run"));
  EXPECT_THROW(export_fields(root / "run", root / "fields"), ConfigError);
}
