#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "sfsurrogate/sfsurrogate.hpp"

namespace {

using namespace sfs;

void print_stats(const std::string& label, const harness::RunStats& s) {
  std::printf("%s: n=%zu median|MPE|=%.6g max|MPE|=%.6g within%.2f=%.4f final_test_lmse=%.6g\n",
              label.c_str(), s.count, s.median_abs_mpe, s.max_abs_mpe, harness::mcmpe,
              s.fraction_within_mcmpe, s.final_test_lmse);
}

/// Flags that mirror ExperimentConfig keys. Unset flags leave the base config alone.
struct ConfigFlags {
  std::string file, preset;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key=value config file");
    cmd->add_option("--preset", preset, "small or full")->check(CLI::IsMember({"small", "full"}));
    for (const auto& [key, _] : harness::ExperimentConfig{}.entries()) {
      std::string flag = "--" + key;
      for (auto& ch : flag) ch = ch == '_' ? '-' : ch;
      cmd->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; },
                                            "config key " + key);
    }
  }

  harness::ExperimentConfig build() const {
    harness::ExperimentConfig c = file.empty() ? harness::ExperimentConfig{}
                                               : harness::ExperimentConfig::load(file);
    if (!preset.empty()) {
      for (const char* k : {"model", "task"}) {
        if (auto it = values.find(k); it != values.end()) c.set(k, it->second);
      }
      const auto p = harness::preset(preset, c.model, c.task);
      c.width_multiplier = p.width_multiplier;
      c.epochs = p.epochs;
      c.bf_stride = p.bf_stride;
    }
    for (const auto& [k, v] : values) c.set(k, v);
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stamp-forming surrogate models: dataset, training and evaluation"};
  app.require_subcommand(1);

  auto* dataset = app.add_subcommand("dataset", "Dataset operations");
  dataset->require_subcommand(1);
  auto* build = dataset->add_subcommand("build", "Generate the oracle dataset (SFDS1)");
  std::string dataset_out;
  std::size_t bf_stride = 1;
  unsigned workers = 1;
  build->add_option("--out", dataset_out, "output file")->required();
  build->add_option("--bf-stride", bf_stride, "keep every n-th binder force level");
  build->add_option("--workers", workers, "generation threads");

  auto* train = app.add_subcommand("train", "Train one surrogate and write a run directory");
  ConfigFlags train_flags;
  train_flags.attach(train);
  bool reuse = false;
  train->add_flag("--reuse", reuse, "skip training when the output directory already holds this run");
  bool dry_run = false;
  train->add_flag("--print-config", dry_run, "print the resolved config and exit");

  auto* eval = app.add_subcommand("eval", "Re-evaluate a run's checkpoint on its test set");
  std::string eval_run;
  eval->add_option("--run", eval_run, "run directory")->required();

  auto* compare = app.add_subcommand("compare", "Compare two runs on the same split");
  std::string run_a, run_b, figures;
  compare->add_option("--a", run_a, "first run directory")->required();
  compare->add_option("--b", run_b, "second run directory")->required();
  compare->add_option("--figures", figures, "directory for sorted-MPE and LMSE CSVs");

  auto* demo = app.add_subcommand("demo-location", "Mean-of-maxima vs max-of-mean demo");
  std::string demo_out;
  demo->add_option("--out", demo_out, "directory for demo.csv and the predicted field image");

  auto* exportf = app.add_subcommand("export-fields", "Write GT, PD and PWE images of a run");
  std::string export_run, export_out;
  std::vector<std::size_t> ordinals;
  exportf->add_option("--run", export_run, "image surrogate run directory")->required();
  exportf->add_option("--out", export_out, "output directory")->required();
  exportf->add_option("--ordinal", ordinals, "test-set design ordinals (default: best, median, worst)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) {
      const auto designs = data::binder_force_subset(data::enumerate_design_space(), bf_stride);
      const auto samples = data::build_dataset(designs, workers);
      io::write_dataset(dataset_out, samples);
      std::printf("wrote %zu samples to %s\n", samples.size(), dataset_out.c_str());
    } else if (train->parsed()) {
      const auto cfg = train_flags.build();
      if (dry_run) {
        std::cout << cfg.serialize();
        return 0;
      }
      if (reuse && harness::completed_run_matches(cfg.output_dir, cfg)) {
        std::printf("reusing %s\n", cfg.output_dir.c_str());
      } else {
        const auto summary = harness::run_experiment(cfg, [](const std::string& line) {
          std::fprintf(stderr, "%s\n", line.c_str());
        });
        std::printf("run written to %s in %.1f s\n", summary.dir.c_str(), summary.wall_seconds);
      }
      print_stats("test", harness::run_stats(cfg.output_dir));
    } else if (eval->parsed()) {
      const auto ev = harness::evaluate_run(eval_run);
      auto stats = harness::mpe_stats(ev.test.mpe);
      stats.final_test_lmse = optim::lmse(ev.test.mse);
      print_stats("test", stats);
    } else if (compare->parsed()) {
      const auto c = harness::compare_runs(run_a, run_b, figures);
      print_stats("a", c.a);
      print_stats("b", c.b);
      std::printf("delta (a-b): median|MPE|=%.6g max|MPE|=%.6g within=%.4f final_test_lmse=%.6g\n",
                  c.delta_median_abs_mpe, c.delta_max_abs_mpe, c.delta_fraction_within_mcmpe,
                  c.delta_final_test_lmse);
    } else if (demo->parsed()) {
      const auto r = demo::demo_report(demo::mirror_pair_case());
      std::vector<std::string> header{"case",          "gt_max",          "sbmlm_prediction",
                                      "sbmlm_abs_error", "sbmlm_rel_error", "ibmlm_prediction",
                                      "ibmlm_abs_error", "ibmlm_rel_error"};
      std::vector<std::string> row{"synthetic mirror pair", io::format_double(r.gt_max),
                                   io::format_double(r.sbmlm_prediction),
                                   io::format_double(r.sbmlm_abs_error),
                                   io::format_double(r.sbmlm_rel_error),
                                   io::format_double(r.ibmlm_prediction),
                                   io::format_double(r.ibmlm_abs_error),
                                   io::format_double(r.ibmlm_rel_error)};
      std::printf("SBMLM %.4f (error %.4f, %.2f%%)  IBMLM %.4f (error %.4f, %.3f%%)  GT %.4f\n",
                  r.sbmlm_prediction, r.sbmlm_abs_error, 100 * r.sbmlm_rel_error, r.ibmlm_prediction,
                  r.ibmlm_abs_error, 100 * r.ibmlm_rel_error, r.gt_max);
      if (!demo_out.empty()) {
        std::filesystem::create_directories(demo_out);
        io::CsvWriter w(std::filesystem::path(demo_out) / "demo.csv", header);
        w.row(row);
        w.close();
        io::write_pgm(std::filesystem::path(demo_out) / "pd_field.pgm",
                      io::to_gray(r.predicted_field, io::Normalization::per_image));
      }
    } else if (exportf->parsed()) {
      for (const auto& name : harness::export_fields(export_run, export_out, ordinals)) {
        std::printf("%s\n", name.c_str());
      }
    }
  } catch (const sfs::Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
