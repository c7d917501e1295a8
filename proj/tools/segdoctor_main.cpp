// segdoctor command line: train a run from a config file, score a checkpoint,
// sweep the treatment ablation grid, or emit an error-diagnosis report.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <algorithm>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "segdoctor/core/errors.hpp"
#include "segdoctor/data/dataset.hpp"
#include "segdoctor/diagnose/decompose.hpp"
#include "segdoctor/train/trainer.hpp"

using namespace segdoctor;

namespace {

// --data accepts either a dataset directory or the literal "synth".
struct DataArgs {
  std::string data;
  std::string split = "val";
  int count = 50;
  int size = 64;
  uint64_t seed = 7;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.data, "dataset directory, or 'synth'")
      ->required();
  cmd->add_option("--split", a.split,
                  "split name for directory datasets (default val)");
  cmd->add_option("--synth-count", a.count,
                  "sample count when --data synth (default 50)");
  cmd->add_option("--synth-size", a.size,
                  "image size when --data synth (default 64)");
  cmd->add_option("--synth-seed", a.seed,
                  "generator seed when --data synth (default 7)");
}

// The checkpoint fixes the class count, so both dataset flavors follow it.
std::unique_ptr<Dataset> open_dataset(const DataArgs& a, int num_classes) {
  if (a.data == "synth") {
    SynthParams p;
    p.count = a.count;
    p.size = a.size;
    p.num_classes = num_classes;
    p.seed = a.seed;
    return std::make_unique<SynthDataset>(p);
  }
  return std::make_unique<VocDataset>(a.data, a.split, num_classes);
}

int run_train(const std::string& config_file) {
  const RunConfig cfg = load_run_config(config_file);
  const TrainResult r = Trainer(cfg).run();
  std::printf("trained %d epochs; best val mIoU %.4f at epoch %d\n",
              static_cast<int>(r.epochs.size()), r.best_miou, r.best_epoch);
  std::printf("artifacts in %s\n", r.output_dir.c_str());
  return 0;
}

int run_evaluate(const std::string& ckpt, const DataArgs& da, int band) {
  LoadedCheckpoint lc = load_model_checkpoint(ckpt);
  const std::unique_ptr<Dataset> data = open_dataset(da, lc.net->num_classes());
  DataView view{data.get(), {}};
  for (int i = 0; i < data->size(); ++i) view.indices.push_back(i);

  const EvalResult ev = evaluate_model(*lc.net, view, band);
  std::printf("checkpoint %s (%s, %d classes)\n", ckpt.c_str(),
              lc.net->arch_name().c_str(), lc.net->num_classes());
  std::printf("evaluated %d samples\n", view.size());
  for (size_t k = 0; k < ev.per_class_iou.size(); ++k) {
    std::printf("  class %2zu  iou %.4f\n", k, ev.per_class_iou[k]);
  }
  std::printf("mIoU %.4f   boundary-F(d=%d) %.4f\n", ev.miou, band, ev.boundary_f);
  return 0;
}

int run_ablate(const std::string& config_file, int seeds) {
  const RunConfig cfg = load_run_config(config_file);
  const AblationResult r = run_ablation(cfg, seeds);
  std::fputs(r.table.c_str(), stdout);
  std::printf("grid artifacts in %s\n", cfg.output_dir.c_str());
  return 0;
}

int run_diagnose(const std::string& ckpt, const DataArgs& da, int band,
                 const std::string& out_dir, int limit) {
  LoadedCheckpoint lc = load_model_checkpoint(ckpt);
  const std::unique_ptr<Dataset> data = open_dataset(da, lc.net->num_classes());
  int n = data->size();
  if (limit > 0) n = std::min(n, limit);
  if (n == 0) throw DataError("diagnose: the dataset is empty");

  std::vector<ReportSample> samples;
  samples.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Sample s = data->get(i);
    ReportSample rs;
    rs.pred = predict_labels(*lc.net, s.image);
    rs.image = std::move(s.image);
    rs.gt = std::move(s.labels);
    rs.id = std::move(s.id);
    samples.push_back(std::move(rs));
  }

  const ErrorDecomposition d = emit_report(samples, band, out_dir);
  const double total = static_cast<double>(d.total());
  std::printf("diagnosed %d samples at band d=%d (chebyshev)\n", n, band);
  std::printf("  correct          %10llu  (%.2f%%)\n",
              static_cast<unsigned long long>(d.correct),
              100.0 * d.correct / total);
  std::printf("  boundary errors  %10llu  (%.2f%%)\n",
              static_cast<unsigned long long>(d.boundary_error),
              100.0 * d.boundary_error / total);
  std::printf("  category errors  %10llu  (%.2f%%)\n",
              static_cast<unsigned long long>(d.category_error),
              100.0 * d.category_error / total);
  std::printf("  ignored          %10llu\n",
              static_cast<unsigned long long>(d.ignored));
  std::printf("boundary-F(d=%d) %.4f\n", band, d.boundary_f);
  std::printf("overlays and diagnosis.json in %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segdoctor: train, score, and diagnose segmentation models"};
  app.require_subcommand(1);

  std::string train_config;
  CLI::App* train =
      app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", train_config, "run config (json)")->required();

  std::string eval_ckpt;
  DataArgs eval_data;
  int eval_band = 2;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  evaluate->add_option("--checkpoint", eval_ckpt, "model checkpoint")
      ->required();
  add_data_options(evaluate, eval_data);
  evaluate->add_option("--band", eval_band,
                       "boundary-F tolerance in pixels (default 2)");

  std::string ablate_config;
  int ablate_seeds = 3;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "run the 4-row treatment grid and print a comparison table");
  ablate->add_option("--config", ablate_config, "base run config (json)")
      ->required();
  ablate->add_option("--seeds", ablate_seeds, "seeds per row (default 3)");

  std::string diag_ckpt, diag_out;
  DataArgs diag_data;
  int diag_band = 2, diag_limit = 0;
  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "split a checkpoint's mistakes into boundary vs category "
                  "errors and write overlays");
  diagnose->add_option("--checkpoint", diag_ckpt, "model checkpoint")
      ->required();
  add_data_options(diagnose, diag_data);
  diagnose->add_option("--band", diag_band,
                       "boundary band half-width in pixels (default 2)");
  diagnose->add_option("--out", diag_out, "output directory")->required();
  diagnose->add_option("--limit", diag_limit,
                       "diagnose at most this many samples (0 = all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a config error
  }

  try {
    if (*train) return run_train(train_config);
    if (*evaluate) return run_evaluate(eval_ckpt, eval_data, eval_band);
    if (*ablate) return run_ablate(ablate_config, ablate_seeds);
    if (*diagnose) {
      return run_diagnose(diag_ckpt, diag_data, diag_band, diag_out,
                          diag_limit);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
