#pragma once

// Treatment fine-tuning driver. Composes the full objective — cross-entropy
// plus the weighted category and superpixel penalties — and runs the SGD
// loop with per-epoch annealing, validating after every epoch and leaving a
// reproducible paper trail: metrics.jsonl (one line per epoch), a
// schema-versioned manifest.json, and best/last checkpoints.
//
// Determinism contract: equal configs give byte-identical metrics files,
// and a run with the treatments disabled is bit-for-bit a plain
// cross-entropy run — the disabled paths compute nothing at all.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "segdoctor/core/random.hpp"
#include "segdoctor/data/dataset.hpp"
#include "segdoctor/nn/spixel_head.hpp"
#include "segdoctor/nn/taps.hpp"
#include "segdoctor/train/config.hpp"
#include "segdoctor/train/metrics.hpp"
#include "segdoctor/train/optimizer.hpp"

namespace segdoctor {

// Weighted sum ce + alpha*sim + beta*sp with the NaN firewall: a non-finite
// component aborts with the component's name.
double total_loss(double ce, double sim, double sp, double alpha,
                  double beta);

// A dataset restricted to an index subset: train/val split without copying.
struct DataView {
  const Dataset* data = nullptr;
  std::vector<int> indices;

  int size() const { return static_cast<int>(indices.size()); }
  Sample get(int i) const { return data->get(indices[i]); }
};

struct EvalResult {
  double miou = 0;
  double boundary_f = 0;
  std::vector<double> per_class_iou;
  int band = 2;
};

// Argmax prediction for one image: pads bottom-right to the network's
// 16-pixel granule, runs inference, and crops the logits back, so any input
// size works.
LabelMap predict_labels(SegmentationNetwork<float>& net,
                        const Array4D<float>& image);

// Scores argmax predictions over the whole view via predict_labels.
EvalResult evaluate_model(SegmentationNetwork<float>& net,
                          const DataView& view, int band);

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double loss_ce = 0, loss_sim = 0, loss_sp = 0, loss_total = 0;
  double val_miou = 0, val_boundary_f = 0;
  std::vector<double> val_per_class_iou;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_miou = 0;
  std::string output_dir;
};

class Trainer {
 public:
  // Builds datasets, model, heads, and optimizer. Config problems throw
  // ConfigError, data problems DataError.
  explicit Trainer(const RunConfig& cfg);

  // Full training run; writes metrics.jsonl, manifest.json, best.ckpt,
  // last.ckpt under cfg.output_dir.
  TrainResult run();

  struct StepLosses {
    double ce = 0, sim = 0, sp = 0, total = 0;
  };
  // One optimization step on a prepared batch (exposed for tests).
  StepLosses train_step(const Array4D<float>& x, const LabelMap& y,
                        double lr);

  double lr_for_epoch(int epoch) const;

  TappedModel<float>& model() { return *model_; }
  std::vector<std::unique_ptr<SpixelHead<float>>>& heads() { return heads_; }
  const DataView& train_view() const { return train_view_; }
  const DataView& val_view() const { return val_view_; }
  const RunConfig& config() const { return cfg_; }

 private:
  void build_data();
  void build_model();
  // Draws augmentation windows/flips in sample order and stacks the batch.
  Array4D<float> assemble_batch(const std::vector<int>& order, int begin,
                                int count, LabelMap* labels);
  void write_checkpoint(const std::string& path, int epoch, double miou);

  RunConfig cfg_;
  std::unique_ptr<Dataset> primary_, secondary_;
  DataView train_view_, val_view_;
  std::unique_ptr<TappedModel<float>> model_;
  std::vector<std::unique_ptr<SpixelHead<float>>> heads_;
  std::unique_ptr<SgdOptimizer<float>> opt_;
  SoftmaxCrossEntropy<float> ce_;
  Rng order_rng_, augment_rng_;
};

// Checkpoint container: every parameter and running-stat array plus a meta
// block naming the architecture. extra_meta entries are merged in.
void save_model_checkpoint(
    const std::string& path, SegmentationNetwork<float>& net,
    const std::vector<std::unique_ptr<SpixelHead<float>>>* heads,
    const nlohmann::json& extra_meta);

struct LoadedCheckpoint {
  std::unique_ptr<SegmentationNetwork<float>> net;
  nlohmann::json meta;
};
LoadedCheckpoint load_model_checkpoint(const std::string& path);

// The 4-row treatment grid (off/off, on/off, off/on, on/on) over a seed
// triplet. Each cell trains under base with only the enable flags and seeds
// changed; artifacts land under base.output_dir/<row>/seed<i>, and a
// comparison table goes to base.output_dir/ablation.{txt,json}.
struct AblationCell {
  uint64_t seed_shift = 0;
  double final_miou = 0, final_boundary_f = 0;
  double first_loss = 0, final_loss = 0;
};

struct AblationRow {
  std::string name;
  bool category = false, boundary = false;
  std::vector<AblationCell> cells;
  double mean_miou = 0, mean_boundary_f = 0;
  bool all_descended = false;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::string table;
};

AblationResult run_ablation(const RunConfig& base, int num_seeds = 3);

}  // namespace segdoctor
