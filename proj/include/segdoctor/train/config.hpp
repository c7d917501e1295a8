#pragma once

// Run configuration. One JSON document drives training, evaluation, and the
// ablation grid; every field has a recorded default except output_dir (and
// the dataset root when reading from disk). Unknown keys anywhere in the
// document are hard errors so typos cannot silently fall back to defaults.
//
// Cross-entropy is always part of the objective; the two treatment flags
// only add penalties on top, so every parsed config trains something.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "segdoctor/data/dataset.hpp"
#include "segdoctor/treat/superpixel.hpp"

namespace segdoctor {

struct SynthSpec {
  int train_count = 200;
  int val_count = 50;
  int size = 64;
  int num_classes = 3;
  uint64_t seed = 7;
};

struct VocSpec {
  std::string root;
  std::string train_split = "train";
  std::string val_split = "val";
  int num_classes = 21;
};

struct DatasetSpec {
  enum class Kind { kSynthetic, kVoc };
  Kind kind = Kind::kSynthetic;
  SynthSpec synth;
  VocSpec voc;

  int num_classes() const {
    return kind == Kind::kSynthetic ? synth.num_classes : voc.num_classes;
  }
};

struct OptimizerConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 8;
  std::string schedule = "cosine";  // "cosine" | "constant"
};

// Independent streams so e.g. changing the augmentation seed cannot shift
// the model's initialization.
struct SeedConfig {
  uint64_t model = 1;
  uint64_t data = 2;
  uint64_t augment = 3;
};

struct TreatmentSettings {
  bool enable_category = true;
  bool enable_boundary = true;
  double alpha = 1.0;           // weight of the category penalty
  double beta = 0.01;           // weight of the superpixel penalty
  double margin = 0.003;        // m of the compactness term
  int superpixel_size = 16;     // s, sampling interval in pixels
  std::string deep_tap = "enc4";
  std::vector<std::string> shallow_taps = {"enc1"};
  std::string normalization = "softmax-9";  // | "sigmoid-renorm"

  // A treatment is live only when its flag is on AND its weight is nonzero;
  // either way of turning it off takes the identical code path, which is
  // what makes the baseline == zero-coefficient equivalence exact.
  bool category_live() const { return enable_category && alpha > 0; }
  bool boundary_live() const { return enable_boundary && beta > 0; }

  AssocNormMode norm_mode() const;
};

struct RunConfig {
  std::string output_dir;
  int epochs = 5;
  std::string device = "cpu";
  int in_channels = 3;
  int eval_band = 2;  // boundary-F tolerance during validation
  SeedConfig seeds;
  DatasetSpec dataset;
  OptimizerConfig optimizer;
  AugmentConfig augment;
  TreatmentSettings treatment;
};

// Both throw ConfigError with the offending key path on any problem:
// unknown key, wrong type, out-of-range value, missing requirement.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

// Fully-resolved round trip: parse_run_config(run_config_json(c)) == c.
// This is what the training manifest records.
nlohmann::json run_config_json(const RunConfig& c);

}  // namespace segdoctor
