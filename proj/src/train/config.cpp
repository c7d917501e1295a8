#include "segdoctor/train/config.hpp"

#include <fstream>
#include <set>

#include "segdoctor/core/errors.hpp"

namespace segdoctor {

namespace {

// Tracks which keys a block consumed so leftovers can be rejected by name.
class Scope {
 public:
  Scope(const nlohmann::json& j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError("config: '" + path_ + "' must be an object");
    }
  }

  const nlohmann::json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  void reject_unknown() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("config: unknown key '" + at(item.key()) + "'");
      }
    }
  }

  int get_int(const std::string& key, int def, int lo, int hi) {
    const nlohmann::json* v = find(key);
    if (!v) return def;
    if (!v->is_number_integer()) {
      throw ConfigError("config: '" + at(key) + "' must be an integer");
    }
    const int64_t x = v->get<int64_t>();
    if (x < lo || x > hi) {
      throw ConfigError("config: '" + at(key) + "' must lie in [" +
                        std::to_string(lo) + ", " + std::to_string(hi) +
                        "], got " + std::to_string(x));
    }
    return static_cast<int>(x);
  }

  uint64_t get_seed(const std::string& key, uint64_t def) {
    const nlohmann::json* v = find(key);
    if (!v) return def;
    const bool neg = v->is_number_integer() && !v->is_number_unsigned() &&
                     v->get<int64_t>() < 0;
    if (!v->is_number_integer() || neg) {
      throw ConfigError("config: '" + at(key) +
                        "' must be a nonnegative integer");
    }
    return v->get<uint64_t>();
  }

  double get_double(const std::string& key, double def, double lo, double hi) {
    const nlohmann::json* v = find(key);
    if (!v) return def;
    if (!v->is_number()) {
      throw ConfigError("config: '" + at(key) + "' must be a number");
    }
    const double x = v->get<double>();
    if (!(x >= lo && x <= hi)) {
      throw ConfigError("config: '" + at(key) + "' out of range");
    }
    return x;
  }

  bool get_bool(const std::string& key, bool def) {
    const nlohmann::json* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) {
      throw ConfigError("config: '" + at(key) + "' must be true or false");
    }
    return v->get<bool>();
  }

  std::string get_string(const std::string& key, const std::string& def,
                         bool required = false) {
    const nlohmann::json* v = find(key);
    if (!v) {
      if (required) {
        throw ConfigError("config: missing required key '" + at(key) + "'");
      }
      return def;
    }
    if (!v->is_string()) {
      throw ConfigError("config: '" + at(key) + "' must be a string");
    }
    return v->get<std::string>();
  }

  std::string get_choice(const std::string& key, const std::string& def,
                         const std::set<std::string>& allowed) {
    const std::string s = get_string(key, def);
    if (!allowed.count(s)) {
      std::string opts;
      for (const std::string& a : allowed) {
        opts += opts.empty() ? "'" + a + "'" : ", '" + a + "'";
      }
      throw ConfigError("config: '" + at(key) + "' must be one of " + opts +
                        ", got '" + s + "'");
    }
    return s;
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

int check_multiple_of_16(int v, const std::string& path) {
  if (v % 16 != 0) {
    throw ConfigError("config: '" + path + "' must be a multiple of 16 (the "
                      "network downsamples four times), got " +
                      std::to_string(v));
  }
  return v;
}

DatasetSpec parse_dataset(const nlohmann::json& j, const std::string& path) {
  Scope s(j, path);
  DatasetSpec out;
  const std::string kind =
      s.get_choice("kind", "synthetic", {"synthetic", "voc"});
  if (kind == "synthetic") {
    out.kind = DatasetSpec::Kind::kSynthetic;
    out.synth.train_count = s.get_int("train_count", 200, 1, 1000000);
    out.synth.val_count = s.get_int("val_count", 50, 1, 1000000);
    out.synth.size = check_multiple_of_16(s.get_int("size", 64, 16, 4096),
                                          s.at("size"));
    out.synth.num_classes = s.get_int("num_classes", 3, 2, 64);
    out.synth.seed = s.get_seed("seed", 7);
  } else {
    out.kind = DatasetSpec::Kind::kVoc;
    out.voc.root = s.get_string("root", "", /*required=*/true);
    out.voc.train_split = s.get_string("train_split", "train");
    out.voc.val_split = s.get_string("val_split", "val");
    out.voc.num_classes = s.get_int("num_classes", 21, 2, 256);
  }
  s.reject_unknown();
  return out;
}

OptimizerConfig parse_optimizer(const nlohmann::json& j,
                                const std::string& path) {
  Scope s(j, path);
  OptimizerConfig out;
  out.lr = s.get_double("lr", 0.01, 1e-12, 1e3);
  out.momentum = s.get_double("momentum", 0.9, 0.0, 0.999999);
  out.weight_decay = s.get_double("weight_decay", 1e-4, 0.0, 1.0);
  out.batch_size = s.get_int("batch_size", 8, 1, 4096);
  out.schedule = s.get_choice("schedule", "cosine", {"cosine", "constant"});
  s.reject_unknown();
  return out;
}

SeedConfig parse_seeds(const nlohmann::json& j, const std::string& path) {
  Scope s(j, path);
  SeedConfig out;
  out.model = s.get_seed("model", 1);
  out.data = s.get_seed("data", 2);
  out.augment = s.get_seed("augment", 3);
  s.reject_unknown();
  return out;
}

AugmentConfig parse_augment(const nlohmann::json& j, const std::string& path) {
  Scope s(j, path);
  AugmentConfig out;
  out.crop_h = check_multiple_of_16(s.get_int("crop_h", 64, 16, 4096),
                                    s.at("crop_h"));
  out.crop_w = check_multiple_of_16(s.get_int("crop_w", 64, 16, 4096),
                                    s.at("crop_w"));
  out.hflip = s.get_bool("hflip", true);
  out.vflip = s.get_bool("vflip", true);
  s.reject_unknown();
  return out;
}

TreatmentSettings parse_treatment(const nlohmann::json& j,
                                  const std::string& path) {
  Scope s(j, path);
  TreatmentSettings out;
  out.enable_category = s.get_bool("enable_category", true);
  out.enable_boundary = s.get_bool("enable_boundary", true);
  out.alpha = s.get_double("alpha", 1.0, 0.0, 1e6);
  out.beta = s.get_double("beta", 0.01, 0.0, 1e6);
  out.margin = s.get_double("margin", 0.003, 0.0, 1e6);
  out.superpixel_size = s.get_int("superpixel_size", 16, 1, 1024);
  out.deep_tap = s.get_string("deep_tap", "enc4");
  out.normalization = s.get_choice("normalization", "softmax-9",
                                   {"softmax-9", "sigmoid-renorm"});
  if (const nlohmann::json* taps = s.find("shallow_taps")) {
    if (!taps->is_array() || taps->empty()) {
      throw ConfigError("config: '" + s.at("shallow_taps") +
                        "' must be a nonempty array of tap names");
    }
    out.shallow_taps.clear();
    for (const auto& t : *taps) {
      if (!t.is_string()) {
        throw ConfigError("config: '" + s.at("shallow_taps") +
                          "' entries must be strings");
      }
      out.shallow_taps.push_back(t.get<std::string>());
    }
  }
  if (out.deep_tap.empty()) {
    throw ConfigError("config: '" + s.at("deep_tap") + "' must be nonempty");
  }
  s.reject_unknown();
  return out;
}

}  // namespace

AssocNormMode TreatmentSettings::norm_mode() const {
  return normalization == "sigmoid-renorm" ? AssocNormMode::kSigmoidRenorm
                                           : AssocNormMode::kSoftmax9;
}

RunConfig parse_run_config(const nlohmann::json& doc) {
  Scope s(doc, "$");
  RunConfig out;
  out.output_dir = s.get_string("output_dir", "", /*required=*/true);
  out.epochs = s.get_int("epochs", 5, 1, 100000);
  out.device = s.get_choice("device", "cpu", {"cpu"});
  out.in_channels = s.get_int("in_channels", 3, 1, 64);
  out.eval_band = s.get_int("eval_band", 2, 1, 64);
  if (const nlohmann::json* j = s.find("seeds")) {
    out.seeds = parse_seeds(*j, "seeds");
  }
  if (const nlohmann::json* j = s.find("dataset")) {
    out.dataset = parse_dataset(*j, "dataset");
  }
  if (const nlohmann::json* j = s.find("optimizer")) {
    out.optimizer = parse_optimizer(*j, "optimizer");
  }
  if (const nlohmann::json* j = s.find("augment")) {
    out.augment = parse_augment(*j, "augment");
  }
  if (const nlohmann::json* j = s.find("treatment")) {
    out.treatment = parse_treatment(*j, "treatment");
  }
  s.reject_unknown();
  return out;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) {
    throw ConfigError("config: cannot open '" + path + "'");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " +
                      e.what());
  }
  return parse_run_config(doc);
}

nlohmann::json run_config_json(const RunConfig& c) {
  nlohmann::json j;
  j["output_dir"] = c.output_dir;
  j["epochs"] = c.epochs;
  j["device"] = c.device;
  j["in_channels"] = c.in_channels;
  j["eval_band"] = c.eval_band;
  j["seeds"] = {{"model", c.seeds.model},
                {"data", c.seeds.data},
                {"augment", c.seeds.augment}};
  if (c.dataset.kind == DatasetSpec::Kind::kSynthetic) {
    j["dataset"] = {{"kind", "synthetic"},
                    {"train_count", c.dataset.synth.train_count},
                    {"val_count", c.dataset.synth.val_count},
                    {"size", c.dataset.synth.size},
                    {"num_classes", c.dataset.synth.num_classes},
                    {"seed", c.dataset.synth.seed}};
  } else {
    j["dataset"] = {{"kind", "voc"},
                    {"root", c.dataset.voc.root},
                    {"train_split", c.dataset.voc.train_split},
                    {"val_split", c.dataset.voc.val_split},
                    {"num_classes", c.dataset.voc.num_classes}};
  }
  j["optimizer"] = {{"lr", c.optimizer.lr},
                    {"momentum", c.optimizer.momentum},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"batch_size", c.optimizer.batch_size},
                    {"schedule", c.optimizer.schedule}};
  j["augment"] = {{"crop_h", c.augment.crop_h},
                  {"crop_w", c.augment.crop_w},
                  {"hflip", c.augment.hflip},
                  {"vflip", c.augment.vflip}};
  j["treatment"] = {{"enable_category", c.treatment.enable_category},
                    {"enable_boundary", c.treatment.enable_boundary},
                    {"alpha", c.treatment.alpha},
                    {"beta", c.treatment.beta},
                    {"margin", c.treatment.margin},
                    {"superpixel_size", c.treatment.superpixel_size},
                    {"deep_tap", c.treatment.deep_tap},
                    {"shallow_taps", c.treatment.shallow_taps},
                    {"normalization", c.treatment.normalization}};
  return j;
}

}  // namespace segdoctor
