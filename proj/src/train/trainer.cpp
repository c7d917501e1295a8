#include "segdoctor/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "segdoctor/core/errors.hpp"
#include "segdoctor/data/dataset.hpp"
#include "segdoctor/diagnose/boundary.hpp"
#include "segdoctor/io/container.hpp"
#include "segdoctor/nn/unet.hpp"
#include "segdoctor/treat/category.hpp"
#include "segdoctor/treat/superpixel.hpp"

namespace segdoctor {

double total_loss(double ce, double sim, double sp, double alpha,
                  double beta) {
  if (!std::isfinite(ce)) {
    throw NumericError("total loss: cross-entropy component is not finite");
  }
  if (!std::isfinite(sim)) {
    throw NumericError("total loss: category component is not finite");
  }
  if (!std::isfinite(sp)) {
    throw NumericError("total loss: superpixel component is not finite");
  }
  const double v = ce + alpha * sim + beta * sp;
  if (!std::isfinite(v)) {
    throw NumericError("total loss: weighted sum is not finite");
  }
  return v;
}

namespace {

// Bottom-right zero padding up to the network granule; identity when the
// extents already divide.
Array4D<float> pad_to_granule(const Array4D<float>& x, int granule) {
  const int ph = (x.h() + granule - 1) / granule * granule;
  const int pw = (x.w() + granule - 1) / granule * granule;
  if (ph == x.h() && pw == x.w()) return x;
  Array4D<float> out(x.n(), x.c(), ph, pw);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int y = 0; y < x.h(); ++y) {
        for (int xx = 0; xx < x.w(); ++xx) {
          out(n, c, y, xx) = x(n, c, y, xx);
        }
      }
    }
  }
  return out;
}

Array4D<float> crop_logits(const Array4D<float>& logits, int h, int w) {
  if (logits.h() == h && logits.w() == w) return logits;
  Array4D<float> out(logits.n(), logits.c(), h, w);
  for (int n = 0; n < logits.n(); ++n) {
    for (int c = 0; c < logits.c(); ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) out(n, c, y, x) = logits(n, c, y, x);
      }
    }
  }
  return out;
}

void accumulate_tap_grad(std::map<std::string, Array4D<float>>& grads,
                         const std::string& tag, Array4D<float>&& g) {
  auto it = grads.find(tag);
  if (it == grads.end()) {
    grads.emplace(tag, std::move(g));
    return;
  }
  check(it->second.same_shape(g), "tap gradient shape clash on '" + tag + "'");
  for (size_t i = 0; i < g.size(); ++i) {
    it->second.data()[i] += g.data()[i];
  }
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const std::string& n : names) {
    out += out.empty() ? n : ", " + n;
  }
  return out;
}

}  // namespace

LabelMap predict_labels(SegmentationNetwork<float>& net,
                        const Array4D<float>& image) {
  const Array4D<float> x = pad_to_granule(image, 16);
  Array4D<float> logits = net.forward(x, /*train=*/false, {}, nullptr);
  logits = crop_logits(logits, image.h(), image.w());
  return argmax_labels(logits);
}

EvalResult evaluate_model(SegmentationNetwork<float>& net,
                          const DataView& view, int band) {
  if (view.size() == 0) {
    throw DataError("evaluate: the dataset view is empty");
  }
  ConfusionMatrix cm(net.num_classes());
  BoundaryFAccumulator bf(band);
  for (int i = 0; i < view.size(); ++i) {
    const Sample s = view.get(i);
    const LabelMap pred = predict_labels(net, s.image);
    cm.add(pred, s.labels);
    bf.add(pred, s.labels);
  }
  EvalResult out;
  out.miou = cm.miou();
  out.boundary_f = bf.f1();
  out.per_class_iou = cm.per_class_iou();
  out.band = band;
  return out;
}

Trainer::Trainer(const RunConfig& cfg)
    : cfg_(cfg), order_rng_(cfg.seeds.data), augment_rng_(cfg.seeds.augment) {
  build_data();
  build_model();
}

void Trainer::build_data() {
  if (cfg_.dataset.kind == DatasetSpec::Kind::kSynthetic) {
    const SynthSpec& sp = cfg_.dataset.synth;
    SynthParams p;
    p.count = sp.train_count + sp.val_count;
    p.size = sp.size;
    p.num_classes = sp.num_classes;
    p.seed = sp.seed;
    primary_ = std::make_unique<SynthDataset>(p);
    train_view_.data = primary_.get();
    val_view_.data = primary_.get();
    for (int i = 0; i < sp.train_count; ++i) train_view_.indices.push_back(i);
    for (int i = 0; i < sp.val_count; ++i) {
      val_view_.indices.push_back(sp.train_count + i);
    }
  } else {
    const VocSpec& vp = cfg_.dataset.voc;
    primary_ = std::make_unique<VocDataset>(vp.root, vp.train_split,
                                            vp.num_classes);
    secondary_ = std::make_unique<VocDataset>(vp.root, vp.val_split,
                                              vp.num_classes);
    train_view_.data = primary_.get();
    val_view_.data = secondary_.get();
    for (int i = 0; i < primary_->size(); ++i) {
      train_view_.indices.push_back(i);
    }
    for (int i = 0; i < secondary_->size(); ++i) {
      val_view_.indices.push_back(i);
    }
  }
}

void Trainer::build_model() {
  auto net = std::make_unique<ReferenceUNet<float>>(
      cfg_.dataset.num_classes(), cfg_.in_channels, cfg_.seeds.model);
  const std::map<std::string, TapInfo>& catalog = net->tap_catalog();

  const TreatmentSettings& t = cfg_.treatment;
  auto require_tap = [&](const std::string& key, const std::string& tag) {
    if (!catalog.count(tag)) {
      throw ConfigError("config: '" + key + "' names unknown tap '" + tag +
                        "'; available: " + join_names(net->available_taps()));
    }
  };
  require_tap("treatment.deep_tap", t.deep_tap);
  for (size_t i = 0; i < t.shallow_taps.size(); ++i) {
    const std::string& tag = t.shallow_taps[i];
    require_tap("treatment.shallow_taps", tag);
    if (tag == t.deep_tap) {
      throw ConfigError("config: 'treatment.shallow_taps' repeats the deep "
                        "tap '" + tag + "'");
    }
    for (size_t j = 0; j < i; ++j) {
      if (t.shallow_taps[j] == tag) {
        throw ConfigError("config: 'treatment.shallow_taps' lists '" + tag +
                          "' twice");
      }
    }
  }

  std::vector<TapSpec> specs;
  specs.push_back({t.deep_tap, TapRole::kDeep, catalog.at(t.deep_tap).channels,
                   catalog.at(t.deep_tap).stride});
  for (const std::string& tag : t.shallow_taps) {
    specs.push_back({tag, TapRole::kShallow, catalog.at(tag).channels,
                     catalog.at(tag).stride});
  }
  model_ = std::make_unique<TappedModel<float>>(std::move(net), specs);

  // One auxiliary head per shallow tap, each on its own seed stream derived
  // from the model seed. Heads are built whether or not the boundary
  // treatment is live so the checkpoint layout never depends on the flags.
  for (size_t i = 0; i < t.shallow_taps.size(); ++i) {
    const std::string& tag = t.shallow_taps[i];
    const uint64_t head_seed =
        cfg_.seeds.model ^ (0x9E3779B97F4A7C15ull * (i + 1));
    heads_.push_back(std::make_unique<SpixelHead<float>>(
        "head_" + tag, catalog.at(tag).channels, head_seed));
  }

  // The optimizer only owns what the objective can reach: head parameters
  // join only when the superpixel penalty is live, so disabled treatments
  // leave no trace in the update sequence (weight decay included).
  std::vector<ParamView<float>> params;
  model_->network().collect_params(params);
  if (t.boundary_live()) {
    for (auto& h : heads_) h->collect_params(params);
  }
  opt_ = std::make_unique<SgdOptimizer<float>>(
      std::move(params), static_cast<float>(cfg_.optimizer.momentum),
      static_cast<float>(cfg_.optimizer.weight_decay));
}

double Trainer::lr_for_epoch(int epoch) const {
  if (cfg_.optimizer.schedule == "constant") return cfg_.optimizer.lr;
  return cosine_lr(cfg_.optimizer.lr, epoch, cfg_.epochs);
}

Array4D<float> Trainer::assemble_batch(const std::vector<int>& order,
                                       int begin, int count,
                                       LabelMap* labels) {
  const int ch = cfg_.augment.crop_h, cw = cfg_.augment.crop_w;
  Array4D<float> x(count, cfg_.in_channels, ch, cw);
  *labels = LabelMap(count, ch, cw, cfg_.dataset.num_classes());
  for (int b = 0; b < count; ++b) {
    const Sample raw = train_view_.get(order[begin + b]);
    check(raw.image.c() == cfg_.in_channels,
          "train: sample '" + raw.id + "' has " +
              std::to_string(raw.image.c()) + " channels, config expects " +
              std::to_string(cfg_.in_channels));
    const Sample aug = augment_sample(raw, cfg_.augment, augment_rng_);
    std::copy(aug.image.data(), aug.image.data() + aug.image.size(),
              x.data() + static_cast<size_t>(b) * aug.image.size());
    for (int y = 0; y < ch; ++y) {
      for (int xx = 0; xx < cw; ++xx) {
        labels->at(b, y, xx) = aug.labels.at(0, y, xx);
      }
    }
  }
  return x;
}

Trainer::StepLosses Trainer::train_step(const Array4D<float>& x,
                                        const LabelMap& y, double lr) {
  const TreatmentSettings& t = cfg_.treatment;
  model_->network().zero_grads();
  for (auto& h : heads_) h->zero_grads();

  TappedForward<float> f = model_->forward(x, /*train=*/true);
  const SoftmaxCeResult<float> ce = ce_.forward(f.logits, y);

  double sim = 0.0, sp = 0.0;
  std::map<std::string, Array4D<float>> tap_grads;

  if (t.category_live()) {
    // Wrapping as a FeatureMap validates finiteness at the treatment
    // boundary.
    const FeatureMap<float> deep(f.taps.at(t.deep_tap), t.deep_tap);
    const ClassCentroids<float> centroids = compute_centroids(deep, y);
    CategoryLossResult<float> cat =
        category_loss(deep, centroids, y, /*with_grad=*/true);
    sim = cat.value;
    Array4D<float> g = std::move(cat.d_features);
    const float a = static_cast<float>(t.alpha);
    for (size_t i = 0; i < g.size(); ++i) g.data()[i] *= a;
    accumulate_tap_grad(tap_grads, t.deep_tap, std::move(g));
  }

  if (t.boundary_live()) {
    // Several shallow taps average their branch losses, so each branch
    // backpropagates beta/<head count>.
    const double inv = 1.0 / static_cast<double>(heads_.size());
    const float scale = static_cast<float>(t.beta * inv);
    for (size_t i = 0; i < heads_.size(); ++i) {
      const std::string& tag = t.shallow_taps[i];
      Array4D<float> logits9 =
          heads_[i]->forward(f.taps.at(tag), x.h(), x.w(), /*train=*/true);
      SuperpixelBranchResult<float> br = superpixel_branch_loss(
          logits9, y, static_cast<float>(t.margin), t.superpixel_size,
          t.norm_mode(), /*with_grad=*/true);
      sp += inv * br.value;
      Array4D<float> dl = std::move(br.d_logits);
      for (size_t j = 0; j < dl.size(); ++j) dl.data()[j] *= scale;
      accumulate_tap_grad(tap_grads, tag, heads_[i]->backward(dl));
    }
  }

  StepLosses out;
  out.ce = ce.value;
  out.sim = sim;
  out.sp = sp;
  out.total = total_loss(out.ce, out.sim, out.sp, t.alpha, t.beta);

  model_->backward(ce_.backward(), tap_grads);
  opt_->step(static_cast<float>(lr));
  return out;
}

void Trainer::write_checkpoint(const std::string& path, int epoch,
                               double miou) {
  nlohmann::json extra;
  extra["epoch"] = epoch;
  extra["val_miou"] = miou;
  save_model_checkpoint(path, model_->network(), &heads_, extra);
}

TrainResult Trainer::run() {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg_.output_dir, ec);
  if (ec) {
    throw DataError("train: cannot create output directory '" +
                    cfg_.output_dir + "': " + ec.message());
  }
  const std::string metrics_path = cfg_.output_dir + "/metrics.jsonl";
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics.good()) {
    throw DataError("train: cannot write '" + metrics_path + "'");
  }

  TrainResult result;
  result.output_dir = cfg_.output_dir;
  result.best_miou = -1.0;

  const int n_train = train_view_.size();
  const int bs = cfg_.optimizer.batch_size;
  std::vector<int> order(n_train);
  for (int i = 0; i < n_train; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    const double lr = lr_for_epoch(epoch);
    order_rng_.shuffle(order);

    double sum_ce = 0, sum_sim = 0, sum_sp = 0, sum_total = 0;
    int steps = 0;
    for (int begin = 0; begin < n_train; begin += bs) {
      const int count = std::min(bs, n_train - begin);
      LabelMap y;
      const Array4D<float> x = assemble_batch(order, begin, count, &y);
      const StepLosses sl = train_step(x, y, lr);
      sum_ce += sl.ce;
      sum_sim += sl.sim;
      sum_sp += sl.sp;
      sum_total += sl.total;
      ++steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.loss_ce = sum_ce / steps;
    rec.loss_sim = sum_sim / steps;
    rec.loss_sp = sum_sp / steps;
    rec.loss_total = sum_total / steps;

    const EvalResult ev =
        evaluate_model(model_->network(), val_view_, cfg_.eval_band);
    rec.val_miou = ev.miou;
    rec.val_boundary_f = ev.boundary_f;
    rec.val_per_class_iou = ev.per_class_iou;
    result.epochs.push_back(rec);

    nlohmann::json line;
    line["epoch"] = rec.epoch;
    line["lr"] = rec.lr;
    line["loss_ce"] = rec.loss_ce;
    line["loss_sim"] = rec.loss_sim;
    line["loss_sp"] = rec.loss_sp;
    line["loss_total"] = rec.loss_total;
    line["val_miou"] = rec.val_miou;
    line["val_boundary_f"] = rec.val_boundary_f;
    line["val_per_class_iou"] = rec.val_per_class_iou;
    metrics << line.dump() << "\n";
    metrics.flush();

    std::printf(
        "epoch %3d  lr %.6f  loss %.6f (ce %.6f sim %.6f sp %.6f)  "
        "val mIoU %.4f  boundary-F %.4f\n",
        epoch, lr, rec.loss_total, rec.loss_ce, rec.loss_sim, rec.loss_sp,
        rec.val_miou, rec.val_boundary_f);

    write_checkpoint(cfg_.output_dir + "/last.ckpt", epoch, rec.val_miou);
    if (rec.val_miou > result.best_miou) {
      result.best_miou = rec.val_miou;
      result.best_epoch = epoch;
      write_checkpoint(cfg_.output_dir + "/best.ckpt", epoch, rec.val_miou);
    }
  }
  if (!metrics.good()) {
    throw DataError("train: failed while writing '" + metrics_path + "'");
  }
  metrics.close();

  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["kind"] = "segdoctor-run";
  manifest["config"] = run_config_json(cfg_);
  manifest["metrics_file"] = "metrics.jsonl";
  manifest["checkpoints"] = {{"best", "best.ckpt"}, {"last", "last.ckpt"}};
  manifest["model"] = {
      {"arch", model_->network().arch_name()},
      {"parameters", model_->network().num_params()},
  };
  size_t head_params = 0;
  for (auto& h : heads_) head_params += h->num_params();
  manifest["model"]["head_parameters"] = head_params;
  manifest["data"] = {{"train_size", train_view_.size()},
                      {"val_size", val_view_.size()}};
  manifest["best"] = {{"epoch", result.best_epoch},
                      {"val_miou", result.best_miou}};
  manifest["final"] = {{"epoch", cfg_.epochs - 1},
                       {"val_miou", result.epochs.back().val_miou}};
  const std::string manifest_path = cfg_.output_dir + "/manifest.json";
  std::ofstream mf(manifest_path, std::ios::trunc);
  mf << manifest.dump(2) << "\n";
  if (!mf.good()) {
    throw DataError("train: cannot write '" + manifest_path + "'");
  }
  return result;
}

void save_model_checkpoint(
    const std::string& path, SegmentationNetwork<float>& net,
    const std::vector<std::unique_ptr<SpixelHead<float>>>* heads,
    const nlohmann::json& extra_meta) {
  ArrayContainer c;
  c.meta()["schema_version"] = 1;
  c.meta()["kind"] = "segdoctor-checkpoint";
  c.meta()["arch"] = net.arch_name();
  c.meta()["num_classes"] = net.num_classes();
  c.meta()["in_channels"] = net.in_channels();
  for (const auto& item : extra_meta.items()) {
    c.meta()[item.key()] = item.value();
  }

  std::vector<ParamView<float>> params, state;
  net.collect_params(params);
  net.collect_state(state);
  if (heads) {
    for (const auto& h : *heads) {
      h->collect_params(params);
      h->collect_state(state);
    }
  }
  for (const ParamView<float>& p : params) {
    c.add_f32("param." + p.name, p.data, {static_cast<int64_t>(p.n)});
  }
  for (const ParamView<float>& s : state) {
    c.add_f32("state." + s.name, s.data, {static_cast<int64_t>(s.n)});
  }
  c.save(path);
}

LoadedCheckpoint load_model_checkpoint(const std::string& path) {
  ArrayContainer c = ArrayContainer::load(path);
  const nlohmann::json& meta = c.meta();
  if (!meta.contains("kind") || meta["kind"] != "segdoctor-checkpoint") {
    throw DataError("checkpoint '" + path + "': not a model checkpoint");
  }
  const std::string arch = meta.value("arch", "");
  if (arch != "reference-unet") {
    throw DataError("checkpoint '" + path + "': unknown architecture '" +
                    arch + "'");
  }
  const int k = meta.value("num_classes", 0);
  const int in_ch = meta.value("in_channels", 0);
  if (k < 2 || in_ch < 1) {
    throw DataError("checkpoint '" + path + "': malformed class/channel "
                    "counts in the manifest");
  }

  LoadedCheckpoint out;
  out.meta = meta;
  out.net = std::make_unique<ReferenceUNet<float>>(k, in_ch, /*seed=*/0);

  std::vector<ParamView<float>> views;
  out.net->collect_params(views);
  std::vector<ParamView<float>> state;
  out.net->collect_state(state);
  views.insert(views.end(), state.begin(), state.end());

  for (ParamView<float>& v : views) {
    const std::string name =
        (v.grad != nullptr ? "param." : "state.") + v.name;
    const std::vector<float> data = c.f32(name);
    if (data.size() != v.n) {
      throw DataError("checkpoint '" + path + "': array '" + name +
                      "' has " + std::to_string(data.size()) +
                      " values, expected " + std::to_string(v.n));
    }
    std::copy(data.begin(), data.end(), v.data);
  }
  return out;
}

AblationResult run_ablation(const RunConfig& base, int num_seeds) {
  check(num_seeds >= 1, "ablation: need at least one seed");
  struct RowDef {
    const char* name;
    bool category, boundary;
  };
  const RowDef defs[4] = {{"baseline", false, false},
                          {"category", true, false},
                          {"boundary", false, true},
                          {"both", true, true}};

  AblationResult result;
  for (const RowDef& def : defs) {
    AblationRow row;
    row.name = def.name;
    row.category = def.category;
    row.boundary = def.boundary;
    row.all_descended = true;

    for (int v = 0; v < num_seeds; ++v) {
      RunConfig cfg = base;
      cfg.treatment.enable_category = def.category;
      cfg.treatment.enable_boundary = def.boundary;
      cfg.seeds.model = base.seeds.model + v;
      cfg.seeds.data = base.seeds.data + v;
      cfg.seeds.augment = base.seeds.augment + v;
      cfg.output_dir =
          base.output_dir + "/" + def.name + "/seed" + std::to_string(v);
      std::printf("[ablation] %s seed %d -> %s\n", def.name, v,
                  cfg.output_dir.c_str());
      Trainer trainer(cfg);
      const TrainResult r = trainer.run();

      AblationCell cell;
      cell.seed_shift = v;
      cell.final_miou = r.epochs.back().val_miou;
      cell.final_boundary_f = r.epochs.back().val_boundary_f;
      cell.first_loss = r.epochs.front().loss_total;
      cell.final_loss = r.epochs.back().loss_total;
      row.all_descended =
          row.all_descended && cell.final_loss < cell.first_loss;
      row.mean_miou += cell.final_miou / num_seeds;
      row.mean_boundary_f += cell.final_boundary_f / num_seeds;
      row.cells.push_back(cell);
    }
    result.rows.push_back(row);
  }

  // Comparison table over mean final-epoch validation scores.
  char buf[256];
  std::string table;
  table += "treatment grid, mean final-epoch validation over seeds\n";
  std::snprintf(buf, sizeof(buf), "%-10s %-9s %-9s %10s %12s %22s\n", "row",
                "category", "boundary", "mIoU", "boundary-F",
                "loss first -> final");
  table += buf;
  for (const AblationRow& row : result.rows) {
    double first = 0, last = 0;
    for (const AblationCell& cell : row.cells) {
      first += cell.first_loss / row.cells.size();
      last += cell.final_loss / row.cells.size();
    }
    std::snprintf(buf, sizeof(buf),
                  "%-10s %-9s %-9s %10.4f %12.4f %10.4f -> %-8.4f%s\n",
                  row.name.c_str(), row.category ? "on" : "off",
                  row.boundary ? "on" : "off", row.mean_miou,
                  row.mean_boundary_f, first, last,
                  row.all_descended ? "" : "  [no descent]");
    table += buf;
  }
  result.table = table;

  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = "segdoctor-ablation";
  j["num_seeds"] = num_seeds;
  j["rows"] = nlohmann::json::array();
  for (const AblationRow& row : result.rows) {
    nlohmann::json jr;
    jr["name"] = row.name;
    jr["enable_category"] = row.category;
    jr["enable_boundary"] = row.boundary;
    jr["mean_final_miou"] = row.mean_miou;
    jr["mean_final_boundary_f"] = row.mean_boundary_f;
    jr["all_descended"] = row.all_descended;
    jr["cells"] = nlohmann::json::array();
    for (const AblationCell& cell : row.cells) {
      jr["cells"].push_back({{"seed_shift", cell.seed_shift},
                             {"final_miou", cell.final_miou},
                             {"final_boundary_f", cell.final_boundary_f},
                             {"first_loss", cell.first_loss},
                             {"final_loss", cell.final_loss}});
    }
    j["rows"].push_back(jr);
  }

  std::error_code ec;
  std::filesystem::create_directories(base.output_dir, ec);
  std::ofstream jf(base.output_dir + "/ablation.json", std::ios::trunc);
  jf << j.dump(2) << "\n";
  std::ofstream tf(base.output_dir + "/ablation.txt", std::ios::trunc);
  tf << table;
  if (!jf.good() || !tf.good()) {
    throw DataError("ablation: cannot write results under '" +
                    base.output_dir + "'");
  }
  return result;
}

}  // namespace segdoctor
