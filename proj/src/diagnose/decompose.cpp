#include "segdoctor/diagnose/decompose.hpp"

#include <filesystem>
#include <fstream>

#include "segdoctor/core/errors.hpp"
#include "segdoctor/diagnose/boundary.hpp"
#include "segdoctor/io/image.hpp"
#include "json.hpp"

namespace segdoctor {

ErrorDecomposition decompose_errors(const LabelMap& pred, const LabelMap& gt,
                                    int d) {
  check(pred.n() == gt.n() && pred.h() == gt.h() && pred.w() == gt.w(),
        "decompose_errors: prediction and ground truth shapes differ");
  check(pred.num_classes() == gt.num_classes(),
        "decompose_errors: class count mismatch");
  check(d >= 1, "decompose_errors: band width must be at least 1");

  const int k = gt.num_classes();
  ErrorDecomposition out;
  out.band = d;
  out.num_classes = k;
  out.category_confusion.assign(static_cast<size_t>(k) * k, 0);

  const Array4D<uint8_t> band = band_mask(gt, d);
  for (int i = 0; i < gt.n(); ++i) {
    for (int y = 0; y < gt.h(); ++y) {
      for (int x = 0; x < gt.w(); ++x) {
        if (gt.is_ignore(i, y, x)) {
          ++out.ignored;
          continue;
        }
        check(!pred.is_ignore(i, y, x),
              "decompose_errors: prediction carries the ignore index at a "
              "labeled pixel");
        const int32_t g = gt.at(i, y, x);
        const int32_t p = pred.at(i, y, x);
        if (p == g) {
          ++out.correct;
        } else if (band(i, 0, y, x)) {
          ++out.boundary_error;
        } else {
          ++out.category_error;
          out.category_confusion[static_cast<size_t>(g) * k + p] += 1;
        }
      }
    }
  }
  out.boundary_f = boundary_f(pred, gt, d);
  return out;
}

namespace {

nlohmann::json decomp_json(const ErrorDecomposition& d) {
  nlohmann::json j;
  j["correct"] = d.correct;
  j["boundary_error"] = d.boundary_error;
  j["category_error"] = d.category_error;
  j["ignored"] = d.ignored;
  j["total"] = d.total();
  j["boundary_f"] = d.boundary_f;
  return j;
}

}  // namespace

ErrorDecomposition emit_report(const std::vector<ReportSample>& samples, int d,
                               const std::string& out_dir) {
  check(!samples.empty(), "emit_report: no samples");
  const int k = samples[0].gt.num_classes();
  for (const ReportSample& s : samples) {
    check(s.image.n() == 1 && s.gt.n() == 1 && s.pred.n() == 1,
          "emit_report: each sample holds exactly one image");
    check(s.image.h() == s.gt.h() && s.image.w() == s.gt.w(),
          "emit_report: image and label shapes differ");
    check(s.image.c() == 3, "emit_report: images must be rgb");
    check(s.gt.num_classes() == k, "emit_report: class count mismatch");
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw DataError("emit_report: cannot create output directory '" + out_dir +
                    "': " + ec.message());
  }

  ErrorDecomposition totals;
  totals.band = d;
  totals.num_classes = k;
  totals.category_confusion.assign(static_cast<size_t>(k) * k, 0);
  BoundaryFAccumulator pool(d);

  // Tint colors, blended half-and-half with the input so the scene stays
  // recognizable under the markings.
  const float kCategory[3] = {1.0f, 0.0f, 0.0f};  // red
  const float kBoundary[3] = {1.0f, 1.0f, 0.0f};  // yellow
  const float blend = 0.5f;

  nlohmann::json per_image = nlohmann::json::array();
  for (const ReportSample& s : samples) {
    const ErrorDecomposition di = decompose_errors(s.pred, s.gt, d);
    totals.correct += di.correct;
    totals.boundary_error += di.boundary_error;
    totals.category_error += di.category_error;
    totals.ignored += di.ignored;
    for (size_t i = 0; i < totals.category_confusion.size(); ++i) {
      totals.category_confusion[i] += di.category_confusion[i];
    }
    pool.add(s.pred, s.gt);

    const Array4D<uint8_t> band = band_mask(s.gt, d);
    Array4D<float> overlay(1, 3, s.image.h(), s.image.w());
    for (int y = 0; y < s.image.h(); ++y) {
      for (int x = 0; x < s.image.w(); ++x) {
        const bool wrong =
            !s.gt.is_ignore(0, y, x) && s.pred.at(0, y, x) != s.gt.at(0, y, x);
        const float* tint = nullptr;
        if (wrong) tint = band(0, 0, y, x) ? kBoundary : kCategory;
        for (int c = 0; c < 3; ++c) {
          const float v = s.image(0, c, y, x);
          overlay(0, c, y, x) = tint ? (1 - blend) * v + blend * tint[c] : v;
        }
      }
    }
    const std::string path = out_dir + "/overlay_" + s.id + ".png";
    save_image(path, overlay);

    nlohmann::json ji = decomp_json(di);
    ji["id"] = s.id;
    ji["overlay"] = "overlay_" + s.id + ".png";
    per_image.push_back(ji);
  }
  totals.boundary_f = pool.f1();

  nlohmann::json summary;
  summary["schema_version"] = 1;
  summary["band"] = d;
  summary["distance"] = "chebyshev";
  summary["num_classes"] = totals.num_classes;
  summary["totals"] = decomp_json(totals);
  nlohmann::json conf = nlohmann::json::array();
  for (int g = 0; g < totals.num_classes; ++g) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < totals.num_classes; ++p) {
      row.push_back(totals.confusion_at(g, p));
    }
    conf.push_back(row);
  }
  summary["category_confusion"] = conf;
  summary["images"] = per_image;

  const std::string summary_path = out_dir + "/diagnosis.json";
  std::ofstream out(summary_path);
  out << summary.dump(2) << "\n";
  if (!out) {
    throw DataError("emit_report: failed to write '" + summary_path + "'");
  }
  return totals;
}

ErrorDecomposition emit_report(const Array4D<float>& images,
                               const LabelMap& pred, const LabelMap& gt, int d,
                               const std::vector<std::string>& ids,
                               const std::string& out_dir) {
  check(images.n() == gt.n() && images.h() == gt.h() && images.w() == gt.w(),
        "emit_report: image and label shapes differ");
  check(images.c() == 3, "emit_report: images must be (N,3,H,W)");
  check(static_cast<int>(ids.size()) == images.n(),
        "emit_report: need one id per image");
  check(pred.n() == gt.n() && pred.h() == gt.h() && pred.w() == gt.w(),
        "emit_report: prediction and ground truth shapes differ");

  std::vector<ReportSample> samples;
  samples.reserve(static_cast<size_t>(images.n()));
  for (int i = 0; i < images.n(); ++i) {
    ReportSample s;
    s.image = Array4D<float>(1, 3, images.h(), images.w());
    s.pred = LabelMap(1, gt.h(), gt.w(), gt.num_classes(), gt.ignore_index());
    s.gt = LabelMap(1, gt.h(), gt.w(), gt.num_classes(), gt.ignore_index());
    s.id = ids[i];
    for (int y = 0; y < images.h(); ++y) {
      for (int x = 0; x < images.w(); ++x) {
        for (int c = 0; c < 3; ++c) s.image(0, c, y, x) = images(i, c, y, x);
        s.pred.at(0, y, x) = pred.at(i, y, x);
        s.gt.at(0, y, x) = gt.at(i, y, x);
      }
    }
    samples.push_back(std::move(s));
  }
  return emit_report(samples, d, out_dir);
}

}  // namespace segdoctor
