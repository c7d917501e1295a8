#include "segdoctor/io/image.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "segdoctor/core/errors.hpp"

namespace segdoctor {

Array4D<float> load_image(const std::filesystem::path& file) {
  cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
  if (bgr.empty())
    throw DataError("load_image: cannot read '" + file.string() + "'");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Array4D<float> out(1, 3, rgb.rows, rgb.cols);
  for (int y = 0; y < rgb.rows; ++y) {
    const cv::Vec3b* row = rgb.ptr<cv::Vec3b>(y);
    for (int x = 0; x < rgb.cols; ++x)
      for (int c = 0; c < 3; ++c)
        out(0, c, y, x) = static_cast<float>(row[x][c]) / 255.0f;
  }
  return out;
}

LabelMap load_mask(const std::filesystem::path& file, int num_classes) {
  cv::Mat raw = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty())
    throw DataError("load_mask: cannot read '" + file.string() + "'");
  if (raw.channels() != 1 || raw.depth() != CV_8U)
    throw DataError("load_mask: '" + file.string() +
                    "' must be a single-channel 8-bit index image, got " +
                    std::to_string(raw.channels()) + " channel(s)");
  LabelMap labels(1, raw.rows, raw.cols, num_classes);
  for (int y = 0; y < raw.rows; ++y) {
    const uint8_t* row = raw.ptr<uint8_t>(y);
    for (int x = 0; x < raw.cols; ++x)
      labels.at(0, y, x) = static_cast<int32_t>(row[x]);
  }
  try {
    labels.validate();
  } catch (const ValidationError& e) {
    throw DataError("load_mask: '" + file.string() + "': " + e.what());
  }
  return labels;
}

void save_image(const std::filesystem::path& file, const Array4D<float>& x) {
  check(x.n() == 1 && x.c() == 3,
        "save_image: expected a (1, 3, H, W) tensor, got " + x.shape_str());
  cv::Mat bgr(x.h(), x.w(), CV_8UC3);
  for (int y = 0; y < x.h(); ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int xx = 0; xx < x.w(); ++xx)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(x(0, c, y, xx), 0.0f, 1.0f);
        row[xx][2 - c] = static_cast<uint8_t>(v * 255.0f + 0.5f);
      }
  }
  if (!cv::imwrite(file.string(), bgr))
    throw DataError("save_image: cannot write '" + file.string() + "'");
}

void save_mask(const std::filesystem::path& file, const LabelMap& labels,
               int batch_index) {
  check(batch_index >= 0 && batch_index < labels.n(),
        "save_mask: batch index out of range");
  cv::Mat m(labels.h(), labels.w(), CV_8UC1);
  for (int y = 0; y < labels.h(); ++y) {
    uint8_t* row = m.ptr<uint8_t>(y);
    for (int x = 0; x < labels.w(); ++x) {
      const int32_t v = labels.at(batch_index, y, x);
      check(v >= 0 && v <= 255,
            "save_mask: label value " + std::to_string(v) +
                " does not fit an 8-bit index image");
      row[x] = static_cast<uint8_t>(v);
    }
  }
  if (!cv::imwrite(file.string(), m))
    throw DataError("save_mask: cannot write '" + file.string() + "'");
}

}  // namespace segdoctor
