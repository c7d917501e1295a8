#include <fstream>

#include "segdoctor/core/errors.hpp"
#include "segdoctor/data/dataset.hpp"
#include "segdoctor/io/image.hpp"

namespace segdoctor {

namespace fs = std::filesystem;

VocDataset::VocDataset(const fs::path& root, const std::string& split,
                       int num_classes)
    : root_(root), num_classes_(num_classes) {
  check(num_classes >= 2, "VocDataset: need at least 2 classes");
  const fs::path split_file = root / "splits" / (split + ".txt");
  std::ifstream in(split_file);
  if (!in)
    throw DataError("VocDataset: cannot open split list '" +
                    split_file.string() + "'");
  std::vector<std::string> stems;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (!line.empty()) stems.push_back(line);
  }
  if (stems.empty())
    throw DataError("VocDataset: split list '" + split_file.string() +
                    "' is empty");

  // one scan collects every broken file before anything loads lazily
  std::vector<std::string> problems;
  for (const auto& stem : stems) {
    fs::path image;
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
      const fs::path cand = root / "images" / (stem + ext);
      if (fs::exists(cand)) {
        image = cand;
        break;
      }
    }
    const fs::path mask = root / "masks" / (stem + ".png");
    if (image.empty()) {
      problems.push_back(stem + ": no image file");
      continue;
    }
    if (!fs::exists(mask)) {
      problems.push_back(stem + ": no mask file");
      continue;
    }
    try {
      masks_.push_back(load_mask(mask, num_classes));
      image_files_.push_back(image);
      stems_.push_back(stem);
    } catch (const DataError& e) {
      problems.push_back(stem + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "VocDataset: " + std::to_string(problems.size()) +
                      " broken sample(s) under '" + root.string() + "':";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
}

Sample VocDataset::get(int index) const {
  check(index >= 0 && index < size(),
        "VocDataset: index " + std::to_string(index) + " out of range");
  Sample s;
  s.id = stems_[index];
  s.image = load_image(image_files_[index]);
  s.labels = masks_[index];
  if (s.image.h() != s.labels.h() || s.image.w() != s.labels.w())
    throw DataError("VocDataset: image/mask extent mismatch for '" +
                    stems_[index] + "': image " + s.image.shape_str() +
                    " vs mask " + std::to_string(s.labels.h()) + "x" +
                    std::to_string(s.labels.w()));
  return s;
}

}  // namespace segdoctor
