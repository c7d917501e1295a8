#pragma once

// Single-file array container: a magic header, a JSON manifest, then the raw
// array bytes back to back. Checkpoints, centroid state, and diagnosis
// artifacts all go through this. Data is stored little-endian native; the
// loader validates magic, version, offsets, and shape/byte accounting and
// throws DataError naming the file on any mismatch.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace segdoctor {

class ArrayContainer {
 public:
  static constexpr uint32_t kFormatVersion = 1;

  struct Entry {
    std::string dtype;  // "f32" | "f64" | "i32" | "i64" | "u8"
    std::vector<int64_t> shape;
    std::vector<unsigned char> bytes;
    int64_t count() const;
  };

  // free-form metadata block stored in the manifest
  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  void add_f32(const std::string& name, const float* data,
               std::vector<int64_t> shape);
  void add_f64(const std::string& name, const double* data,
               std::vector<int64_t> shape);
  void add_i32(const std::string& name, const int32_t* data,
               std::vector<int64_t> shape);
  void add_i64(const std::string& name, const int64_t* data,
               std::vector<int64_t> shape);
  void add_u8(const std::string& name, const uint8_t* data,
              std::vector<int64_t> shape);

  bool has(const std::string& name) const { return arrays_.count(name) == 1; }
  const Entry& entry(const std::string& name) const;
  std::vector<std::string> names() const;

  // typed copies; dtype must match exactly
  std::vector<float> f32(const std::string& name) const;
  std::vector<double> f64(const std::string& name) const;
  std::vector<int32_t> i32(const std::string& name) const;
  std::vector<int64_t> i64(const std::string& name) const;
  std::vector<uint8_t> u8(const std::string& name) const;

  void save(const std::filesystem::path& file) const;
  static ArrayContainer load(const std::filesystem::path& file);

 private:
  void add_raw(const std::string& name, const void* data, size_t elem_size,
               const char* dtype, std::vector<int64_t> shape);
  template <typename T>
  std::vector<T> typed(const std::string& name, const char* dtype) const;

  nlohmann::json meta_ = nlohmann::json::object();
  std::map<std::string, Entry> arrays_;
};

}  // namespace segdoctor
