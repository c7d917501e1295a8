#include "segdoctor/io/container.hpp"

#include <cstring>
#include <fstream>

#include "segdoctor/core/errors.hpp"

namespace segdoctor {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'G', 'D', 'A', 'R', 'R', '\0'};

size_t dtype_size(const std::string& dtype, const std::string& context) {
  if (dtype == "f32" || dtype == "i32") return 4;
  if (dtype == "f64" || dtype == "i64") return 8;
  if (dtype == "u8") return 1;
  throw DataError(context + ": unknown dtype '" + dtype + "'");
}

int64_t shape_count(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

}  // namespace

int64_t ArrayContainer::Entry::count() const { return shape_count(shape); }

void ArrayContainer::add_raw(const std::string& name, const void* data,
                             size_t elem_size, const char* dtype,
                             std::vector<int64_t> shape) {
  check(!name.empty(), "ArrayContainer: empty array name");
  check(arrays_.count(name) == 0,
        "ArrayContainer: duplicate array '" + name + "'");
  for (int64_t d : shape)
    check(d >= 1, "ArrayContainer: array '" + name + "' has a non-positive "
                  "shape entry");
  Entry e;
  e.dtype = dtype;
  e.shape = std::move(shape);
  const size_t nbytes = static_cast<size_t>(e.count()) * elem_size;
  e.bytes.resize(nbytes);
  std::memcpy(e.bytes.data(), data, nbytes);
  arrays_.emplace(name, std::move(e));
}

void ArrayContainer::add_f32(const std::string& name, const float* data,
                             std::vector<int64_t> shape) {
  add_raw(name, data, 4, "f32", std::move(shape));
}
void ArrayContainer::add_f64(const std::string& name, const double* data,
                             std::vector<int64_t> shape) {
  add_raw(name, data, 8, "f64", std::move(shape));
}
void ArrayContainer::add_i32(const std::string& name, const int32_t* data,
                             std::vector<int64_t> shape) {
  add_raw(name, data, 4, "i32", std::move(shape));
}
void ArrayContainer::add_i64(const std::string& name, const int64_t* data,
                             std::vector<int64_t> shape) {
  add_raw(name, data, 8, "i64", std::move(shape));
}
void ArrayContainer::add_u8(const std::string& name, const uint8_t* data,
                            std::vector<int64_t> shape) {
  add_raw(name, data, 1, "u8", std::move(shape));
}

const ArrayContainer::Entry& ArrayContainer::entry(
    const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end())
    throw DataError("ArrayContainer: no array named '" + name + "'");
  return it->second;
}

std::vector<std::string> ArrayContainer::names() const {
  std::vector<std::string> out;
  for (const auto& kv : arrays_) out.push_back(kv.first);
  return out;
}

template <typename T>
std::vector<T> ArrayContainer::typed(const std::string& name,
                                     const char* dtype) const {
  const Entry& e = entry(name);
  if (e.dtype != dtype)
    throw DataError("ArrayContainer: array '" + name + "' is " + e.dtype +
                    ", requested " + dtype);
  std::vector<T> out(static_cast<size_t>(e.count()));
  std::memcpy(out.data(), e.bytes.data(), e.bytes.size());
  return out;
}

std::vector<float> ArrayContainer::f32(const std::string& name) const {
  return typed<float>(name, "f32");
}
std::vector<double> ArrayContainer::f64(const std::string& name) const {
  return typed<double>(name, "f64");
}
std::vector<int32_t> ArrayContainer::i32(const std::string& name) const {
  return typed<int32_t>(name, "i32");
}
std::vector<int64_t> ArrayContainer::i64(const std::string& name) const {
  return typed<int64_t>(name, "i64");
}
std::vector<uint8_t> ArrayContainer::u8(const std::string& name) const {
  return typed<uint8_t>(name, "u8");
}

void ArrayContainer::save(const std::filesystem::path& file) const {
  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["meta"] = meta_;
  nlohmann::json arrays = nlohmann::json::array();
  uint64_t offset = 0;  // relative to the start of the data section
  for (const auto& kv : arrays_) {
    nlohmann::json a;
    a["name"] = kv.first;
    a["dtype"] = kv.second.dtype;
    a["shape"] = kv.second.shape;
    a["byte_offset"] = offset;
    a["byte_len"] = kv.second.bytes.size();
    arrays.push_back(std::move(a));
    offset += kv.second.bytes.size();
  }
  manifest["arrays"] = std::move(arrays);
  const std::string mtext = manifest.dump();

  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out)
    throw DataError("ArrayContainer: cannot open '" + file.string() +
                    "' for writing");
  out.write(kMagic, 8);
  const uint32_t ver = kFormatVersion;
  out.write(reinterpret_cast<const char*>(&ver), 4);
  const uint64_t mlen = mtext.size();
  out.write(reinterpret_cast<const char*>(&mlen), 8);
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& kv : arrays_)
    out.write(reinterpret_cast<const char*>(kv.second.bytes.data()),
              static_cast<std::streamsize>(kv.second.bytes.size()));
  out.flush();
  if (!out)
    throw DataError("ArrayContainer: write failed for '" + file.string() +
                    "'");
}

ArrayContainer ArrayContainer::load(const std::filesystem::path& file) {
  const std::string ctx = "ArrayContainer '" + file.string() + "'";
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError(ctx + ": cannot open");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError(ctx + ": bad magic, not an array container");
  uint32_t ver = 0;
  in.read(reinterpret_cast<char*>(&ver), 4);
  if (!in || ver != kFormatVersion)
    throw DataError(ctx + ": unsupported format version " +
                    std::to_string(ver));
  uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), 8);
  if (!in || mlen == 0 || mlen > (1ull << 30))
    throw DataError(ctx + ": implausible manifest length");
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw DataError(ctx + ": truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mtext);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(ctx + ": manifest is not valid JSON: " + e.what());
  }

  ArrayContainer c;
  try {
    c.meta_ = manifest.at("meta");
    uint64_t expect_offset = 0;
    for (const auto& a : manifest.at("arrays")) {
      const std::string name = a.at("name").get<std::string>();
      Entry e;
      e.dtype = a.at("dtype").get<std::string>();
      e.shape = a.at("shape").get<std::vector<int64_t>>();
      const uint64_t off = a.at("byte_offset").get<uint64_t>();
      const uint64_t len = a.at("byte_len").get<uint64_t>();
      if (off != expect_offset)
        throw DataError(ctx + ": array '" + name + "' offset mismatch");
      const size_t esz = dtype_size(e.dtype, ctx);
      if (static_cast<uint64_t>(e.count()) * esz != len)
        throw DataError(ctx + ": array '" + name +
                        "' shape does not match its byte length");
      e.bytes.resize(len);
      in.read(reinterpret_cast<char*>(e.bytes.data()),
              static_cast<std::streamsize>(len));
      if (!in) throw DataError(ctx + ": truncated data for '" + name + "'");
      expect_offset += len;
      c.arrays_.emplace(name, std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(ctx + ": malformed manifest: " + std::string(e.what()));
  }
  return c;
}

}  // namespace segdoctor
