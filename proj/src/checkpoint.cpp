#include "admpo/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "admpo/errors.hpp"

namespace admpo {

namespace {

void put_u32(std::string& buf, uint32_t v) {
  char b[4];
  b[0] = static_cast<char>(v & 0xff);
  b[1] = static_cast<char>((v >> 8) & 0xff);
  b[2] = static_cast<char>((v >> 16) & 0xff);
  b[3] = static_cast<char>((v >> 24) & 0xff);
  buf.append(b, 4);
}

void put_f32(std::string& buf, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(buf, v);
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(data_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  float f32() {
    const uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }

  std::string bytes(size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(size_t n) {
    if (pos_ + n > data_.size())
      throw IoError("checkpoint: truncated file " + path_);
  }
  const std::string& data_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  std::string buf;
  buf.append("ADMP", 4);
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<uint32_t>(t.shape.size()));
    for (int64_t d : t.shape) put_u32(buf, static_cast<uint32_t>(d));
    for (float v : t.data) put_f32(buf, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(data, path);
  if (r.bytes(4) != "ADMP")
    throw IoError("checkpoint: bad magic in '" + path + "'");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version) + " in '" + path + "'");
  const uint32_t count = r.u32();
  NamedTensors out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    const uint32_t rank = r.u32();
    std::vector<int64_t> shape;
    int64_t n = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<int64_t>(r.u32()));
      n *= shape.back();
    }
    std::vector<float> vals(static_cast<size_t>(n));
    for (auto& v : vals) v = r.f32();
    out.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(vals)));
  }
  if (!r.done()) throw IoError("checkpoint: trailing bytes in '" + path + "'");
  return out;
}

}  // namespace admpo
