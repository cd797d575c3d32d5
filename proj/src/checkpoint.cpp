#include "spcse/checkpoint.hpp"

#include <cstring>
#include <map>

#include <zlib.h>

namespace spcse {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'C', 'S'};
constexpr uint16_t kVersion = 1;

void put_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  static_assert(sizeof(float) == 4);
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_tensor(std::string& out, const std::string& name, const Mat& m) {
  put_u32(out, uint32_t(name.size()));
  out.append(name);
  put_u32(out, 2);  // rank
  put_u32(out, uint32_t(m.rows()));
  put_u32(out, uint32_t(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(out, m(r, c));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size())
      raise(ErrorKind::Integrity, "checkpoint is truncated or corrupt");
  }
  uint16_t u16() {
    need(2);
    uint16_t v = uint16_t(uint8_t(buf[pos])) | uint16_t(uint8_t(buf[pos + 1])) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[pos + size_t(i)])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf[pos + size_t(i)])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::pair<std::string, Mat> read_tensor(Reader& r) {
  uint32_t name_len = r.u32();
  if (name_len > 4096) raise(ErrorKind::Integrity, "checkpoint tensor name too long");
  std::string name = r.bytes(name_len);
  uint32_t rank = r.u32();
  if (rank != 2)
    raise(ErrorKind::Integrity, "checkpoint tensor " + name + " has rank " +
                                    std::to_string(rank) + ", expected 2");
  uint32_t rows = r.u32();
  uint32_t cols = r.u32();
  if (rows > (1u << 24) || cols > (1u << 24))
    raise(ErrorKind::Integrity, "checkpoint tensor " + name + " has implausible shape");
  r.need(size_t(rows) * cols * 4);
  Mat m(rows, cols);
  for (uint32_t i = 0; i < rows; ++i)
    for (uint32_t j = 0; j < cols; ++j) m(i, j) = r.f32();
  return {std::move(name), std::move(m)};
}

uint32_t crc_of(const std::string& data, size_t len) {
  uLong c = crc32(0L, Z_NULL, 0);
  return uint32_t(crc32(c, reinterpret_cast<const Bytef*>(data.data()), uInt(len)));
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  if (!ckpt.masks.shape_matches(ckpt.config.model))
    raise(ErrorKind::Shape, "checkpoint masks do not match the model config");

  std::string out;
  out.append(kMagic, 4);
  put_u16(out, kVersion);

  std::string cfg_json = ckpt.config.to_json_string();
  put_u32(out, uint32_t(cfg_json.size()));
  out.append(cfg_json);

  uint32_t n_tensors = 0;
  for_each_tensor(ckpt.weights, [&](const std::string&, const Mat&) { ++n_tensors; });
  put_u32(out, n_tensors);
  for_each_tensor(ckpt.weights,
                  [&](const std::string& name, const Mat& m) { put_tensor(out, name, m); });

  put_u32(out, uint32_t(2 * ckpt.masks.head_masks.size()));
  for (size_t l = 0; l < ckpt.masks.head_masks.size(); ++l)
    put_tensor(out, "mask.head." + std::to_string(l), ckpt.masks.head_masks[l]);
  for (size_t l = 0; l < ckpt.masks.neuron_masks.size(); ++l)
    put_tensor(out, "mask.ffn." + std::to_string(l), ckpt.masks.neuron_masks[l]);

  put_u64(out, ckpt.step);
  put_u32(out, crc_of(out, out.size()));
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  if (!file_exists(path)) raise(ErrorKind::Io, "checkpoint file " + path + " does not exist");
  std::string buf = read_file(path);
  if (buf.size() < 4 + 2 + 4 + 4 + 4 + 8 + 4)
    raise(ErrorKind::Integrity, "checkpoint is truncated or corrupt");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    raise(ErrorKind::Integrity, "not a checkpoint file (bad magic)");

  uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i)
    stored_crc |= uint32_t(uint8_t(buf[buf.size() - 4 + size_t(i)])) << (8 * i);
  if (crc_of(buf, buf.size() - 4) != stored_crc)
    raise(ErrorKind::Integrity, "checkpoint checksum mismatch");

  Reader r{buf};
  r.pos = 4;
  uint16_t version = r.u16();
  if (version != kVersion)
    raise(ErrorKind::Compatibility, "checkpoint version " + std::to_string(version) +
                                        " is not readable by this build (expects version " +
                                        std::to_string(kVersion) + ")");

  Checkpoint ckpt;
  uint32_t json_len = r.u32();
  ckpt.config = RunConfig::from_json_string(r.bytes(json_len));
  const ModelConfig& mc = ckpt.config.model;

  std::map<std::string, Mat> tensors;
  uint32_t n_tensors = r.u32();
  for (uint32_t i = 0; i < n_tensors; ++i) {
    auto [name, m] = read_tensor(r);
    if (!tensors.emplace(std::move(name), std::move(m)).second)
      raise(ErrorKind::Integrity, "checkpoint has a duplicate tensor record");
  }

  ckpt.weights = init_model(mc);  // shape template; every value is overwritten below
  size_t used = 0;
  for_each_tensor(ckpt.weights, [&](const std::string& name, Mat& m) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      raise(ErrorKind::Integrity, "checkpoint is missing tensor " + name);
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols())
      raise(ErrorKind::Integrity,
            "checkpoint tensor " + name + " does not match the embedded config");
    m = it->second;
    ++used;
  });
  if (used != tensors.size())
    raise(ErrorKind::Integrity, "checkpoint has tensors the embedded config does not name");

  uint32_t n_masks = r.u32();
  if (n_masks != uint32_t(2 * mc.num_layers))
    raise(ErrorKind::Integrity, "checkpoint mask count does not match the embedded config");
  std::map<std::string, Mat> mask_tensors;
  for (uint32_t i = 0; i < n_masks; ++i) {
    auto [name, m] = read_tensor(r);
    if (!mask_tensors.emplace(std::move(name), std::move(m)).second)
      raise(ErrorKind::Integrity, "checkpoint has a duplicate mask record");
  }
  ckpt.masks = MaskSet::full(mc);
  auto take_mask = [&](const std::string& name, Mat& dst) {
    auto it = mask_tensors.find(name);
    if (it == mask_tensors.end())
      raise(ErrorKind::Integrity, "checkpoint is missing mask " + name);
    if (it->second.rows() != dst.rows() || it->second.cols() != dst.cols())
      raise(ErrorKind::Integrity,
            "checkpoint mask " + name + " does not match the embedded config");
    dst = it->second;
  };
  for (int l = 0; l < mc.num_layers; ++l) {
    take_mask("mask.head." + std::to_string(l), ckpt.masks.head_masks[size_t(l)]);
    take_mask("mask.ffn." + std::to_string(l), ckpt.masks.neuron_masks[size_t(l)]);
  }

  ckpt.step = r.u64();
  if (r.pos != buf.size() - 4)
    raise(ErrorKind::Integrity, "checkpoint has trailing bytes");
  return ckpt;
}

}  // namespace spcse
