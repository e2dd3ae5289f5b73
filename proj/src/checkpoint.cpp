#include "mpox/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace mpox {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t le(int n, const char* what) {
    need(std::size_t(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(bytes_[pos_ + std::size_t(i)]) << (8 * i);
    pos_ += std::size_t(n);
    return v;
  }
  std::uint8_t u8(const char* what) { return std::uint8_t(le(1, what)); }
  std::uint16_t u16(const char* what) { return std::uint16_t(le(2, what)); }
  std::uint32_t u32(const char* what) { return std::uint32_t(le(4, what)); }
  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError(CheckpointErrc::kTruncated,
                            std::string("checkpoint truncated while reading ") + what);
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint64_t kMaxElements = std::uint64_t(1) << 31;

}  // namespace

const char* checkpoint_errc_name(CheckpointErrc code) {
  switch (code) {
    case CheckpointErrc::kIo: return "checkpoint.io";
    case CheckpointErrc::kBadMagic: return "checkpoint.bad_magic";
    case CheckpointErrc::kUnsupportedVersion: return "checkpoint.unsupported_version";
    case CheckpointErrc::kTruncated: return "checkpoint.truncated";
    case CheckpointErrc::kDimOverflow: return "checkpoint.dim_overflow";
    case CheckpointErrc::kBadDtype: return "checkpoint.bad_dtype";
    case CheckpointErrc::kBadConfig: return "checkpoint.bad_config";
    case CheckpointErrc::kTensorMismatch: return "checkpoint.tensor_mismatch";
  }
  return "checkpoint.unknown";
}

const TensorF* CheckpointData::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.tensor;
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data) {
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(data.version);
  w.u32(std::uint32_t(data.config_text.size()));
  w.bytes(data.config_text.data(), data.config_text.size());
  w.u32(std::uint32_t(data.tensors.size()));
  for (const auto& [name, tensor] : data.tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw CheckpointError(CheckpointErrc::kTensorMismatch, "tensor name too long: " + name);
    w.u16(std::uint16_t(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(std::uint8_t(tensor.rank()));
    for (Index d : tensor.shape()) w.u32(std::uint32_t(d));
    w.u8(kDtypeFloat32);
    for (float v : tensor.values()) w.f32(v);
  }
  return w.take();
}

CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointError(CheckpointErrc::kBadMagic, "not an MPXT checkpoint (bad magic)");
  Reader r(bytes.subspan(4));
  CheckpointData data;
  data.version = r.u32("version");
  if (data.version != kCheckpointVersion)
    throw CheckpointError(CheckpointErrc::kUnsupportedVersion,
                          "unsupported checkpoint version " + std::to_string(data.version));
  const std::uint32_t config_len = r.u32("config length");
  data.config_text = r.text(config_len, "config text");
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = r.text(r.u16("tensor name length"), "tensor name");
    const std::uint8_t rank = r.u8("tensor rank");
    if (rank == 0 || rank > 4)
      throw CheckpointError(CheckpointErrc::kDimOverflow,
                            "tensor '" + nt.name + "' has rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t elements = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32("tensor dims");
      if (dim == 0)
        throw CheckpointError(CheckpointErrc::kDimOverflow,
                              "tensor '" + nt.name + "' has a zero dimension");
      elements *= dim;
      if (elements > kMaxElements)
        throw CheckpointError(CheckpointErrc::kDimOverflow,
                              "tensor '" + nt.name + "' dimensions overflow the element limit");
      shape.push_back(Index(dim));
    }
    const std::uint8_t dtype = r.u8("tensor dtype");
    if (dtype != kDtypeFloat32)
      throw CheckpointError(CheckpointErrc::kBadDtype, "tensor '" + nt.name +
                                                           "' has unsupported dtype " +
                                                           std::to_string(dtype));
    r.need(std::size_t(elements) * 4, "tensor payload");
    nt.tensor = TensorF(shape);
    for (float& v : nt.tensor.values()) v = std::bit_cast<float>(r.u32("tensor payload"));
    data.tensors.push_back(std::move(nt));
  }
  return data;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  const auto bytes = encode_checkpoint(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointErrc::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrc::kIo, "write failed for " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrc::kIo, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::size_t checkpoint_metadata_bytes(const CheckpointData& data) {
  std::size_t n = 4 + 4 + 4 + data.config_text.size() + 4;
  for (const auto& t : data.tensors) n += 2 + t.name.size() + 1 + 4 * t.tensor.rank() + 1;
  return n;
}

}  // namespace mpox
