#pragma once

#include "mpox/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpox {

/// MPXT layout, all integers little-endian:
///
///   "MPXT" | u32 version | u32 config_len | config_len bytes of UTF-8 text
///   | u32 tensor_count | tensor_count x
///       ( u16 name_len | name | u8 rank | rank x u32 dim | u8 dtype | payload )
///
/// dtype 0 is IEEE-754 binary32; payload is row-major.
inline constexpr char kCheckpointMagic[4] = {'M', 'P', 'X', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 0;

enum class CheckpointErrc : int {
  kIo = 1,
  kBadMagic = 2,
  kUnsupportedVersion = 3,
  kTruncated = 4,
  kDimOverflow = 5,
  kBadDtype = 6,
  kBadConfig = 7,
  kTensorMismatch = 8,
};

const char* checkpoint_errc_name(CheckpointErrc code);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  CheckpointErrc code() const { return code_; }

 private:
  CheckpointErrc code_;
};

struct NamedTensor {
  std::string name;
  TensorF tensor;
};

struct CheckpointData {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;
  std::vector<NamedTensor> tensors;

  const TensorF* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::filesystem::path& path);

/// Bytes of everything but tensor payloads.
std::size_t checkpoint_metadata_bytes(const CheckpointData& data);

}  // namespace mpox
