#pragma once

// Binary checkpoint, all integers and values little-endian:
//
//   magic "SSLRCKPT" | u32 version
//   i32 num_layers, num_heads, d_model, d_ff, max_len, vocab_size
//   f32 dropout_rate (as its 32-bit pattern)
//   i32 num_classes, num_ops, value_bytes (4 or 8), tensor_count
//   per tensor: u32 name_len, name bytes, u32 rank, u32 dims[rank], values
//   u64 FNV-1a hash of every preceding byte

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "sslreg/model.hpp"

namespace sslreg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
std::string serialize_checkpoint(const ModelParams<T>& params);

/// Throws CheckpointError on bad magic, version, precision mismatch, shape or
/// name mismatch, truncation, trailing bytes or hash mismatch.
template <class T>
ModelParams<T> deserialize_checkpoint(std::string_view bytes);

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& params);
template <class T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path);

/// Reads only the header; useful to pick the precision before loading.
struct CheckpointHeader {
  ModelShape shape;
  int value_bytes = 4;
};
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace sslreg
