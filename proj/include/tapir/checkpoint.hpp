#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tapir/common.hpp"
#include "tapir/tensor.hpp"

namespace tapir {

// Versioned binary container, little-endian on disk:
//   magic "TAPIRCKPT" | format version u32
//   | hyper block: u64 length + UTF-8 key=value lines (sorted by key)
//   | manifest: u32 count, then per record
//       u32 name length + name bytes | u8 dtype tag (0=f32, 1=f64)
//       u32 ndim + u32 extents | u64 payload offset | u64 payload bytes
//   | raw parameter payloads
// Payload offsets are relative to the first payload byte.

inline constexpr char kCheckpointMagic[] = "TAPIRCKPT";  // 9 bytes, no NUL on disk
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& params,
                     const std::map<std::string, std::string>& hypers);

struct LoadedCheckpoint {
    std::map<std::string, std::string> hypers;
    std::vector<NamedTensor> params;  // manifest order

    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;
    std::string hyper(const std::string& key) const;          // throws DataError if missing
    std::string hyper_or(const std::string& key, const std::string& fallback) const;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace tapir
