#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pbnn/network.hpp"

namespace pbnn {

/// Binary network container, all integers and floats little-endian:
///
///   "PBNN"                      4-byte magic
///   u16 version                 currently 1
///   u32 layer count
///   per layer:
///     u8  kind tag              LayerKind value
///     u32 kernel, in, out, slot
///     params (conv/fc only):    weights tensor, bias tensor
///   u32 skip count, then (u32 from, u32 to) per skip
///
/// A tensor is u32 rank, rank x u32 dims, then f64 values in row-major order.
inline constexpr std::uint16_t checkpoint_version = 1;

std::string encode_checkpoint(const Network& net);
Network decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace pbnn
