#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mohaq/sru_net.hpp"

namespace mohaq {

// MOHAQNET container, all integers and floats little-endian:
//   char[8]  magic "MOHAQNET"
//   u32      format version (1)
//   u32 x5   input_size, hidden_size, num_directions, output_classes, sru_layers
//   u32      layer count, then per layer:
//            u32 kind, u32 in_dim, u32 out_dim, u32 directions,
//            u32 matrix count, u32 aux vector count, u64 parameter count
//   f32[]    per layer: M×V matrices row-major, then aux vectors
// Parameters are stored as float32; networks whose parameters are float-representable
// round-trip bit-exactly.
inline constexpr char kCheckpointMagic[8] = {'M', 'O', 'H', 'A', 'Q', 'N', 'E', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_network(const SruNetwork& net);
SruNetwork deserialize_network(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const SruNetwork& net, const std::filesystem::path& path);
SruNetwork load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the serialized bytes, hex encoded.
std::string network_digest(const SruNetwork& net);

}  // namespace mohaq
