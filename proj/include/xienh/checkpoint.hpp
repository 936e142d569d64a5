#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "xienh/model.hpp"
#include "xienh/snr_map.hpp"
#include "xienh/trainer.hpp"

namespace xienh::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kStatsVersion = 1;

// Checkpoint layout, all integers and floats little-endian:
//   "XIMB" | u32 version | u32 header length | header (UTF-8 JSON)
//   | payload: stats mu (f32 x K), stats sigma (f32 x K), parameters (f32, canonical order)
//   | u64 FNV-1a of payload
//
// Stats file layout:
//   "XIST" | u32 version | u32 K | mu (f32 x K) | sigma (f32 x K) | u64 FNV-1a of the floats

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params,
                                            const std::optional<TrainConfig>& train = std::nullopt);
ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::optional<TrainConfig>& train = std::nullopt);
ModelParams load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_stats(const XiMapStats& stats);
XiMapStats decode_stats(std::span<const std::uint8_t> bytes);
void save_stats(const std::filesystem::path& path, const XiMapStats& stats);
XiMapStats load_stats(const std::filesystem::path& path);

/// Rounds every statistic to float, as stored on disk.
XiMapStats quantize_stats(const XiMapStats& stats);

}  // namespace xienh::io
