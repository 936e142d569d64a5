#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xienh/dsp.hpp"

namespace xienh::io {

/// Reads 16-bit PCM mono 16 kHz RIFF/WAVE; samples are scaled by 1/32768.
/// Anything else raises UnsupportedFormat naming the offending field.
AudioSignal read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono; samples are scaled by 32768, rounded half away
/// from zero and clipped to [-32768, 32767].
void write_wav(const std::filesystem::path& path, const AudioSignal& signal);

std::vector<std::uint8_t> encode_wav(const AudioSignal& signal);
AudioSignal decode_wav(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");

/// One path per line; blank lines and lines starting with '#' are skipped.
/// Relative entries are resolved against the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void atomic_write_text(const std::filesystem::path& path, std::string_view text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Log-magnitude spectrogram image (dB, floor -60 dB below the maximum),
/// time along x, low frequencies at the bottom.
void write_spectrogram_png(const std::filesystem::path& path, const Spectrogram& spec);

}  // namespace xienh::io
