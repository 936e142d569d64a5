#include "xienh/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "xienh/error.hpp"

namespace xienh::io {
namespace fs = std::filesystem;

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

void png_sink(png_structp p, png_bytep data, png_size_t len) {
  auto* sink = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
  sink->insert(sink->end(), data, data + len);
}

// Kept free of objects with destructors: libpng reports errors by longjmp.
bool encode_gray_png(png_bytepp rows, png_uint_32 width, png_uint_32 height,
                     std::vector<std::uint8_t>* out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, png_sink, nullptr);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_rows(png, info, rows);
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

AudioSignal decode_wav(std::span<const std::uint8_t> bytes, const std::string& name) {
  auto fail = [&](const std::string& why) { throw UnsupportedFormat(name + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) fail("truncated fmt chunk");
      std::uint16_t format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == kFormatExtensible && avail >= 40) format = le16(chunk + 8 + 24);
      if (format != kFormatPcm) fail("unsupported encoding " + std::to_string(format) + " (need PCM)");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.subspan(body, avail);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) fail("missing fmt chunk");
  if (!have_data) fail("missing data chunk");
  if (bits != 16) fail("unsupported bit depth " + std::to_string(bits) + " (need 16)");
  if (channels != 1) fail("unsupported channel count " + std::to_string(channels) + " (need mono)");
  if (rate != static_cast<std::uint32_t>(kSampleRate)) {
    fail("unsupported sample rate " + std::to_string(rate) + " Hz (need 16000 Hz)");
  }

  AudioSignal out;
  out.samples.resize(data.size() / 2);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const auto raw = static_cast<std::int16_t>(le16(data.data() + 2 * i));
    out.samples[i] = static_cast<double>(raw) / 32768.0;
  }
  return out;
}

std::vector<std::uint8_t> encode_wav(const AudioSignal& signal) {
  require(signal.sample_rate == kSampleRate, "write_wav: sample rate must be 16000");
  const auto n = static_cast<std::uint32_t>(signal.samples.size());
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  put_tag(out, "RIFF");
  put32(out, 36 + 2 * n);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, kSampleRate);
  put32(out, kSampleRate * 2);
  put16(out, 2);
  put16(out, 16);
  put_tag(out, "data");
  put32(out, 2 * n);
  for (double x : signal.samples) {
    require(std::isfinite(x), "write_wav: non-finite sample");
    const double q = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

AudioSignal read_wav(const fs::path& path) {
  const auto bytes = read_file(path);
  return decode_wav(bytes, path.string());
}

void write_wav(const fs::path& path, const AudioSignal& signal) {
  atomic_write(path, encode_wav(signal));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void atomic_write(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void atomic_write_text(const fs::path& path, std::string_view text) {
  atomic_write(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<fs::path> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  std::vector<fs::path> out;
  std::string line;
  const fs::path base = path.parent_path();
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    fs::path p = line.substr(first, last - first + 1);
    out.push_back(p.is_relative() ? base / p : p);
  }
  return out;
}

void write_spectrogram_png(const fs::path& path, const Spectrogram& spec) {
  require(spec.frames > 0 && spec.bins > 0, "write_spectrogram_png: empty spectrogram");
  const auto mag = spec.magnitude();
  double peak = 0.0;
  for (double v : mag.data()) peak = std::max(peak, v);
  const double ref = peak > 0.0 ? peak : 1.0;
  constexpr double floor_db = -60.0;

  const auto width = static_cast<png_uint_32>(spec.frames);
  const auto height = static_cast<png_uint_32>(spec.bins);
  std::vector<png_byte> pixels(static_cast<std::size_t>(width) * height);
  for (std::size_t k = 0; k < spec.bins; ++k) {
    const std::size_t y = spec.bins - 1 - k;
    for (std::size_t l = 0; l < spec.frames; ++l) {
      const double db = 20.0 * std::log10(std::max(mag(l, k) / ref, 1e-12));
      const double t = (std::clamp(db, floor_db, 0.0) - floor_db) / -floor_db;
      pixels[y * width + l] = static_cast<png_byte>(std::lround(255.0 * t));
    }
  }

  std::vector<std::uint8_t> encoded;
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width;
  if (!encode_gray_png(rows.data(), width, height, &encoded)) {
    throw std::runtime_error("libpng: encoding failed for " + path.string());
  }
  atomic_write(path, encoded);
}

}  // namespace xienh::io
