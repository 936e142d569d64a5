#include "xienh/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "xienh/error.hpp"
#include "xienh/io.hpp"

namespace xienh::io {
namespace {

using nlohmann::json;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}
float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

json spec_to_json(const ModelSpec& s) {
  return {{"family", to_string(s.family)}, {"n_blocks", s.n_blocks},   {"d_model", s.d_model},
          {"d_f", s.d_f},                  {"kernel", s.kernel},       {"max_dilation", s.max_dilation},
          {"n_branches", s.n_branches},    {"n_bins", s.n_bins}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.family = parse_family(j.at("family").get<std::string>());
  s.n_blocks = j.at("n_blocks").get<int>();
  s.d_model = j.at("d_model").get<int>();
  s.d_f = j.at("d_f").get<int>();
  s.kernel = j.at("kernel").get<int>();
  s.max_dilation = j.at("max_dilation").get<int>();
  s.n_branches = j.at("n_branches").get<int>();
  s.n_bins = j.at("n_bins").get<int>();
  s.validate();
  return s;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params,
                                            const std::optional<TrainConfig>& train) {
  require(params.param_count() == count_params(params.spec),
          "save_checkpoint: parameters do not match the model spec");
  require(params.stats.mu.size() == params.stats.sigma.size(), "save_checkpoint: malformed stats");

  json header = {{"spec", spec_to_json(params.spec)},
                 {"param_count", params.param_count()},
                 {"stats_bins", params.stats.n_bins()}};
  if (train) {
    header["train"] = {{"epochs", train->epochs},       {"batch_size", train->batch_size},
                       {"lr", train->lr},               {"adam_beta1", train->adam_beta1},
                       {"adam_beta2", train->adam_beta2}, {"adam_eps", train->adam_eps},
                       {"grad_clip", train->grad_clip}, {"snr_min_db", train->snr_min_db},
                       {"snr_max_db", train->snr_max_db}, {"snr_step_db", train->snr_step_db},
                       {"seed", train->seed}};
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> payload;
  for (double v : params.stats.mu) put_f32(payload, static_cast<float>(v));
  for (double v : params.stats.sigma) put_f32(payload, static_cast<float>(v));
  for (float v : params.flatten()) put_f32(payload, v);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'X', 'I', 'M', 'B'});
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  put_u64(out, fnv1a64(payload));
  return out;
}

ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "XIMB", 4) != 0) {
    throw CorruptCheckpoint("bad magic (expected XIMB)");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw CorruptCheckpoint("unsupported checkpoint version " + std::to_string(version) +
                            " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t header_len = get_u32(bytes.data() + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) {
    throw CorruptCheckpoint("truncated header");
  }
  ModelSpec spec;
  std::size_t stats_bins = 0;
  try {
    const auto header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    spec = spec_from_json(header.at("spec"));
    stats_bins = header.at("stats_bins").get<std::size_t>();
  } catch (const std::exception& e) {
    throw CorruptCheckpoint(std::string("unreadable header: ") + e.what());
  }

  const std::size_t n_params = count_params(spec);
  const std::size_t expected = 4 * (2 * stats_bins + n_params);
  const std::size_t start = 12 + header_len;
  const std::size_t available = bytes.size() - start;
  if (available != expected + 8) {
    throw CorruptCheckpoint("shape audit failed: header describes " + to_string(spec.family) + ":" +
                            std::to_string(spec.n_blocks) + " with " + std::to_string(n_params) +
                            " parameters (" + std::to_string(expected) + " payload bytes), file has " +
                            std::to_string(available >= 8 ? available - 8 : 0));
  }
  const auto payload = bytes.subspan(start, expected);
  const std::uint64_t stored = get_u64(bytes.data() + start + expected);
  if (stored != fnv1a64(payload)) throw CorruptCheckpoint("payload checksum mismatch");

  ModelParams params = build(spec, 0);
  const std::uint8_t* p = payload.data();
  params.stats.mu.resize(stats_bins);
  params.stats.sigma.resize(stats_bins);
  for (auto& v : params.stats.mu) { v = get_f32(p); p += 4; }
  for (auto& v : params.stats.sigma) { v = get_f32(p); p += 4; }
  std::vector<float> flat(n_params);
  for (auto& v : flat) { v = get_f32(p); p += 4; }
  params.assign(flat);
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::optional<TrainConfig>& train) {
  atomic_write(path, encode_checkpoint(params, train));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

std::vector<std::uint8_t> encode_stats(const XiMapStats& stats) {
  stats.validate();
  std::vector<std::uint8_t> body;
  for (double v : stats.mu) put_f32(body, static_cast<float>(v));
  for (double v : stats.sigma) put_f32(body, static_cast<float>(v));
  std::vector<std::uint8_t> out{'X', 'I', 'S', 'T'};
  put_u32(out, kStatsVersion);
  put_u32(out, static_cast<std::uint32_t>(stats.n_bins()));
  out.insert(out.end(), body.begin(), body.end());
  put_u64(out, fnv1a64(body));
  return out;
}

XiMapStats decode_stats(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "XIST", 4) != 0) {
    throw CorruptCheckpoint("bad stats magic (expected XIST)");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kStatsVersion) {
    throw CorruptCheckpoint("unsupported stats version " + std::to_string(version));
  }
  const std::size_t bins = get_u32(bytes.data() + 8);
  if (bytes.size() != 12 + 8 * bins + 8) throw CorruptCheckpoint("stats file length mismatch");
  const auto body = bytes.subspan(12, 8 * bins);
  if (get_u64(bytes.data() + 12 + 8 * bins) != fnv1a64(body)) {
    throw CorruptCheckpoint("stats checksum mismatch");
  }
  XiMapStats stats;
  stats.mu.resize(bins);
  stats.sigma.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    stats.mu[k] = get_f32(body.data() + 4 * k);
    stats.sigma[k] = get_f32(body.data() + 4 * (bins + k));
  }
  return stats;
}

void save_stats(const std::filesystem::path& path, const XiMapStats& stats) {
  atomic_write(path, encode_stats(stats));
}

XiMapStats load_stats(const std::filesystem::path& path) { return decode_stats(read_file(path)); }

XiMapStats quantize_stats(const XiMapStats& stats) {
  XiMapStats q = stats;
  for (auto& v : q.mu) v = static_cast<float>(v);
  for (auto& v : q.sigma) v = static_cast<float>(v);
  return q;
}

}  // namespace xienh::io
