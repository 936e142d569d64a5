#include "xienh/snr_map.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "xienh/error.hpp"
#include "xienh/special.hpp"

namespace xienh {
namespace {

void require_kind(const SnrGrid& g, SnrKind kind, const char* op) {
  require(g.kind == kind, std::string(op) + ": unexpected SNR grid kind");
}

void require_bins(const SnrGrid& g, const XiMapStats& stats, const char* op) {
  require(g.values.cols() == stats.n_bins(),
          std::string(op) + ": grid has " + std::to_string(g.values.cols()) +
              " bins, stats have " + std::to_string(stats.n_bins()));
}

}  // namespace

void XiMapStats::validate() const {
  require(mu.size() == sigma.size(), "XiMapStats: mu/sigma length mismatch");
  require(!mu.empty(), "XiMapStats: empty statistics");
  for (std::size_t k = 0; k < mu.size(); ++k) {
    require(std::isfinite(mu[k]) && std::isfinite(sigma[k]), "XiMapStats: non-finite entry");
    require(sigma[k] > 0.0, "XiMapStats: sigma must be positive");
  }
}

SnrGrid instantaneous_xi_db(const Spectrogram& clean, const Spectrogram& noise) {
  require(clean.frames == noise.frames && clean.bins == noise.bins,
          "instantaneous_xi_db: clean/noise spectrogram shapes differ");
  SnrGrid out{Grid(clean.frames, clean.bins), SnrKind::XiDb};
  for (std::size_t i = 0; i < clean.coeffs.size(); ++i) {
    const double ps = std::max(std::norm(clean.coeffs[i]), kPowerFloor);
    const double pd = std::max(std::norm(noise.coeffs[i]), kPowerFloor);
    out.values.data()[i] = std::clamp(10.0 * std::log10(ps / pd), -kXiDbClamp, kXiDbClamp);
  }
  return out;
}

SnrGrid a_posteriori_from_xi(const SnrGrid& xi) {
  require_kind(xi, SnrKind::XiLinear, "a_posteriori_from_xi");
  SnrGrid out{xi.values, SnrKind::Gamma};
  for (double& v : out.values.data()) {
    require(v > 0.0, "a_posteriori_from_xi: xi must be > 0");
    v += 1.0;
  }
  return out;
}

double map_xi_value(double xi_db, double mu, double sigma) {
  return special::normal_cdf((xi_db - mu) / sigma);
}

double unmap_xi_db_value(double mapped, double mu, double sigma) {
  if (std::isnan(mapped)) throw InvalidArgument("unmap_xi: NaN mapped value");
  const double p = std::clamp(mapped, kMappedClamp, 1.0 - kMappedClamp);
  return sigma * special::normal_quantile(p) + mu;
}

SnrGrid map_xi(const SnrGrid& xi_db, const XiMapStats& stats) {
  require_kind(xi_db, SnrKind::XiDb, "map_xi");
  require_bins(xi_db, stats, "map_xi");
  SnrGrid out{Grid(xi_db.values.rows(), xi_db.values.cols()), SnrKind::XiMapped};
  for (std::size_t l = 0; l < out.values.rows(); ++l) {
    for (std::size_t k = 0; k < out.values.cols(); ++k) {
      out.values(l, k) = map_xi_value(xi_db.values(l, k), stats.mu[k], stats.sigma[k]);
    }
  }
  return out;
}

SnrGrid unmap_xi(const SnrGrid& mapped, const XiMapStats& stats) {
  require_kind(mapped, SnrKind::XiMapped, "unmap_xi");
  require_bins(mapped, stats, "unmap_xi");
  SnrGrid out{Grid(mapped.values.rows(), mapped.values.cols()), SnrKind::XiLinear};
  for (std::size_t l = 0; l < out.values.rows(); ++l) {
    for (std::size_t k = 0; k < out.values.cols(); ++k) {
      const double db = unmap_xi_db_value(mapped.values(l, k), stats.mu[k], stats.sigma[k]);
      out.values(l, k) = std::pow(10.0, db / 10.0);
    }
  }
  return out;
}

void BinMoments::add_frame(std::span<const double> row) {
  require(row.size() == mean_.size(), "BinMoments: bin count mismatch");
  ++count_;
  const double n = static_cast<double>(count_);
  for (std::size_t k = 0; k < row.size(); ++k) {
    const double delta = row[k] - mean_[k];
    mean_[k] += delta / n;
    m2_[k] += delta * (row[k] - mean_[k]);
  }
}

void BinMoments::add(const Grid& xi_db) {
  for (std::size_t l = 0; l < xi_db.rows(); ++l) add_frame(xi_db.row(l));
}

void BinMoments::merge(const BinMoments& other) {
  require(other.mean_.size() == mean_.size(), "BinMoments: bin count mismatch");
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  for (std::size_t k = 0; k < mean_.size(); ++k) {
    const double delta = other.mean_[k] - mean_[k];
    mean_[k] += delta * nb / n;
    m2_[k] += other.m2_[k] + delta * delta * na * nb / n;
  }
  count_ += other.count_;
}

XiMapStats BinMoments::finish(double sigma_floor) const {
  require(count_ > 0, "BinMoments: no frames accumulated");
  XiMapStats stats;
  stats.mu = mean_;
  stats.sigma.resize(mean_.size());
  for (std::size_t k = 0; k < mean_.size(); ++k) {
    const double var = count_ > 1 ? m2_[k] / static_cast<double>(count_ - 1) : 0.0;
    stats.sigma[k] = std::max(std::sqrt(std::max(var, 0.0)), sigma_floor);
  }
  return stats;
}

XiMapStats estimate_stats(const std::vector<std::pair<AudioSignal, AudioSignal>>& mixtures,
                          const FrameConfig& cfg) {
  require(!mixtures.empty(), "estimate_stats: empty mixture collection");
  BinMoments moments(cfg.n_bins());
  for (const auto& [clean, noise] : mixtures) {
    require(clean.size() == noise.size(), "estimate_stats: clean/noise lengths differ");
    moments.add(instantaneous_xi_db(stft(clean, cfg), stft(noise, cfg)).values);
  }
  return moments.finish();
}

}  // namespace xienh
