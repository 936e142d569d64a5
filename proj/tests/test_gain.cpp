#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "xienh/gain.hpp"

using namespace xienh;

TEST_CASE("gain spot values") {
  CHECK(std::abs(gain_value(GainKind::Srwf, 1.0, 2.0) - std::sqrt(0.5)) < 1e-15);

  // STSA closed form composed with the Bessel series at v = 1.
  const double v = 1.0;
  const double stsa = std::sqrt(std::numbers::pi) / 2.0 * std::sqrt(v) / 2.0 * std::exp(-v / 2.0) *
                      ((1.0 + v) * oracle::bessel_i0_series(v / 2.0) + v * oracle::bessel_i1_series(v / 2.0));
  CHECK(stsa == doctest::Approx(0.64096).epsilon(1e-5));
  CHECK(std::abs(gain_value(GainKind::MmseStsa, 1.0, 2.0) - stsa) < 1e-12);

  const double lsa = 0.5 * std::exp(0.5 * oracle::e1_series(1.0));
  CHECK(lsa == doctest::Approx(0.55797).epsilon(1e-5));
  CHECK(std::abs(gain_value(GainKind::MmseLsa, 1.0, 2.0) - lsa) < 1e-12);
}

TEST_CASE("gain parsing") {
  CHECK(parse_gain_kind("srwf") == GainKind::Srwf);
  CHECK(parse_gain_kind("mmse-stsa") == GainKind::MmseStsa);
  CHECK(parse_gain_kind("mmse-lsa") == GainKind::MmseLsa);
  CHECK(to_string(GainKind::MmseLsa) == "mmse-lsa");
  CHECK_THROWS_AS(parse_gain_kind("wiener"), InvalidArgument);
}

TEST_CASE("gain bounds and limits") {
  for (auto kind : {GainKind::Srwf, GainKind::MmseStsa, GainKind::MmseLsa}) {
    for (double xi = 1e-4; xi < 1e7; xi *= 1.7)
      for (double gamma = 1e-3; gamma < 1e7; gamma *= 3.1) {
        const double g = gain_value(kind, xi, gamma);
        CHECK(std::isfinite(g));
        CHECK(g > 0.0);
        CHECK(g <= kGainCap);
        if (kind == GainKind::Srwf) CHECK(g < 1.0);
      }
    CHECK(std::abs(gain_value(kind, 1e6, 1e6 + 1.0) - 1.0) < 1e-3);
  }
  // v up to 1e6 and beyond stays finite.
  for (double v : {700.0, 1400.0, 1e4, 1e6}) {
    const double xi = v;  // with gamma = xi + 1, v = xi
    CHECK(std::isfinite(gain_value(GainKind::MmseStsa, xi, xi + 1.0)));
    CHECK(std::isfinite(gain_value(GainKind::MmseLsa, xi, xi + 1.0)));
  }
  // Low gamma pushes STSA above 1 until the cap.
  CHECK(gain_value(GainKind::MmseStsa, 1.0, 1e-4) == kGainCap);
  CHECK(gain_value(GainKind::MmseStsa, 1.0, 0.3) > 1.0);
}

TEST_CASE("srwf ignores gamma") {
  for (double xi : {1e-3, 0.5, 7.0, 1e3})
    CHECK(gain_value(GainKind::Srwf, xi, 0.1) == gain_value(GainKind::Srwf, xi, 1e4));
}

TEST_CASE("monotone in xi with gamma = xi + 1") {
  for (auto kind : {GainKind::Srwf, GainKind::MmseLsa}) {
    double prev = 0.0;
    for (double xi = 1e-3; xi <= 1e3; xi *= 1.05) {
      const double g = gain_value(kind, xi, xi + 1.0);
      CHECK(g >= prev);
      prev = g;
    }
  }
}

TEST_CASE("lsa exceeds the wiener factor") {
  for (double xi = 1e-3; xi <= 1e3; xi *= 1.3)
    for (double gamma : {0.5, 1.0, xi + 1.0, 50.0})
      CHECK(gain_value(GainKind::MmseLsa, xi, gamma) >= xi / (xi + 1.0));
}

TEST_CASE("grid gain and errors") {
  SnrGrid xi{Grid(2, 3, 1.0), SnrKind::XiLinear};
  SnrGrid gamma{Grid(2, 3, 2.0), SnrKind::Gamma};
  const auto g = gain(GainKind::MmseLsa, xi, gamma);
  for (double v : g.data()) CHECK(v == gain_value(GainKind::MmseLsa, 1.0, 2.0));

  CHECK_THROWS_AS(gain(GainKind::Srwf, xi, SnrGrid{Grid(3, 3, 2.0), SnrKind::Gamma}), InvalidArgument);
  CHECK_THROWS_AS(gain(GainKind::Srwf, gamma, gamma), InvalidArgument);
  CHECK_THROWS_AS(gain_value(GainKind::Srwf, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(gain_value(GainKind::MmseLsa, 1.0, -1.0), InvalidArgument);
  CHECK_THROWS_AS(gain_value(GainKind::MmseStsa, std::nan(""), 1.0), InvalidArgument);
}
