#include <gtest/gtest.h>

#include <memory>
#include <sstream>

#include "tipgan/metrics.hpp"

using namespace tipgan;

namespace {

class BandOracle final : public Oracle {
 public:
  SimOutcome run(const Config& c) const override {
    SimOutcome o;
    o.label = (c.fw_n < 0.4 || (c.fw_n < 0.8 && c.d_low0 > 250.0)) ? Label::On : Label::Off;
    return o;
  }
};

const Atlas& band_atlas() {
  static const BandOracle o;
  static const Atlas a = bistability_atlas(AtlasGrid::uniform(Bounds::experiment(), 5, 31), o);
  return a;
}

std::vector<ClfReport> report(const std::vector<Label>& p, const std::vector<Label>& y, const std::vector<int>& strata) {
  std::unique_ptr<bool[]> s(new bool[strata.size()]);
  for (std::size_t i = 0; i < strata.size(); ++i) s[i] = strata[i] != 0;
  return classification_report(p, y, std::span<const bool>(s.get(), strata.size()));
}

}  // namespace

TEST(Occupancy, AlwaysOnSamplesAreOutside) {
  const std::vector<Config> s(20, Config{300, 25, 0.05});
  const RegionReport r = region_occupancy(s, band_atlas());
  EXPECT_EQ(r.total.percent_atlas(), 0.0);
  EXPECT_EQ(r.total.percent_band(), 0.0);
}

TEST(Occupancy, PerGeneratorSplit) {
  const std::vector<Config> s{{300, 25, 0.6}, {300, 25, 0.05}, {300, 25, 0.6}, {300, 25, 0.6}};
  const std::vector<int> origin{1, 2, 1, 2};
  const RegionReport r = region_occupancy(s, band_atlas(), "g", origin);
  EXPECT_EQ(r.total.percent_atlas(), 75.0);
  ASSERT_EQ(r.per_generator.size(), 2u);
  EXPECT_EQ(r.per_generator[0].percent_atlas(), 100.0);
  EXPECT_EQ(r.per_generator[1].percent_atlas(), 50.0);
  const auto j = r.to_json();
  EXPECT_EQ(j.at("default_membership"), "atlas");
  EXPECT_TRUE(j.contains("percent_in_region_band"));
}

TEST(Occupancy, UniformDrawMatchesBandWidth) {
  const auto s = sample_uniform(Bounds::experiment(), 20000, 5);
  const RegionReport r = region_occupancy(s, band_atlas());
  // fixed band is 0.5 wide out of 1.5
  EXPECT_NEAR(r.total.percent_band(), 100.0 / 3.0, 1.5);
}

TEST(Occupancy, EmptyAndMisalignedInputs) {
  EXPECT_THROW(region_occupancy({}, band_atlas()), Error);
  const std::vector<Config> s(2, Config{300, 25, 0.6});
  const std::vector<int> origin{1};
  EXPECT_THROW(region_occupancy(s, band_atlas(), "x", origin), Error);
}

TEST(Classification, PerfectPredictions) {
  const std::vector<Label> y{Label::On, Label::Off, Label::On, Label::Off};
  const auto r = report(y, y, {1, 1, 0, 0});
  for (const auto& x : r) {
    EXPECT_EQ(x.precision, 1.0);
    EXPECT_EQ(x.recall, 1.0);
    EXPECT_EQ(x.f1, 1.0);
  }
}

TEST(Classification, AllOnBalancedLabels) {
  const std::vector<Label> y{Label::On, Label::Off, Label::On, Label::Off};
  const std::vector<Label> p(4, Label::On);
  const auto r = report(p, y, {1, 1, 1, 1});
  EXPECT_EQ(r[0].recall, 1.0);
  EXPECT_EQ(r[0].precision, 0.5);
  EXPECT_NEAR(*r[0].f1, 2.0 / 3.0, 1e-15);
  // empty stratum has no defined scores
  EXPECT_FALSE(r[1].precision);
  EXPECT_FALSE(r[1].f1);
  EXPECT_TRUE(r[1].to_json().at("f1").is_null());
}

TEST(Classification, ConfusionCountsAndF1Identity) {
  const std::vector<Label> y{Label::On, Label::On, Label::On, Label::Off, Label::Off, Label::On};
  const std::vector<Label> p{Label::On, Label::Off, Label::On, Label::On, Label::Off, Label::On};
  const auto r = report(p, y, {1, 1, 1, 1, 1, 1});
  EXPECT_EQ(r[0].confusion.tp, 3u);
  EXPECT_EQ(r[0].confusion.fn, 1u);
  EXPECT_EQ(r[0].confusion.fp, 1u);
  EXPECT_EQ(r[0].confusion.tn, 1u);
  const double pr = *r[0].precision, rc = *r[0].recall;
  EXPECT_NEAR(*r[0].f1, 2 * pr * rc / (pr + rc), 1e-15);
}

TEST(Classification, LengthMismatchThrows) {
  const std::vector<Label> y{Label::On};
  try {
    report(y, {}, {1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(Classification, ThresholdAtHalf) {
  EXPECT_EQ(threshold(0.5), Label::On);
  EXPECT_EQ(threshold(0.4999), Label::Off);
}

TEST(Histogram, IdenticalInputsGiveIdenticalHistograms) {
  const auto s = sample_uniform(Bounds::experiment(), 500, 2);
  const auto [g, r] = distribution_overlay(s, s, Coordinate::FwN);
  EXPECT_EQ(g.density, r.density);
}

TEST(Histogram, PointMassFillsOneBin) {
  const std::vector<Config> s(7, Config{300, 25, 0.6});
  const Histogram h = histogram(s, Coordinate::MEk);
  ASSERT_EQ(h.counts.size(), 50u);
  int nonzero = 0;
  for (std::size_t c : h.counts) nonzero += c > 0;
  EXPECT_EQ(nonzero, 1);
}

TEST(Histogram, DensityIntegratesToOne) {
  const auto s = sample_uniform(Bounds::experiment(), 1000, 3);
  const Histogram h = histogram(s, Coordinate::DLow0);
  const double w = Bounds::experiment().d_low0.width() / 50.0;
  double total = 0.0;
  for (double d : h.density) total += d * w;
  EXPECT_NEAR(total, 1.0, 1e-12);
  std::ostringstream out;
  write_histogram_csv(out, h);
  EXPECT_EQ(out.str().rfind("bin_center,density\n", 0), 0u);
}

TEST(Histogram, UpperEdgeLandsInLastBin) {
  const std::vector<Config> s{{400, 35, 1.55}};
  EXPECT_EQ(histogram(s, Coordinate::FwN).counts.back(), 1u);
}
