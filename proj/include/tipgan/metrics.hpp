#pragma once

// Evaluation: region occupancy of sample sets, per-stratum classification
// metrics with On as the positive class, and marginal histograms.

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tipgan/config.hpp"
#include "tipgan/errors.hpp"
#include "tipgan/explorer.hpp"
#include "tipgan/io.hpp"

namespace tipgan {

struct Occupancy {
  std::size_t count = 0;
  std::size_t in_atlas = 0;
  std::size_t in_band = 0;

  double percent_atlas() const { return count ? 100.0 * static_cast<double>(in_atlas) / static_cast<double>(count) : 0.0; }
  double percent_band() const { return count ? 100.0 * static_cast<double>(in_band) / static_cast<double>(count) : 0.0; }
};

struct RegionReport {
  std::string name;
  Occupancy total;
  std::vector<Occupancy> per_generator;  // empty for non-generated sets

  nlohmann::json to_json() const {
    auto occ = [](const Occupancy& o) {
      return nlohmann::json{{"count", o.count},
                            {"percent_in_region_atlas", o.percent_atlas()},
                            {"percent_in_region_band", o.percent_band()}};
    };
    nlohmann::json j = occ(total);
    j["name"] = name;
    j["default_membership"] = "atlas";
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t i = 0; i < per_generator.size(); ++i) {
      auto g = occ(per_generator[i]);
      g["generator"] = i + 1;
      per.push_back(g);
    }
    j["per_generator"] = per;
    return j;
  }
};

/// Share of samples inside the uncertainty region under both membership
/// variants. `origins` (1-based generator ids) is optional.
inline RegionReport region_occupancy(std::span<const Config> samples, const Atlas& atlas, std::string name = "samples",
                                     std::span<const int> origins = {}) {
  if (samples.empty()) fail(ErrorKind::EmptyInput, "no samples to score");
  if (!origins.empty() && origins.size() != samples.size())
    fail(ErrorKind::LengthMismatch, "origin tags do not match the samples");
  RegionReport r;
  r.name = std::move(name);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool a = in_uncertainty_region(samples[i], atlas);
    const bool b = in_reference_band(samples[i]);
    ++r.total.count;
    r.total.in_atlas += a;
    r.total.in_band += b;
    if (!origins.empty()) {
      const int g = origins[i];
      if (g < 1) fail(ErrorKind::InvalidArgument, "generator ids are 1-based");
      if (r.per_generator.size() < static_cast<std::size_t>(g)) r.per_generator.resize(static_cast<std::size_t>(g));
      auto& o = r.per_generator[static_cast<std::size_t>(g - 1)];
      ++o.count;
      o.in_atlas += a;
      o.in_band += b;
    }
  }
  return r;
}

// ---- classification ------------------------------------------------------------

enum class Stratum { InRegion, OutOfRegion };

inline std::string_view to_string(Stratum s) { return s == Stratum::InRegion ? "in_region" : "out_of_region"; }

/// 2x2 confusion counts, On positive.
struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
};

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline std::optional<double> precision(const Confusion& c) { return ratio(c.tp, c.tp + c.fp); }
inline std::optional<double> recall(const Confusion& c) { return ratio(c.tp, c.tp + c.fn); }
/// Harmonic mean from counts: 2tp / (2tp + fp + fn).
inline std::optional<double> f1(const Confusion& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }

struct ClfReport {
  Stratum stratum = Stratum::InRegion;
  Confusion confusion;
  std::optional<double> precision, recall, f1;

  nlohmann::json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"stratum", to_string(stratum)},
            {"positive_class", "on"},
            {"precision", opt(precision)},
            {"recall", opt(recall)},
            {"f1", opt(f1)},
            {"confusion", {{"tp", confusion.tp}, {"fp", confusion.fp}, {"fn", confusion.fn}, {"tn", confusion.tn}}},
            {"size", confusion.total()}};
  }
};

/// Per-stratum metrics; `in_region[i]` assigns sample i to a stratum.
inline std::vector<ClfReport> classification_report(std::span<const Label> predictions, std::span<const Label> labels,
                                                    std::span<const bool> in_region) {
  if (predictions.size() != labels.size() || labels.size() != in_region.size())
    fail(ErrorKind::LengthMismatch, "predictions, labels and strata must align");
  std::vector<ClfReport> out{{Stratum::InRegion, {}, {}, {}, {}}, {Stratum::OutOfRegion, {}, {}, {}, {}}};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Confusion& c = out[in_region[i] ? 0 : 1].confusion;
    const bool p = predictions[i] == Label::On, y = labels[i] == Label::On;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  for (auto& r : out) {
    r.precision = tipgan::precision(r.confusion);
    r.recall = tipgan::recall(r.confusion);
    r.f1 = tipgan::f1(r.confusion);
  }
  return out;
}

inline Label threshold(double p_on) { return p_on >= 0.5 ? Label::On : Label::Off; }

inline constexpr const char* kClfHeader = "model,stratum,precision,recall,f1,tp,fp,fn,tn";

inline void write_clf_rows(std::ostream& out, const std::string& model, const std::vector<ClfReport>& reports) {
  auto opt = [](const std::optional<double>& v) { return v ? io::fmt(*v) : std::string(); };
  for (const auto& r : reports)
    out << model << ',' << to_string(r.stratum) << ',' << opt(r.precision) << ',' << opt(r.recall) << ','
        << opt(r.f1) << ',' << r.confusion.tp << ',' << r.confusion.fp << ',' << r.confusion.fn << ','
        << r.confusion.tn << "\n";
}

inline constexpr const char* kRegionHeader = "name,count,percent_atlas,percent_band";

inline void write_region_row(std::ostream& out, const RegionReport& r) {
  out << r.name << ',' << r.total.count << ',' << io::fmt(r.total.percent_atlas()) << ','
      << io::fmt(r.total.percent_band()) << "\n";
  for (std::size_t i = 0; i < r.per_generator.size(); ++i) {
    const auto& g = r.per_generator[i];
    out << r.name << "/g" << i + 1 << ',' << g.count << ',' << io::fmt(g.percent_atlas()) << ','
        << io::fmt(g.percent_band()) << "\n";
  }
}

// ---- histograms ------------------------------------------------------------------

/// Fixed-bin density over one coordinate's bounds.
struct Histogram {
  Coordinate coordinate = Coordinate::FwN;
  std::vector<double> centers;
  std::vector<double> density;  // integrates to 1 over the interval
  std::vector<std::size_t> counts;
};

inline Histogram histogram(std::span<const Config> samples, Coordinate coord, const Bounds& bounds = Bounds::experiment(),
                           std::size_t bins = 50) {
  if (samples.empty()) fail(ErrorKind::EmptyInput, "no samples for histogram");
  if (bins == 0) fail(ErrorKind::InvalidArgument, "bins must be positive");
  const Interval& iv = bounds[coord];
  const double w = iv.width() / static_cast<double>(bins);
  Histogram h;
  h.coordinate = coord;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b < bins; ++b) h.centers.push_back(iv.lo + (static_cast<double>(b) + 0.5) * w);
  for (const auto& c : samples) {
    const double v = get(c, coord);
    if (!iv.contains(v)) fail(ErrorKind::OutOfBounds, "sample outside histogram range");
    std::size_t b = w > 0.0 ? static_cast<std::size_t>((v - iv.lo) / w) : 0;
    ++h.counts[std::min(b, bins - 1)];
  }
  const double norm = static_cast<double>(samples.size()) * (w > 0.0 ? w : 1.0);
  for (std::size_t k : h.counts) h.density.push_back(static_cast<double>(k) / norm);
  return h;
}

/// Aligned histograms of a generated and a real sample set.
inline std::pair<Histogram, Histogram> distribution_overlay(std::span<const Config> generated,
                                                            std::span<const Config> real, Coordinate coord,
                                                            const Bounds& bounds = Bounds::experiment()) {
  return {histogram(generated, coord, bounds), histogram(real, coord, bounds)};
}

inline void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_center,density\n";
  for (std::size_t b = 0; b < h.centers.size(); ++b) out << io::fmt(h.centers[b]) << ',' << io::fmt(h.density[b]) << "\n";
}

}  // namespace tipgan
