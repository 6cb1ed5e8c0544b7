#pragma once

// Ground truth over the perturbation box: uniform samples, oracle-labeled
// datasets, the bistability atlas over (m_ek, fw_n) and region membership.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tipgan/config.hpp"
#include "tipgan/errors.hpp"
#include "tipgan/io.hpp"
#include "tipgan/oracle.hpp"
#include "tipgan/parallel.hpp"

namespace tipgan {

struct LabeledConfig {
  Config config;
  Label label = Label::Off;
  double final_m_n = 0.0;  // Sv

  friend bool operator==(const LabeledConfig&, const LabeledConfig&) = default;
};

enum class Split { Train, Test };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  fail(ErrorKind::Parse, "unknown split '" + std::string(s) + "'");
}

struct Dataset {
  std::vector<LabeledConfig> samples;
  Split split = Split::Train;
  std::uint64_t seed = 0;
  Bounds bounds = Bounds::experiment();

  std::vector<Config> configs() const {
    std::vector<Config> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.config);
    return out;
  }
};

/// `count` i.i.d. uniform draws from the box; deterministic per seed.
inline std::vector<Config> sample_uniform(const Bounds& bounds, std::size_t count, std::uint64_t seed) {
  bounds.validate();
  if (count == 0) fail(ErrorKind::InvalidArgument, "count must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Config> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::array<double, 3> u{unit(rng), unit(rng), unit(rng)};
    Config c = bounds.denormalize(u);
    // guard the closed upper edge against rounding
    c.d_low0 = std::clamp(c.d_low0, bounds.d_low0.lo, bounds.d_low0.hi);
    c.m_ek = std::clamp(c.m_ek, bounds.m_ek.lo, bounds.m_ek.hi);
    c.fw_n = std::clamp(c.fw_n, bounds.fw_n.lo, bounds.fw_n.hi);
    out.push_back(c);
  }
  return out;
}

inline std::string describe(const Config& c) {
  return "(d_low0=" + io::fmt(c.d_low0) + ", m_ek=" + io::fmt(c.m_ek) + ", fw_n=" + io::fmt(c.fw_n) + ")";
}

/// Labels every config with the oracle, preserving order.
inline Dataset label_dataset(std::span<const Config> configs, const Oracle& oracle, Split split = Split::Train,
                             std::uint64_t seed = 0, const Bounds& bounds = Bounds::experiment(),
                             int jobs = 1) {
  for (const auto& c : configs) require_in_bounds(c, bounds);
  Dataset ds;
  ds.split = split;
  ds.seed = seed;
  ds.bounds = bounds;
  ds.samples.resize(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t i) {
    try {
      const SimOutcome o = oracle.run(configs[i]);
      ds.samples[i] = LabeledConfig{configs[i], o.label, o.final_m_n};
    } catch (const Error& e) {
      throw Error(e.kind(), e.message() + " [config " + describe(configs[i]) + "]");
    }
  });
  return ds;
}

// ---- bistability atlas -------------------------------------------------------

enum class Regime { AlwaysOn, AlwaysOff, Bistable };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::AlwaysOn: return "always_on";
    case Regime::AlwaysOff: return "always_off";
    case Regime::Bistable: return "bistable";
  }
  return "?";
}

inline Regime parse_regime(std::string_view s) {
  if (s == "always_on") return Regime::AlwaysOn;
  if (s == "always_off") return Regime::AlwaysOff;
  if (s == "bistable") return Regime::Bistable;
  fail(ErrorKind::Parse, "unknown regime '" + std::string(s) + "'");
}

struct BistabilityCell {
  double m_ek = 0.0;
  double fw_n = 0.0;
  Regime regime = Regime::AlwaysOn;
  std::optional<double> d_low_sep;  // m; present iff bistable and monotone
  bool non_monotone = false;
};

struct AtlasGrid {
  std::vector<double> m_ek;
  std::vector<double> fw_n;

  static std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
      v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
  }

  /// Evenly spaced grid covering the bounds (41 x 151 by default).
  static AtlasGrid uniform(const Bounds& b = Bounds::experiment(), std::size_t n_m_ek = 41,
                           std::size_t n_fw_n = 151) {
    return AtlasGrid{linspace(b.m_ek.lo, b.m_ek.hi, n_m_ek), linspace(b.fw_n.lo, b.fw_n.hi, n_fw_n)};
  }
};

struct AtlasOptions {
  double separatrix_tolerance = 1.0;  // m
  int probes = 5;                     // monotonicity probes per bistable cell
  int jobs = 1;
};

/// Regimes on an (m_ek, fw_n) grid. Cells are stored m_ek-major.
class Atlas {
 public:
  Atlas() = default;
  Atlas(AtlasGrid grid, std::vector<BistabilityCell> cells, Interval d_low0_range)
      : grid_(std::move(grid)), cells_(std::move(cells)), d_low0_(d_low0_range) {
    if (cells_.size() != grid_.m_ek.size() * grid_.fw_n.size())
      fail(ErrorKind::ShapeMismatch, "atlas cell count does not match its grid");
    if (cells_.empty()) fail(ErrorKind::EmptyInput, "empty atlas");
  }

  const AtlasGrid& grid() const { return grid_; }
  const std::vector<BistabilityCell>& cells() const { return cells_; }
  const Interval& d_low0_range() const { return d_low0_; }

  const BistabilityCell& at(std::size_t i_mek, std::size_t j_fw) const {
    return cells_[i_mek * grid_.fw_n.size() + j_fw];
  }

  /// Nearest grid cell to (m_ek, fw_n).
  const BistabilityCell& nearest(double m_ek, double fw_n) const {
    return at(nearest_index(grid_.m_ek, m_ek), nearest_index(grid_.fw_n, fw_n));
  }

 private:
  static std::size_t nearest_index(const std::vector<double>& axis, double x) {
    auto it = std::lower_bound(axis.begin(), axis.end(), x);
    if (it == axis.begin()) return 0;
    if (it == axis.end()) return axis.size() - 1;
    const auto hi = static_cast<std::size_t>(it - axis.begin());
    return (x - axis[hi - 1] <= axis[hi] - x) ? hi - 1 : hi;
  }

  AtlasGrid grid_;
  std::vector<BistabilityCell> cells_;
  Interval d_low0_{100.0, 400.0};
};

/// Classifies one (m_ek, fw_n) cell by running the oracle from both ends of
/// the d_low0 range, then bisects for the separatrix crossing.
inline BistabilityCell classify_cell(const Oracle& oracle, double m_ek, double fw_n,
                                     const Interval& d_low0, const AtlasOptions& opt = {}) {
  BistabilityCell cell{m_ek, fw_n, Regime::AlwaysOn, std::nullopt, false};
  auto label_at = [&](double d) { return oracle.run(Config{d, m_ek, fw_n}).label; };
  const Label low = label_at(d_low0.lo);
  const Label high = label_at(d_low0.hi);
  if (low == high) {
    cell.regime = low == Label::On ? Regime::AlwaysOn : Regime::AlwaysOff;
    return cell;
  }
  cell.regime = Regime::Bistable;
  double lo = d_low0.lo, hi = d_low0.hi;
  while (hi - lo > opt.separatrix_tolerance) {
    const double mid = 0.5 * (lo + hi);
    (label_at(mid) == low ? lo : hi) = mid;
  }
  const double sep = 0.5 * (lo + hi);
  for (int k = 0; k < opt.probes; ++k) {
    const double d = d_low0.lo + (k + 0.5) * d_low0.width() / opt.probes;
    if (std::abs(d - sep) <= opt.separatrix_tolerance) continue;
    if (label_at(d) != (d < sep ? low : high)) {
      cell.non_monotone = true;
      return cell;
    }
  }
  cell.d_low_sep = sep;
  return cell;
}

inline Atlas bistability_atlas(const AtlasGrid& grid, const Oracle& oracle, const AtlasOptions& opt = {},
                               const Bounds& bounds = Bounds::experiment()) {
  for (double m : grid.m_ek)
    if (!bounds.m_ek.contains(m)) fail(ErrorKind::OutOfBounds, "m_ek grid value " + io::fmt(m));
  for (double f : grid.fw_n)
    if (!bounds.fw_n.contains(f)) fail(ErrorKind::OutOfBounds, "fw_n grid value " + io::fmt(f));
  if (!std::is_sorted(grid.m_ek.begin(), grid.m_ek.end()) ||
      !std::is_sorted(grid.fw_n.begin(), grid.fw_n.end()))
    fail(ErrorKind::InvalidArgument, "atlas grids must be sorted");
  const std::size_t nf = grid.fw_n.size();
  std::vector<BistabilityCell> cells(grid.m_ek.size() * nf);
  parallel_for(cells.size(), opt.jobs, [&](std::size_t k) {
    cells[k] = classify_cell(oracle, grid.m_ek[k / nf], grid.fw_n[k % nf], bounds.d_low0, opt);
  });
  return Atlas(grid, std::move(cells), bounds.d_low0);
}

enum class Membership { Atlas, Band };

inline std::string_view to_string(Membership m) { return m == Membership::Atlas ? "atlas" : "band"; }

/// Atlas variant: the nearest atlas cell is bistable.
inline bool in_uncertainty_region(const Config& c, const Atlas& atlas) {
  return atlas.nearest(c.m_ek, c.fw_n).regime == Regime::Bistable;
}

/// Band variant: fw_n inside the fixed aggregate band.
inline bool in_reference_band(const Config& c) { return kReferenceBand.contains(c.fw_n); }

inline bool in_region(const Config& c, Membership m, const Atlas* atlas) {
  if (m == Membership::Band) return in_reference_band(c);
  if (!atlas) fail(ErrorKind::MissingArtifact, "atlas membership requested without an atlas");
  return in_uncertainty_region(c, *atlas);
}

/// Per-m_ek bistable edges and aggregate figures of an atlas.
struct AtlasSummary {
  struct Row {
    double m_ek = 0.0;
    std::optional<double> first_bistable;  // smallest bistable fw_n
    std::optional<double> last_bistable;   // largest bistable fw_n
    bool ordered = true;  // AlwaysOn* Bistable* AlwaysOff* along fw_n
  };
  std::vector<Row> rows;
  std::optional<double> band_lo;  // union of bistable fw_n values
  std::optional<double> band_hi;
  double bistable_fraction = 0.0;  // share of cells
  std::size_t non_monotone_cells = 0;

  bool coherent() const {
    return std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.ordered; });
  }

  /// Span of the aggregate band as a fraction of `range`.
  double band_share(const Interval& range) const {
    if (!band_lo || !band_hi) return 0.0;
    return (*band_hi - *band_lo) / range.width();
  }
};

inline AtlasSummary summarize(const Atlas& atlas) {
  AtlasSummary s;
  const auto& g = atlas.grid();
  std::size_t bistable = 0;
  for (std::size_t i = 0; i < g.m_ek.size(); ++i) {
    AtlasSummary::Row row;
    row.m_ek = g.m_ek[i];
    int phase = 0;  // 0 on, 1 bistable, 2 off
    for (std::size_t j = 0; j < g.fw_n.size(); ++j) {
      const auto& c = atlas.at(i, j);
      if (c.non_monotone) ++s.non_monotone_cells;
      const int p = c.regime == Regime::AlwaysOn ? 0 : (c.regime == Regime::Bistable ? 1 : 2);
      if (p < phase) row.ordered = false;
      phase = std::max(phase, p);
      if (c.regime == Regime::Bistable) {
        ++bistable;
        if (!row.first_bistable) row.first_bistable = c.fw_n;
        row.last_bistable = c.fw_n;
        s.band_lo = s.band_lo ? std::min(*s.band_lo, c.fw_n) : c.fw_n;
        s.band_hi = s.band_hi ? std::max(*s.band_hi, c.fw_n) : c.fw_n;
      }
    }
    s.rows.push_back(row);
  }
  s.bistable_fraction = static_cast<double>(bistable) / static_cast<double>(atlas.cells().size());
  return s;
}

// ---- file formats ------------------------------------------------------------

inline constexpr const char* kDatasetHeader = "d_low0,m_ek,fw_n,label,final_m_n";
inline constexpr const char* kAtlasHeader = "m_ek,fw_n,regime,d_low_sep";

inline void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  out << kDatasetHeader << "\n";
  for (const auto& s : ds.samples) {
    out << io::fmt(s.config.d_low0) << ',' << io::fmt(s.config.m_ek) << ',' << io::fmt(s.config.fw_n)
        << ',' << to_string(s.label) << ',' << io::fmt(s.final_m_n) << "\n";
  }
}

inline nlohmann::json bounds_to_json(const Bounds& b) {
  return {{"d_low0", {b.d_low0.lo, b.d_low0.hi}},
          {"m_ek", {b.m_ek.lo, b.m_ek.hi}},
          {"fw_n", {b.fw_n.lo, b.fw_n.hi}}};
}

inline Bounds bounds_from_json(const nlohmann::json& j) {
  auto iv = [&](const char* k) {
    return Interval{j.at(k).at(0).get<double>(), j.at(k).at(1).get<double>()};
  };
  return Bounds{iv("d_low0"), iv("m_ek"), iv("fw_n")};
}

/// Sidecar metadata written next to each dataset CSV.
inline nlohmann::json dataset_sidecar(const Dataset& ds, const std::string& calibration_hash) {
  std::size_t on = 0;
  for (const auto& s : ds.samples) on += s.label == Label::On;
  return {{"format_version", 1},
          {"split", to_string(ds.split)},
          {"seed", ds.seed},
          {"bounds", bounds_to_json(ds.bounds)},
          {"size", ds.samples.size()},
          {"on_count", on},
          {"off_count", ds.samples.size() - on},
          {"calibration_sha256", calibration_hash}};
}

inline Dataset read_dataset_csv(std::istream& in) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Parse, "empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind(kDatasetHeader, 0) != 0) fail(ErrorKind::Parse, "unexpected dataset header: " + line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = io::split_csv_line(line);
    if (cells.size() < 5) fail(ErrorKind::Parse, "short dataset row: " + line);
    LabeledConfig s;
    s.config = Config{io::KeyValues::to_double(cells[0], "d_low0"), io::KeyValues::to_double(cells[1], "m_ek"),
                      io::KeyValues::to_double(cells[2], "fw_n")};
    s.label = parse_label(cells[3]);
    s.final_m_n = io::KeyValues::to_double(cells[4], "final_m_n");
    ds.samples.push_back(s);
  }
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& csv) {
  auto in = io::open_in(csv);
  Dataset ds = read_dataset_csv(in);
  std::filesystem::path sidecar = csv;
  sidecar.replace_extension(".json");
  if (std::filesystem::exists(sidecar)) {
    const auto j = nlohmann::json::parse(io::read_file(sidecar));
    ds.split = parse_split(j.at("split").get<std::string>());
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.bounds = bounds_from_json(j.at("bounds"));
    if (j.at("size").get<std::size_t>() != ds.samples.size())
      fail(ErrorKind::HashMismatch, "dataset row count disagrees with its sidecar");
  }
  return ds;
}

inline void write_atlas_csv(std::ostream& out, const Atlas& atlas) {
  out << kAtlasHeader << "\n";
  for (const auto& c : atlas.cells()) {
    out << io::fmt(c.m_ek) << ',' << io::fmt(c.fw_n) << ',' << to_string(c.regime) << ',';
    if (c.d_low_sep) out << io::fmt(*c.d_low_sep);
    out << "\n";
  }
}

/// Rebuilds an atlas from its CSV; the grid is recovered from the rows.
inline Atlas read_atlas_csv(std::istream& in, const Interval& d_low0 = Bounds::experiment().d_low0) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Parse, "empty atlas file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kAtlasHeader) fail(ErrorKind::Parse, "unexpected atlas header: " + line);
  std::vector<BistabilityCell> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split_csv_line(line);
    if (f.size() < 3) fail(ErrorKind::Parse, "short atlas row: " + line);
    BistabilityCell c;
    c.m_ek = io::KeyValues::to_double(f[0], "m_ek");
    c.fw_n = io::KeyValues::to_double(f[1], "fw_n");
    c.regime = parse_regime(f[2]);
    if (f.size() > 3 && !f[3].empty()) c.d_low_sep = io::KeyValues::to_double(f[3], "d_low_sep");
    c.non_monotone = c.regime == Regime::Bistable && !c.d_low_sep;
    cells.push_back(c);
  }
  AtlasGrid grid;
  for (const auto& c : cells) {
    if (grid.m_ek.empty() || grid.m_ek.back() != c.m_ek) grid.m_ek.push_back(c.m_ek);
    if (grid.m_ek.size() == 1) grid.fw_n.push_back(c.fw_n);
  }
  return Atlas(std::move(grid), std::move(cells), d_low0);
}

inline Atlas load_atlas(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  return read_atlas_csv(in);
}

}  // namespace tipgan
