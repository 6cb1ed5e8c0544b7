#pragma once

// Calibration targets for the base parameter set and a bounded random
// search that nudges a ParamSet towards them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tipgan/box_model.hpp"
#include "tipgan/config.hpp"
#include "tipgan/param_file.hpp"
#include "tipgan/parallel.hpp"

namespace tipgan {

struct CalibrationTargets {
  double m_ek = 25.0;          // Sv, reference Ekman forcing
  double fw_on = 0.55;         // Sv, equilibrium forcing
  double fw_step = 0.77;       // Sv, forcing after the step
  Interval equilibrium{15.0, 20.0};  // Sv
  double band_share = 0.349;   // of the fw_n range
  double band_tolerance = 0.10;
  std::vector<double> band_m_ek{15.0, 20.0, 25.0, 30.0, 35.0};
  double d_low_start = 400.0;       // m, deep pycnocline start for the "on" branch
  double spinup_years = 20000.0;
  double step_years = 4000.0;
};

/// On-to-off transition along fw_n at fixed (d_low0, m_ek), found by
/// bisection between the box edges. Returns the lower edge if the run is
/// already off there and the upper edge if it never switches off.
inline double fw_transition(const ParamSet& ps, double d_low0, double m_ek, const IntegratorOptions& opt,
                            int iterations, const Interval& fw = Bounds::experiment().fw_n) {
  auto is_on = [&](double f) {
    ModelParams p = ps.params;
    p.m_ek = m_ek;
    p.fw_n = f;
    ModelState s = ps.init_template;
    s.d_low = d_low0;
    return integrate(p, s, opt).label == Label::On;
  };
  double lo = fw.lo, hi = fw.hi;
  if (!is_on(lo)) return lo;
  if (is_on(hi)) return hi;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    (is_on(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct CalibrationReport {
  double equilibrium_m_n = 0.0;  // Sv at fw_on
  double step_m_n = 0.0;         // Sv after stepping to fw_step
  struct Edge {
    double m_ek;
    double lower;  // transition from the shallow start
    double upper;  // transition from the deep start
  };
  std::vector<Edge> edges;
  double band_lo = 0.0;
  double band_hi = 0.0;
  double band_share = 0.0;

  bool equilibrium_ok = false;
  bool collapse_ok = false;
  bool band_ok = false;

  bool passed() const { return equilibrium_ok && collapse_ok && band_ok; }

  /// Name of the first violated target, empty when all are met.
  std::string violated() const {
    if (!equilibrium_ok) return "equilibrium overturning outside target range";
    if (!collapse_ok) return "freshwater step does not collapse the overturning";
    if (!band_ok) return "aggregate bistable band share outside tolerance";
    return {};
  }

  nlohmann::json to_json() const {
    nlohmann::json e = nlohmann::json::array();
    for (const auto& x : edges) e.push_back({{"m_ek", x.m_ek}, {"lower", x.lower}, {"upper", x.upper}});
    return {{"equilibrium_m_n", equilibrium_m_n},
            {"equilibrium_ok", equilibrium_ok},
            {"step_m_n", step_m_n},
            {"collapse_ok", collapse_ok},
            {"edges", e},
            {"band_lo", band_lo},
            {"band_hi", band_hi},
            {"band_share", band_share},
            {"band_ok", band_ok},
            {"passed", passed()}};
  }
};

/// Equilibrium overturning at the reference forcing, from the deep start.
inline SimOutcome spin_up(const ParamSet& ps, const CalibrationTargets& t, const IntegratorOptions& opt) {
  ModelParams p = ps.params;
  p.m_ek = t.m_ek;
  p.fw_n = t.fw_on;
  ModelState s = ps.init_template;
  s.d_low = t.d_low_start;
  IntegratorOptions o = opt;
  o.horizon_years = t.spinup_years;
  return integrate(p, s, o);
}

/// Final state after an instantaneous step from the spun-up equilibrium.
inline SimOutcome step_response(const ParamSet& ps, const CalibrationTargets& t, const ModelState& from,
                                const IntegratorOptions& opt) {
  ModelParams p = ps.params;
  p.m_ek = t.m_ek;
  p.fw_n = t.fw_step;
  IntegratorOptions o = opt;
  o.horizon_years = t.step_years;
  return integrate(p, from, o);
}

/// Checks all three targets. Band edges come from fw_n bisection per m_ek.
inline CalibrationReport evaluate_calibration(const ParamSet& ps, const CalibrationTargets& t = {},
                                              const IntegratorOptions& opt = {}, int bisections = 10,
                                              int jobs = 1) {
  CalibrationReport r;
  const SimOutcome eq = spin_up(ps, t, opt);
  r.equilibrium_m_n = eq.final_m_n;
  r.equilibrium_ok = t.equilibrium.contains(eq.final_m_n);
  r.step_m_n = step_response(ps, t, eq.final_state, opt).final_m_n;
  r.collapse_ok = r.step_m_n < 0.0;

  const Bounds b = Bounds::experiment();
  r.edges.resize(t.band_m_ek.size());
  parallel_for(2 * t.band_m_ek.size(), jobs, [&](std::size_t k) {
    const std::size_t i = k / 2;
    r.edges[i].m_ek = t.band_m_ek[i];
    const double d0 = (k % 2 == 0) ? b.d_low0.lo : b.d_low0.hi;
    const double edge = fw_transition(ps, d0, t.band_m_ek[i], opt, bisections);
    (k % 2 == 0 ? r.edges[i].lower : r.edges[i].upper) = edge;
  });
  if (!r.edges.empty()) {
    r.band_lo = r.edges.front().lower;
    r.band_hi = r.edges.front().upper;
    for (const auto& e : r.edges) {
      r.band_lo = std::min(r.band_lo, e.lower);
      r.band_hi = std::max(r.band_hi, e.upper);
    }
  }
  r.band_share = std::max(0.0, r.band_hi - r.band_lo) / b.fw_n.width();
  r.band_ok = std::abs(r.band_share - t.band_share) <= t.band_tolerance;
  return r;
}

// ---- search -------------------------------------------------------------------

/// One tunable quantity with its admissible range.
struct SearchAxis {
  std::string name;
  std::function<double&(ParamSet&)> ref;
  double lo;
  double hi;
  bool log_scale;
};

/// Default tunables. The south box shares the north box depth.
inline std::vector<SearchAxis> default_search_space() {
  auto param = [](double ModelParams::*m) {
    return [m](ParamSet& ps) -> double& { return ps.params.*m; };
  };
  auto state = [](double ModelState::*m) {
    return [m](ParamSet& ps) -> double& { return ps.init_template.*m; };
  };
  return {
      {"lambda_hyd", param(&ModelParams::lambda_hyd), 20.0, 400.0, true},
      {"beta_s", param(&ModelParams::beta_s), 0.1, 1.5, true},
      {"kappa_v", param(&ModelParams::kappa_v), 2e-6, 6e-5, true},
      {"a_gm", param(&ModelParams::a_gm), 300.0, 5000.0, true},
      {"area_low", param(&ModelParams::area_low), 5e13, 4e14, true},
      {"depth_n", param(&ModelParams::depth_n), 20.0, 300.0, true},
      {"lx_n", param(&ModelParams::lx_n), 1e5, 5e7, true},
      {"tau_restore", param(&ModelParams::tau_restore), 0.1 * kSecondsPerYear, 3.0 * kSecondsPerYear, true},
      {"m_s", param(&ModelParams::m_s), 0.5, 40.0, true},
      {"fw_s", param(&ModelParams::fw_s), 0.1, 2.0, true},
      {"init_t_n", state(&ModelState::t_n), -1.0, 10.0, false},
      {"init_t_l", state(&ModelState::t_l), 10.0, 25.0, false},
      {"init_s_n", state(&ModelState::s_n), 33.0, 37.0, false},
      {"init_s_l", state(&ModelState::s_l), 33.0, 38.0, false},
      {"init_s_d", state(&ModelState::s_d), 33.0, 37.0, false},
  };
}

struct SearchOptions {
  std::uint64_t seed = 1;
  int iterations = 200;
  int bisections = 6;
  double probe_years = 2500.0;  // horizon for edge probes during the search
  Interval edge_targets{0.348, 0.848};
  std::vector<double> probe_m_ek{25.0, 15.0, 35.0};
};

/// Cheap misfit used by the search; zero means every probe hit its target.
inline double calibration_misfit(const ParamSet& ps, const CalibrationTargets& t, const SearchOptions& so,
                                 const IntegratorOptions& opt) {
  try {
    ps.params.validate();
    IntegratorOptions probe = opt;
    probe.horizon_years = so.probe_years;
    const Bounds b = Bounds::experiment();
    double err = 0.0;
    for (double m : so.probe_m_ek) {
      const double a = fw_transition(ps, b.d_low0.lo, m, probe, so.bisections);
      const double c = fw_transition(ps, b.d_low0.hi, m, probe, so.bisections);
      err += std::pow(a - so.edge_targets.lo, 2) + std::pow(c - so.edge_targets.hi, 2);
    }
    const SimOutcome eq = spin_up(ps, t, opt);
    const double mid = 0.5 * (t.equilibrium.lo + t.equilibrium.hi);
    err += std::pow(std::max(0.0, std::abs(eq.final_m_n - mid) - 0.5 * t.equilibrium.width()), 2) / 100.0;
    const double stepped = step_response(ps, t, eq.final_state, opt).final_m_n;
    err += std::pow(std::max(0.0, stepped + 1.0), 2) / 100.0;
    return err;
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

struct SearchResult {
  ParamSet best;
  double misfit = 0.0;
  int accepted = 0;
};

/// Greedy random search in the default space, perturbing about half the axes
/// per proposal. Proposals outside an axis range are discarded.
inline SearchResult calibration_search(const ParamSet& start, const CalibrationTargets& t = {},
                                       const SearchOptions& so = {}, const IntegratorOptions& opt = {},
                                       const std::vector<SearchAxis>& space = default_search_space()) {
  std::mt19937_64 rng(so.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::array<double, 3> scales{0.05, 0.15, 0.4};

  SearchResult r{start, calibration_misfit(start, t, so, opt), 0};
  for (int it = 0; it < so.iterations; ++it) {
    ParamSet cand = r.best;
    const double s = scales[static_cast<std::size_t>(unit(rng) * 3.0) % 3];
    bool ok = true;
    for (const auto& axis : space) {
      if (unit(rng) < 0.5) continue;
      double& v = axis.ref(cand);
      v = axis.log_scale ? v * std::exp(normal(rng) * s) : v + normal(rng) * s;
      ok = ok && v >= axis.lo && v <= axis.hi;
    }
    if (!ok) continue;
    cand.params.depth_s = cand.params.depth_n;
    const double e = calibration_misfit(cand, t, so, opt);
    if (e < r.misfit) {
      r.best = cand;
      r.misfit = e;
      ++r.accepted;
    }
  }
  return r;
}

}  // namespace tipgan
