#pragma once

// Quasi-static freshwater sweeps: fw_n is stepped up and then back down,
// each step integrated from the end state of the previous one.

#include <optional>
#include <ostream>
#include <vector>

#include "tipgan/box_model.hpp"
#include "tipgan/io.hpp"

namespace tipgan {

struct SweepOptions {
  double fw_lo = 0.05;  // Sv
  double fw_hi = 1.55;
  double fw_step = 0.02;
  double dwell_years = 1500.0;  // integration time per step
  IntegratorOptions integrator{};
};

struct SweepPoint {
  double fw_n = 0.0;
  double m_n = 0.0;  // Sv at the end of the dwell
  bool upward = true;
};

struct SweepResult {
  double m_ek = 0.0;
  std::vector<SweepPoint> points;
  std::optional<double> up_transition;    // first fw_n on the way up with m_n <= 0
  std::optional<double> down_transition;  // first fw_n on the way down with m_n > 0

  bool hysteretic() const { return up_transition && down_transition && *up_transition > *down_transition; }
};

inline SweepResult quasi_static_sweep(const ModelParams& base, const ModelState& start, double m_ek,
                                      const SweepOptions& opt = {}) {
  if (!(opt.fw_step > 0.0) || !(opt.fw_hi >= opt.fw_lo))
    fail(ErrorKind::InvalidArgument, "invalid sweep range");
  std::vector<double> grid;
  for (long k = 0;; ++k) {
    const double f = opt.fw_lo + static_cast<double>(k) * opt.fw_step;
    if (f > opt.fw_hi + 1e-12) break;
    grid.push_back(f);
  }
  ModelParams p = base;
  p.m_ek = m_ek;
  IntegratorOptions io = opt.integrator;
  io.horizon_years = opt.dwell_years;

  SweepResult r;
  r.m_ek = m_ek;
  ModelState x = start;
  auto visit = [&](double f, bool up) {
    p.fw_n = f;
    const SimOutcome o = integrate(p, x, io);
    x = o.final_state;
    r.points.push_back({f, o.final_m_n, up});
    return o.label;
  };
  for (double f : grid)
    if (visit(f, true) == Label::Off && !r.up_transition) r.up_transition = f;
  for (auto it = grid.rbegin(); it != grid.rend(); ++it)
    if (visit(*it, false) == Label::On && !r.down_transition) r.down_transition = *it;
  return r;
}

inline constexpr const char* kSweepHeader = "m_ek,direction,fw_n,m_n";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepResult>& sweeps) {
  out << kSweepHeader << "\n";
  for (const auto& s : sweeps)
    for (const auto& p : s.points)
      out << io::fmt(s.m_ek) << ',' << (p.upward ? "up" : "down") << ',' << io::fmt(p.fw_n) << ','
          << io::fmt(p.m_n) << "\n";
}

}  // namespace tipgan
