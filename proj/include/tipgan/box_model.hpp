#pragma once

// Four-box overturning model: a deep box plus three surface boxes (north,
// south, low latitudes). The low-latitude box has a prognostic thickness
// d_low set by mass balance; temperature and salinity are carried in all
// four boxes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "tipgan/config.hpp"
#include "tipgan/errors.hpp"

namespace tipgan {

/// Physical parameterization. Volume fluxes are in Sv, everything else SI.
struct ModelParams {
  double m_ek = 25.0;  // Sv, Ekman upwelling in the Southern Ocean
  double m_s = 0.0;    // Sv, southern deep-water exchange
  double fw_n = 0.55;  // Sv, northern atmospheric freshwater transport
  double fw_s = 0.0;   // Sv, southern atmospheric freshwater transport

  double lambda_hyd = 0.0;  // m^3/s per (kg/m^3 m^2)
  double kappa_v = 0.0;     // m^2/s
  double a_gm = 0.0;        // m^2/s
  double k_sl = 0.0;        // m/s
  double k_nl = 0.0;        // m/s

  double area_low = 0.0;  // m^2
  double area_n = 0.0;
  double area_s = 0.0;
  double depth_n = 0.0;  // m
  double depth_s = 0.0;
  double depth_total = 0.0;
  double lx_s = 0.0;  // m, zonal extent of the Southern Ocean
  double ly_s = 0.0;  // m, eddy length scale
  double lx_n = 0.0;  // m, zonal width of the north/low exchange section

  double rho0 = 1027.5;  // kg/m^3
  double alpha_t = 0.0;  // kg/m^3 per degC
  double beta_s = 0.0;   // kg/m^3 per psu
  double t_star_n = 0.0;  // degC
  double t_star_s = 0.0;
  double t_star_l = 0.0;
  double tau_restore = 0.0;  // s
  double s_ref = 35.0;       // psu

  /// Calibrated reference configuration (see data/calibrated_params.txt).
  static ModelParams calibrated();

  double total_volume() const { return (area_low + area_n + area_s) * depth_total; }
  double volume_n() const { return area_n * depth_n; }
  double volume_s() const { return area_s * depth_s; }

  /// Largest d_low that leaves the deep box a positive volume.
  double max_d_low() const {
    return std::min(depth_total, (total_volume() - volume_n() - volume_s()) / area_low);
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        fail(ErrorKind::InvalidArgument, std::string(name) + " must be positive and finite");
    };
    positive(area_low, "area_low");
    positive(area_n, "area_n");
    positive(area_s, "area_s");
    positive(depth_n, "depth_n");
    positive(depth_s, "depth_s");
    positive(depth_total, "depth_total");
    positive(tau_restore, "tau_restore");
    positive(alpha_t, "alpha_t");
    positive(beta_s, "beta_s");
    positive(lx_s, "lx_s");
    positive(ly_s, "ly_s");
    if (depth_total <= std::max(depth_n, depth_s))
      fail(ErrorKind::InvalidArgument, "depth_total must exceed both surface box depths");
    for (double v : {m_ek, m_s, fw_n, fw_s, lambda_hyd, kappa_v, a_gm, k_sl, k_nl, lx_n, rho0, s_ref,
                     t_star_n, t_star_s, t_star_l}) {
      if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "non-finite model parameter");
    }
    if (m_ek < 0.0 || m_s < 0.0 || kappa_v < 0.0 || a_gm < 0.0 || k_sl < 0.0 || k_nl < 0.0 ||
        lambda_hyd < 0.0 || lx_n < 0.0)
      fail(ErrorKind::InvalidArgument, "flux coefficients must be non-negative");
  }
};

inline constexpr std::size_t kStateSize = 9;

/// The nine prognostic variables.
struct ModelState {
  double d_low = 0.0;  // m
  double t_n = 0.0, t_s = 0.0, t_l = 0.0, t_d = 0.0;  // degC
  double s_n = 0.0, s_s = 0.0, s_l = 0.0, s_d = 0.0;  // psu

  /// Initial-condition template paired with ModelParams::calibrated().
  static ModelState calibrated_template();

  std::array<double, kStateSize> to_array() const {
    return {d_low, t_n, t_s, t_l, t_d, s_n, s_s, s_l, s_d};
  }

  static ModelState from_array(const std::array<double, kStateSize>& a) {
    return ModelState{a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]};
  }

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

/// Time derivative of a ModelState, per second.
using ModelStateDerivative = ModelState;

/// Volume fluxes in Sv. Only m_n carries a sign.
struct Fluxes {
  double m_n = 0.0;
  double m_ek = 0.0;
  double m_eddy = 0.0;
  double m_upw = 0.0;
  double m_sl = 0.0;
  double m_nl = 0.0;
  double m_s = 0.0;
};

struct IntegratorOptions {
  double dt_years = 0.25;
  double horizon_years = 4000.0;
  /// Steady when max_i |dx_i/dt| / max(|x_i|, 1) < tolerance, per year.
  double steady_tolerance = 1e-10;
};

struct SimOutcome {
  ModelState final_state;
  double final_m_n = 0.0;  // Sv
  Label label = Label::Off;
  bool converged = false;
  double years_integrated = 0.0;

  friend bool operator==(const SimOutcome&, const SimOutcome&) = default;
};

namespace detail {

inline double density(const ModelParams& p, double t, double s) {
  return p.rho0 - p.alpha_t * t + p.beta_s * s;
}

// Coefficients of the right-hand side that do not depend on the state.
struct Prepared {
  double lambda_hyd, alpha_t, beta_s;
  double upw_coeff, eddy_coeff, sl_coeff, nl_coeff;
  double mek, ms, salt_n, salt_s;
  double area_low, inv_area_low, vn, vs, v_surface_fixed, v_total;
  double t_star_n, t_star_s, t_star_l, inv_tau;

  explicit Prepared(const ModelParams& p)
      : lambda_hyd(p.lambda_hyd),
        alpha_t(p.alpha_t),
        beta_s(p.beta_s),
        upw_coeff(p.kappa_v * p.area_low),
        eddy_coeff(p.a_gm * p.lx_s / p.ly_s),
        sl_coeff(p.k_sl * p.lx_s),
        nl_coeff(p.k_nl * p.lx_n),
        mek(p.m_ek * kSverdrup),
        ms(p.m_s * kSverdrup),
        salt_n(p.fw_n * kSverdrup * p.s_ref),
        salt_s(p.fw_s * kSverdrup * p.s_ref),
        area_low(p.area_low),
        inv_area_low(1.0 / p.area_low),
        vn(p.volume_n()),
        vs(p.volume_s()),
        v_surface_fixed(p.volume_n() + p.volume_s()),
        v_total(p.total_volume()),
        t_star_n(p.t_star_n),
        t_star_s(p.t_star_s),
        t_star_l(p.t_star_l),
        inv_tau(1.0 / p.tau_restore) {}
};

// Right-hand side on raw arrays, SI units (per second). Returns m_n in m^3/s.
// The caller guarantees d_low > 0.
inline double rhs(const Prepared& c, const double* x, double* dx) {
  const double d = x[0];
  // only density differences enter, so rho0 drops out
  const double mn = c.lambda_hyd * (c.alpha_t * (x[3] - x[1]) + c.beta_s * (x[5] - x[7])) * d * d;
  const double mupw = c.upw_coeff / d;
  const double meddy = c.eddy_coeff * d;
  const double msl = c.sl_coeff * d;
  const double mnl = c.nl_coeff * d;
  const double mek = c.mek;
  const double ms = c.ms;

  const double vl = c.area_low * d;
  const double vd = c.v_total - c.v_surface_fixed - vl;

  // Donor-cell transport: each directed flow q from box a to box b adds
  // q (C_a - C_b) to V_b dC_b/dt. Exchanges are two opposing flows.
  for (int tracer = 0; tracer < 2; ++tracer) {
    const int o = 1 + 4 * tracer;
    const double cn = x[o], cs = x[o + 1], cl = x[o + 2], cd = x[o + 3];
    double fn = 0.0, fs = 0.0, fl = 0.0, fd = 0.0;

    fs += mek * (cd - cs);  // deep -> south (Ekman upwelling)
    fl += mek * (cs - cl);  // south -> low (northward Ekman transport)
    fs += meddy * (cl - cs);  // low -> south (eddy return)
    fd += meddy * (cs - cd);  // south -> deep
    fl += mupw * (cd - cl);   // deep -> low (diffusive upwelling)
    if (mn > 0.0) {
      fn += mn * (cl - cn);  // low -> north
      fd += mn * (cn - cd);  // north -> deep
    } else {
      fn += -mn * (cd - cn);  // deep -> north
      fl += -mn * (cn - cl);  // north -> low
    }
    fs += msl * (cl - cs);
    fl += msl * (cs - cl);
    fn += mnl * (cl - cn);
    fl += mnl * (cn - cl);
    fs += ms * (cd - cs);
    fd += ms * (cs - cd);

    if (tracer == 0) {
      dx[o] = fn / c.vn + (c.t_star_n - cn) * c.inv_tau;
      dx[o + 1] = fs / c.vs + (c.t_star_s - cs) * c.inv_tau;
      dx[o + 2] = fl / vl + (c.t_star_l - cl) * c.inv_tau;
      dx[o + 3] = fd / vd;
    } else {
      dx[o] = (fn - c.salt_n) / c.vn;
      dx[o + 1] = (fs - c.salt_s) / c.vs;
      dx[o + 2] = (fl + c.salt_n + c.salt_s) / vl;
      dx[o + 3] = fd / vd;
    }
  }
  dx[0] = (mek + mupw - meddy - mn) * c.inv_area_low;
  return mn;
}

inline double rhs(const ModelParams& p, const double* x, double* dx) { return rhs(Prepared(p), x, dx); }

inline void check_finite(double v, const char* field) {
  if (!std::isfinite(v)) fail(ErrorKind::DegenerateState, std::string("non-finite ") + field);
}

inline void check_state_for_fluxes(const ModelState& s) {
  check_finite(s.d_low, "d_low");
  if (!(s.d_low > 0.0)) fail(ErrorKind::DegenerateState, "d_low must be positive");
  const std::array<std::pair<double, const char*>, 8> tracers{{{s.t_n, "t_n"},
                                                               {s.t_s, "t_s"},
                                                               {s.t_l, "t_l"},
                                                               {s.t_d, "t_d"},
                                                               {s.s_n, "s_n"},
                                                               {s.s_s, "s_s"},
                                                               {s.s_l, "s_l"},
                                                               {s.s_d, "s_d"}}};
  for (const auto& [v, name] : tracers) check_finite(v, name);
}

}  // namespace detail

/// Flux laws of the model, evaluated at one state.
inline Fluxes compute_fluxes(const ModelParams& p, const ModelState& s) {
  detail::check_state_for_fluxes(s);
  const double rho_n = detail::density(p, s.t_n, s.s_n);
  const double rho_l = detail::density(p, s.t_l, s.s_l);
  detail::check_finite(rho_n, "rho_n");
  detail::check_finite(rho_l, "rho_l");
  const double d = s.d_low;
  Fluxes f;
  f.m_n = p.lambda_hyd * (rho_n - rho_l) * d * d / kSverdrup;
  f.m_upw = p.kappa_v * p.area_low / d / kSverdrup;
  f.m_eddy = p.a_gm * d * p.lx_s / p.ly_s / kSverdrup;
  f.m_sl = p.k_sl * d * p.lx_s / kSverdrup;
  f.m_nl = p.k_nl * d * p.lx_n / kSverdrup;
  f.m_ek = p.m_ek;
  f.m_s = p.m_s;
  detail::check_finite(f.m_n, "m_n");
  detail::check_finite(f.m_upw, "m_upw");
  detail::check_finite(f.m_eddy, "m_eddy");
  detail::check_finite(f.m_sl, "m_sl");
  detail::check_finite(f.m_nl, "m_nl");
  return f;
}

inline ModelStateDerivative tendency(const ModelParams& p, const ModelState& s) {
  compute_fluxes(p, s);  // validates the state and flux values
  const auto x = s.to_array();
  std::array<double, kStateSize> dx{};
  detail::rhs(p, x.data(), dx.data());
  for (double v : dx) detail::check_finite(v, "tendency");
  return ModelState::from_array(dx);
}

/// Box volumes in m^3, ordered north, south, low, deep.
inline std::array<double, 4> box_volumes(const ModelParams& p, double d_low) {
  const double vl = p.area_low * d_low;
  return {p.volume_n(), p.volume_s(), vl, p.total_volume() - p.volume_n() - p.volume_s() - vl};
}

/// Total salt content sum_b V_b S_b (psu m^3).
inline double total_salt(const ModelParams& p, const ModelState& s) {
  const auto v = box_volumes(p, s.d_low);
  return v[0] * s.s_n + v[1] * s.s_s + v[2] * s.s_l + v[3] * s.s_d;
}

/// Sanity bounds on an integrated state; returns the name of the first
/// violated field or nullptr.
inline const char* state_violation(double max_d_low, const std::array<double, kStateSize>& x) {
  static constexpr std::array<const char*, kStateSize> names{"d_low", "t_n", "t_s", "t_l", "t_d",
                                                             "s_n",   "s_s", "s_l", "s_d"};
  if (!(x[0] > 0.0 && x[0] < max_d_low)) return names[0];
  for (std::size_t i = 1; i <= 4; ++i)
    if (!(x[i] > -4.0 && x[i] < 40.0)) return names[i];
  for (std::size_t i = 5; i <= 8; ++i)
    if (!(x[i] > 0.0 && x[i] < 60.0)) return names[i];
  return nullptr;
}

inline const char* state_violation(const ModelParams& p, const std::array<double, kStateSize>& x) {
  return state_violation(p.max_d_low(), x);
}

/// Fixed-step classical RK4 until steady or the horizon is reached.
inline SimOutcome integrate(const ModelParams& p, const ModelState& initial,
                            const IntegratorOptions& opt = {}) {
  if (!(opt.horizon_years > 0.0)) fail(ErrorKind::InvalidArgument, "horizon must be positive");
  if (!(opt.dt_years > 0.0)) fail(ErrorKind::InvalidArgument, "dt must be positive");
  detail::check_state_for_fluxes(initial);

  using State = std::array<double, kStateSize>;
  State x = initial.to_array();
  if (const char* bad = state_violation(p, x))
    fail(ErrorKind::StateBlowUp, std::string("initial state violates bounds on ") + bad);

  const long steps = static_cast<long>(std::ceil(opt.horizon_years / opt.dt_years - 1e-9));
  const detail::Prepared c(p);
  const double max_d = p.max_d_low();
  State k1{}, k2{}, k3{}, k4{}, tmp{};
  double t_years = 0.0;
  bool converged = false;

  const double tol_per_second = opt.steady_tolerance / kSecondsPerYear;
  auto is_steady = [&](const State& state, const State& rate) {
    for (std::size_t i = 0; i < kStateSize; ++i)
      if (!(std::abs(rate[i]) < tol_per_second * std::max(std::abs(state[i]), 1.0))) return false;
    return true;
  };

  for (long step = 0; step < steps; ++step) {
    detail::rhs(c, x.data(), k1.data());
    if (is_steady(x, k1)) {
      converged = true;
      break;
    }
    const double dt_years = std::min(opt.dt_years, opt.horizon_years - t_years);
    const double h = dt_years * kSecondsPerYear;
    for (std::size_t i = 0; i < kStateSize; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    detail::rhs(c, tmp.data(), k2.data());
    for (std::size_t i = 0; i < kStateSize; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    detail::rhs(c, tmp.data(), k3.data());
    for (std::size_t i = 0; i < kStateSize; ++i) tmp[i] = x[i] + h * k3[i];
    detail::rhs(c, tmp.data(), k4.data());
    for (std::size_t i = 0; i < kStateSize; ++i)
      x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    t_years = (step + 1 == steps) ? opt.horizon_years : (step + 1) * opt.dt_years;

    if (const char* bad = state_violation(max_d, x)) {
      fail(ErrorKind::StateBlowUp, std::string("bound violated on ") + bad + " at step " +
                                       std::to_string(step) + " (t = " +
                                       std::to_string(t_years) + " yr)");
    }
  }
  if (!converged) {
    detail::rhs(c, x.data(), k1.data());
    converged = is_steady(x, k1);
  }

  SimOutcome out;
  out.final_state = ModelState::from_array(x);
  out.final_m_n = compute_fluxes(p, out.final_state).m_n;
  out.label = label_from_overturning(out.final_m_n);
  out.converged = converged;
  out.years_integrated = t_years;
  return out;
}

/// Oracle entry point: runs one perturbed configuration from the template.
inline SimOutcome run_config(const Config& config, const ModelParams& base,
                             const ModelState& init_template, const IntegratorOptions& opt = {}) {
  require_in_bounds(config);
  ModelParams p = base;
  p.m_ek = config.m_ek;
  p.fw_n = config.fw_n;
  ModelState s = init_template;
  s.d_low = config.d_low0;
  return integrate(p, s, opt);
}

}  // namespace tipgan

#include "tipgan/calibrated_defaults.hpp"
