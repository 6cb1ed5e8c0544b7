#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tipgan/box_model.hpp"
#include "tipgan/calibration.hpp"
#include "tipgan/explorer.hpp"
#include "tipgan/hysteresis.hpp"

using namespace tipgan;

namespace {

ModelState random_state(std::mt19937_64& rng, const ModelParams& p) {
  std::uniform_real_distribution<double> d(50.0, 0.9 * p.max_d_low()), t(0.0, 25.0), s(33.0, 37.0);
  return ModelState{d(rng), t(rng), t(rng), t(rng), t(rng), s(rng), s(rng), s(rng), s(rng)};
}

// Everything at rest: uniform tracers, no freshwater, no diffusion, Ekman
// inflow balanced by the eddy return at the given depth.
ModelParams resting_params(double d_low) {
  ModelParams p = ModelParams::calibrated();
  p.fw_n = p.fw_s = 0.0;
  p.kappa_v = 0.0;
  p.m_ek = p.a_gm * d_low * p.lx_s / p.ly_s / kSverdrup;
  p.t_star_n = p.t_star_s = p.t_star_l = 5.0;
  return p;
}

}  // namespace

TEST(Fluxes, ZeroDensityContrastGivesNoOverturning) {
  const ModelParams p = ModelParams::calibrated();
  ModelState s = ModelState::calibrated_template();
  s.t_n = s.t_l = 10.0;
  s.s_n = s.s_l = 35.0;
  EXPECT_EQ(compute_fluxes(p, s).m_n, 0.0);
}

TEST(Fluxes, HalvingDepthScalesUpwellingAndEddy) {
  const ModelParams p = ModelParams::calibrated();
  ModelState s = ModelState::calibrated_template();
  const Fluxes a = compute_fluxes(p, s);
  s.d_low *= 0.5;
  const Fluxes b = compute_fluxes(p, s);
  EXPECT_EQ(b.m_upw, 2.0 * a.m_upw);
  EXPECT_EQ(b.m_eddy, 0.5 * a.m_eddy);
}

TEST(Fluxes, MatchHandWrittenLaws) {
  const ModelParams p = ModelParams::calibrated();
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const ModelState s = random_state(rng, p);
    const Fluxes f = compute_fluxes(p, s);
    const double d = s.d_low;
    const double drho = (p.beta_s * s.s_n - p.alpha_t * s.t_n) - (p.beta_s * s.s_l - p.alpha_t * s.t_l);
    EXPECT_NEAR(f.m_n, p.lambda_hyd * drho * d * d / 1e6, 1e-12 * std::max(1.0, std::abs(f.m_n)));
    EXPECT_NEAR(f.m_upw, p.kappa_v * p.area_low / d / 1e6, 1e-12 * f.m_upw);
    EXPECT_NEAR(f.m_eddy, p.a_gm * d * p.lx_s / p.ly_s / 1e6, 1e-12 * f.m_eddy);
    EXPECT_NEAR(f.m_sl, p.k_sl * d * p.lx_s / 1e6, 1e-12 * f.m_sl);
    EXPECT_NEAR(f.m_nl, p.k_nl * d * p.lx_n / 1e6, 1e-12 * f.m_nl);
    EXPECT_EQ(f.m_ek, p.m_ek);
  }
}

TEST(Fluxes, NonFiniteFieldIsNamed) {
  ModelState s = ModelState::calibrated_template();
  s.t_n = std::nan("");
  try {
    compute_fluxes(ModelParams::calibrated(), s);
    FAIL() << "expected DegenerateState";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateState);
    EXPECT_NE(std::string(e.what()).find("t_n"), std::string::npos);
  }
}

TEST(Tendency, UniformRestingStateIsStationary) {
  const double d = 400.0;
  const ModelParams p = resting_params(d);
  const ModelState s{d, 5.0, 5.0, 5.0, 5.0, 35.0, 35.0, 35.0, 35.0};
  const auto dx = tendency(p, s).to_array();
  for (double v : dx) EXPECT_NEAR(v, 0.0, 1e-18);
}

TEST(Tendency, VolumeMassBalance) {
  const ModelParams p = ModelParams::calibrated();
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const ModelState s = random_state(rng, p);
    const Fluxes f = compute_fluxes(p, s);
    const double expected = (f.m_ek + f.m_upw - f.m_eddy - f.m_n) * 1e6 / p.area_low;
    EXPECT_NEAR(tendency(p, s).d_low, expected, 1e-12 * std::abs(expected) + 1e-20);
  }
}

// d/dt sum V_b S_b, with the low and deep volumes moving with d_low.
TEST(Tendency, TotalSaltIsConserved) {
  const ModelParams p = ModelParams::calibrated();
  std::mt19937_64 rng(9);
  for (int k = 0; k < 50; ++k) {
    const ModelState s = random_state(rng, p);
    const ModelState ds = tendency(p, s);
    const double vn = p.area_n * p.depth_n, vs = p.area_s * p.depth_s, vl = p.area_low * s.d_low;
    const double vd = (p.area_low + p.area_n + p.area_s) * p.depth_total - vn - vs - vl;
    const double dvl = p.area_low * ds.d_low;
    const double rate = vn * ds.s_n + vs * ds.s_s + vl * ds.s_l + vd * ds.s_d + dvl * (s.s_l - s.s_d);
    // scale: the largest single salt transport term
    const double scale = (p.m_ek + 100.0) * 1e6 * 40.0;
    EXPECT_LT(std::abs(rate) / scale, 1e-12);
  }
}

TEST(Integrate, SaltDriftOverFullHorizon) {
  const ModelParams p = ModelParams::calibrated();
  const ModelState s0 = ModelState::calibrated_template();
  const SimOutcome o = integrate(p, s0);
  const double a = total_salt(p, s0), b = total_salt(p, o.final_state);
  EXPECT_LT(std::abs(b - a) / a, 1e-8);
}

TEST(Integrate, FixedPointConvergesImmediately) {
  const double d = 400.0;
  const ModelParams p = resting_params(d);
  const ModelState s{d, 5.0, 5.0, 5.0, 5.0, 35.0, 35.0, 35.0, 35.0};
  const SimOutcome o = integrate(p, s);
  EXPECT_TRUE(o.converged);
  EXPECT_EQ(o.years_integrated, 0.0);
  EXPECT_EQ(o.final_state, s);
}

TEST(Integrate, BitIdenticalReruns) {
  const ModelParams p = ModelParams::calibrated();
  const ModelState s = ModelState::calibrated_template();
  EXPECT_EQ(integrate(p, s), integrate(p, s));
}

TEST(Integrate, HalvingStepChangesLittle) {
  const ModelParams base = ModelParams::calibrated();
  for (const Config c : {Config{400, 25, 0.3}, Config{100, 20, 0.7}, Config{250, 35, 0.55}, Config{400, 15, 1.2}}) {
    IntegratorOptions a, b;
    b.dt_years = a.dt_years / 2;
    const double ma = run_config(c, base, ModelState::calibrated_template(), a).final_m_n;
    const double mb = run_config(c, base, ModelState::calibrated_template(), b).final_m_n;
    EXPECT_LT(std::abs(ma - mb), 0.1) << describe(c);
  }
}

TEST(Integrate, RejectsBadOptions) {
  IntegratorOptions o;
  o.horizon_years = 0.0;
  EXPECT_THROW(integrate(ModelParams::calibrated(), ModelState::calibrated_template(), o), Error);
}

TEST(RunConfig, LowFreshwaterIsOn) {
  const auto o = run_config({400, 25, 0.05}, ModelParams::calibrated(), ModelState::calibrated_template());
  EXPECT_EQ(o.label, Label::On);
  EXPECT_GT(o.final_m_n, 0.0);
}

TEST(RunConfig, HighFreshwaterIsOffFromAnyDepth) {
  for (double d : {100.0, 250.0, 400.0}) {
    const auto o = run_config({d, 25, 1.55}, ModelParams::calibrated(), ModelState::calibrated_template());
    EXPECT_EQ(o.label, Label::Off) << d;
  }
}

TEST(RunConfig, OutOfBoundsIsRejected) {
  try {
    run_config({400, 25, 2.0}, ModelParams::calibrated(), ModelState::calibrated_template());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfBounds);
  }
}

TEST(Calibration, EquilibriumAndCollapse) {
  const ParamSet ps;
  const CalibrationTargets t;
  const SimOutcome eq = spin_up(ps, t, {});
  EXPECT_GE(eq.final_m_n, 15.0);
  EXPECT_LE(eq.final_m_n, 20.0);
  EXPECT_LT(step_response(ps, t, eq.final_state, {}).final_m_n, 0.0);
}

TEST(Hysteresis, SweepAtReferenceEkman) {
  const ParamSet ps;
  const SweepResult r = quasi_static_sweep(ps.params, ps.init_template, 25.0, {});
  ASSERT_TRUE(r.up_transition && r.down_transition);
  EXPECT_GT(*r.up_transition, *r.down_transition);
  EXPECT_TRUE(r.hysteretic());
}
