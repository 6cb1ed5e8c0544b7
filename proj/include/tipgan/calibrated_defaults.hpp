#pragma once

// Calibrated base configuration. Mirrors data/calibrated_params.txt; the
// calibration test checks the two stay in sync.

#include "tipgan/box_model.hpp"

namespace tipgan {

inline ModelParams ModelParams::calibrated() {
  ModelParams p;
  p.m_ek = 25.0;
  p.m_s = 11.0237;
  p.fw_n = 0.55;
  p.fw_s = 1.49215;
  p.lambda_hyd = 80.9006;
  p.kappa_v = 3.28007e-5;
  p.a_gm = 2348.18;
  p.k_sl = 1.0e-3;
  p.k_nl = 1.0e-3;
  p.area_low = 2.01073e14;
  p.area_n = 0.6e14;
  p.area_s = 1.0e14;
  p.depth_n = 47.8652;
  p.depth_s = 47.8652;
  p.depth_total = 4000.0;
  p.lx_s = 2.5e7;
  p.ly_s = 1.0e6;
  p.lx_n = 4.05556e6;
  p.rho0 = 1027.5;
  p.alpha_t = 0.17;
  p.beta_s = 0.771137;
  p.t_star_n = 2.0;
  p.t_star_s = 4.0;
  p.t_star_l = 17.0;
  p.tau_restore = 0.526118 * kSecondsPerYear;
  p.s_ref = 35.0;
  return p;
}

inline ModelState ModelState::calibrated_template() {
  return ModelState{400.0, 1.16726, 4.0, 18.2569, 3.0, 34.8954, 35.0, 36.5066, 34.917};
}

}  // namespace tipgan
