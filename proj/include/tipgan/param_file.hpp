#pragma once

// Flat `name = value` parameter file for ModelParams plus the initial-state
// template. Keys prefixed `init_` belong to the template.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <ostream>
#include <string>
#include <utility>

#include "tipgan/box_model.hpp"
#include "tipgan/io.hpp"

namespace tipgan {

inline constexpr int kParamFileVersion = 1;

struct ParamSet {
  ModelParams params = ModelParams::calibrated();
  ModelState init_template = ModelState::calibrated_template();
};

namespace detail {

struct ParamField {
  const char* name;
  double ModelParams::*member;
  const char* unit;
};

inline constexpr std::array<ParamField, 26> kParamFields{{
    {"m_ek", &ModelParams::m_ek, "Sv"},
    {"m_s", &ModelParams::m_s, "Sv"},
    {"fw_n", &ModelParams::fw_n, "Sv"},
    {"fw_s", &ModelParams::fw_s, "Sv"},
    {"lambda_hyd", &ModelParams::lambda_hyd, "m^3/s per (kg/m^3 m^2)"},
    {"kappa_v", &ModelParams::kappa_v, "m^2/s"},
    {"a_gm", &ModelParams::a_gm, "m^2/s"},
    {"k_sl", &ModelParams::k_sl, "m/s"},
    {"k_nl", &ModelParams::k_nl, "m/s"},
    {"area_low", &ModelParams::area_low, "m^2"},
    {"area_n", &ModelParams::area_n, "m^2"},
    {"area_s", &ModelParams::area_s, "m^2"},
    {"depth_n", &ModelParams::depth_n, "m"},
    {"depth_s", &ModelParams::depth_s, "m"},
    {"depth_total", &ModelParams::depth_total, "m"},
    {"lx_s", &ModelParams::lx_s, "m"},
    {"ly_s", &ModelParams::ly_s, "m"},
    {"lx_n", &ModelParams::lx_n, "m"},
    {"rho0", &ModelParams::rho0, "kg/m^3"},
    {"alpha_t", &ModelParams::alpha_t, "kg/m^3 per degC"},
    {"beta_s", &ModelParams::beta_s, "kg/m^3 per psu"},
    {"t_star_n", &ModelParams::t_star_n, "degC"},
    {"t_star_s", &ModelParams::t_star_s, "degC"},
    {"t_star_l", &ModelParams::t_star_l, "degC"},
    {"tau_restore", &ModelParams::tau_restore, "s"},
    {"s_ref", &ModelParams::s_ref, "psu"},
}};

struct StateField {
  const char* name;
  double ModelState::*member;
};

inline constexpr std::array<StateField, 9> kStateFields{{
    {"init_d_low", &ModelState::d_low},
    {"init_t_n", &ModelState::t_n},
    {"init_t_s", &ModelState::t_s},
    {"init_t_l", &ModelState::t_l},
    {"init_t_d", &ModelState::t_d},
    {"init_s_n", &ModelState::s_n},
    {"init_s_s", &ModelState::s_s},
    {"init_s_l", &ModelState::s_l},
    {"init_s_d", &ModelState::s_d},
}};

}  // namespace detail

inline void write_param_set(std::ostream& out, const ParamSet& ps) {
  out << "# four-box model parameters\n";
  out << "format_version = " << kParamFileVersion << "\n";
  for (const auto& f : detail::kParamFields) {
    out << f.name << " = " << io::fmt(ps.params.*(f.member)) << "  # " << f.unit << "\n";
  }
  for (const auto& f : detail::kStateFields)
    out << f.name << " = " << io::fmt(ps.init_template.*(f.member)) << "\n";
}

/// Every key must be known; keys absent from the file keep calibrated values.
inline ParamSet read_param_set(const io::KeyValues& kv) {
  ParamSet ps;
  for (const auto& [key, value] : kv.entries()) {
    if (key == "format_version") {
      if (kv.get_int(key, 0) != kParamFileVersion)
        fail(ErrorKind::Parse, "unsupported parameter file version " + value);
      continue;
    }
    // inline comments after the value
    std::string v = value.substr(0, value.find('#'));
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.pop_back();
    bool matched = false;
    for (const auto& f : detail::kParamFields) {
      if (key == f.name) {
        ps.params.*(f.member) = io::KeyValues::to_double(v, key);
        matched = true;
      }
    }
    for (const auto& f : detail::kStateFields) {
      if (key == f.name) {
        ps.init_template.*(f.member) = io::KeyValues::to_double(v, key);
        matched = true;
      }
    }
    if (!matched) fail(ErrorKind::Parse, "unknown parameter '" + key + "'");
  }
  ps.params.validate();
  return ps;
}

inline ParamSet load_param_set(const std::filesystem::path& path) {
  return read_param_set(io::KeyValues::load(path));
}

inline void save_param_set(const std::filesystem::path& path, const ParamSet& ps) {
  auto out = io::open_out(path);
  write_param_set(out, ps);
}

}  // namespace tipgan
