#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "tipgan/errors.hpp"

namespace tipgan {

inline constexpr double kSecondsPerYear = 365.25 * 86400.0;
inline constexpr double kSverdrup = 1.0e6;  // m^3/s

/// One point of the perturbed parameter space.
struct Config {
  double d_low0 = 0.0;  // m
  double m_ek = 0.0;    // Sv
  double fw_n = 0.0;    // Sv

  friend bool operator==(const Config&, const Config&) = default;
};

enum class Coordinate { DLow0 = 0, MEk = 1, FwN = 2 };

inline constexpr std::array<Coordinate, 3> kCoordinates{Coordinate::DLow0, Coordinate::MEk,
                                                        Coordinate::FwN};

inline std::string_view to_string(Coordinate c) {
  switch (c) {
    case Coordinate::DLow0: return "d_low0";
    case Coordinate::MEk: return "m_ek";
    case Coordinate::FwN: return "fw_n";
  }
  return "?";
}

inline double get(const Config& c, Coordinate coord) {
  switch (coord) {
    case Coordinate::DLow0: return c.d_low0;
    case Coordinate::MEk: return c.m_ek;
    case Coordinate::FwN: return c.fw_n;
  }
  return 0.0;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Axis-aligned box over (d_low0, m_ek, fw_n).
struct Bounds {
  Interval d_low0{100.0, 400.0};
  Interval m_ek{15.0, 35.0};
  Interval fw_n{0.05, 1.55};

  /// The perturbation box used throughout the experiment.
  static Bounds experiment() { return Bounds{}; }

  const Interval& operator[](Coordinate c) const {
    switch (c) {
      case Coordinate::DLow0: return d_low0;
      case Coordinate::MEk: return m_ek;
      case Coordinate::FwN: return fw_n;
    }
    return d_low0;
  }

  bool contains(const Config& c) const {
    return d_low0.contains(c.d_low0) && m_ek.contains(c.m_ek) && fw_n.contains(c.fw_n);
  }

  void validate() const {
    for (Coordinate c : kCoordinates) {
      const Interval& iv = (*this)[c];
      if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi)
        fail(ErrorKind::InvalidArgument, "invalid bounds for " + std::string(to_string(c)));
    }
  }

  /// Maps a config onto the unit cube; degenerate axes map to 0.5.
  std::array<double, 3> normalize(const Config& c) const {
    std::array<double, 3> u{};
    for (Coordinate k : kCoordinates) {
      const Interval& iv = (*this)[k];
      u[static_cast<int>(k)] = iv.width() > 0.0 ? (get(c, k) - iv.lo) / iv.width() : 0.5;
    }
    return u;
  }

  Config denormalize(const std::array<double, 3>& u) const {
    return Config{d_low0.lo + u[0] * d_low0.width(), m_ek.lo + u[1] * m_ek.width(),
                  fw_n.lo + u[2] * fw_n.width()};
  }

  friend bool operator==(const Bounds&, const Bounds&) = default;
};

inline void require_in_bounds(const Config& c, const Bounds& b = Bounds::experiment()) {
  if (!b.contains(c)) {
    fail(ErrorKind::OutOfBounds, "config (d_low0=" + std::to_string(c.d_low0) +
                                     ", m_ek=" + std::to_string(c.m_ek) +
                                     ", fw_n=" + std::to_string(c.fw_n) + ") outside bounds");
  }
}

enum class Label : std::uint8_t { Off = 0, On = 1 };

inline std::string_view to_string(Label l) { return l == Label::On ? "on" : "off"; }

inline Label parse_label(std::string_view s) {
  if (s == "on" || s == "On" || s == "1") return Label::On;
  if (s == "off" || s == "Off" || s == "0") return Label::Off;
  fail(ErrorKind::Parse, "unknown label '" + std::string(s) + "'");
}

/// On iff the overturning is strictly positive; zero maps to Off.
inline Label label_from_overturning(double m_n) { return m_n > 0.0 ? Label::On : Label::Off; }

/// Fixed aggregate freshwater band used as the cross-check membership variant.
inline constexpr Interval kReferenceBand{0.348, 0.848};

}  // namespace tipgan
