#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "anchorplace/errors.hpp"
#include "json.hpp"

namespace anchorplace {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Which side transmits the ranging signal.
///   OwA: anchors transmit, per-anchor energies are designed.
///   OwS: the sensor transmits with a fixed energy, anchors are selected.
enum class Mode { OwA, OwS };

enum class Distribution { Gaussian, Unknown };

struct PhysicsParams {
  double alpha = 1.0;                  // path gain at 1 m
  double beta = 2.0;                   // path-loss exponent
  double c = 3e8;                      // propagation speed, m/s
  double mean_square_bandwidth = 1.0;  // rad^2/s^2
  double noise_psd = 1.0;              // two-sided PSD N/2, W/Hz

  /// rho = c^2 (N/2) / F^2, in m^2 J.
  double rho() const { return c * c * noise_psd / mean_square_bandwidth; }
};

struct AccuracyTarget {
  double radius = 1.0;       // R_e, m
  double probability = 0.5;  // P_e
  Distribution distribution = Distribution::Gaussian;
};

struct Scenario {
  std::string name;
  std::string notes;
  std::vector<Vec2> anchor_points;
  std::vector<Vec2> sensor_points;
  PhysicsParams physics;
  AccuracyTarget accuracy;
  Mode mode = Mode::OwA;
  double energy_bound = 0.0;   // e_b, J (OwA)
  double sensor_energy = 0.0;  // e_s, J (OwS)

  int num_anchors() const { return static_cast<int>(anchor_points.size()); }
  int num_sensor_points() const { return static_cast<int>(sensor_points.size()); }

  /// Largest admissible weight per anchor: e_b in OwA, 1 in OwS.
  double weight_bound() const { return mode == Mode::OwA ? energy_bound : 1.0; }
};

struct BoundingBox {
  double xmin = 0.0;
  double xmax = 0.0;
  double ymin = 0.0;
  double ymax = 0.0;
};

inline const char* to_string(Mode mode) { return mode == Mode::OwA ? "owa" : "ows"; }

inline const char* to_string(Distribution d) {
  return d == Distribution::Gaussian ? "gaussian" : "unknown";
}

/// Uniform grid over `box`, row-major with x varying fastest. Both endpoints
/// are included; an axis with a single count sits at the midpoint.
inline std::vector<Vec2> make_grid(const BoundingBox& box, std::array<int, 2> counts) {
  if (counts[0] < 1 || counts[1] < 1) {
    throw PreconditionError("make_grid: counts must be >= 1 per axis");
  }
  if (!(std::isfinite(box.xmin) && std::isfinite(box.xmax) && std::isfinite(box.ymin) &&
        std::isfinite(box.ymax)) ||
      box.xmin > box.xmax || box.ymin > box.ymax) {
    throw PreconditionError("make_grid: extents must be finite with min <= max");
  }
  auto axis = [](double lo, double hi, int count, int i) {
    if (count == 1) return 0.5 * (lo + hi);
    if (i == count - 1) return hi;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  };
  std::vector<Vec2> points;
  points.reserve(static_cast<std::size_t>(counts[0]) * static_cast<std::size_t>(counts[1]));
  for (int j = 0; j < counts[1]; ++j) {
    for (int i = 0; i < counts[0]; ++i) {
      points.emplace_back(axis(box.xmin, box.xmax, counts[0], i),
                          axis(box.ymin, box.ymax, counts[1], j));
    }
  }
  return points;
}

/// `count` points evenly spaced on a circle, counter-clockwise from `phase`.
inline std::vector<Vec2> make_circle(const Vec2& center, double radius, int count,
                                     double phase = 0.0) {
  if (count < 1 || !(radius >= 0.0) || !std::isfinite(radius)) {
    throw PreconditionError("make_circle: count >= 1 and finite radius >= 0 required");
  }
  std::vector<Vec2> points;
  points.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = phase + 2.0 * std::numbers::pi * static_cast<double>(i) / count;
    points.emplace_back(center.x() + radius * std::cos(t), center.y() + radius * std::sin(t));
  }
  return points;
}

inline void validate(const Scenario& s) {
  const auto& p = s.physics;
  if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) throw ValidationError("physics.alpha", "must be > 0");
  if (!(p.beta >= 0.0) || !std::isfinite(p.beta)) throw ValidationError("physics.beta", "must be >= 0");
  if (!(p.c > 0.0) || !std::isfinite(p.c)) throw ValidationError("physics.c_m_per_s", "must be > 0");
  if (!(p.mean_square_bandwidth > 0.0) || !std::isfinite(p.mean_square_bandwidth)) {
    throw ValidationError("physics.mean_square_bandwidth_rad2_per_s2", "must be > 0");
  }
  if (!(p.noise_psd > 0.0) || !std::isfinite(p.noise_psd)) {
    throw ValidationError("physics.noise_psd_w_per_hz", "must be > 0");
  }
  if (!(s.accuracy.radius > 0.0) || !std::isfinite(s.accuracy.radius)) {
    throw ValidationError("accuracy.radius_m", "must be > 0");
  }
  if (!(s.accuracy.probability > 0.0 && s.accuracy.probability < 1.0)) {
    throw ValidationError("accuracy.probability", "must lie strictly between 0 and 1");
  }
  if (s.anchor_points.empty()) throw ValidationError("anchors", "at least one anchor point required");
  if (s.sensor_points.empty()) throw ValidationError("sensors", "at least one sensor point required");
  for (std::size_t i = 0; i < s.anchor_points.size(); ++i) {
    if (!s.anchor_points[i].allFinite()) {
      throw ValidationError("anchors[" + std::to_string(i) + "]", "coordinates must be finite");
    }
  }
  for (std::size_t i = 0; i < s.sensor_points.size(); ++i) {
    if (!s.sensor_points[i].allFinite()) {
      throw ValidationError("sensors[" + std::to_string(i) + "]", "coordinates must be finite");
    }
  }
  for (std::size_t m = 0; m < s.anchor_points.size(); ++m) {
    for (std::size_t k = 0; k < s.sensor_points.size(); ++k) {
      if ((s.anchor_points[m] - s.sensor_points[k]).norm() == 0.0) {
        throw ValidationError("anchors[" + std::to_string(m) + "]",
                              "coincides with sensor point " + std::to_string(k) +
                                  " (zero distance)");
      }
    }
  }
  if (!(s.energy_bound >= 0.0) || !std::isfinite(s.energy_bound)) {
    throw ValidationError("energy_bound_j", "must be finite and >= 0");
  }
  if (!(s.sensor_energy >= 0.0) || !std::isfinite(s.sensor_energy)) {
    throw ValidationError("sensor_energy_j", "must be finite and >= 0");
  }
  if (s.mode == Mode::OwA && !(s.energy_bound > 0.0)) {
    throw ValidationError("energy_bound_j", "must be > 0 in owa mode");
  }
  if (s.mode == Mode::OwS && !(s.sensor_energy > 0.0)) {
    throw ValidationError("sensor_energy_j", "must be > 0 in ows mode");
  }
}

// ---------------------------------------------------------------------------
// Scenario files
//
// JSON (comments allowed). Units are carried in the key names. Point sets are
// given either explicitly or by a generator:
//
//   "anchors": { "points_m": [[x, y], ...] }
//   "anchors": { "grid": { "x_range_m": [x0, x1], "y_range_m": [y0, y1], "counts": [nx, ny] } }
//   "anchors": { "circle": { "center_m": [x, y], "radius_m": r, "count": n, "phase_rad": p } }
//
// Physics accepts either "mean_square_bandwidth_rad2_per_s2" or
// "angular_bandwidth_hz" (f, giving F^2 = (2 pi f)^2), and either
// "noise_psd_w_per_hz" or "noise_psd_dbw_per_hz". The writer always emits the
// canonical form: explicit points and linear units, fixed key order.
// ---------------------------------------------------------------------------

inline constexpr const char* kScenarioFormat = "anchorplace-scenario/1";

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline const nlohmann::json& require(const nlohmann::json& j, const char* key,
                                     const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(where + ": missing key '" + key + "'");
  return *it;
}

inline double number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

inline Vec2 point(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ParseError(where + ": expected [x, y]");
  return {number(j[0], where), number(j[1], where)};
}

inline std::vector<Vec2> point_set(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  int sources = static_cast<int>(j.contains("points_m")) + static_cast<int>(j.contains("grid")) +
                static_cast<int>(j.contains("circle"));
  if (sources != 1) {
    throw ParseError(where + ": exactly one of 'points_m', 'grid', 'circle' required");
  }
  if (j.contains("points_m")) {
    const auto& arr = j["points_m"];
    if (!arr.is_array()) throw ParseError(where + ".points_m: expected an array");
    std::vector<Vec2> pts;
    pts.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
      pts.push_back(point(arr[i], where + ".points_m[" + std::to_string(i) + "]"));
    }
    return pts;
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    const std::string w = where + ".grid";
    Vec2 xr = point(require(g, "x_range_m", w), w + ".x_range_m");
    Vec2 yr = point(require(g, "y_range_m", w), w + ".y_range_m");
    const auto& counts = require(g, "counts", w);
    if (!counts.is_array() || counts.size() != 2 || !counts[0].is_number_integer() ||
        !counts[1].is_number_integer()) {
      throw ParseError(w + ".counts: expected [nx, ny] integers");
    }
    try {
      return make_grid({xr[0], xr[1], yr[0], yr[1]}, {counts[0].get<int>(), counts[1].get<int>()});
    } catch (const PreconditionError& e) {
      throw ValidationError(w, e.what());
    }
  }
  const auto& c = j["circle"];
  const std::string w = where + ".circle";
  Vec2 center = point(require(c, "center_m", w), w + ".center_m");
  double radius = number(require(c, "radius_m", w), w + ".radius_m");
  const auto& count = require(c, "count", w);
  if (!count.is_number_integer()) throw ParseError(w + ".count: expected an integer");
  double phase = c.contains("phase_rad") ? number(c["phase_rad"], w + ".phase_rad") : 0.0;
  try {
    return make_circle(center, radius, count.get<int>(), phase);
  } catch (const PreconditionError& e) {
    throw ValidationError(w, e.what());
  }
}

inline ordered_json points_json(const std::vector<Vec2>& pts) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : pts) arr.push_back({p.x(), p.y()});
  return arr;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const Scenario& s) {
  using detail::ordered_json;
  ordered_json j;
  j["format"] = kScenarioFormat;
  j["name"] = s.name;
  j["notes"] = s.notes;
  j["mode"] = to_string(s.mode);
  ordered_json physics;
  physics["alpha"] = s.physics.alpha;
  physics["beta"] = s.physics.beta;
  physics["c_m_per_s"] = s.physics.c;
  physics["mean_square_bandwidth_rad2_per_s2"] = s.physics.mean_square_bandwidth;
  physics["noise_psd_w_per_hz"] = s.physics.noise_psd;
  j["physics"] = physics;
  ordered_json accuracy;
  accuracy["radius_m"] = s.accuracy.radius;
  accuracy["probability"] = s.accuracy.probability;
  accuracy["distribution"] = to_string(s.accuracy.distribution);
  j["accuracy"] = accuracy;
  j["energy_bound_j"] = s.energy_bound;
  j["sensor_energy_j"] = s.sensor_energy;
  j["anchors"] = ordered_json{{"points_m", detail::points_json(s.anchor_points)}};
  j["sensors"] = ordered_json{{"points_m", detail::points_json(s.sensor_points)}};
  return j;
}

/// Parses and validates. Throws ParseError or ValidationError.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ParseError("scenario: expected a JSON object");
  if (j.contains("format") && j["format"] != kScenarioFormat) {
    throw ParseError("scenario: unsupported format '" + j["format"].dump() + "'");
  }
  Scenario s;
  if (j.contains("name")) s.name = j["name"].get<std::string>();
  if (j.contains("notes")) s.notes = j["notes"].get<std::string>();

  const auto& mode = require(j, "mode", "scenario");
  if (mode == "owa") {
    s.mode = Mode::OwA;
  } else if (mode == "ows") {
    s.mode = Mode::OwS;
  } else {
    throw ValidationError("mode", "expected \"owa\" or \"ows\"");
  }

  const auto& ph = require(j, "physics", "scenario");
  if (ph.contains("alpha")) s.physics.alpha = number(ph["alpha"], "physics.alpha");
  if (ph.contains("beta")) s.physics.beta = number(ph["beta"], "physics.beta");
  if (ph.contains("c_m_per_s")) s.physics.c = number(ph["c_m_per_s"], "physics.c_m_per_s");
  if (ph.contains("mean_square_bandwidth_rad2_per_s2")) {
    s.physics.mean_square_bandwidth = number(ph["mean_square_bandwidth_rad2_per_s2"],
                                             "physics.mean_square_bandwidth_rad2_per_s2");
  } else if (ph.contains("angular_bandwidth_hz")) {
    const double f = number(ph["angular_bandwidth_hz"], "physics.angular_bandwidth_hz");
    const double omega = 2.0 * std::numbers::pi * f;
    s.physics.mean_square_bandwidth = omega * omega;
  } else {
    throw ParseError("physics: missing 'mean_square_bandwidth_rad2_per_s2' or 'angular_bandwidth_hz'");
  }
  if (ph.contains("noise_psd_w_per_hz")) {
    s.physics.noise_psd = number(ph["noise_psd_w_per_hz"], "physics.noise_psd_w_per_hz");
  } else if (ph.contains("noise_psd_dbw_per_hz")) {
    s.physics.noise_psd =
        std::pow(10.0, number(ph["noise_psd_dbw_per_hz"], "physics.noise_psd_dbw_per_hz") / 10.0);
  } else {
    throw ParseError("physics: missing 'noise_psd_w_per_hz' or 'noise_psd_dbw_per_hz'");
  }

  const auto& acc = require(j, "accuracy", "scenario");
  s.accuracy.radius = number(require(acc, "radius_m", "accuracy"), "accuracy.radius_m");
  s.accuracy.probability = number(require(acc, "probability", "accuracy"), "accuracy.probability");
  const std::string dist = acc.value("distribution", std::string("gaussian"));
  if (dist == "gaussian") {
    s.accuracy.distribution = Distribution::Gaussian;
  } else if (dist == "unknown") {
    s.accuracy.distribution = Distribution::Unknown;
  } else {
    throw ValidationError("accuracy.distribution", "expected \"gaussian\" or \"unknown\"");
  }

  if (j.contains("energy_bound_j")) s.energy_bound = number(j["energy_bound_j"], "energy_bound_j");
  if (j.contains("sensor_energy_j")) s.sensor_energy = number(j["sensor_energy_j"], "sensor_energy_j");

  s.anchor_points = point_set(require(j, "anchors", "scenario"), "anchors");
  s.sensor_points = point_set(require(j, "sensors", "scenario"), "sensors");
  validate(s);
  return s;
}

inline Scenario parse_scenario(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text_file(path));
}

inline std::string dump_scenario(const Scenario& s) { return to_json(s).dump(2) + "\n"; }

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
  out << dump_scenario(s);
}

/// FNV-1a over the canonical serialization, as 16 hex digits.
inline std::string scenario_hash(const Scenario& s) {
  const std::string text = to_json(s).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace anchorplace
