#include "floq/device.hpp"

#include "floq/qop.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace floq::device {

using nlohmann::json;
using qop::kPi;

namespace {

void fail(const std::string& field, const std::string& why) {
  throw std::invalid_argument("device: " + field + ": " + why);
}

double require_number(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) fail(path + "." + key, "missing");
  if (!obj.at(key).is_number()) fail(path + "." + key, "not a number");
  return obj.at(key).get<double>();
}

}  // namespace

void DeviceSpec::validate() const {
  if (qubits.empty()) fail("qubits", "empty");
  if (couplers.size() + 1 != qubits.size()) fail("couplers", "length must be qubits - 1");
  for (size_t i = 0; i < qubits.size(); ++i) {
    const auto& q = qubits[i];
    std::string p = "qubits[" + std::to_string(i) + "]";
    if (q.omega_min_ghz <= 0) fail(p + ".omega_min_ghz", "must be positive");
    if (q.omega_min_ghz > q.omega_idle_ghz) fail(p + ".omega_idle_ghz", "below omega_min_ghz");
    if (q.omega_idle_ghz > q.omega_max_ghz) fail(p + ".omega_idle_ghz", "above omega_max_ghz");
    if (q.t1_us <= 0) fail(p + ".t1_us", "must be positive");
    if (q.t2r_us <= 0) fail(p + ".t2r_us", "must be positive");
    if (q.t2e_us <= 0) fail(p + ".t2e_us", "must be positive");
    if (q.f0 < 0 || q.f0 > 1) fail(p + ".f0", "must be in [0,1]");
    if (q.f1 < 0 || q.f1 > 1) fail(p + ".f1", "must be in [0,1]");
  }
  for (size_t b = 0; b < couplers.size(); ++b) {
    const auto& c = couplers[b];
    std::string p = "couplers[" + std::to_string(b) + "]";
    double adj = std::max(qubits[b].omega_idle_ghz, qubits[b + 1].omega_idle_ghz);
    if (c.omega_max_ghz <= c.omega_idle_ghz) fail(p + ".omega_idle_ghz", "must be below omega_max_ghz");
    if (c.omega_idle_ghz <= adj) fail(p + ".omega_idle_ghz", "must be above adjacent qubit idle frequencies");
    if (c.g_left_mhz <= 0) fail(p + ".g_left_mhz", "must be positive");
    if (c.g_right_mhz <= 0) fail(p + ".g_right_mhz", "must be positive");
  }
}

DriveKind drive_kind_from_string(const std::string& s) {
  if (s == "blue") return DriveKind::blue;
  if (s == "red") return DriveKind::red;
  throw std::invalid_argument("drive_kind_from_string: unknown kind '" + s + "'");
}

std::string to_string(DriveKind k) { return k == DriveKind::blue ? "blue" : "red"; }

void SidebandDrive::validate() const {
  if (amplitude < 0) throw std::invalid_argument("SidebandDrive: amplitude must be >= 0");
  if (amplitude >= kMaxDriveAmplitude)
    throw std::invalid_argument("SidebandDrive: amplitude exceeds the drive guard of 0.25 flux quanta");
  if (t_end_ns <= t_start_ns) throw std::invalid_argument("SidebandDrive: t_end must exceed t_start");
  if (ramp_ns < 0) throw std::invalid_argument("SidebandDrive: ramp must be >= 0");
  if (freq_ghz <= 0) throw std::invalid_argument("SidebandDrive: frequency must be positive");
}

double coupler_frequency(double phi_c, double omega_max_ghz) {
  return omega_max_ghz * std::sqrt(std::fabs(std::cos(kPi * phi_c)));
}

double coupler_flux_slope(double phi_dc, double omega_max_ghz) {
  double c = std::cos(kPi * phi_dc);
  if (std::fabs(c) < 1e-6)
    throw std::domain_error("coupler_flux_slope: bias too close to the zero-frequency point");
  double sgn = c >= 0 ? 1.0 : -1.0;
  return -0.5 * kPi * omega_max_ghz * sgn * std::sin(kPi * phi_dc) / std::sqrt(std::fabs(c));
}

double phi_dc_for_frequency(double omega_idle_ghz, double omega_max_ghz) {
  if (omega_idle_ghz <= 0 || omega_idle_ghz > omega_max_ghz)
    throw std::invalid_argument("phi_dc_for_frequency: idle frequency must be in (0, omega_max]");
  double r = omega_idle_ghz / omega_max_ghz;
  return std::acos(r * r) / kPi;
}

double sideband_strength(DriveKind kind, double amplitude, const DeviceSpec& device, int bond, double phi_dc) {
  if (bond < 0 || bond >= device.n_couplers()) throw std::out_of_range("sideband_strength: bond out of range");
  if (amplitude < 0) throw std::invalid_argument("sideband_strength: amplitude must be >= 0");
  const auto& c = device.couplers[static_cast<size_t>(bond)];
  double f1 = device.qubits[static_cast<size_t>(bond)].omega_idle_ghz;
  double f2 = device.qubits[static_cast<size_t>(bond) + 1].omega_idle_ghz;
  double fc = coupler_frequency(phi_dc, c.omega_max_ghz);
  double eps = 1e-6;
  if (std::fabs(fc - f1) < eps || std::fabs(fc - f2) < eps)
    throw std::domain_error("sideband_strength: coupler resonant with a qubit at this bias");
  double slope = coupler_flux_slope(phi_dc, c.omega_max_ghz);
  double sum = kind == DriveKind::blue
                   ? 1.0 / ((fc - f1) * (fc + f2)) + 1.0 / ((fc + f1) * (fc - f2))
                   : 1.0 / ((fc - f1) * (fc - f2)) + 1.0 / ((fc + f1) * (fc + f2));
  // g_left/g_right are in MHz, frequencies in GHz; the expression is
  // homogeneous, so the result carries the g_left*g_right/1e6 GHz^2 scale.
  double g_ghz = amplitude * (c.g_left_mhz * 1e-3) * (c.g_right_mhz * 1e-3) / 4.0 * slope * sum;
  return std::fabs(g_ghz) * 1e3;  // the drive phase absorbs the sign
}

double amplitude_for_strength(DriveKind kind, double target_g_mhz, const DeviceSpec& device, int bond,
                              double phi_dc) {
  if (target_g_mhz < 0) throw std::invalid_argument("amplitude_for_strength: target must be >= 0");
  if (target_g_mhz == 0) return 0.0;
  double per_unit = sideband_strength(kind, 1.0, device, bond, phi_dc);
  if (per_unit <= 0) throw std::domain_error("amplitude_for_strength: zero response at this bias");
  double amp = target_g_mhz / per_unit;
  if (amp >= kMaxDriveAmplitude)
    throw std::domain_error("amplitude_for_strength: target strength needs amplitude beyond the 0.25 guard");
  return amp;
}

namespace {

DeviceSpec parse_device(const json& j) {
  DeviceSpec dev;
  if (!j.contains("qubits") || !j.at("qubits").is_array()) fail("qubits", "missing array");
  if (!j.contains("couplers") || !j.at("couplers").is_array()) fail("couplers", "missing array");
  size_t qi = 0;
  for (const auto& q : j.at("qubits")) {
    std::string p = "qubits[" + std::to_string(qi++) + "]";
    QubitSpec s;
    s.omega_min_ghz = require_number(q, "omega_min_ghz", p);
    s.omega_max_ghz = require_number(q, "omega_max_ghz", p);
    s.omega_idle_ghz = require_number(q, "omega_idle_ghz", p);
    s.ec_mhz = require_number(q, "ec_mhz", p);
    s.t1_us = require_number(q, "t1_us", p);
    s.t2r_us = require_number(q, "t2r_us", p);
    s.t2e_us = require_number(q, "t2e_us", p);
    s.f0 = require_number(q, "f0", p);
    s.f1 = require_number(q, "f1", p);
    dev.qubits.push_back(s);
  }
  size_t ci = 0;
  for (const auto& c : j.at("couplers")) {
    std::string p = "couplers[" + std::to_string(ci++) + "]";
    CouplerSpec s;
    s.omega_max_ghz = require_number(c, "omega_max_ghz", p);
    s.omega_idle_ghz = require_number(c, "omega_idle_ghz", p);
    s.g_left_mhz = require_number(c, "g_left_mhz", p);
    s.g_right_mhz = require_number(c, "g_right_mhz", p);
    s.j_direct_mhz = require_number(c, "j_direct_mhz", p);
    if (c.contains("ec_mhz")) s.ec_mhz = c.at("ec_mhz").get<double>();
    dev.couplers.push_back(s);
  }
  dev.validate();
  return dev;
}

}  // namespace

DeviceSpec device_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("device_from_json: parse error: ") + e.what());
  }
  return parse_device(j);
}

DeviceSpec load_device(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_device: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return device_from_json(buf.str());
}

std::string default_data_dir() {
  if (const char* env = std::getenv("FLOQ_DATA_DIR"); env && *env) return env;
#ifdef FLOQ_DATA_DIR
  return FLOQ_DATA_DIR;
#else
  return "data";
#endif
}

std::string default_device_path() { return default_data_dir() + "/table_s1.json"; }

}  // namespace floq::device
