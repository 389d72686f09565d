// device.hpp — Static device model and the drive-amplitude <-> coupling-strength maps

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace floq::device {

// Flux amplitudes are expressed in units of the flux quantum throughout.
// Beyond this amplitude the linear amplitude->strength map is unreliable;
// exceeding it is an error, never a silent clamp.
inline constexpr double kMaxDriveAmplitude = 0.25;

struct QubitSpec {
  double omega_min_ghz = 0.0;
  double omega_max_ghz = 0.0;
  double omega_idle_ghz = 0.0;
  double ec_mhz = 0.0;  // anharmonicity, negative
  double t1_us = 0.0;
  double t2r_us = 0.0;
  double t2e_us = 0.0;
  double f0 = 1.0;  // P(read 0 | prepared 0)
  double f1 = 1.0;  // P(read 1 | prepared 1)
};

struct CouplerSpec {
  double omega_max_ghz = 0.0;
  double omega_idle_ghz = 0.0;
  double g_left_mhz = 100.0;   // qubit-coupler coupling, left neighbor
  double g_right_mhz = 100.0;  // right neighbor
  double j_direct_mhz = 6.0;   // direct qubit-qubit coupling
  double ec_mhz = -240.0;      // used only by the 3-level option
};

struct DeviceSpec {
  std::vector<QubitSpec> qubits;
  std::vector<CouplerSpec> couplers;

  int n_qubits() const { return static_cast<int>(qubits.size()); }
  int n_couplers() const { return static_cast<int>(couplers.size()); }

  // Throws std::invalid_argument naming the offending field on violation.
  void validate() const;
};

enum class DriveKind { blue, red };

DriveKind drive_kind_from_string(const std::string& s);
std::string to_string(DriveKind k);

// One sideband tone on one coupler's flux line.
struct SidebandDrive {
  int bond = 0;
  DriveKind kind = DriveKind::blue;
  double amplitude = 0.0;  // flux, units of the flux quantum
  double freq_ghz = 0.0;
  double phase_rad = 0.0;
  double t_start_ns = 0.0;
  double t_end_ns = 0.0;
  double ramp_ns = 20.0;

  void validate() const;
};

// Coupler frequency vs flux: omega_max * sqrt(|cos(pi * phi)|). Periodic in
// phi with period 1, even in phi.
double coupler_frequency(double phi_c, double omega_max_ghz);

// Analytic d(omega_c)/d(phi) at phi_dc, GHz per flux quantum. Errors within
// 1e-6 of the zero-frequency point.
double coupler_flux_slope(double phi_dc, double omega_max_ghz);

// DC flux that parks the coupler at the requested frequency (principal
// branch, phi in [0, 0.5)).
double phi_dc_for_frequency(double omega_idle_ghz, double omega_max_ghz);

// Engineered pairing/hopping strength for a drive of the given amplitude,
// in MHz. Exactly linear in the amplitude. Uses the adjacent qubit idle
// frequencies and the flux slope at phi_dc.
double sideband_strength(DriveKind kind, double amplitude, const DeviceSpec& device, int bond, double phi_dc);

// Inverse of sideband_strength at fixed bias; errors if the required
// amplitude exceeds kMaxDriveAmplitude.
double amplitude_for_strength(DriveKind kind, double target_g_mhz, const DeviceSpec& device, int bond, double phi_dc);

DeviceSpec device_from_json(const std::string& json_text);
DeviceSpec load_device(const std::string& path);

// Path of the bundled device file (table_s1.json in the data directory).
std::string default_device_path();
std::string default_data_dir();

}  // namespace floq::device
