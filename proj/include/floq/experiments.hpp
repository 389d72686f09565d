// experiments.hpp — Protocols and observables: sideband Rabi, AB interference,
// entangled-state preparation, chain phase calibration, DPT sweeps

#pragma once

#include "floq/device.hpp"
#include "floq/dynamics.hpp"
#include "floq/effective.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace floq::experiments {

// ---------------------------------------------------------------------------
// Readout
// ---------------------------------------------------------------------------
struct ReadoutModel {
  // Column-stochastic per-qubit confusion matrices
  //   [[F0, 1-F1], [1-F0, F1]]  (p_reported = M p_true).
  std::vector<std::array<double, 4>> confusion;  // row-major 2x2 per qubit

  static ReadoutModel from_device(const device::DeviceSpec& dev, int first_qubit, int n_qubits);
  static ReadoutModel ideal(int n_qubits);
  int n_qubits() const { return static_cast<int>(confusion.size()); }
};

// Applies the tensored confusion map to a probability vector over the full
// computational basis (size 2^n). Exactly linear, preserves the simplex.
std::vector<double> apply_readout_error(const std::vector<double>& populations, const ReadoutModel& model);

// ---------------------------------------------------------------------------
// Gates
// ---------------------------------------------------------------------------
// sqrt(iSWAP): |01> -> (|01> + i|10>)/sqrt(2); squares to iSWAP.
qop::Matrix sqrt_iswap();
qop::Matrix x_gate();

// ---------------------------------------------------------------------------
// Entangled-state preparation: X/sqrt(iSWAP) circuit producing
// (|110> + |011>)/sqrt(2) exactly after fixed virtual-Z corrections.
// ---------------------------------------------------------------------------
struct PrepOptions {
  bool noisy = false;
  std::optional<device::DeviceSpec> dev;  // required when noisy
  double gate_x_ns = 30.0;
  double gate_sqrt_iswap_ns = 1000.0 / (8.0 * 0.75);  // 1/(8g) at g = 0.75 MHz
  bool use_t2r = false;
};

struct PrepResult {
  qop::QuantumState state;           // circuit output (pure or mixed)
  double fidelity_target = 0.0;      // to (|110>+|011>)/sqrt(2)
  double fidelity_bell_step = 0.0;   // intermediate (|10>+|01>)/sqrt(2) on Q1,Q2
  double total_duration_ns = 0.0;
};

PrepResult prepare_entangled_state(const PrepOptions& opts = {});
qop::QuantumState entangled_target_state();

// ---------------------------------------------------------------------------
// Sideband Rabi
// ---------------------------------------------------------------------------
enum class RabiMode { effective, full };

struct RabiParams {
  int bond = 0;
  device::DriveKind kind = device::DriveKind::blue;
  double g_mhz = 0.75;
  double duration_ns = 1000.0;
  double sample_every_ns = 2.0;
  RabiMode mode = RabiMode::effective;
  double ramp_ns = 20.0;
};

struct RabiResult {
  std::vector<double> times;
  std::vector<std::string> labels;               // "00", "01", "10", "11"
  std::vector<std::vector<double>> populations;  // [label][sample]
  std::vector<double> coupler_excitation;        // full mode only
  double amplitude_phi0 = 0.0;
  double drive_freq_ghz = 0.0;
  int calibration_iterations = 0;
};

RabiResult run_sideband_rabi(const device::DeviceSpec& dev, const RabiParams& params);

// Drive calibration against short probe evolutions of the pulse-level model,
// the way the hardware map is measured: the analytic amplitude map carries a
// drive-amplitude convention factor and loses accuracy at the excursions the
// target strengths require, and the bare transition frequency is displaced
// by the static and drive-induced dressing. The drive frequency starts from
// the dressed transition of the drive-averaged Hamiltonian and is refined by
// contrast; the oscillation rate comes from a least-squares sinusoid fit.
struct DriveCalibration {
  double amplitude_phi0 = 0.0;
  double freq_ghz = 0.0;
  double rate_mhz = 0.0;  // fitted on-resonance oscillation rate (2g)
  double contrast = 0.0;
  int iterations = 0;
};

// Frequency-only calibration at a fixed amplitude.
DriveCalibration calibrate_drive_frequency(const device::DeviceSpec& dev, int bond, device::DriveKind kind,
                                           double amplitude_phi0, double ramp_ns = 20.0, double probe_ns = 780.0);

// Amplitude + frequency calibration to a target strength g (rate 2g). The
// analytic linear amplitude map seeds the iteration.
DriveCalibration calibrate_drive(const device::DeviceSpec& dev, int bond, device::DriveKind kind, double g_mhz,
                                 double ramp_ns = 20.0, double probe_ns = 780.0);

// ---------------------------------------------------------------------------
// Aharonov-Bohm interference on a three-qubit trimer
// ---------------------------------------------------------------------------
enum class SweptPhase { phi_blue_12, phi_red_12, phi_blue_23, phi_red_23, quad };

SweptPhase swept_phase_from_string(const std::string& s);
std::string to_string(SweptPhase p);

enum class AbInitial { ground, entangled };

struct AbParams {
  double g_mhz = 0.75;
  SweptPhase swept = SweptPhase::phi_blue_12;
  std::vector<double> grid;  // phase values, rad
  // Base phases applied before the sweep value (the swept one is replaced).
  std::array<double, 4> base_phases{0.0, 0.0, 0.0, 0.0};  // b12, r12, b23, r23
  AbInitial initial = AbInitial::ground;
  double duration_ns = 1000.0;
  double sample_every_ns = 4.0;
  // Unequal pairing/hopping strengths break the interference pattern and
  // are rejected unless explicitly overridden.
  std::optional<std::array<double, 4>> strengths_mhz;  // gb12, gr12, gb23, gr23
  bool allow_unequal = false;
  bool noisy = false;
  bool readout = false;
  std::optional<device::DeviceSpec> dev;  // required for noisy/readout
  int threads = 1;
};

struct AbResult {
  std::vector<double> grid;
  std::vector<double> times;
  std::vector<std::string> labels;  // the four loop states 000, 011, 101, 110
  // populations[point][label][sample]
  std::vector<std::vector<std::vector<double>>> populations;
  std::vector<double> loop_flux;  // per grid point
};

AbResult run_ab_interference(const AbParams& params);

// Chain config realizing one sweep point (exposed for tests).
effective::ChainConfig ab_chain_config(const AbParams& params, double phase_value);

// ---------------------------------------------------------------------------
// Loop-phase calibration for the six-qubit chain (triples Q1Q2Q3 .. Q4Q5Q6,
// tuning the blue phases of bonds 1-2, 3-4, 4-5, 5-6). The calibrator sees
// only population data from sweeps of its tuned phase.
// ---------------------------------------------------------------------------
struct CalibrationOptions {
  double g_mhz = 0.75;
  int sweep_points = 16;
  double probe_time_ns = 0.0;  // 0: first constructive peak, 1/(4g)
  double fit_min_amplitude = 0.02;
};

struct TripleFit {
  int triple = 0;
  int tuned_bond = 0;
  double corrected_phase = 0.0;
  double fit_amplitude = 0.0;
  bool ok = true;
  std::string error;
};

struct CalibrationResult {
  std::vector<TripleFit> fits;
  std::vector<double> residual_flux;     // per triple, after correction
  effective::ChainConfig corrected;      // true chain with corrections applied
  effective::ChainConfig aligned;        // corrected chain in the XX-aligned frame
  std::vector<double> frame_thetas;      // per-qubit frame angles
  bool converged = true;
};

CalibrationResult calibrate_loop_phases(const effective::ChainConfig& true_chain,
                                        const CalibrationOptions& opts = {});

// Frame angles making bond 0 exactly XX and zeroing subsequent blue phases;
// residual loop fluxes then appear on the red phases.
std::vector<double> xx_frame_thetas(const effective::ChainConfig& chain);

// ---------------------------------------------------------------------------
// DPT observables
// ---------------------------------------------------------------------------

// Time-averaged two-point zz correlation over [0, horizon]:
//   (1/T) int sum_{i != j} <z_i z_j> / N^2 dt   (trapezoid on the samples).
double czz_correlation(const dynamics::Trajectory& traj, double horizon_ns);

// L(t) = |<psi0| e^{-iHt} |psi0>|^2 via eigendecomposition.
std::vector<double> loschmidt_echo(const qop::Operator& h, const qop::QuantumState& initial,
                                   const std::vector<double>& times_ns);

struct RateSeries {
  std::vector<double> values;
  std::vector<bool> clamped;  // true where L fell below the floor
  static constexpr double kFloor = 1e-12;
};

RateSeries rate_function(const std::vector<double>& loschmidt, int n);

struct FirstMinimum {
  double time_ns = 0.0;
  double value = 0.0;
  bool is_local = true;  // false: no interior minimum, global minimum returned
};

// First interior sample that is <= both neighbors after moving-average
// smoothing (window default 3); the reported value is taken from the raw
// series at that index.
FirstMinimum first_minimum(const std::vector<double>& series, const std::vector<double>& times_ns, int window = 3);

// ---------------------------------------------------------------------------
// DPT sweep
// ---------------------------------------------------------------------------
enum class DptSource { effective, ising };

struct DptParams {
  int n_qubits = 6;
  double j_mhz = 0.75;
  std::vector<double> bz_over_j;
  double horizon_ns = 500.0;
  double sample_every_ns = 2.0;
  DptSource source = DptSource::effective;
  bool noisy = false;
  bool readout = false;
  std::optional<device::DeviceSpec> dev;  // required for noisy/readout
  int threads = 1;
};

struct DptResult {
  std::vector<double> bz_over_j;
  std::vector<double> times;
  std::vector<double> czz;
  std::vector<std::vector<double>> loschmidt;  // [point][sample]
  std::vector<std::vector<double>> rate;       // [point][sample]
  std::vector<double> first_min;
  std::vector<double> first_min_time_ns;
};

DptResult run_dpt_sweep(const DptParams& params);

// Deterministic order-independent parallel loop used by the sweeps.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace floq::experiments
