// effective.hpp — Floquet effective Hamiltonians, anisotropy decomposition, loop flux

#pragma once

#include "floq/qop.hpp"

#include <vector>

namespace floq::effective {

// Wrap an angle into the canonical interval (-pi, pi].
double canonical_phase(double phi);

// Engineered interaction on one bond. The bond Hamiltonian is
//   g_b e^{-i phi_b} s+ s+  +  g_r e^{-i phi_r} s+ s-  + h.c.
// with the lower-index qubit carrying the raising operator in both terms.
// All phase arithmetic in this module derives from that convention.
struct EffectiveCoupling {
  int bond = 0;
  double g_blue_mhz = 0.0;
  double phi_blue_rad = 0.0;
  double g_red_mhz = 0.0;
  double phi_red_rad = 0.0;

  EffectiveCoupling() = default;
  EffectiveCoupling(int bond_, double g_blue, double phi_blue, double g_red, double phi_red);
};

struct ChainConfig {
  int n_qubits = 2;
  std::vector<EffectiveCoupling> couplings;  // length n_qubits - 1
  double detuning_blue_mhz = 0.0;            // common blue-drive detuning

  static ChainConfig uniform(int n_qubits, double g_mhz, double detuning_blue_mhz = 0.0);
  void validate() const;
};

// 4x4 bond Hamiltonian (energies in rad/ns).
qop::Operator effective_pair_hamiltonian(const EffectiveCoupling& c);

// Detuned chain Hamiltonian: sum_i (detuning/4) z_i + bond terms.
qop::Operator effective_chain_hamiltonian(const ChainConfig& cfg);

// Open-boundary transverse-field Ising chain: sum J x_i x_{i+1} + sum Bz z_i.
qop::Operator ising_hamiltonian(int n, double j_mhz, double bz_mhz);

struct AnisotropyCoefficients {
  double jxx_mhz = 0.0;
  double jyy_mhz = 0.0;
  double jxy_mhz = 0.0;
  double jyx_mhz = 0.0;
};

// Unique real coefficients with
//   H_bond = jxx XX + jyy YY + jxy XY + jyx YX   (MHz).
AnisotropyCoefficients anisotropy_decompose(const EffectiveCoupling& c);

// The gauge-invariant interference phase of the synthetic four-state loop
// spanned by two adjacent bonds:
//   Phi = phi_r(a) + phi_b(b) + phi_r(b) - phi_b(a),
// canonical in (-pi, pi]. Local frame rotations s+_j -> e^{i theta_j} s+_j
// shift the individual phases but leave Phi unchanged.
double loop_flux(const EffectiveCoupling& c12, const EffectiveCoupling& c23);

// Apply a local frame rotation theta_j per qubit to every bond phase:
// phi_b -> phi_b - (theta_i + theta_{i+1}), phi_r -> phi_r - (theta_i - theta_{i+1}).
ChainConfig gauge_shift(const ChainConfig& cfg, const std::vector<double>& thetas);

}  // namespace floq::effective
