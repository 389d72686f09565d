// dynamics.hpp — Lab-frame Hamiltonian assembly and time evolution

#pragma once

#include "floq/device.hpp"
#include "floq/qop.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace floq::dynamics {

// H(t) = static_part + sum_k coeff_k(t) * op_k, all in rad/ns.
struct TimeDependentHamiltonian {
  qop::HilbertSpace space;
  qop::Matrix static_part;
  struct Drive {
    qop::Matrix op;
    std::function<double(double)> coeff;  // t in ns -> dimensionless factor
  };
  std::vector<Drive> drives;
  double max_drive_freq_ghz = 0.0;  // hint for the step-size rule

  bool time_independent() const { return drives.empty(); }
  qop::Matrix sample(double t_ns) const;
};

struct Trajectory {
  std::vector<double> times;  // ns, strictly increasing
  std::vector<qop::QuantumState> states;
  std::string config_hash;
  std::uint64_t seed = 0;

  int n_samples() const { return static_cast<int>(times.size()); }
};

// Largest frequency scale of h in GHz: spectral radius of the static part
// plus the drive-frequency hint. The integrator requires dt <= 1/(20 fmax).
double max_frequency_ghz(const TimeDependentHamiltonian& h);
double suggested_dt(const TimeDependentHamiltonian& h);

// Fixed-step commutator-free fourth-order Magnus integrator; every substep
// is an exact matrix exponential of a Hermitian sample, so each step is
// unitary to machine precision. Time-independent Hamiltonians propagate
// with a single exact step per sample interval.
Trajectory evolve_schrodinger(const TimeDependentHamiltonian& h, const qop::QuantumState& initial, double t_end_ns,
                              double dt_ns, double sample_every_ns);

struct CollapseOp {
  qop::Matrix op;
  double rate_per_ns = 0.0;
};

// Per-qubit amplitude damping (rate 1/T1) and pure dephasing (z operator,
// rate 1/(2 Tphi) with 1/Tphi = 1/T2 - 1/(2 T1)). T2 is the echo time by
// default; set use_t2r to model the Ramsey-limited bias point instead.
// `sites` maps device qubit index -> site in `space`.
std::vector<CollapseOp> collapse_from_device(const device::DeviceSpec& dev, const qop::HilbertSpace& space,
                                             const std::vector<std::pair<int, int>>& sites, bool use_t2r = false);

// Density-matrix evolution under H(t) plus the given collapse channels
// (classical RK4 on the Liouvillian; the Lindblad generator is traceless,
// so the trace is conserved exactly by the linear combination).
Trajectory evolve_lindblad(const TimeDependentHamiltonian& h, const qop::QuantumState& initial,
                           const std::vector<CollapseOp>& collapse, double t_end_ns, double dt_ns,
                           double sample_every_ns);

// ---------------------------------------------------------------------------
// Pulse-level system: a contiguous run of qubits and the couplers between
// them. Sites are ordered qubits first (chain order), couplers after.
// ---------------------------------------------------------------------------
struct LabSystem {
  TimeDependentHamiltonian h;
  device::DeviceSpec device;
  int first_qubit = 0;
  int n_qubits = 0;
  int truncation = 2;
  std::vector<double> phi_dc;  // per included coupler

  int n_couplers() const { return n_qubits - 1; }
  int qubit_site(int local) const { return local; }
  int coupler_site(int local) const { return n_qubits + local; }

  // Static part with each driven coupler's frequency replaced by its mean
  // over the drive phases (used to locate dressed resonances).
  qop::Matrix drive_averaged_static(const std::vector<device::SidebandDrive>& drives) const;
};

// Eq.-of-motion ingredients: qubit terms, qubit-coupler and direct
// qubit-qubit exchange, and one exact flux-modulation term per driven
// coupler (the coupler frequency follows the full nonlinear flux curve, no
// small-amplitude linearization). Pulse edges are raised-cosine ramps.
LabSystem build_lab_hamiltonian(const device::DeviceSpec& dev, const std::vector<device::SidebandDrive>& drives,
                                int truncation, int first_qubit, int n_qubits);

// Qubit-subspace populations: couplers are projected onto their ground
// state and the remainder renormalized; the residual coupler excitation is
// reported alongside.
struct QubitPopulations {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> populations;  // [label][sample]
  std::vector<double> coupler_excitation;        // [sample]
};

QubitPopulations measure_qubit_populations(const Trajectory& traj, const LabSystem& sys);

// Populations of the given basis labels for plain qubit-register spaces.
std::map<std::string, std::vector<double>> measure_populations(const Trajectory& traj,
                                                               const std::vector<std::string>& labels);

// Exact piecewise propagation for a time-independent Hamiltonian: one
// eigendecomposition, samples on a uniform grid.
Trajectory evolve_exact(const qop::Operator& h, const qop::QuantumState& initial, double t_end_ns,
                        double sample_every_ns);

}  // namespace floq::dynamics
