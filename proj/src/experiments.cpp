#include "floq/experiments.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace floq::experiments {

using device::DeviceSpec;
using device::DriveKind;
using device::SidebandDrive;
using dynamics::LabSystem;
using dynamics::Trajectory;
using effective::ChainConfig;
using effective::EffectiveCoupling;
using qop::Complex;
using qop::HilbertSpace;
using qop::Matrix;
using qop::Operator;
using qop::QuantumState;
using qop::Vector;

// ---------------------------------------------------------------------------
// Readout
// ---------------------------------------------------------------------------

ReadoutModel ReadoutModel::from_device(const DeviceSpec& dev, int first_qubit, int n_qubits) {
  if (first_qubit < 0 || first_qubit + n_qubits > dev.n_qubits())
    throw std::out_of_range("ReadoutModel::from_device: qubit range out of bounds");
  ReadoutModel m;
  for (int q = 0; q < n_qubits; ++q) {
    const auto& spec = dev.qubits[static_cast<size_t>(first_qubit + q)];
    m.confusion.push_back({spec.f0, 1.0 - spec.f1, 1.0 - spec.f0, spec.f1});
  }
  return m;
}

ReadoutModel ReadoutModel::ideal(int n_qubits) {
  ReadoutModel m;
  for (int q = 0; q < n_qubits; ++q) m.confusion.push_back({1.0, 0.0, 0.0, 1.0});
  return m;
}

std::vector<double> apply_readout_error(const std::vector<double>& populations, const ReadoutModel& model) {
  int n = model.n_qubits();
  size_t dim = size_t{1} << n;
  if (populations.size() != dim) throw std::invalid_argument("apply_readout_error: basis size mismatch");
  std::vector<double> p = populations;
  std::vector<double> next(dim);
  // Contract one qubit axis at a time (site 0 is the most significant bit).
  for (int q = 0; q < n; ++q) {
    const auto& m = model.confusion[static_cast<size_t>(q)];
    size_t stride = size_t{1} << (n - 1 - q);
    for (size_t idx = 0; idx < dim; ++idx) {
      bool bit = (idx / stride) % 2 != 0;
      size_t partner = bit ? idx - stride : idx + stride;
      double p0 = bit ? p[partner] : p[idx];
      double p1 = bit ? p[idx] : p[partner];
      next[idx] = bit ? (m[2] * p0 + m[3] * p1) : (m[0] * p0 + m[1] * p1);
    }
    std::swap(p, next);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Gates
// ---------------------------------------------------------------------------

Matrix sqrt_iswap() {
  // exp(+i (pi/4) (XX + YY)/2): acts on span{|01>,|10>} as a quarter swap.
  Matrix u = Matrix::Identity(4, 4);
  const double r = 1.0 / std::sqrt(2.0);
  u(1, 1) = r;
  u(2, 2) = r;
  u(1, 2) = Complex(0.0, 1.0) * r;
  u(2, 1) = Complex(0.0, 1.0) * r;
  return u;
}

Matrix x_gate() {
  Matrix x(2, 2);
  x << 0, 1, 1, 0;
  return x;
}

// ---------------------------------------------------------------------------
// Entangled-state preparation
// ---------------------------------------------------------------------------

QuantumState entangled_target_state() {
  HilbertSpace space = HilbertSpace::qubits(3);
  Vector psi = Vector::Zero(8);
  const double r = 1.0 / std::sqrt(2.0);
  psi(space.basis_index("110")) = r;
  psi(space.basis_index("011")) = r;
  return QuantumState::pure(space, psi);
}

namespace {

Matrix embed_gate(const Matrix& gate, const std::vector<int>& sites, const HilbertSpace& space) {
  // Gate on consecutive qubit sites; general-position embedding is not needed here.
  Matrix full = Matrix::Identity(1, 1);
  int s = 0;
  while (s < space.num_sites()) {
    if (!sites.empty() && s == sites.front()) {
      full = qop::kron(full, gate);
      s += static_cast<int>(sites.size());
    } else {
      full = qop::kron(full, Matrix::Identity(2, 2));
      s += 1;
    }
  }
  return full;
}

Matrix virtual_z(double lambda, int site, const HilbertSpace& space) {
  Matrix local = Matrix::Identity(2, 2);
  local(1, 1) = std::exp(Complex(0.0, lambda));
  return embed_gate(local, {site}, space);
}

}  // namespace

PrepResult prepare_entangled_state(const PrepOptions& opts) {
  HilbertSpace space = HilbertSpace::qubits(3);
  if (opts.noisy && !opts.dev) throw std::invalid_argument("prepare_entangled_state: noisy mode needs a device");

  struct Slot {
    Matrix u;
    double duration;
  };
  std::vector<Slot> slots;
  slots.push_back({embed_gate(x_gate(), {0}, space), opts.gate_x_ns});
  slots.push_back({embed_gate(sqrt_iswap(), {0, 1}, space), opts.gate_sqrt_iswap_ns});
  Matrix iswap = sqrt_iswap() * sqrt_iswap();
  slots.push_back({embed_gate(iswap, {1, 2}, space), 2.0 * opts.gate_sqrt_iswap_ns});
  slots.push_back({embed_gate(x_gate(), {1}, space), opts.gate_x_ns});
  // Frame correction making the output phase-free: Z(Q1, pi).
  slots.push_back({virtual_z(qop::kPi, 0, space), 0.0});

  PrepResult out{QuantumState::basis(space, "000"), 0.0, 0.0, 0.0};

  // Bell-step bookkeeping: state after the first two slots, frame-corrected
  // by Z(Q1, pi/2), compared against (|100> + |010>)/sqrt(2).
  Vector bell_target = Vector::Zero(8);
  bell_target(space.basis_index("100")) = 1.0 / std::sqrt(2.0);
  bell_target(space.basis_index("010")) = 1.0 / std::sqrt(2.0);
  QuantumState bell_ref = QuantumState::pure(space, bell_target);
  Matrix bell_vz = virtual_z(0.5 * qop::kPi, 0, space);

  if (!opts.noisy) {
    QuantumState st = out.state;
    for (size_t k = 0; k < slots.size(); ++k) {
      st = qop::apply(Operator(space, slots[k].u), st);
      out.total_duration_ns += slots[k].duration;
      if (k == 1) out.fidelity_bell_step = qop::fidelity(qop::apply(Operator(space, bell_vz), st), bell_ref);
    }
    out.state = st;
    out.fidelity_target = qop::fidelity(st, entangled_target_state());
    return out;
  }

  auto collapse = dynamics::collapse_from_device(*opts.dev, space, {{0, 0}, {1, 1}, {2, 2}}, opts.use_t2r);
  dynamics::TimeDependentHamiltonian idle;
  idle.space = space;
  idle.static_part = Matrix::Zero(8, 8);

  QuantumState st = QuantumState::mixed(space, out.state.as_density_matrix());
  for (size_t k = 0; k < slots.size(); ++k) {
    st = qop::apply(Operator(space, slots[k].u), st);
    if (slots[k].duration > 0) {
      Trajectory tr = dynamics::evolve_lindblad(idle, st, collapse, slots[k].duration, 0.5, slots[k].duration);
      st = tr.states.back();
      out.total_duration_ns += slots[k].duration;
    }
    if (k == 1) out.fidelity_bell_step = qop::fidelity(qop::apply(Operator(space, bell_vz), st), bell_ref);
  }
  out.state = st;
  out.fidelity_target = qop::fidelity(st, entangled_target_state());
  return out;
}

// ---------------------------------------------------------------------------
// Sideband Rabi
// ---------------------------------------------------------------------------

namespace {

struct RabiFit {
  double omega = 0.0;     // rad/ns, oscillation angular frequency
  double contrast = 0.0;  // fitted amplitude
};

// Least-squares fit of y(x) ~ C sin^2(Omega x / 2) = C/2 - (C/2) cos(Omega x).
// For fixed Omega the problem is linear; Omega is scanned then refined.
RabiFit fit_rabi(const std::vector<double>& x, const std::vector<double>& y, double omega_guess) {
  auto residual = [&](double om, double* c_out) {
    double sc = 0, scc = 0, sy = 0, syc = 0, n = static_cast<double>(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      double c = std::cos(om * x[i]);
      sc += c;
      scc += c * c;
      sy += y[i];
      syc += y[i] * c;
    }
    double det = n * scc - sc * sc;
    double a = det != 0 ? (sy * scc - syc * sc) / det : 0.0;
    double b = det != 0 ? (n * syc - sy * sc) / det : 0.0;
    double r = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      double e = y[i] - (a + b * std::cos(om * x[i]));
      r += e * e;
    }
    if (c_out) *c_out = a - b;  // C/2 - (-C/2)
    return r;
  };
  double best_om = omega_guess, best_r = residual(omega_guess, nullptr);
  for (int i = 0; i <= 400; ++i) {
    double om = omega_guess * 0.15 * std::pow(6.0 / 0.15, i / 400.0);
    double r = residual(om, nullptr);
    if (r < best_r) {
      best_r = r;
      best_om = om;
    }
  }
  // Golden-section refinement.
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = best_om * 0.97, hi = best_om * 1.03;
  double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
  double r1 = residual(m1, nullptr), r2 = residual(m2, nullptr);
  for (int it = 0; it < 60; ++it) {
    if (r1 < r2) {
      hi = m2;
      m2 = m1;
      r2 = r1;
      m1 = hi - gr * (hi - lo);
      r1 = residual(m1, nullptr);
    } else {
      lo = m1;
      m1 = m2;
      r1 = r2;
      m2 = lo + gr * (hi - lo);
      r2 = residual(m2, nullptr);
    }
  }
  RabiFit fit;
  fit.omega = 0.5 * (lo + hi);
  residual(fit.omega, &fit.contrast);
  return fit;
}

// Envelope-time coordinate of a raised-cosine window [0, T] with edges `ramp`:
// the integral of the envelope up to t.
double envelope_time(double t, double t_end, double ramp) {
  if (ramp <= 0) return std::min(t, t_end);
  if (t <= 0) return 0.0;
  if (t < ramp) return 0.5 * (t - (ramp / qop::kPi) * std::sin(qop::kPi * t / ramp));
  if (t <= t_end - ramp) return t - 0.5 * ramp;
  double tail = t_end - std::min(t, t_end);
  return (t_end - ramp) - 0.5 * (tail - (ramp / qop::kPi) * std::sin(qop::kPi * tail / ramp));
}

struct DressedPair {
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  int k_init = 0, k_target = 0;
  double gap_ghz = 0.0;
};

DressedPair dressed_transition(const LabSystem& sys, const std::vector<SidebandDrive>& drives, int idx_init,
                               int idx_target) {
  DressedPair d;
  d.es.compute(sys.drive_averaged_static(drives));
  double b_init = 0, b_target = 0;
  for (int k = 0; k < sys.h.space.dimension(); ++k) {
    double oi = std::norm(d.es.eigenvectors()(idx_init, k));
    double ot = std::norm(d.es.eigenvectors()(idx_target, k));
    if (oi > b_init) {
      b_init = oi;
      d.k_init = k;
    }
    if (ot > b_target) {
      b_target = ot;
      d.k_target = k;
    }
  }
  d.gap_ghz = std::fabs(d.es.eigenvalues()(d.k_target) - d.es.eigenvalues()(d.k_init)) / qop::kTwoPi;
  return d;
}

}  // namespace

namespace {

struct ProbeSetup {
  const DeviceSpec& dev;
  int bond;
  DriveKind kind;
  double ramp_ns;
  HilbertSpace lab_space;
  int idx_init, idx_target;

  ProbeSetup(const DeviceSpec& d, int b, DriveKind k, double ramp)
      : dev(d), bond(b), kind(k), ramp_ns(ramp),
        lab_space(dynamics::build_lab_hamiltonian(d, {}, 2, b, 2).h.space) {
    bool blue = kind == DriveKind::blue;
    idx_init = lab_space.basis_index(blue ? std::vector<int>{0, 0, 0} : std::vector<int>{1, 0, 0});
    idx_target = lab_space.basis_index(blue ? std::vector<int>{1, 1, 0} : std::vector<int>{0, 1, 0});
  }

  double dressed_gap(double amplitude) const {
    SidebandDrive d{bond, kind, amplitude, 1.0, 0.0, 0.0, 100.0, ramp_ns};
    LabSystem sys = dynamics::build_lab_hamiltonian(dev, {d}, 2, bond, 2);
    return dressed_transition(sys, {d}, idx_init, idx_target).gap_ghz;
  }

  // Evolve for `duration` and fit the dressed target population against the
  // envelope-time coordinate.
  RabiFit probe(double amplitude, double freq_ghz, double duration, double rate_guess) const {
    SidebandDrive drive{bond, kind, amplitude, freq_ghz, 0.0, 0.0, duration, ramp_ns};
    LabSystem sys = dynamics::build_lab_hamiltonian(dev, {drive}, 2, bond, 2);
    QuantumState psi0 = QuantumState::pure(lab_space, Vector::Unit(lab_space.dimension(), idx_init));
    Trajectory tr = dynamics::evolve_schrodinger(sys.h, psi0, duration, dynamics::suggested_dt(sys.h), 2.0);
    DressedPair d = dressed_transition(sys, {drive}, idx_init, idx_target);
    std::vector<double> x, y;
    for (int s = 0; s < tr.n_samples(); ++s) {
      x.push_back(envelope_time(tr.times[static_cast<size_t>(s)], duration, ramp_ns));
      Complex ov = (d.es.eigenvectors().col(d.k_target).adjoint() * tr.states[static_cast<size_t>(s)].vector())(0, 0);
      y.push_back(std::norm(ov));
    }
    return fit_rabi(x, y, rate_guess);
  }

  // Contrast-guided frequency refinement around the dressed estimate.
  double refine_frequency(double amplitude, double freq0, double probe_ns, double rate_guess, RabiFit& fit,
                          int& iterations) const {
    double freq = freq0;
    fit = probe(amplitude, freq, probe_ns, rate_guess);
    ++iterations;
    for (int round = 0; round < 3 && fit.contrast < 0.999; ++round) {
      double detune = fit.omega * std::sqrt(std::max(0.0, 1.0 - fit.contrast));
      if (detune <= 0) break;
      double best_freq = freq;
      RabiFit best = fit;
      for (double sgn : {1.0, -1.0}) {
        double cand = freq + sgn * detune / qop::kTwoPi;
        RabiFit f2 = probe(amplitude, cand, probe_ns, rate_guess);
        ++iterations;
        if (f2.contrast > best.contrast) {
          best = f2;
          best_freq = cand;
        }
      }
      if (best_freq == freq) break;
      freq = best_freq;
      fit = best;
    }
    return freq;
  }
};

}  // namespace

DriveCalibration calibrate_drive_frequency(const DeviceSpec& dev, int bond, DriveKind kind, double amplitude_phi0,
                                           double ramp_ns, double probe_ns) {
  ProbeSetup setup(dev, bond, kind, ramp_ns);
  DriveCalibration cal;
  cal.amplitude_phi0 = amplitude_phi0;
  double guess = qop::kTwoPi / probe_ns;  // about one period across the probe window
  RabiFit fit;
  cal.freq_ghz = setup.refine_frequency(amplitude_phi0, setup.dressed_gap(amplitude_phi0), probe_ns,
                                        guess, fit, cal.iterations);
  cal.rate_mhz = fit.omega * std::sqrt(std::clamp(fit.contrast, 0.0, 1.0)) / (qop::kTwoPi * 1e-3);
  cal.contrast = fit.contrast;
  return cal;
}

DriveCalibration calibrate_drive(const DeviceSpec& dev, int bond, DriveKind kind, double g_mhz, double ramp_ns,
                                 double probe_ns) {
  if (g_mhz <= 0) throw std::invalid_argument("calibrate_drive: target strength must be positive");
  ProbeSetup setup(dev, bond, kind, ramp_ns);

  const auto& coupler = dev.couplers[static_cast<size_t>(bond)];
  double phi_dc = device::phi_dc_for_frequency(coupler.omega_idle_ghz, coupler.omega_max_ghz);
  double amp;
  try {
    amp = device::amplitude_for_strength(kind, g_mhz, dev, bond, phi_dc);
  } catch (const std::domain_error&) {
    amp = 0.9 * device::kMaxDriveAmplitude;
  }
  amp = std::min(amp, 0.9 * device::kMaxDriveAmplitude);

  double target = qop::mhz_to_rad_ns(2.0 * g_mhz);
  double f_offset = 0.0;
  double prev_amp = 0.0, prev_rate = 0.0;

  DriveCalibration cal;
  for (int it = 0; it < 8; ++it) {
    RabiFit fit;
    double freq0 = setup.dressed_gap(amp) + f_offset;
    double freq = setup.refine_frequency(amp, freq0, probe_ns, target, fit, cal.iterations);
    f_offset = freq - setup.dressed_gap(amp);

    double rate = fit.omega * std::sqrt(std::clamp(fit.contrast, 0.0, 1.0));
    cal.amplitude_phi0 = amp;
    cal.freq_ghz = freq;
    cal.rate_mhz = rate / (qop::kTwoPi * 1e-3);
    cal.contrast = fit.contrast;
    if (std::fabs(rate - target) <= 5e-4 * target && fit.contrast >= 0.999) break;

    double next;
    if (prev_rate > 0 && std::fabs(rate - prev_rate) > 1e-12) {
      next = amp + (target - rate) * (amp - prev_amp) / (rate - prev_rate);
      if (next <= 0 || next >= device::kMaxDriveAmplitude) next = amp * target / rate;
    } else {
      next = amp * target / rate;
    }
    prev_amp = amp;
    prev_rate = rate;
    double scale = std::min(next, 0.98 * device::kMaxDriveAmplitude) / amp;
    amp *= scale;
    f_offset *= scale * scale;  // residual dressing shift scales with amplitude^2
  }
  return cal;
}

RabiResult run_sideband_rabi(const DeviceSpec& dev, const RabiParams& params) {
  if (params.bond < 0 || params.bond >= dev.n_couplers()) throw std::out_of_range("run_sideband_rabi: bond out of range");
  if (params.g_mhz < 0) throw std::invalid_argument("run_sideband_rabi: strength must be >= 0");

  RabiResult out;
  out.labels = {"00", "01", "10", "11"};
  bool blue = params.kind == DriveKind::blue;
  std::string initial_label = blue ? "00" : "10";

  if (params.mode == RabiMode::effective) {
    EffectiveCoupling c(0, blue ? params.g_mhz : 0.0, 0.0, blue ? 0.0 : params.g_mhz, 0.0);
    Operator h = effective::effective_pair_hamiltonian(c);
    QuantumState psi0 = QuantumState::basis(h.space, initial_label);
    Trajectory traj = dynamics::evolve_exact(h, psi0, params.duration_ns, params.sample_every_ns);
    out.times = traj.times;
    auto pops = dynamics::measure_populations(traj, out.labels);
    for (const auto& l : out.labels) out.populations.push_back(pops.at(l));
    return out;
  }

  if (params.g_mhz == 0)
    throw std::invalid_argument("run_sideband_rabi: full mode needs a positive target strength");
  DriveCalibration cal = calibrate_drive(dev, params.bond, params.kind, params.g_mhz, params.ramp_ns);

  SidebandDrive drive{params.bond, params.kind, cal.amplitude_phi0, cal.freq_ghz, 0.0, 0.0, params.duration_ns,
                      params.ramp_ns};
  LabSystem sys = dynamics::build_lab_hamiltonian(dev, {drive}, 2, params.bond, 2);
  int idx_init = sys.h.space.basis_index(blue ? std::vector<int>{0, 0, 0} : std::vector<int>{1, 0, 0});
  QuantumState psi0 = QuantumState::pure(sys.h.space, Vector::Unit(sys.h.space.dimension(), idx_init));
  Trajectory traj = dynamics::evolve_schrodinger(sys.h, psi0, params.duration_ns, dynamics::suggested_dt(sys.h),
                                                 params.sample_every_ns);
  dynamics::QubitPopulations qp = dynamics::measure_qubit_populations(traj, sys);
  out.times = traj.times;
  out.coupler_excitation = qp.coupler_excitation;
  for (const auto& l : out.labels) {
    auto it = std::find(qp.labels.begin(), qp.labels.end(), l);
    out.populations.push_back(qp.populations[static_cast<size_t>(it - qp.labels.begin())]);
  }
  out.amplitude_phi0 = cal.amplitude_phi0;
  out.drive_freq_ghz = cal.freq_ghz;
  out.calibration_iterations = cal.iterations;
  return out;
}

// ---------------------------------------------------------------------------
// AB interference
// ---------------------------------------------------------------------------

SweptPhase swept_phase_from_string(const std::string& s) {
  if (s == "phi_blue_12") return SweptPhase::phi_blue_12;
  if (s == "phi_red_12") return SweptPhase::phi_red_12;
  if (s == "phi_blue_23") return SweptPhase::phi_blue_23;
  if (s == "phi_red_23") return SweptPhase::phi_red_23;
  if (s == "quad") return SweptPhase::quad;
  throw std::invalid_argument("swept_phase_from_string: unknown phase '" + s + "'");
}

std::string to_string(SweptPhase p) {
  switch (p) {
    case SweptPhase::phi_blue_12: return "phi_blue_12";
    case SweptPhase::phi_red_12: return "phi_red_12";
    case SweptPhase::phi_blue_23: return "phi_blue_23";
    case SweptPhase::phi_red_23: return "phi_red_23";
    case SweptPhase::quad: return "quad";
  }
  return "?";
}

ChainConfig ab_chain_config(const AbParams& params, double p) {
  std::array<double, 4> g{params.g_mhz, params.g_mhz, params.g_mhz, params.g_mhz};
  if (params.strengths_mhz) {
    g = *params.strengths_mhz;
    bool equal = true;
    for (double v : g)
      if (std::fabs(v - g[0]) > 1e-12) equal = false;
    if (!equal && !params.allow_unequal)
      throw std::invalid_argument("run_ab_interference: unequal strengths need allow_unequal");
  }
  std::array<double, 4> phi = params.base_phases;  // b12, r12, b23, r23
  switch (params.swept) {
    case SweptPhase::phi_blue_12: phi[0] = p; break;
    case SweptPhase::phi_red_12: phi[1] = p; break;
    case SweptPhase::phi_blue_23: phi[2] = p; break;
    case SweptPhase::phi_red_23: phi[3] = p; break;
    case SweptPhase::quad:
      phi[0] = p;   // blue 12
      phi[3] = p;   // red 23
      phi[1] = -p;  // red 12
      phi[2] = -p;  // blue 23
      break;
  }
  ChainConfig cfg;
  cfg.n_qubits = 3;
  cfg.couplings.emplace_back(0, g[0], phi[0], g[1], phi[1]);
  cfg.couplings.emplace_back(1, g[2], phi[2], g[3], phi[3]);
  return cfg;
}

AbResult run_ab_interference(const AbParams& params) {
  if (params.grid.empty()) throw std::invalid_argument("run_ab_interference: empty grid");
  if ((params.noisy || params.readout) && !params.dev)
    throw std::invalid_argument("run_ab_interference: noisy/readout mode needs a device");

  AbResult out;
  out.grid = params.grid;
  out.labels = {"000", "011", "101", "110"};
  out.populations.resize(params.grid.size());
  out.loop_flux.resize(params.grid.size());

  HilbertSpace space = HilbertSpace::qubits(3);
  QuantumState psi0 = params.initial == AbInitial::ground ? QuantumState::basis(space, "000")
                                                          : entangled_target_state();

  std::vector<int> label_idx;
  for (const auto& l : out.labels) label_idx.push_back(space.basis_index(l));

  std::optional<ReadoutModel> readout;
  if (params.readout) readout = ReadoutModel::from_device(*params.dev, 0, 3);

  parallel_for(static_cast<int>(params.grid.size()), params.threads, [&](int gi) {
    ChainConfig cfg = ab_chain_config(params, params.grid[static_cast<size_t>(gi)]);
    out.loop_flux[static_cast<size_t>(gi)] = effective::loop_flux(cfg.couplings[0], cfg.couplings[1]);
    Operator h = effective::effective_chain_hamiltonian(cfg);

    Trajectory traj;
    if (params.noisy) {
      auto collapse = dynamics::collapse_from_device(*params.dev, space, {{0, 0}, {1, 1}, {2, 2}});
      dynamics::TimeDependentHamiltonian th;
      th.space = space;
      th.static_part = h.mat;
      traj = dynamics::evolve_lindblad(th, QuantumState::mixed(space, psi0.as_density_matrix()), collapse,
                                       params.duration_ns, std::min(1.0, dynamics::suggested_dt(th)),
                                       params.sample_every_ns);
    } else {
      traj = dynamics::evolve_exact(h, psi0, params.duration_ns, params.sample_every_ns);
    }
    if (gi == 0) out.times = traj.times;

    std::vector<std::vector<double>> pops(out.labels.size());
    for (int s = 0; s < traj.n_samples(); ++s) {
      std::vector<double> p = traj.states[static_cast<size_t>(s)].populations();
      if (readout) p = apply_readout_error(p, *readout);
      for (size_t li = 0; li < label_idx.size(); ++li)
        pops[li].push_back(p[static_cast<size_t>(label_idx[li])]);
    }
    out.populations[static_cast<size_t>(gi)] = std::move(pops);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Loop-phase calibration
// ---------------------------------------------------------------------------

std::vector<double> xx_frame_thetas(const ChainConfig& chain) {
  chain.validate();
  std::vector<double> thetas(static_cast<size_t>(chain.n_qubits), 0.0);
  const auto& b0 = chain.couplings[0];
  thetas[0] = 0.5 * (b0.phi_blue_rad + b0.phi_red_rad);
  thetas[1] = 0.5 * (b0.phi_blue_rad - b0.phi_red_rad);
  for (size_t k = 1; k < chain.couplings.size(); ++k)
    thetas[k + 1] = chain.couplings[k].phi_blue_rad - thetas[k];
  return thetas;
}

CalibrationResult calibrate_loop_phases(const ChainConfig& true_chain, const CalibrationOptions& opts) {
  true_chain.validate();
  if (true_chain.n_qubits < 3) throw std::invalid_argument("calibrate_loop_phases: need at least 3 qubits");
  for (const auto& c : true_chain.couplings)
    if (std::fabs(c.g_blue_mhz - opts.g_mhz) > 1e-9 || std::fabs(c.g_red_mhz - opts.g_mhz) > 1e-9)
      throw std::invalid_argument("calibrate_loop_phases: interference fit expects equal strengths on every bond");

  double probe_time = opts.probe_time_ns > 0 ? opts.probe_time_ns : 1.0 / (4e-3 * opts.g_mhz);
  int n_triples = true_chain.n_qubits - 2;

  // Working copy: the physical chain as corrections are applied. The fit
  // logic below sees only the populations the probe returns.
  ChainConfig working = true_chain;

  // The probe activates only the triple's two bonds and reports the
  // population of the caged state (1 0 1 on the triple) at the probe time.
  auto probe = [&](int triple, int tuned_bond, double commanded_phase) {
    ChainConfig trimer;
    trimer.n_qubits = 3;
    for (int b = triple; b <= triple + 1; ++b) {
      EffectiveCoupling c = working.couplings[static_cast<size_t>(b)];
      double phi_b = c.phi_blue_rad;
      if (b == tuned_bond) phi_b = commanded_phase;
      trimer.couplings.emplace_back(b - triple, c.g_blue_mhz, phi_b, c.g_red_mhz, c.phi_red_rad);
    }
    Operator h = effective::effective_chain_hamiltonian(trimer);
    QuantumState psi0 = QuantumState::basis(h.space, "000");
    Trajectory tr = dynamics::evolve_exact(h, psi0, probe_time, probe_time);
    return tr.states.back().population(h.space.basis_index("101"));
  };

  CalibrationResult result;
  result.corrected = working;

  for (int t = 0; t < n_triples; ++t) {
    int tuned_bond = t == 0 ? 0 : t + 1;
    TripleFit fit;
    fit.triple = t;
    fit.tuned_bond = tuned_bond;

    // Uniform full-period sweep; least squares of a + c cos p + d sin p
    // (the grid is orthogonal, so the fundamental is extracted exactly).
    int n = std::max(opts.sweep_points, 5);
    double scc = 0, sdd = 0, syc = 0, syd = 0;
    for (int i = 0; i < n; ++i) {
      double p = -qop::kPi + qop::kTwoPi * (i + 0.5) / n;
      double y = probe(t, tuned_bond, p);
      syc += y * std::cos(p);
      syd += y * std::sin(p);
      scc += std::cos(p) * std::cos(p);
      sdd += std::sin(p) * std::sin(p);
    }
    double c = syc / scc, d = syd / sdd;
    double amp = std::hypot(c, d);
    if (amp < opts.fit_min_amplitude) {
      fit.ok = false;
      fit.error = "interference pattern amplitude too small for a phase fit";
      result.converged = false;
      result.fits.push_back(fit);
      continue;
    }
    fit.fit_amplitude = amp;
    fit.corrected_phase = std::atan2(d, c);  // argmax of the fitted fundamental
    result.fits.push_back(fit);

    auto& bond = working.couplings[static_cast<size_t>(tuned_bond)];
    bond = EffectiveCoupling(bond.bond, bond.g_blue_mhz, fit.corrected_phase, bond.g_red_mhz, bond.phi_red_rad);
  }

  result.corrected = working;
  for (int t = 0; t < n_triples; ++t)
    result.residual_flux.push_back(
        effective::loop_flux(working.couplings[static_cast<size_t>(t)], working.couplings[static_cast<size_t>(t) + 1]));
  result.frame_thetas = xx_frame_thetas(working);
  result.aligned = effective::gauge_shift(working, result.frame_thetas);
  return result;
}

// ---------------------------------------------------------------------------
// DPT observables
// ---------------------------------------------------------------------------

double czz_correlation(const Trajectory& traj, double horizon_ns) {
  if (traj.states.size() < 2) throw std::invalid_argument("czz_correlation: need at least two samples");
  if (traj.times.back() < horizon_ns - 1e-9)
    throw std::invalid_argument("czz_correlation: horizon exceeds the trajectory");
  const HilbertSpace& space = traj.states.front().space();
  int n = space.num_sites();
  int dim = space.dimension();

  // sum_{i != j} z_i z_j = (sum_i z_i)^2 - n, diagonal in the computational basis.
  std::vector<double> diag(static_cast<size_t>(dim));
  for (int idx = 0; idx < dim; ++idx) {
    auto levels = space.levels_of(idx);
    double zsum = 0;
    for (int q = 0; q < n; ++q) zsum += levels[static_cast<size_t>(q)] == 0 ? 1.0 : -1.0;
    diag[static_cast<size_t>(idx)] = (zsum * zsum - n) / (n * n);
  }

  double integral = 0.0, prev_t = 0.0, prev_v = 0.0;
  bool first = true;
  for (int s = 0; s < traj.n_samples(); ++s) {
    double t = traj.times[static_cast<size_t>(s)];
    if (t > horizon_ns + 1e-9) break;
    double v = 0;
    for (int idx = 0; idx < dim; ++idx) v += diag[static_cast<size_t>(idx)] * traj.states[static_cast<size_t>(s)].population(idx);
    if (!first) integral += 0.5 * (v + prev_v) * (t - prev_t);
    prev_t = t;
    prev_v = v;
    first = false;
  }
  return integral / prev_t;
}

std::vector<double> loschmidt_echo(const Operator& h, const QuantumState& initial, const std::vector<double>& times_ns) {
  if (!h.is_hermitian()) throw std::invalid_argument("loschmidt_echo: Hamiltonian not Hermitian");
  if (initial.kind() != qop::StateKind::pure) throw std::invalid_argument("loschmidt_echo: initial state must be pure");
  if (initial.space() != h.space) throw std::invalid_argument("loschmidt_echo: space mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> es(h.mat);
  Vector c = es.eigenvectors().adjoint() * initial.vector();
  std::vector<double> out;
  out.reserve(times_ns.size());
  for (double t : times_ns) {
    Complex amp = 0.0;
    for (Eigen::Index k = 0; k < c.size(); ++k) amp += std::norm(c(k)) * std::exp(Complex(0.0, -es.eigenvalues()(k) * t));
    out.push_back(std::norm(amp));
  }
  return out;
}

RateSeries rate_function(const std::vector<double>& loschmidt, int n) {
  if (n < 1) throw std::invalid_argument("rate_function: n must be >= 1");
  RateSeries out;
  out.values.reserve(loschmidt.size());
  out.clamped.reserve(loschmidt.size());
  for (double l : loschmidt) {
    bool clamp = l <= RateSeries::kFloor;
    out.clamped.push_back(clamp);
    out.values.push_back(-std::log(clamp ? RateSeries::kFloor : l) / n);
  }
  return out;
}

FirstMinimum first_minimum(const std::vector<double>& series, const std::vector<double>& times_ns, int window) {
  if (series.size() < 3) throw std::invalid_argument("first_minimum: series too short");
  if (series.size() != times_ns.size()) throw std::invalid_argument("first_minimum: times/series size mismatch");
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("first_minimum: window must be odd and >= 1");

  int n = static_cast<int>(series.size());
  int half = window / 2;
  std::vector<double> smooth(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
    double acc = 0;
    for (int k = lo; k <= hi; ++k) acc += series[static_cast<size_t>(k)];
    smooth[static_cast<size_t>(i)] = acc / (hi - lo + 1);
  }
  for (int i = 1; i + 1 < n; ++i) {
    if (smooth[static_cast<size_t>(i)] <= smooth[static_cast<size_t>(i) - 1] &&
        smooth[static_cast<size_t>(i)] <= smooth[static_cast<size_t>(i) + 1]) {
      return {times_ns[static_cast<size_t>(i)], series[static_cast<size_t>(i)], true};
    }
  }
  auto it = std::min_element(series.begin(), series.end());
  return {times_ns[static_cast<size_t>(it - series.begin())], *it, false};
}

// ---------------------------------------------------------------------------
// DPT sweep
// ---------------------------------------------------------------------------

DptResult run_dpt_sweep(const DptParams& params) {
  if (params.bz_over_j.empty()) throw std::invalid_argument("run_dpt_sweep: empty grid");
  if (params.n_qubits < 2 || params.n_qubits > 6)
    throw std::invalid_argument("run_dpt_sweep: chain size must be between 2 and 6");
  if ((params.noisy || params.readout) && !params.dev)
    throw std::invalid_argument("run_dpt_sweep: noisy/readout mode needs a device");

  int npts = static_cast<int>(params.bz_over_j.size());
  DptResult out;
  out.bz_over_j = params.bz_over_j;
  out.czz.resize(static_cast<size_t>(npts));
  out.loschmidt.resize(static_cast<size_t>(npts));
  out.rate.resize(static_cast<size_t>(npts));
  out.first_min.resize(static_cast<size_t>(npts));
  out.first_min_time_ns.resize(static_cast<size_t>(npts));

  HilbertSpace space = HilbertSpace::qubits(params.n_qubits);
  QuantumState psi0 = QuantumState::basis(space, std::string(static_cast<size_t>(params.n_qubits), '0'));
  int idx0 = 0;

  std::optional<ReadoutModel> readout;
  if (params.readout) readout = ReadoutModel::from_device(*params.dev, 0, params.n_qubits);

  parallel_for(npts, params.threads, [&](int gi) {
    double bz = params.bz_over_j[static_cast<size_t>(gi)] * params.j_mhz;
    Operator h = params.source == DptSource::ising
                     ? effective::ising_hamiltonian(params.n_qubits, params.j_mhz, bz)
                     : effective::effective_chain_hamiltonian(
                           ChainConfig::uniform(params.n_qubits, params.j_mhz, 4.0 * bz));

    Trajectory traj;
    std::vector<double> lo;
    if (params.noisy) {
      auto sites = std::vector<std::pair<int, int>>{};
      for (int q = 0; q < params.n_qubits; ++q) sites.emplace_back(q, q);
      auto collapse = dynamics::collapse_from_device(*params.dev, space, sites);
      dynamics::TimeDependentHamiltonian th;
      th.space = space;
      th.static_part = h.mat;
      traj = dynamics::evolve_lindblad(th, QuantumState::mixed(space, psi0.as_density_matrix()), collapse,
                                       params.horizon_ns, std::min(1.0, dynamics::suggested_dt(th)),
                                       params.sample_every_ns);
    } else {
      traj = dynamics::evolve_exact(h, psi0, params.horizon_ns, params.sample_every_ns);
    }
    if (gi == 0) out.times = traj.times;

    if (readout || params.noisy) {
      // Observables from the (possibly readout-corrupted) populations; the
      // return probability of the all-zeros string plays the echo's role.
      std::vector<std::vector<double>> pops(static_cast<size_t>(traj.n_samples()));
      for (int s = 0; s < traj.n_samples(); ++s) {
        pops[static_cast<size_t>(s)] = traj.states[static_cast<size_t>(s)].populations();
        if (readout) pops[static_cast<size_t>(s)] = apply_readout_error(pops[static_cast<size_t>(s)], *readout);
      }
      lo.reserve(pops.size());
      for (const auto& p : pops) lo.push_back(p[static_cast<size_t>(idx0)]);
      // czz from the corrupted populations
      int n = params.n_qubits, dim = space.dimension();
      std::vector<double> diag(static_cast<size_t>(dim));
      for (int idx = 0; idx < dim; ++idx) {
        auto levels = space.levels_of(idx);
        double zsum = 0;
        for (int q = 0; q < n; ++q) zsum += levels[static_cast<size_t>(q)] == 0 ? 1.0 : -1.0;
        diag[static_cast<size_t>(idx)] = (zsum * zsum - n) / (n * n);
      }
      double integral = 0;
      for (size_t s = 0; s + 1 < pops.size(); ++s) {
        double va = 0, vb = 0;
        for (int idx = 0; idx < dim; ++idx) {
          va += diag[static_cast<size_t>(idx)] * pops[s][static_cast<size_t>(idx)];
          vb += diag[static_cast<size_t>(idx)] * pops[s + 1][static_cast<size_t>(idx)];
        }
        integral += 0.5 * (va + vb) * (traj.times[s + 1] - traj.times[s]);
      }
      out.czz[static_cast<size_t>(gi)] = integral / traj.times.back();
    } else {
      out.czz[static_cast<size_t>(gi)] = czz_correlation(traj, params.horizon_ns);
      lo = loschmidt_echo(h, psi0, traj.times);
    }

    out.loschmidt[static_cast<size_t>(gi)] = lo;
    out.rate[static_cast<size_t>(gi)] = rate_function(lo, params.n_qubits).values;
    FirstMinimum fm = first_minimum(lo, traj.times);
    out.first_min[static_cast<size_t>(gi)] = fm.value;
    out.first_min_time_ns[static_cast<size_t>(gi)] = fm.time_ns;
  });
  return out;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  int workers = std::min(threads, n);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace floq::experiments
