#include "floq/dynamics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace floq::dynamics {

using qop::Complex;
using qop::HilbertSpace;
using qop::Matrix;
using qop::Operator;
using qop::QuantumState;
using qop::StateKind;
using qop::Vector;

namespace {

// Gauss-Legendre nodes and the CF4 weights.
const double kNode1 = 0.5 - std::sqrt(3.0) / 6.0;
const double kNode2 = 0.5 + std::sqrt(3.0) / 6.0;
const double kAlpha1 = 0.25 + std::sqrt(3.0) / 6.0;
const double kAlpha2 = 0.25 - std::sqrt(3.0) / 6.0;

Vector expi_apply(const Eigen::SelfAdjointEigenSolver<Matrix>& es, double dt, const Vector& v) {
  Vector c = es.eigenvectors().adjoint() * v;
  for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::exp(Complex(0.0, -es.eigenvalues()(k) * dt));
  return es.eigenvectors() * c;
}

// Raised-cosine window envelope on [t0, t1] with the given edge length.
double window_envelope(double t, double t0, double t1, double ramp) {
  if (t <= t0 || t >= t1) return 0.0;
  if (ramp <= 0.0) return 1.0;
  if (t < t0 + ramp) return 0.5 * (1.0 - std::cos(qop::kPi * (t - t0) / ramp));
  if (t > t1 - ramp) return 0.5 * (1.0 - std::cos(qop::kPi * (t1 - t) / ramp));
  return 1.0;
}

// Transmon lowering operator on a d-level site: sum sqrt(l+1) |l><l+1|.
Matrix lowering(int d) {
  Matrix m = Matrix::Zero(d, d);
  for (int l = 0; l + 1 < d; ++l) m(l, l + 1) = std::sqrt(static_cast<double>(l + 1));
  return m;
}

Matrix embed(const Matrix& local, int site, const HilbertSpace& space) {
  Matrix full = Matrix::Identity(1, 1);
  for (int s = 0; s < space.num_sites(); ++s) {
    int d = space.site_dim(s);
    full = qop::kron(full, s == site ? local : Matrix::Identity(d, d));
  }
  return full;
}

struct StepGrid {
  double dt;
  long nsteps;
  long stride;  // steps per sample
};

StepGrid make_grid(double t_end, double dt_req, double sample_every, double dt_cap) {
  if (t_end <= 0) throw std::invalid_argument("evolve: t_end must be positive");
  if (dt_req <= 0) throw std::invalid_argument("evolve: dt must be positive");
  if (sample_every <= 0) throw std::invalid_argument("evolve: sample_every must be positive");
  if (dt_req > dt_cap * (1.0 + 1e-12))
    throw std::invalid_argument("evolve: dt too coarse for the fastest frequency (need dt <= " +
                                std::to_string(dt_cap) + " ns)");
  StepGrid g;
  g.stride = std::max<long>(1, static_cast<long>(std::ceil(sample_every / dt_req - 1e-12)));
  g.dt = sample_every / static_cast<double>(g.stride);
  long nsamples = static_cast<long>(std::ceil(t_end / sample_every - 1e-9));
  g.nsteps = nsamples * g.stride;
  return g;
}

}  // namespace

Matrix TimeDependentHamiltonian::sample(double t_ns) const {
  Matrix h = static_part;
  for (const auto& d : drives) h += d.coeff(t_ns) * d.op;
  return h;
}

double max_frequency_ghz(const TimeDependentHamiltonian& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h.static_part, Eigen::EigenvaluesOnly);
  double emax = std::max(std::fabs(es.eigenvalues().minCoeff()), std::fabs(es.eigenvalues().maxCoeff()));
  return std::max(emax / qop::kTwoPi, h.max_drive_freq_ghz);
}

double suggested_dt(const TimeDependentHamiltonian& h) {
  double fmax = max_frequency_ghz(h);
  if (fmax <= 0) return std::numeric_limits<double>::infinity();
  return 1.0 / (20.0 * fmax);
}

Trajectory evolve_schrodinger(const TimeDependentHamiltonian& h, const QuantumState& initial, double t_end_ns,
                              double dt_ns, double sample_every_ns) {
  if (initial.kind() != StateKind::pure)
    throw std::invalid_argument("evolve_schrodinger: initial state must be pure");
  if (initial.space() != h.space) throw std::invalid_argument("evolve_schrodinger: space mismatch");
  initial.validate();

  StepGrid grid = make_grid(t_end_ns, dt_ns, sample_every_ns, suggested_dt(h));
  Trajectory traj;
  Vector psi = initial.vector();
  traj.times.push_back(0.0);
  traj.states.push_back(initial);

  if (h.time_independent()) {
    // One exact exponential per sample interval.
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.static_part);
    long nsamples = grid.nsteps / grid.stride;
    for (long s = 1; s <= nsamples; ++s) {
      psi = expi_apply(es, sample_every_ns, psi);
      traj.times.push_back(static_cast<double>(s) * sample_every_ns);
      traj.states.push_back(QuantumState::pure(h.space, psi));
    }
    return traj;
  }

  for (long step = 0; step < grid.nsteps; ++step) {
    double t = static_cast<double>(step) * grid.dt;
    Matrix h1 = h.sample(t + kNode1 * grid.dt);
    Matrix h2 = h.sample(t + kNode2 * grid.dt);
    // The first factor weights the earlier Gauss node; swapping the two
    // degrades the scheme to second order.
    Matrix b_first = kAlpha1 * h1 + kAlpha2 * h2;
    Matrix b_second = kAlpha2 * h1 + kAlpha1 * h2;
    Eigen::SelfAdjointEigenSolver<Matrix> e1(b_first);
    psi = expi_apply(e1, grid.dt, psi);
    Eigen::SelfAdjointEigenSolver<Matrix> e2(b_second);
    psi = expi_apply(e2, grid.dt, psi);
    if ((step + 1) % grid.stride == 0) {
      traj.times.push_back((static_cast<double>(step) + 1.0) * grid.dt);
      traj.states.push_back(QuantumState::pure(h.space, psi));
    }
  }
  return traj;
}

std::vector<CollapseOp> collapse_from_device(const device::DeviceSpec& dev, const HilbertSpace& space,
                                             const std::vector<std::pair<int, int>>& sites, bool use_t2r) {
  std::vector<CollapseOp> out;
  for (auto [qubit, site] : sites) {
    if (qubit < 0 || qubit >= dev.n_qubits()) throw std::out_of_range("collapse_from_device: qubit out of range");
    const auto& q = dev.qubits[static_cast<size_t>(qubit)];
    double t1 = qop::us_to_ns(q.t1_us);
    double t2 = qop::us_to_ns(use_t2r ? q.t2r_us : q.t2e_us);
    double gamma1 = 1.0 / t1;
    double gamma_phi = 1.0 / t2 - 0.5 * gamma1;
    if (gamma_phi < 0) gamma_phi = 0.0;  // T2 > 2 T1 within measurement slop
    out.push_back({qop::site_operator(qop::SiteOp::sm, site, space).mat, gamma1});
    if (gamma_phi > 0) out.push_back({qop::site_operator(qop::SiteOp::z, site, space).mat, 0.5 * gamma_phi});
  }
  return out;
}

namespace {

Matrix lindblad_rhs(const Matrix& h, const std::vector<CollapseOp>& collapse,
                    const std::vector<Matrix>& ldl, const Matrix& rho) {
  Matrix out = Complex(0.0, -1.0) * (h * rho - rho * h);
  for (size_t k = 0; k < collapse.size(); ++k) {
    const auto& c = collapse[k];
    out += c.rate_per_ns * (c.op * rho * c.op.adjoint());
    out -= 0.5 * c.rate_per_ns * (ldl[k] * rho + rho * ldl[k]);
  }
  return out;
}

}  // namespace

Trajectory evolve_lindblad(const TimeDependentHamiltonian& h, const QuantumState& initial,
                           const std::vector<CollapseOp>& collapse, double t_end_ns, double dt_ns,
                           double sample_every_ns) {
  if (initial.space() != h.space) throw std::invalid_argument("evolve_lindblad: space mismatch");
  for (const auto& c : collapse)
    if (c.rate_per_ns < 0) throw std::invalid_argument("evolve_lindblad: negative rate");
  initial.validate();

  double rate_cap = std::numeric_limits<double>::infinity();
  for (const auto& c : collapse)
    if (c.rate_per_ns > 0) rate_cap = std::min(rate_cap, 0.05 / c.rate_per_ns);
  StepGrid grid = make_grid(t_end_ns, dt_ns, sample_every_ns, std::min(suggested_dt(h), rate_cap));
  std::vector<Matrix> ldl;
  ldl.reserve(collapse.size());
  for (const auto& c : collapse) ldl.push_back(c.op.adjoint() * c.op);

  Matrix rho = initial.as_density_matrix();
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(QuantumState::mixed(h.space, rho));

  bool constant = h.time_independent();
  Matrix h0 = h.static_part;
  for (long step = 0; step < grid.nsteps; ++step) {
    double t = static_cast<double>(step) * grid.dt;
    Matrix ha = constant ? h0 : h.sample(t);
    Matrix hb = constant ? h0 : h.sample(t + 0.5 * grid.dt);
    Matrix hc = constant ? h0 : h.sample(t + grid.dt);
    Matrix k1 = lindblad_rhs(ha, collapse, ldl, rho);
    Matrix k2 = lindblad_rhs(hb, collapse, ldl, rho + 0.5 * grid.dt * k1);
    Matrix k3 = lindblad_rhs(hb, collapse, ldl, rho + 0.5 * grid.dt * k2);
    Matrix k4 = lindblad_rhs(hc, collapse, ldl, rho + grid.dt * k3);
    rho += (grid.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if ((step + 1) % grid.stride == 0) {
      rho = 0.5 * (rho + rho.adjoint().eval());  // shed roundoff skew
      traj.times.push_back((static_cast<double>(step) + 1.0) * grid.dt);
      traj.states.push_back(QuantumState::mixed(h.space, rho));
    }
  }
  return traj;
}

qop::Matrix LabSystem::drive_averaged_static(const std::vector<device::SidebandDrive>& drives) const {
  Matrix out = h.static_part;
  for (int b = 0; b < n_couplers(); ++b) {
    std::vector<const device::SidebandDrive*> on;
    for (const auto& d : drives)
      if (d.bond == first_qubit + b) on.push_back(&d);
    if (on.empty()) continue;
    double fmax = device.couplers[static_cast<size_t>(first_qubit + b)].omega_max_ghz;
    double base = device::coupler_frequency(phi_dc[static_cast<size_t>(b)], fmax);
    // Mean of the coupler frequency over independent tone phases.
    int npts = 256;
    double mean = 0.0;
    if (on.size() == 1) {
      for (int i = 0; i < npts; ++i) {
        double th = qop::kTwoPi * i / npts;
        mean += device::coupler_frequency(phi_dc[static_cast<size_t>(b)] + on[0]->amplitude * std::cos(th), fmax);
      }
      mean /= npts;
    } else {
      for (int i = 0; i < npts; ++i)
        for (int j = 0; j < npts; ++j) {
          double phi = phi_dc[static_cast<size_t>(b)] + on[0]->amplitude * std::cos(qop::kTwoPi * i / npts) +
                       on[1]->amplitude * std::cos(qop::kTwoPi * j / npts);
          mean += device::coupler_frequency(phi, fmax);
        }
      mean /= static_cast<double>(npts) * npts;
    }
    Matrix num = embed(lowering(h.space.site_dim(coupler_site(b))).adjoint() *
                           lowering(h.space.site_dim(coupler_site(b))),
                       coupler_site(b), h.space);
    out += qop::ghz_to_rad_ns(mean - base) * num;
  }
  return out;
}

LabSystem build_lab_hamiltonian(const device::DeviceSpec& dev, const std::vector<device::SidebandDrive>& drives,
                                int truncation, int first_qubit, int n_qubits) {
  dev.validate();
  if (truncation != 2 && truncation != 3) throw std::invalid_argument("build_lab_hamiltonian: truncation must be 2 or 3");
  if (n_qubits < 2 || first_qubit < 0 || first_qubit + n_qubits > dev.n_qubits())
    throw std::invalid_argument("build_lab_hamiltonian: qubit subset out of range");
  if (n_qubits > 3) throw std::invalid_argument("build_lab_hamiltonian: pulse-level cap is 3 qubits + 2 couplers");

  int n_couplers = n_qubits - 1;
  std::vector<int> dims(static_cast<size_t>(n_qubits + n_couplers), truncation);
  HilbertSpace space{dims};

  LabSystem sys;
  sys.device = dev;
  sys.first_qubit = first_qubit;
  sys.n_qubits = n_qubits;
  sys.truncation = truncation;
  sys.h.space = space;

  Matrix h0 = Matrix::Zero(space.dimension(), space.dimension());

  auto duffing = [&](int site, double f_ghz, double ec_mhz) {
    int d = space.site_dim(site);
    Matrix b = lowering(d);
    Matrix num = b.adjoint() * b;
    Matrix local = qop::ghz_to_rad_ns(f_ghz) * num +
                   0.5 * qop::mhz_to_rad_ns(ec_mhz) * (num * (num - Matrix::Identity(d, d)));
    h0 += embed(local, site, space);
  };
  auto exchange_x = [&](int site_a, int site_b, double g_mhz) {
    int da = space.site_dim(site_a), db = space.site_dim(site_b);
    Matrix xa = lowering(da) + lowering(da).adjoint();
    Matrix xb = lowering(db) + lowering(db).adjoint();
    h0 += qop::mhz_to_rad_ns(g_mhz) * (embed(xa, site_a, space) * embed(xb, site_b, space));
  };

  for (int q = 0; q < n_qubits; ++q) {
    const auto& spec = dev.qubits[static_cast<size_t>(first_qubit + q)];
    duffing(sys.qubit_site(q), spec.omega_idle_ghz, spec.ec_mhz);
  }
  for (int b = 0; b < n_couplers; ++b) {
    const auto& spec = dev.couplers[static_cast<size_t>(first_qubit + b)];
    double pdc = device::phi_dc_for_frequency(spec.omega_idle_ghz, spec.omega_max_ghz);
    sys.phi_dc.push_back(pdc);
    duffing(sys.coupler_site(b), device::coupler_frequency(pdc, spec.omega_max_ghz), spec.ec_mhz);
    exchange_x(sys.qubit_site(b), sys.coupler_site(b), spec.g_left_mhz);
    exchange_x(sys.qubit_site(b + 1), sys.coupler_site(b), spec.g_right_mhz);
    exchange_x(sys.qubit_site(b), sys.qubit_site(b + 1), spec.j_direct_mhz);
  }
  sys.h.static_part = std::move(h0);

  // One exact flux-modulation term per driven coupler.
  for (int b = 0; b < n_couplers; ++b) {
    std::vector<device::SidebandDrive> on;
    for (const auto& d : drives) {
      if (d.bond == first_qubit + b) {
        d.validate();
        on.push_back(d);
      } else if (d.bond < first_qubit || d.bond >= first_qubit + n_couplers) {
        throw std::invalid_argument("build_lab_hamiltonian: drive references an excluded coupler");
      }
    }
    if (on.empty()) continue;
    const auto& spec = dev.couplers[static_cast<size_t>(first_qubit + b)];
    double pdc = sys.phi_dc[static_cast<size_t>(b)];
    double fmax = spec.omega_max_ghz;
    double base = device::coupler_frequency(pdc, fmax);
    auto flux = [on, pdc](double t) {
      double phi = pdc;
      for (const auto& d : on)
        phi += window_envelope(t, d.t_start_ns, d.t_end_ns, d.ramp_ns) * d.amplitude *
               std::cos(qop::ghz_to_rad_ns(d.freq_ghz) * t + d.phase_rad);
      return phi;
    };
    int site = sys.coupler_site(b);
    int d = space.site_dim(site);
    Matrix num = embed(lowering(d).adjoint() * lowering(d), site, space);
    sys.h.drives.push_back({std::move(num), [flux, base, fmax](double t) {
                              return qop::ghz_to_rad_ns(device::coupler_frequency(flux(t), fmax) - base);
                            }});
    for (const auto& dr : on) sys.h.max_drive_freq_ghz = std::max(sys.h.max_drive_freq_ghz, dr.freq_ghz);
  }
  return sys;
}

QubitPopulations measure_qubit_populations(const Trajectory& traj, const LabSystem& sys) {
  const HilbertSpace& space = sys.h.space;
  int nq = sys.n_qubits;
  int qdim = 1 << nq;

  QubitPopulations out;
  for (int k = 0; k < qdim; ++k) {
    std::string label;
    for (int q = 0; q < nq; ++q) label += ((k >> (nq - 1 - q)) & 1) ? '1' : '0';
    out.labels.push_back(label);
  }
  out.populations.assign(static_cast<size_t>(qdim), {});

  for (int s = 0; s < traj.n_samples(); ++s) {
    const auto& st = traj.states[static_cast<size_t>(s)];
    // Weight of the couplers-in-ground sector; this includes qubit leakage
    // levels, which stay visible as a population deficit after projection.
    double kept = 0.0;
    for (int idx = 0; idx < space.dimension(); ++idx) {
      auto levels = space.levels_of(idx);
      bool coupler_ground = true;
      for (int c = nq; c < space.num_sites(); ++c)
        if (levels[static_cast<size_t>(c)] != 0) coupler_ground = false;
      if (coupler_ground) kept += st.population(idx);
    }
    double excess = 1.0 - kept;
    out.coupler_excitation.push_back(excess < 0 ? 0.0 : excess);
    double norm = kept > 0 ? kept : 1.0;
    for (int k = 0; k < qdim; ++k) {
      std::vector<int> levels(static_cast<size_t>(space.num_sites()), 0);
      for (int q = 0; q < nq; ++q) levels[static_cast<size_t>(q)] = (k >> (nq - 1 - q)) & 1;
      out.populations[static_cast<size_t>(k)].push_back(st.population(space.basis_index(levels)) / norm);
    }
  }
  return out;
}

std::map<std::string, std::vector<double>> measure_populations(const Trajectory& traj,
                                                               const std::vector<std::string>& labels) {
  std::map<std::string, std::vector<double>> out;
  if (traj.states.empty()) return out;
  const HilbertSpace& space = traj.states.front().space();
  for (const auto& label : labels) {
    int idx = space.basis_index(label);
    std::vector<double> series;
    series.reserve(traj.states.size());
    for (const auto& st : traj.states) series.push_back(st.population(idx));
    out[label] = std::move(series);
  }
  return out;
}

Trajectory evolve_exact(const Operator& h, const QuantumState& initial, double t_end_ns, double sample_every_ns) {
  if (!h.is_hermitian()) throw std::invalid_argument("evolve_exact: Hamiltonian not Hermitian");
  if (initial.space() != h.space) throw std::invalid_argument("evolve_exact: space mismatch");
  if (initial.kind() != StateKind::pure) throw std::invalid_argument("evolve_exact: initial state must be pure");
  Eigen::SelfAdjointEigenSolver<Matrix> es(h.mat);
  long nsamples = static_cast<long>(std::ceil(t_end_ns / sample_every_ns - 1e-9));
  Trajectory traj;
  Vector c0 = es.eigenvectors().adjoint() * initial.vector();
  for (long s = 0; s <= nsamples; ++s) {
    double t = static_cast<double>(s) * sample_every_ns;
    Vector c = c0;
    for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::exp(Complex(0.0, -es.eigenvalues()(k) * t));
    traj.times.push_back(t);
    traj.states.push_back(QuantumState::pure(h.space, es.eigenvectors() * c));
  }
  return traj;
}

}  // namespace floq::dynamics
