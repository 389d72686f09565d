#include "floq/effective.hpp"

#include <cmath>
#include <stdexcept>

namespace floq::effective {

using qop::Complex;
using qop::HilbertSpace;
using qop::Matrix;
using qop::Operator;
using qop::SiteOp;

double canonical_phase(double phi) {
  double x = std::remainder(phi, qop::kTwoPi);  // (-pi, pi] up to the -pi edge
  if (x <= -qop::kPi) x += qop::kTwoPi;
  return x;
}

EffectiveCoupling::EffectiveCoupling(int bond_, double g_blue, double phi_blue, double g_red, double phi_red)
    : bond(bond_),
      g_blue_mhz(g_blue),
      phi_blue_rad(canonical_phase(phi_blue)),
      g_red_mhz(g_red),
      phi_red_rad(canonical_phase(phi_red)) {
  if (g_blue < 0 || g_red < 0) throw std::invalid_argument("EffectiveCoupling: strengths must be >= 0");
}

ChainConfig ChainConfig::uniform(int n_qubits, double g_mhz, double detuning_blue_mhz) {
  ChainConfig cfg;
  cfg.n_qubits = n_qubits;
  cfg.detuning_blue_mhz = detuning_blue_mhz;
  for (int b = 0; b + 1 < n_qubits; ++b) cfg.couplings.emplace_back(b, g_mhz, 0.0, g_mhz, 0.0);
  cfg.validate();
  return cfg;
}

void ChainConfig::validate() const {
  if (n_qubits < 2) throw std::invalid_argument("ChainConfig: need at least 2 qubits");
  if (static_cast<int>(couplings.size()) != n_qubits - 1)
    throw std::invalid_argument("ChainConfig: couplings length must be n_qubits - 1");
}

namespace {

// Adds g e^{-i phi} (s+_a s+_b) + h.c. (blue = true) or g e^{-i phi}
// (s+_a s-_b) + h.c. (blue = false) to `h`, with g in MHz.
void add_bond(Operator& h, const HilbertSpace& space, int a, int b, double g_mhz, double phi, bool blue) {
  if (g_mhz == 0.0) return;
  Complex c = qop::mhz_to_rad_ns(g_mhz) * std::exp(Complex(0.0, -phi));
  Operator left = qop::site_operator(SiteOp::sp, a, space);
  Operator right = qop::site_operator(blue ? SiteOp::sp : SiteOp::sm, b, space);
  Matrix term = c * (left.mat * right.mat);
  h.mat += term + term.adjoint();
}

}  // namespace

Operator effective_pair_hamiltonian(const EffectiveCoupling& c) {
  HilbertSpace space = HilbertSpace::qubits(2);
  Operator h = qop::zero_operator(space);
  add_bond(h, space, 0, 1, c.g_blue_mhz, c.phi_blue_rad, true);
  add_bond(h, space, 0, 1, c.g_red_mhz, c.phi_red_rad, false);
  return h;
}

Operator effective_chain_hamiltonian(const ChainConfig& cfg) {
  cfg.validate();
  HilbertSpace space = HilbertSpace::qubits(cfg.n_qubits);
  Operator h = qop::zero_operator(space);
  double bz = qop::mhz_to_rad_ns(cfg.detuning_blue_mhz) / 4.0;
  if (bz != 0.0)
    for (int i = 0; i < cfg.n_qubits; ++i) h.mat += bz * qop::site_operator(SiteOp::z, i, space).mat;
  for (const auto& c : cfg.couplings) {
    if (c.bond < 0 || c.bond + 1 >= cfg.n_qubits) throw std::out_of_range("effective_chain_hamiltonian: bad bond");
    add_bond(h, space, c.bond, c.bond + 1, c.g_blue_mhz, c.phi_blue_rad, true);
    add_bond(h, space, c.bond, c.bond + 1, c.g_red_mhz, c.phi_red_rad, false);
  }
  return h;
}

Operator ising_hamiltonian(int n, double j_mhz, double bz_mhz) {
  if (n < 2) throw std::invalid_argument("ising_hamiltonian: need n >= 2");
  HilbertSpace space = HilbertSpace::qubits(n);
  Operator h = qop::zero_operator(space);
  double j = qop::mhz_to_rad_ns(j_mhz);
  double bz = qop::mhz_to_rad_ns(bz_mhz);
  for (int i = 0; i + 1 < n; ++i) {
    Operator xi = qop::site_operator(SiteOp::x, i, space);
    Operator xj = qop::site_operator(SiteOp::x, i + 1, space);
    h.mat += j * (xi.mat * xj.mat);
  }
  for (int i = 0; i < n; ++i) h.mat += bz * qop::site_operator(SiteOp::z, i, space).mat;
  return h;
}

AnisotropyCoefficients anisotropy_decompose(const EffectiveCoupling& c) {
  // Expanding s+- = (x -+ i y)/2 in the bond Hamiltonian:
  //   pairing: g_b [cos(phi_b) (XX - YY)/2 + sin(phi_b) (XY + YX)/2]
  //   hopping: g_r [cos(phi_r) (XX + YY)/2 + sin(phi_r) (YX - XY)/2]
  AnisotropyCoefficients out;
  double cb = c.g_blue_mhz * std::cos(c.phi_blue_rad), sb = c.g_blue_mhz * std::sin(c.phi_blue_rad);
  double cr = c.g_red_mhz * std::cos(c.phi_red_rad), sr = c.g_red_mhz * std::sin(c.phi_red_rad);
  out.jxx_mhz = 0.5 * (cb + cr);
  out.jyy_mhz = 0.5 * (-cb + cr);
  out.jxy_mhz = 0.5 * (sb - sr);
  out.jyx_mhz = 0.5 * (sb + sr);
  return out;
}

double loop_flux(const EffectiveCoupling& c12, const EffectiveCoupling& c23) {
  if (c23.bond != c12.bond + 1) throw std::invalid_argument("loop_flux: bonds must be adjacent");
  return canonical_phase(c12.phi_red_rad + c23.phi_blue_rad + c23.phi_red_rad - c12.phi_blue_rad);
}

ChainConfig gauge_shift(const ChainConfig& cfg, const std::vector<double>& thetas) {
  cfg.validate();
  if (static_cast<int>(thetas.size()) != cfg.n_qubits)
    throw std::invalid_argument("gauge_shift: need one angle per qubit");
  ChainConfig out = cfg;
  for (auto& c : out.couplings) {
    double ti = thetas[static_cast<size_t>(c.bond)];
    double tj = thetas[static_cast<size_t>(c.bond) + 1];
    c = EffectiveCoupling(c.bond, c.g_blue_mhz, c.phi_blue_rad - (ti + tj), c.g_red_mhz, c.phi_red_rad - (ti - tj));
  }
  return out;
}

}  // namespace floq::effective
