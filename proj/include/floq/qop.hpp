// qop.hpp — Tensor-product operator algebra and quantum-state arithmetic

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace floq::qop {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Unit conventions: public APIs speak GHz / MHz / ns. Conversion to angular
// frequency (rad/ns) happens once, at Hamiltonian-construction boundaries.
inline constexpr double ghz_to_rad_ns(double f_ghz) { return kTwoPi * f_ghz; }
inline constexpr double mhz_to_rad_ns(double g_mhz) { return kTwoPi * 1e-3 * g_mhz; }
inline constexpr double us_to_ns(double t_us) { return 1e3 * t_us; }

// Tolerances used by the state/operator invariants.
inline constexpr double kHermTol = 1e-12;
inline constexpr double kNormTol = 1e-9;

// ---------------------------------------------------------------------------
// HilbertSpace: explicit tensor-product structure. Site 0 is the most
// significant factor, so bitstring labels read left to right.
// ---------------------------------------------------------------------------
class HilbertSpace {
 public:
  HilbertSpace() = default;
  explicit HilbertSpace(std::vector<int> site_dims);

  static HilbertSpace qubits(int n);

  int num_sites() const { return static_cast<int>(dims_.size()); }
  int site_dim(int site) const;
  int dimension() const { return dim_; }
  const std::vector<int>& site_dims() const { return dims_; }

  // Basis index of a product state given per-site levels.
  int basis_index(std::span<const int> levels) const;
  // Basis index from a label like "010" (digits per site, site 0 first).
  int basis_index(const std::string& label) const;
  // Per-site levels of a basis index.
  std::vector<int> levels_of(int index) const;

  bool operator==(const HilbertSpace& other) const { return dims_ == other.dims_; }
  bool operator!=(const HilbertSpace& other) const { return !(*this == other); }

 private:
  std::vector<int> dims_;
  int dim_ = 1;
};

// ---------------------------------------------------------------------------
// Operator: dense matrix over a HilbertSpace, entries in rad/ns for energies.
// ---------------------------------------------------------------------------
struct Operator {
  HilbertSpace space;
  Matrix mat;

  Operator() = default;
  Operator(HilbertSpace s, Matrix m);

  int dim() const { return static_cast<int>(mat.rows()); }
  bool is_hermitian(double tol = kHermTol) const;
  Operator adjoint() const { return Operator(space, mat.adjoint()); }

  Operator& operator+=(const Operator& o);
  Operator& operator-=(const Operator& o);
  friend Operator operator+(Operator a, const Operator& b) { return a += b; }
  friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
  friend Operator operator*(const Operator& a, const Operator& b);
  friend Operator operator*(Complex c, Operator a) {
    a.mat *= c;
    return a;
  }
  friend Operator operator*(double c, Operator a) {
    a.mat *= c;
    return a;
  }
};

Operator zero_operator(const HilbertSpace& space);
Operator identity_operator(const HilbertSpace& space);

// ---------------------------------------------------------------------------
// QuantumState: normalized pure vector or unit-trace density matrix.
// ---------------------------------------------------------------------------
enum class StateKind { pure, mixed };

class QuantumState {
 public:
  QuantumState() = default;

  static QuantumState pure(HilbertSpace space, Vector psi);
  static QuantumState mixed(HilbertSpace space, Matrix rho);
  // Computational basis state from a label like "000".
  static QuantumState basis(HilbertSpace space, const std::string& label);
  // Product state from per-site symbols in {0,1,+,-} (qubit sites only).
  static QuantumState product(HilbertSpace space, const std::string& symbols);

  StateKind kind() const { return kind_; }
  const HilbertSpace& space() const { return space_; }
  const Vector& vector() const;
  const Matrix& density_matrix() const;
  // Density matrix regardless of kind (|psi><psi| for pure states).
  Matrix as_density_matrix() const;

  int dim() const { return space_.dimension(); }
  // Probability of the computational basis state `index`.
  double population(int index) const;
  std::vector<double> populations() const;

  void validate(double tol = kNormTol) const;

 private:
  HilbertSpace space_;
  StateKind kind_ = StateKind::pure;
  Vector psi_;
  Matrix rho_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Single-site operator labels. Convention: sp = |1><0| (creates an
// excitation), z has z|0> = +|0>, n is the number operator diag(0..d-1).
// On sites with dim > 2 the qubit labels act on the {|0>,|1>} subspace with
// zero rows/columns elsewhere.
enum class SiteOp { sp, sm, x, y, z, id, n };

SiteOp site_op_from_string(const std::string& s);

Operator site_operator(SiteOp label, int site, const HilbertSpace& space);
inline Operator site_operator(const std::string& label, int site, const HilbertSpace& space) {
  return site_operator(site_op_from_string(label), site, space);
}

// <psi|O|psi> for pure states, Tr(rho O) for mixed.
Complex expectation(const QuantumState& state, const Operator& op);

// |<psi|phi>|^2 for two pure states, Uhlmann fidelity when density matrices
// are involved. Symmetric in its arguments.
double fidelity(const QuantumState& state, const QuantumState& target);

// U = exp(-i h t), computed by eigendecomposition. h must be Hermitian.
Operator matrix_exponential_propagator(const Operator& h, double t_ns);

// U|psi>U^dag resp. U rho U^dag.
QuantumState apply(const Operator& u, const QuantumState& state);

// Kronecker product helper (a is the more significant factor).
Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace floq::qop
