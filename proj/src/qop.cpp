#include "floq/qop.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace floq::qop {

namespace {

constexpr Complex kI{0.0, 1.0};

Matrix qubit_block(SiteOp label) {
  Matrix m = Matrix::Zero(2, 2);
  switch (label) {
    case SiteOp::sp:
      m(1, 0) = 1.0;
      break;
    case SiteOp::sm:
      m(0, 1) = 1.0;
      break;
    case SiteOp::x:
      m(0, 1) = 1.0;
      m(1, 0) = 1.0;
      break;
    case SiteOp::y:
      // y = -i (sp - sm)
      m(1, 0) = -kI;
      m(0, 1) = kI;
      break;
    case SiteOp::z:
      m(0, 0) = 1.0;
      m(1, 1) = -1.0;
      break;
    default:
      throw std::logic_error("qubit_block: not a qubit label");
  }
  return m;
}

}  // namespace

HilbertSpace::HilbertSpace(std::vector<int> site_dims) : dims_(std::move(site_dims)) {
  dim_ = 1;
  for (int d : dims_) {
    if (d < 2) throw std::invalid_argument("HilbertSpace: every site_dim must be >= 2");
    dim_ *= d;
  }
}

HilbertSpace HilbertSpace::qubits(int n) {
  if (n < 1) throw std::invalid_argument("HilbertSpace::qubits: need n >= 1");
  return HilbertSpace(std::vector<int>(static_cast<size_t>(n), 2));
}

int HilbertSpace::site_dim(int site) const {
  if (site < 0 || site >= num_sites()) throw std::out_of_range("HilbertSpace::site_dim: site out of range");
  return dims_[static_cast<size_t>(site)];
}

int HilbertSpace::basis_index(std::span<const int> levels) const {
  if (static_cast<int>(levels.size()) != num_sites())
    throw std::invalid_argument("HilbertSpace::basis_index: wrong number of levels");
  int idx = 0;
  for (int s = 0; s < num_sites(); ++s) {
    int l = levels[static_cast<size_t>(s)];
    if (l < 0 || l >= dims_[static_cast<size_t>(s)])
      throw std::out_of_range("HilbertSpace::basis_index: level out of range");
    idx = idx * dims_[static_cast<size_t>(s)] + l;
  }
  return idx;
}

int HilbertSpace::basis_index(const std::string& label) const {
  if (static_cast<int>(label.size()) != num_sites())
    throw std::invalid_argument("HilbertSpace::basis_index: label '" + label + "' has wrong length");
  std::vector<int> levels(label.size());
  for (size_t i = 0; i < label.size(); ++i) {
    if (label[i] < '0' || label[i] > '9')
      throw std::invalid_argument("HilbertSpace::basis_index: bad digit in '" + label + "'");
    levels[i] = label[i] - '0';
  }
  return basis_index(levels);
}

std::vector<int> HilbertSpace::levels_of(int index) const {
  if (index < 0 || index >= dim_) throw std::out_of_range("HilbertSpace::levels_of: index out of range");
  std::vector<int> levels(static_cast<size_t>(num_sites()));
  for (int s = num_sites() - 1; s >= 0; --s) {
    levels[static_cast<size_t>(s)] = index % dims_[static_cast<size_t>(s)];
    index /= dims_[static_cast<size_t>(s)];
  }
  return levels;
}

Operator::Operator(HilbertSpace s, Matrix m) : space(std::move(s)), mat(std::move(m)) {
  if (mat.rows() != mat.cols()) throw std::invalid_argument("Operator: matrix must be square");
  if (mat.rows() != space.dimension()) throw std::invalid_argument("Operator: matrix dimension does not match space");
}

bool Operator::is_hermitian(double tol) const {
  double scale = mat.norm();
  if (scale == 0.0) return true;
  return (mat - mat.adjoint()).norm() <= tol * scale;
}

Operator& Operator::operator+=(const Operator& o) {
  if (space != o.space) throw std::invalid_argument("Operator+: space mismatch");
  mat += o.mat;
  return *this;
}

Operator& Operator::operator-=(const Operator& o) {
  if (space != o.space) throw std::invalid_argument("Operator-: space mismatch");
  mat -= o.mat;
  return *this;
}

Operator operator*(const Operator& a, const Operator& b) {
  if (a.space != b.space) throw std::invalid_argument("Operator*: space mismatch");
  return Operator(a.space, a.mat * b.mat);
}

Operator zero_operator(const HilbertSpace& space) {
  return Operator(space, Matrix::Zero(space.dimension(), space.dimension()));
}

Operator identity_operator(const HilbertSpace& space) {
  return Operator(space, Matrix::Identity(space.dimension(), space.dimension()));
}

QuantumState QuantumState::pure(HilbertSpace space, Vector psi) {
  if (psi.size() != space.dimension()) throw std::invalid_argument("QuantumState::pure: dimension mismatch");
  QuantumState st;
  st.space_ = std::move(space);
  st.kind_ = StateKind::pure;
  st.psi_ = std::move(psi);
  st.validate();
  return st;
}

QuantumState QuantumState::mixed(HilbertSpace space, Matrix rho) {
  if (rho.rows() != space.dimension() || rho.cols() != space.dimension())
    throw std::invalid_argument("QuantumState::mixed: dimension mismatch");
  QuantumState st;
  st.space_ = std::move(space);
  st.kind_ = StateKind::mixed;
  st.rho_ = std::move(rho);
  st.validate();
  return st;
}

QuantumState QuantumState::basis(HilbertSpace space, const std::string& label) {
  Vector psi = Vector::Zero(space.dimension());
  psi(space.basis_index(label)) = 1.0;
  return pure(std::move(space), std::move(psi));
}

QuantumState QuantumState::product(HilbertSpace space, const std::string& symbols) {
  if (static_cast<int>(symbols.size()) != space.num_sites())
    throw std::invalid_argument("QuantumState::product: wrong number of symbols");
  Vector psi = Vector::Ones(1);
  const double r = 1.0 / std::sqrt(2.0);
  for (int s = 0; s < space.num_sites(); ++s) {
    int d = space.site_dim(s);
    Vector local = Vector::Zero(d);
    switch (symbols[static_cast<size_t>(s)]) {
      case '0':
        local(0) = 1.0;
        break;
      case '1':
        local(1) = 1.0;
        break;
      case '+':
        local(0) = r;
        local(1) = r;
        break;
      case '-':
        local(0) = r;
        local(1) = -r;
        break;
      default:
        throw std::invalid_argument("QuantumState::product: symbol must be one of 0,1,+,-");
    }
    Vector next(psi.size() * d);
    for (Eigen::Index i = 0; i < psi.size(); ++i)
      for (int l = 0; l < d; ++l) next(i * d + l) = psi(i) * local(l);
    psi = std::move(next);
  }
  return pure(std::move(space), std::move(psi));
}

const Vector& QuantumState::vector() const {
  if (kind_ != StateKind::pure) throw std::logic_error("QuantumState::vector: state is mixed");
  return psi_;
}

const Matrix& QuantumState::density_matrix() const {
  if (kind_ != StateKind::mixed) throw std::logic_error("QuantumState::density_matrix: state is pure");
  return rho_;
}

Matrix QuantumState::as_density_matrix() const {
  if (kind_ == StateKind::mixed) return rho_;
  return psi_ * psi_.adjoint();
}

double QuantumState::population(int index) const {
  if (index < 0 || index >= dim()) throw std::out_of_range("QuantumState::population: index out of range");
  if (kind_ == StateKind::pure) return std::norm(psi_(index));
  return rho_(index, index).real();
}

std::vector<double> QuantumState::populations() const {
  std::vector<double> p(static_cast<size_t>(dim()));
  for (int i = 0; i < dim(); ++i) p[static_cast<size_t>(i)] = population(i);
  return p;
}

void QuantumState::validate(double tol) const {
  if (kind_ == StateKind::pure) {
    if (std::fabs(psi_.norm() - 1.0) > tol) throw std::invalid_argument("QuantumState: pure state not normalized");
    return;
  }
  if (std::fabs(rho_.trace().real() - 1.0) > tol || std::fabs(rho_.trace().imag()) > tol)
    throw std::invalid_argument("QuantumState: density matrix trace != 1");
  if ((rho_ - rho_.adjoint()).norm() > 1e-9 * std::max(1.0, rho_.norm()))
    throw std::invalid_argument("QuantumState: density matrix not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol)
    throw std::invalid_argument("QuantumState: density matrix has negative eigenvalues");
}

SiteOp site_op_from_string(const std::string& s) {
  if (s == "sp") return SiteOp::sp;
  if (s == "sm") return SiteOp::sm;
  if (s == "x") return SiteOp::x;
  if (s == "y") return SiteOp::y;
  if (s == "z") return SiteOp::z;
  if (s == "id") return SiteOp::id;
  if (s == "n") return SiteOp::n;
  throw std::invalid_argument("site_op_from_string: unknown label '" + s + "'");
}

Operator site_operator(SiteOp label, int site, const HilbertSpace& space) {
  if (site < 0 || site >= space.num_sites()) throw std::out_of_range("site_operator: site out of range");
  int d = space.site_dim(site);

  Matrix local;
  switch (label) {
    case SiteOp::id:
      local = Matrix::Identity(d, d);
      break;
    case SiteOp::n: {
      local = Matrix::Zero(d, d);
      for (int l = 0; l < d; ++l) local(l, l) = static_cast<double>(l);
      break;
    }
    default: {
      // Qubit operators act on the {|0>,|1>} subspace of larger sites.
      local = Matrix::Zero(d, d);
      local.topLeftCorner(2, 2) = qubit_block(label);
      break;
    }
  }

  Matrix full = Matrix::Identity(1, 1);
  for (int s = 0; s < space.num_sites(); ++s) {
    int ds = space.site_dim(s);
    full = kron(full, s == site ? local : Matrix::Identity(ds, ds));
  }
  return Operator(space, std::move(full));
}

Complex expectation(const QuantumState& state, const Operator& op) {
  if (state.space() != op.space) throw std::invalid_argument("expectation: space mismatch");
  if (state.kind() == StateKind::pure) {
    const Vector& psi = state.vector();
    return (psi.adjoint() * (op.mat * psi))(0, 0);
  }
  return (state.density_matrix() * op.mat).trace();
}

double fidelity(const QuantumState& state, const QuantumState& target) {
  if (state.space() != target.space()) throw std::invalid_argument("fidelity: space mismatch");
  if (state.kind() == StateKind::pure && target.kind() == StateKind::pure) {
    Complex ov = (state.vector().adjoint() * target.vector())(0, 0);
    return std::norm(ov);
  }
  if (state.kind() == StateKind::pure) {
    const Vector& psi = state.vector();
    return ((psi.adjoint() * (target.density_matrix() * psi))(0, 0)).real();
  }
  if (target.kind() == StateKind::pure) return fidelity(target, state);

  // Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
  Eigen::SelfAdjointEigenSolver<Matrix> es(state.density_matrix());
  Vector sq = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Matrix sqrt_rho = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().adjoint();
  Matrix inner = sqrt_rho * target.density_matrix() * sqrt_rho;
  Eigen::SelfAdjointEigenSolver<Matrix> es2(inner, Eigen::EigenvaluesOnly);
  double tr = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return tr * tr;
}

Operator matrix_exponential_propagator(const Operator& h, double t_ns) {
  if (!h.is_hermitian()) throw std::invalid_argument("matrix_exponential_propagator: non-Hermitian input");
  Eigen::SelfAdjointEigenSolver<Matrix> es(h.mat);
  Vector phases(h.dim());
  for (int k = 0; k < h.dim(); ++k) phases(k) = std::exp(Complex(0.0, -es.eigenvalues()(k) * t_ns));
  Matrix u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  return Operator(h.space, std::move(u));
}

QuantumState apply(const Operator& u, const QuantumState& state) {
  if (state.space() != u.space) throw std::invalid_argument("apply: space mismatch");
  if (state.kind() == StateKind::pure) {
    Vector psi = u.mat * state.vector();
    psi /= psi.norm();
    return QuantumState::pure(state.space(), std::move(psi));
  }
  Matrix rho = u.mat * state.density_matrix() * u.mat.adjoint();
  return QuantumState::mixed(state.space(), std::move(rho));
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace floq::qop
