#pragma once

// Finite-volume lattice: geometries, operators over (sites x fiber), magnetic
// translations, non-commutative derivatives and the bulk/boundary traces.
//
// Basis convention. A basis vector |n, l> with site coordinates
// n = (n_1, ..., n_d), 0 <= n_j < L_j, and fiber index 0 <= l < F has index
//
//     site(n) = ((n_1 * L_2 + n_2) * L_3 + ...)       (row-major, n_d fastest)
//     index   = site(n) * F + l                        (fiber fastest)
//
// Axes are labelled 1..d; label 0 is reserved for time in index sets.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "floquet/errors.hpp"

namespace floquet {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Upper bound on the operator 2-norm: sqrt(||A||_1 * ||A||_inf).
inline double norm_bound(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  const double col = a.cwiseAbs().colwise().sum().maxCoeff();
  const double row = a.cwiseAbs().rowwise().sum().maxCoeff();
  return std::sqrt(col * row);
}

enum class Boundary { Torus, Cylinder };

enum class EdgeWindow { Lower, Upper };

inline const char* to_string(EdgeWindow w) { return w == EdgeWindow::Lower ? "lower" : "upper"; }

class Geometry {
 public:
  Geometry() = default;

  /// Periodic box. `field` is the antisymmetric d x d matrix B in row-major
  /// order (radians of flux per plaquette); empty means B = 0.
  static Geometry torus(std::vector<int> extents, int fiber_dim = 1, std::vector<double> field = {}) {
    Geometry g(std::move(extents), fiber_dim, Boundary::Torus, 0);
    g.set_field(std::move(field));
    return g;
  }

  /// Box that is open along `open_axis` (1-based) and periodic elsewhere.
  static Geometry cylinder(std::vector<int> extents, int fiber_dim, int open_axis) {
    Geometry g(std::move(extents), fiber_dim, Boundary::Cylinder, open_axis);
    if (open_axis < 1 || open_axis > g.dimension())
      throw DomainError("cylinder open axis " + std::to_string(open_axis) + " out of range");
    return g;
  }

  /// No spatial axes, one site carrying an n-dimensional fiber. Used for bare matrices.
  static Geometry single_site(int fiber_dim) {
    if (fiber_dim < 1) throw DomainError("fiber dimension must be >= 1");
    Geometry g;
    g.fiber_ = fiber_dim;
    return g;
  }

  int dimension() const noexcept { return static_cast<int>(extents_.size()); }
  const std::vector<int>& extents() const noexcept { return extents_; }
  int extent(int axis) const {
    check_axis(axis);
    return extents_[axis - 1];
  }
  int fiber_dim() const noexcept { return fiber_; }
  Boundary boundary() const noexcept { return boundary_; }
  bool is_torus() const noexcept { return boundary_ == Boundary::Torus; }
  bool is_cylinder() const noexcept { return boundary_ == Boundary::Cylinder; }
  /// 1-based open axis of a cylinder, 0 on a torus.
  int open_axis() const noexcept { return open_axis_; }

  /// B_{ij} with 1-based axes.
  double field(int i, int j) const {
    check_axis(i);
    check_axis(j);
    return field_.empty() ? 0.0 : field_[(i - 1) * dimension() + (j - 1)];
  }
  const std::vector<double>& field_matrix() const noexcept { return field_; }
  bool has_field() const noexcept {
    return std::any_of(field_.begin(), field_.end(), [](double b) { return b != 0.0; });
  }

  Index sites() const noexcept {
    return std::accumulate(extents_.begin(), extents_.end(), Index{1}, std::multiplies<>());
  }
  Index dim() const noexcept { return sites() * fiber_; }

  /// Coordinate n_axis of a basis index.
  int coordinate(Index basis_index, int axis) const {
    check_axis(axis);
    Index s = basis_index / fiber_;
    for (int j = dimension(); j > axis; --j) s /= extents_[j - 1];
    return static_cast<int>(s % extents_[axis - 1]);
  }

  /// All coordinates along `axis`, one entry per basis index.
  std::vector<int> coordinates(int axis) const {
    std::vector<int> c(static_cast<std::size_t>(dim()));
    for (Index i = 0; i < dim(); ++i) c[static_cast<std::size_t>(i)] = coordinate(i, axis);
    return c;
  }

  Index basis_index(std::span<const int> n, int l = 0) const {
    if (static_cast<int>(n.size()) != dimension()) throw DomainError("coordinate rank mismatch");
    Index s = 0;
    for (int j = 0; j < dimension(); ++j) {
      const int L = extents_[j];
      s = s * L + ((n[j] % L) + L) % L;
    }
    return s * fiber_ + l;
  }

  /// True when the axis wraps around.
  bool periodic(int axis) const {
    check_axis(axis);
    return !(is_cylinder() && axis == open_axis_);
  }

  /// Signed displacement k along `axis`: minimal image in (-L/2, L/2] on
  /// periodic axes, the plain difference on the open axis.
  int displacement(int k, int axis) const {
    if (!periodic(axis)) return k;
    const int L = extents_[axis - 1];
    int r = ((k % L) + L) % L;
    if (2 * r > L) r -= L;
    return r;
  }

  Geometry with_open_axis(int axis) const {
    if (has_field()) throw UnsupportedGeometry("magnetic field is supported on the torus only");
    return cylinder(extents_, fiber_, axis);
  }
  Geometry as_torus() const { return torus(extents_, fiber_, field_); }

  std::string describe() const {
    std::ostringstream os;
    os << (is_torus() ? "torus " : "cylinder ");
    for (std::size_t j = 0; j < extents_.size(); ++j) os << (j ? "x" : "") << extents_[j];
    os << " fiber " << fiber_;
    if (is_cylinder()) os << " open " << open_axis_;
    return os.str();
  }

  bool operator==(const Geometry&) const = default;

 private:
  Geometry(std::vector<int> extents, int fiber, Boundary b, int open_axis)
      : extents_(std::move(extents)), fiber_(fiber), boundary_(b), open_axis_(open_axis) {
    if (extents_.empty() || extents_.size() > 2) throw DomainError("only d = 1 or d = 2 lattices are supported");
    for (int L : extents_)
      if (L < 2) throw DomainError("lattice extents must be >= 2");
    if (fiber_ < 1) throw DomainError("fiber dimension must be >= 1");
  }

  void check_axis(int axis) const {
    if (axis < 1 || axis > dimension())
      throw DomainError("spatial axis " + std::to_string(axis) + " out of range 1.." + std::to_string(dimension()));
  }

  void set_field(std::vector<double> b) {
    const int d = dimension();
    if (b.empty()) return;
    if (static_cast<int>(b.size()) != d * d) throw DomainError("magnetic field must be a d x d matrix");
    if (std::all_of(b.begin(), b.end(), [](double x) { return x == 0.0; })) return;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (std::abs(b[i * d + j] + b[j * d + i]) > 1e-12) throw DomainError("magnetic field must be antisymmetric");
    if (d == 2 && b[1] != 0.0) {
      const double flux = b[1] * extents_[0] * extents_[1];
      const double k = std::round(flux / two_pi);
      if (std::abs(flux - two_pi * k) > 1e-12 * std::max(1.0, std::abs(flux)))
        throw DomainError("flux quantization B12*L1*L2 in 2*pi*Z violated");
    }
    field_ = std::move(b);
  }

  std::vector<int> extents_;
  int fiber_ = 1;
  Boundary boundary_ = Boundary::Torus;
  int open_axis_ = 0;
  std::vector<double> field_;
};

/// Dense operator on the Hilbert space of a geometry. Immutable.
class LatticeOperator {
 public:
  LatticeOperator() = default;
  LatticeOperator(Geometry g, Matrix m) : geometry_(std::move(g)), matrix_(std::move(m)) {
    if (matrix_.rows() != geometry_.dim() || matrix_.cols() != geometry_.dim())
      throw DomainError("operator side " + std::to_string(matrix_.rows()) + " does not match Hilbert dimension " +
                        std::to_string(geometry_.dim()));
  }

  static LatticeOperator identity(const Geometry& g) { return {g, Matrix::Identity(g.dim(), g.dim())}; }
  static LatticeOperator zero(const Geometry& g) { return {g, Matrix::Zero(g.dim(), g.dim())}; }

  const Geometry& geometry() const noexcept { return geometry_; }
  const Matrix& matrix() const noexcept { return matrix_; }
  Index dim() const noexcept { return matrix_.rows(); }
  cplx operator()(Index r, Index c) const { return matrix_(r, c); }

  LatticeOperator adjoint() const { return {geometry_, matrix_.adjoint()}; }

  /// Bound on ||A - A*||.
  double hermiticity_defect() const { return norm_bound(matrix_ - matrix_.adjoint()); }
  /// Bound on ||A*A - 1||.
  double unitarity_defect() const {
    Matrix d = matrix_.adjoint() * matrix_;
    d.diagonal().array() -= 1.0;
    return norm_bound(d);
  }

 private:
  Geometry geometry_;
  Matrix matrix_;
};

inline LatticeOperator operator*(const LatticeOperator& a, const LatticeOperator& b) {
  if (!(a.geometry() == b.geometry())) throw DomainError("geometry mismatch in operator product");
  return {a.geometry(), a.matrix() * b.matrix()};
}

/// Strictly increasing axis labels from {0 (time), 1, ..., d}.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::initializer_list<int> labels) : IndexSet(std::vector<int>(labels)) {}
  explicit IndexSet(std::vector<int> labels) : labels_(std::move(labels)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] < 0) throw DomainError("index labels must be non-negative");
      if (i > 0 && labels_[i] <= labels_[i - 1]) throw DomainError("index labels must be strictly increasing");
    }
  }

  const std::vector<int>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  bool contains_time() const noexcept { return !labels_.empty() && labels_.front() == 0; }
  bool is_even() const noexcept { return labels_.size() % 2 == 0; }

  /// Every spatial label must be an axis of a d-dimensional lattice.
  void check_dimension(int d) const {
    for (int j : labels_)
      if (j > d) throw DomainError("index label " + std::to_string(j) + " exceeds dimension " + std::to_string(d));
  }

  std::string str() const {
    std::string s = "{";
    for (std::size_t i = 0; i < labels_.size(); ++i) s += (i ? "," : "") + std::to_string(labels_[i]);
    return s + "}";
  }

  bool operator==(const IndexSet&) const = default;

 private:
  std::vector<int> labels_;
};

/// Magnetic translation V_j along axis j on a torus. With B = 0 this is the
/// cyclic shift S_j |n, l> = |n + e_j, l>. In d = 2 with b = B_12 the gauge is
///   V_1 |n> = e^{i b n_2} |n + e_1>,
///   V_2 |n> = |n + e_2>, with phase e^{-i b L_2 n_1} on the wrap n_2 = L_2 - 1,
/// so that V_1 V_2 = e^{i B_12} V_2 V_1 holds exactly under flux quantization.
inline LatticeOperator build_translation(const Geometry& g, int axis) {
  if (!g.is_torus()) throw UnsupportedGeometry("translations are provided on the torus only");
  if (axis < 1 || axis > g.dimension()) throw DomainError("translation axis out of range");
  const Index n = g.dim();
  const int F = g.fiber_dim();
  const double b = g.dimension() == 2 ? g.field(1, 2) : 0.0;
  Matrix m = Matrix::Zero(n, n);
  std::vector<int> coords(static_cast<std::size_t>(g.dimension()));
  for (Index s = 0; s < g.sites(); ++s) {
    for (int j = 1; j <= g.dimension(); ++j) coords[j - 1] = g.coordinate(s * F, j);
    double phase = 0.0;
    if (b != 0.0) {
      if (axis == 1) phase = b * coords[1];
      if (axis == 2 && coords[1] == g.extent(2) - 1) phase = -b * g.extent(2) * coords[0];
    }
    std::vector<int> target = coords;
    target[axis - 1] += 1;
    const Index to = g.basis_index(target);
    for (int l = 0; l < F; ++l) m(to + l, s * F + l) = std::polar(1.0, phase);
  }
  return {g, std::move(m)};
}

/// Position operator X_j restricted to the box (plain coordinates, no wrap).
inline LatticeOperator position_operator(const Geometry& g, int axis) {
  const auto c = g.coordinates(axis);
  Matrix m = Matrix::Zero(g.dim(), g.dim());
  for (Index i = 0; i < g.dim(); ++i) m(i, i) = c[static_cast<std::size_t>(i)];
  return {g, std::move(m)};
}

namespace detail {

/// (grad_j A)_{mn} = i * delta_j(m_j - n_j) * A_{mn}.
inline Matrix nc_derivative(const Matrix& a, const Geometry& g, int axis) {
  if (axis == 0) throw DomainError("time derivatives are taken along evolution paths, not by nc_derivative");
  if (axis < 0 || axis > g.dimension()) throw DomainError("derivative axis out of range");
  const auto c = g.coordinates(axis);
  const Index n = a.rows();
  Matrix out(n, n);
  for (Index col = 0; col < n; ++col) {
    const int cn = c[static_cast<std::size_t>(col)];
    for (Index row = 0; row < n; ++row) {
      const int d = g.displacement(c[static_cast<std::size_t>(row)] - cn, axis);
      out(row, col) = d == 0 ? cplx{} : cplx{0.0, static_cast<double>(d)} * a(row, col);
    }
  }
  return out;
}

/// Diagonal weights selecting one edge window of a cylinder.
inline Eigen::VectorXd window_weights(const Geometry& g, EdgeWindow w) {
  if (!g.is_cylinder()) throw UnsupportedGeometry("edge windows need a cylinder geometry");
  const int L = g.extent(g.open_axis());
  Eigen::VectorXd wt(g.dim());
  for (Index i = 0; i < g.dim(); ++i) {
    const bool lower = 2 * g.coordinate(i, g.open_axis()) < L;
    wt(i) = (lower == (w == EdgeWindow::Lower)) ? 1.0 : 0.0;
  }
  return wt;
}

/// Sum_i w_i (X Y)_{ii} without forming X Y.
inline cplx weighted_trace_of_product(const Matrix& x, const Matrix& y, const Eigen::VectorXd* weights = nullptr) {
  const Index n = x.rows();
  cplx acc{};
  for (Index i = 0; i < n; ++i) {
    if (weights && (*weights)(i) == 0.0) continue;
    const cplx v = x.row(i).transpose().cwiseProduct(y.col(i)).sum();
    acc += weights ? (*weights)(i) * v : v;
  }
  return acc;
}

inline double boundary_length(const Geometry& g) {
  double len = 1.0;
  for (int j = 1; j <= g.dimension(); ++j)
    if (j != g.open_axis()) len *= g.extent(j);
  return len;
}

}  // namespace detail

/// Non-commutative derivative along a spatial axis.
inline LatticeOperator nc_derivative(const LatticeOperator& a, int axis) {
  return {a.geometry(), detail::nc_derivative(a.matrix(), a.geometry(), axis)};
}

/// Trace per unit volume: Tr(A) / number of sites (summed over the fiber).
inline cplx trace_per_volume(const LatticeOperator& a) {
  if (!a.geometry().is_torus()) throw UnsupportedGeometry("trace per unit volume needs a torus");
  return a.matrix().trace() / static_cast<double>(a.geometry().sites());
}

/// Trace per unit length along the boundary, summed over one half-window
/// of the open axis.
inline cplx boundary_trace(const LatticeOperator& a, EdgeWindow window = EdgeWindow::Lower) {
  const Geometry& g = a.geometry();
  const Eigen::VectorXd w = detail::window_weights(g, window);
  cplx acc{};
  for (Index i = 0; i < g.dim(); ++i) acc += w(i) * a(i, i);
  return acc / detail::boundary_length(g);
}

}  // namespace floquet
