#pragma once

// Spectral calculus for unitaries and Hermitian generators.
//
// Eigenphases live in [0, 2pi); a phase within 1e-12 of 2pi is mapped to 0.
// Unitary spectra come from a complex Schur decomposition (LAPACK zgees): for
// a normal matrix the Schur vectors are orthonormal eigenvectors.

#include <complex>
#ifndef lapack_complex_float
#define lapack_complex_float std::complex<float>
#endif
#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "floquet/errors.hpp"
#include "floquet/lattice.hpp"

namespace floquet {

/// Wrap an angle into [0, 2pi), snapping 2pi - 1e-12 .. 2pi to 0.
inline double wrap_phase(double phi) {
  double r = std::fmod(phi, two_pi);
  if (r < 0) r += two_pi;
  if (r >= two_pi - 1e-12) r = 0.0;
  return r;
}

/// Signed angle difference in (-pi, pi].
inline double angle_diff(double a, double b) {
  double d = std::remainder(a - b, two_pi);
  if (d <= -std::numbers::pi) d += two_pi;
  return d;
}

inline double circular_distance(double a, double b) { return std::abs(angle_diff(a, b)); }

/// Distance an angle must keep from every eigenphase to count as "in the gap".
inline double gap_tolerance(double gap_width) { return std::max(1e-8, 1e-3 * gap_width); }

struct QuasiEnergySpectrum {
  Geometry geometry;
  Eigen::VectorXd phases;  ///< sorted ascending in [0, 2pi)
  Matrix vectors;          ///< column k belongs to phases(k)

  Index size() const noexcept { return phases.size(); }
};

struct HermitianSpectrum {
  Eigen::VectorXd values;  ///< ascending
  Matrix vectors;
};

inline HermitianSpectrum eigen_hermitian(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) throw PreconditionError("Hermitian eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

namespace detail {

inline QuasiEnergySpectrum sorted_spectrum(Geometry g, const Eigen::VectorXd& raw_phases, const Matrix& vecs) {
  const Index n = raw_phases.size();
  if (g.dim() != vecs.rows()) {
    if (g != Geometry{}) throw DomainError("spectrum geometry does not match the matrix size");
    g = Geometry::single_site(static_cast<int>(vecs.rows()));
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return raw_phases(a) < raw_phases(b); });
  QuasiEnergySpectrum s{std::move(g), Eigen::VectorXd(n), Matrix(vecs.rows(), n)};
  for (Index k = 0; k < n; ++k) {
    s.phases(k) = raw_phases(order[static_cast<std::size_t>(k)]);
    s.vectors.col(k) = vecs.col(order[static_cast<std::size_t>(k)]);
  }
  return s;
}

inline void require_unitary(const Matrix& u, double tol) {
  Matrix d = u.adjoint() * u;
  d.diagonal().array() -= 1.0;
  const double defect = norm_bound(d);
  if (!(defect < tol)) throw PreconditionError("operator is not unitary: ||U*U - 1|| <= " + std::to_string(defect));
}

}  // namespace detail

/// Eigendecomposition of a unitary matrix (any size; geometry only tags the result).
inline QuasiEnergySpectrum eigen_unitary(const Matrix& u, Geometry g = {}) {
  if (u.rows() != u.cols()) throw DomainError("eigen_unitary needs a square matrix");
  detail::require_unitary(u, 1e-8);
  const lapack_int n = static_cast<lapack_int>(u.rows());
  Matrix t = u;
  Matrix vs(n, n);
  Eigen::VectorXcd w(n);
  lapack_int sdim = 0;
  const lapack_int info =
      LAPACKE_zgees(LAPACK_COL_MAJOR, 'V', 'N', nullptr, n, t.data(), n, &sdim, w.data(), vs.data(), n);
  if (info != 0) throw PreconditionError("zgees failed with info = " + std::to_string(info));
  Eigen::VectorXd ph(n);
  for (lapack_int k = 0; k < n; ++k) ph(k) = wrap_phase(std::arg(w(k)));
  return detail::sorted_spectrum(std::move(g), ph, vs);
}

inline QuasiEnergySpectrum eigen_unitary(const LatticeOperator& u) { return eigen_unitary(u.matrix(), u.geometry()); }

/// Spectrum of e^{-i s H} from a Hermitian decomposition of H; skips the Schur step.
inline QuasiEnergySpectrum spectrum_of_exponential(const HermitianSpectrum& h, double s, Geometry g = {}) {
  Eigen::VectorXd ph(h.values.size());
  for (Index k = 0; k < ph.size(); ++k) ph(k) = wrap_phase(-s * h.values(k));
  return detail::sorted_spectrum(std::move(g), ph, h.vectors);
}

/// Open arc (lo, hi) free of spectrum; hi may exceed 2pi (read mod 2pi).
struct SpectralGap {
  double lo = 0.0;
  double hi = 0.0;

  double width() const noexcept { return hi - lo; }
  double center() const noexcept { return wrap_phase(0.5 * (lo + hi)); }
  /// True when theta lies strictly inside the arc.
  bool contains(double theta) const noexcept {
    const double a = wrap_phase(theta - lo);
    return a > 0.0 && a < width();
  }
};

/// Maximal arcs between cyclically consecutive eigenphases of width >= min_width,
/// sorted by center.
inline std::vector<SpectralGap> find_gaps(const QuasiEnergySpectrum& s, double min_width) {
  if (!(min_width > 0.0)) throw DomainError("min_width must be positive");
  std::vector<SpectralGap> gaps;
  const Index n = s.size();
  if (n == 0) return gaps;
  for (Index k = 0; k < n; ++k) {
    const double lo = s.phases(k);
    const double hi = (k + 1 < n) ? s.phases(k + 1) : s.phases(0) + two_pi;
    if (hi - lo >= min_width) gaps.push_back({lo, hi});
  }
  std::stable_sort(gaps.begin(), gaps.end(), [](const SpectralGap& a, const SpectralGap& b) { return a.center() < b.center(); });
  return gaps;
}

/// The spectral arc containing theta, or a GapViolation if theta sits on the spectrum.
inline SpectralGap gap_at(const QuasiEnergySpectrum& s, double theta) {
  const Index n = s.size();
  if (n == 0) return {wrap_phase(theta) - std::numbers::pi, wrap_phase(theta) + std::numbers::pi};
  const double th = wrap_phase(theta);
  const double* b = s.phases.data();
  const Index k = std::upper_bound(b, b + n, th) - b;  // first phase > th
  SpectralGap g = (k == 0) ? SpectralGap{s.phases(n - 1) - two_pi, s.phases(0)}
                  : (k == n) ? SpectralGap{s.phases(n - 1), s.phases(0) + two_pi}
                             : SpectralGap{s.phases(k - 1), s.phases(k)};
  const double tol = gap_tolerance(g.width());
  const double dist = std::min(circular_distance(th, g.lo), circular_distance(th, g.hi));
  if (!(dist > tol))
    throw GapViolation("angle " + std::to_string(theta) + " is within " + std::to_string(dist) +
                       " of the spectrum (tolerance " + std::to_string(tol) + ")");
  return g;
}

inline void require_in_gap(const QuasiEnergySpectrum& s, double theta) { (void)gap_at(s, theta); }

struct BandProjection {
  LatticeOperator P;
  double theta = 0.0;
  double theta_prime = 0.0;
  Index rank = 0;
};

/// Indices k with phase in the counterclockwise open arc (theta, theta').
inline std::vector<Index> phases_in_arc(const QuasiEnergySpectrum& s, double theta, double theta_prime) {
  double len = theta_prime - theta;
  if (len <= 0.0) len += two_pi * std::ceil(-len / two_pi + 1e-15);
  if (len > two_pi) throw DomainError("band arc longer than the full circle");
  std::vector<Index> sel;
  for (Index k = 0; k < s.size(); ++k) {
    const double a = wrap_phase(s.phases(k) - theta);
    if (a > 0.0 && a < len) sel.push_back(k);
  }
  return sel;
}

/// Spectral projection onto eigenphases in the arc from theta to theta'.
inline BandProjection band_projection(const QuasiEnergySpectrum& s, double theta, double theta_prime) {
  require_in_gap(s, theta);
  require_in_gap(s, theta_prime);
  const auto sel = phases_in_arc(s, theta, theta_prime);
  Matrix v(s.vectors.rows(), static_cast<Index>(sel.size()));
  for (std::size_t c = 0; c < sel.size(); ++c) v.col(static_cast<Index>(c)) = s.vectors.col(sel[c]);
  Matrix p = v * v.adjoint();
  return {LatticeOperator(s.geometry, std::move(p)), theta, theta_prime, static_cast<Index>(sel.size())};
}

/// Eigenvalues -phi~/2pi of h_theta, phi~ the representative in (theta - 2pi, theta].
inline Eigen::VectorXd branch_values(const QuasiEnergySpectrum& s, double theta) {
  require_in_gap(s, theta);
  Eigen::VectorXd v(s.size());
  for (Index k = 0; k < s.size(); ++k) {
    double r = std::fmod(theta - s.phases(k), two_pi);
    if (r < 0) r += two_pi;
    v(k) = -(theta - r) / two_pi;
  }
  return v;
}

/// Multiply column k of V by d_k and form V diag(d) V*.
template <class Vec>
Matrix reassemble(const Matrix& vectors, const Vec& diag) {
  Matrix vd = vectors * diag.asDiagonal();
  return vd * vectors.adjoint();
}

/// Effective Hamiltonian h_theta with U = exp(-2 pi i h_theta).
inline LatticeOperator branch_log(const QuasiEnergySpectrum& s, double theta) {
  return {s.geometry, reassemble(s.vectors, branch_values(s, theta).cast<cplx>().eval())};
}

/// f(U) = V f(D) V* with f evaluated on eigenphases.
template <class F>
LatticeOperator unitary_function(const QuasiEnergySpectrum& s, F&& f) {
  Eigen::VectorXcd d(s.size());
  for (Index k = 0; k < s.size(); ++k) d(k) = cplx(f(s.phases(k)));
  return {s.geometry, reassemble(s.vectors, d)};
}

}  // namespace floquet
