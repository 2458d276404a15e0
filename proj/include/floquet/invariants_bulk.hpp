#pragma once

// Bulk invariants on the torus.
//
//   Ch_I(P) = (2 i pi)^{n/2} / (n/2)!  sum_rho (-1)^rho T(P grad_rho1 P ... grad_rhon P)
//   Ch_J(V) = i (i pi)^{(m-1)/2} / m!!  sum_rho (-1)^rho T^s((V* - 1) grad_rho1 V grad_rho2 V* grad_rho3 V ...)
//
// with T the trace per site, T^s = int_0^{2pi} dt/2pi T, and grad_0 = d/dt.
// With these conventions Ch_{0}(e^{iqt}) = -q.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "floquet/chern_sum.hpp"
#include "floquet/errors.hpp"
#include "floquet/evolution.hpp"
#include "floquet/lattice.hpp"
#include "floquet/quadrature.hpp"
#include "floquet/spectral.hpp"

namespace floquet {

inline constexpr double quantization_threshold = 0.1;

struct ChernResult {
  double value = 0.0;
  cplx raw{};
  double quantization_residual = 0.0;
  bool quantized = false;
  IndexSet index_set;
  std::string volume;
  std::string model;
  std::uint64_t seed = 0;

  static ChernResult from_raw(cplx raw, IndexSet j, const Geometry& g) {
    ChernResult r;
    r.raw = raw;
    const double nearest = std::round(raw.real());
    r.quantization_residual = std::abs(raw - nearest);
    r.quantized = r.quantization_residual < quantization_threshold;
    r.value = r.quantized ? nearest : raw.real();
    r.index_set = std::move(j);
    r.volume = g.describe();
    return r;
  }
};

struct TimeQuadrature {
  int nodes_per_segment = 16;
};

namespace detail {

inline double double_factorial(int m) {
  double r = 1.0;
  for (int k = m; k > 1; k -= 2) r *= k;
  return r;
}

inline cplx even_prefactor(std::size_t n) {
  if (n == 0) return 1.0;
  cplx p = 1.0;
  for (std::size_t k = 0; k < n / 2; ++k) p *= cplx(0.0, two_pi) / static_cast<double>(k + 1);
  return p;
}

inline cplx odd_prefactor(std::size_t m) {
  cplx p(0.0, 1.0);
  for (std::size_t k = 0; k < (m - 1) / 2; ++k) p *= cplx(0.0, std::numbers::pi);
  return p / double_factorial(static_cast<int>(m));
}

inline void check_odd_set(const IndexSet& j, const Geometry& g) {
  if (j.is_even() || !j.contains_time()) throw DomainError("odd Chern numbers need an odd index set containing 0, got " + j.str());
  if (j.size() > 3) throw DomainError("odd Chern numbers are supported for |J| in {1, 3}");
  j.check_dimension(g.dimension());
  if (j.size() > 1 && !g.is_torus()) throw UnsupportedGeometry("spatial derivatives in bulk invariants need a torus");
}

/// Unnormalized sum_nodes w * sum_rho (-1)^rho Tr(...) over one segment of a loop.
inline cplx segment_winding_sum(const EvolutionPath& path, std::size_t k, const IndexSet& j, const QuadratureRule& rule) {
  const auto& seg = path.protocol().segments()[k];
  const Generator& gen = *seg.generator;
  if (gen.shape() == Generator::Shape::Zero) return 0.0;  // every term has one d/dt factor
  const Geometry& g = path.geometry();
  const Matrix& start = path.checkpoints()[k];
  const Index n = start.rows();
  const bool diag = gen.shape() == Generator::Shape::Diagonal;
  const HermitianSpectrum* es = diag ? nullptr : &gen.eigen();
  const Eigen::VectorXd eps = diag ? Eigen::VectorXd(gen.matrix().diagonal().real()) : es->values;
  const Matrix m = diag ? start : Matrix(es->vectors.adjoint() * start);

  cplx total{};
  for (const auto& node : map_rule(rule, seg.duration)) {
    Eigen::VectorXcd ph(n), dph(n);
    for (Index i = 0; i < n; ++i) {
      ph(i) = std::polar(1.0, -seg.scale * eps(i) * node.offset);
      dph(i) = cplx(0.0, -seg.scale * eps(i)) * ph(i);
    }
    Matrix v, dv;
    if (diag) {
      v = ph.asDiagonal() * m;
      dv = dph.asDiagonal() * m;
    } else {
      v = (es->vectors * ph.asDiagonal()) * m;
      dv = (es->vectors * dph.asDiagonal()) * m;
    }
    std::vector<Matrix> spatial;
    spatial.reserve(j.size());
    for (int label : j.labels())
      if (label != 0) spatial.push_back(detail::nc_derivative(v, g, label));
    std::vector<const Matrix*> factors{&dv};
    for (const auto& s : spatial) factors.push_back(&s);
    Matrix lead = v.adjoint();
    lead.diagonal().array() -= 1.0;
    PermutationTerms t{&lead, factors, true, nullptr};
    total += node.weight * permutation_trace(t);
  }
  return total;
}

inline void require_loop(const EvolutionPath& loop, double tol) {
  Matrix d = loop.endpoint();
  d.diagonal().array() -= 1.0;
  const double defect = norm_bound(d);
  if (!(defect < tol)) throw PreconditionError("evolution is not a loop: ||V(2pi) - 1|| <= " + std::to_string(defect));
}

inline cplx normalize_winding(cplx sum, const IndexSet& j, const Geometry& g) {
  return odd_prefactor(j.size()) * sum / (two_pi * static_cast<double>(g.sites()));
}

}  // namespace detail

/// Ch_I(P) for |I| in {0, 2}.
inline ChernResult even_chern(const LatticeOperator& p, const IndexSet& i) {
  const Geometry& g = p.geometry();
  if (!i.is_even()) throw DomainError("even Chern numbers need an even index set, got " + i.str());
  if (i.contains_time()) throw DomainError("even Chern index sets are spatial");
  if (i.size() > 2) throw DomainError("even Chern numbers are supported for |I| in {0, 2}");
  if (!g.is_torus()) throw UnsupportedGeometry("even Chern numbers need a torus");
  i.check_dimension(g.dimension());
  std::vector<Matrix> d;
  for (int label : i.labels()) d.push_back(detail::nc_derivative(p.matrix(), g, label));
  std::vector<const Matrix*> f;
  for (const auto& m : d) f.push_back(&m);
  detail::PermutationTerms t{&p.matrix(), f, false, nullptr};
  const cplx raw = detail::even_prefactor(i.size()) * detail::permutation_trace(t) / static_cast<double>(g.sites());
  return ChernResult::from_raw(raw, i, g);
}

inline ChernResult even_chern(const BandProjection& p, const IndexSet& i) { return even_chern(p.P, i); }

/// Ch_J of a unitary loop t -> V(t) given as an evolution path on [0, 2pi].
inline ChernResult odd_chern_time(const EvolutionPath& loop, const IndexSet& j, TimeQuadrature q = {}, double loop_tol = 1e-6) {
  const Geometry& g = loop.geometry();
  detail::check_odd_set(j, g);
  if (std::abs(loop.period() - two_pi) > 1e-12) throw DomainError("loop must be parametrized over [0, 2pi]");
  detail::require_loop(loop, loop_tol);
  const auto rule = gauss_legendre(q.nodes_per_segment);
  cplx sum{};
  for (std::size_t k = 0; k < loop.protocol().size(); ++k) sum += detail::segment_winding_sum(loop, k, j, rule);
  return ChernResult::from_raw(detail::normalize_winding(sum, j, g), j, g);
}

inline ChernResult odd_chern_time(const PeriodizedPath& v, const IndexSet& j, TimeQuadrature q = {}) {
  return odd_chern_time(v.loop, j, q);
}

struct PeriodizedWinding {
  double theta;
  ChernResult result;
  double endpoint_defect;
};

/// Ch_J(V_theta) for several gaps at once; the doubled-drive half is shared.
inline std::vector<PeriodizedWinding> periodized_windings(const EvolutionPath& path, const QuasiEnergySpectrum& floquet,
                                                          const std::vector<double>& thetas, const IndexSet& j,
                                                          TimeQuadrature q = {}) {
  const Geometry& g = path.geometry();
  detail::check_odd_set(j, g);
  const auto rule = gauss_legendre(q.nodes_per_segment);
  std::vector<PeriodizedWinding> out;
  if (thetas.empty()) return out;
  std::vector<PeriodizedPath> loops;
  for (double th : thetas) loops.push_back(periodize(path, th, floquet));
  const EvolutionPath& first = loops.front().loop;
  cplx drive{};
  const std::size_t drive_segments = first.protocol().size() - 1;
  for (std::size_t k = 0; k < drive_segments; ++k) drive += detail::segment_winding_sum(first, k, j, rule);
  for (const auto& v : loops) {
    detail::require_loop(v.loop, 1e-6);
    const cplx sum = drive + detail::segment_winding_sum(v.loop, drive_segments, j, rule);
    out.push_back({v.theta, ChernResult::from_raw(detail::normalize_winding(sum, j, g), j, g), v.endpoint_defect()});
  }
  return out;
}

struct GapDifference {
  ChernResult winding_theta;
  ChernResult winding_theta_prime;
  ChernResult band;
  double residual;
};

/// |[Ch_{0uI}(V_theta') - Ch_{0uI}(V_theta)] - Ch_I(P_[theta,theta'])|.
inline GapDifference gap_difference_check(const EvolutionPath& path, const QuasiEnergySpectrum& floquet, double theta,
                                          double theta_prime, const IndexSet& i, TimeQuadrature q = {}) {
  std::vector<int> jl{0};
  for (int l : i.labels()) jl.push_back(l);
  const IndexSet j(jl);
  const auto w = periodized_windings(path, floquet, {theta, theta_prime}, j, q);
  const auto band = even_chern(band_projection(floquet, theta, theta_prime), i);
  const double res = std::abs((w[1].result.raw - w[0].result.raw) - band.raw);
  return {w[0].result, w[1].result, band, res};
}

inline GapDifference gap_difference_check(const EvolutionPath& path, double theta, double theta_prime, const IndexSet& i,
                                          TimeQuadrature q = {}) {
  return gap_difference_check(path, floquet_spectrum(path), theta, theta_prime, i, q);
}

/// Translation-invariant model in Bloch form: k -> F x F Floquet matrix.
struct BlochModel {
  int fiber = 2;
  std::function<Matrix(double, double)> floquet;
  bool disordered = false;
};

/// Plaquette (link-variable) lattice Chern number of the band with phases in
/// the arc (theta, theta'), on an n x n Brillouin-zone grid. Links are
/// determinants of band overlaps, so degenerate multi-band selections work.
inline int bloch_chern_oracle(const BlochModel& model, double theta, double theta_prime, int n) {
  if (model.disordered) throw UnsupportedGeometry("the Bloch oracle needs a translation-invariant model");
  if (n < 2) throw DomainError("k-grid needs at least 2 points per axis");
  std::vector<Matrix> band(static_cast<std::size_t>(n * n));
  Index rank = -1;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const auto s = eigen_unitary(model.floquet(two_pi * a / n, two_pi * b / n));
      const auto sel = phases_in_arc(s, theta, theta_prime);
      if (rank >= 0 && static_cast<Index>(sel.size()) != rank) throw GapViolation("band rank changes across the Brillouin zone");
      rank = static_cast<Index>(sel.size());
      Matrix v(s.vectors.rows(), rank);
      for (Index c = 0; c < rank; ++c) v.col(c) = s.vectors.col(sel[static_cast<std::size_t>(c)]);
      band[static_cast<std::size_t>(a * n + b)] = std::move(v);
    }
  if (rank == 0) return 0;
  auto at = [&](int a, int b) -> const Matrix& { return band[static_cast<std::size_t>(((a % n) * n) + (b % n))]; };
  auto link = [](const Matrix& x, const Matrix& y) {
    const cplx d = (x.adjoint() * y).determinant();
    return d / std::abs(d);
  };
  double flux = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const cplx u = link(at(a, b), at(a + 1, b)) * link(at(a + 1, b), at(a + 1, b + 1)) *
                     std::conj(link(at(a, b + 1), at(a + 1, b + 1))) * std::conj(link(at(a, b), at(a, b + 1)));
      flux += std::arg(u);
    }
  return static_cast<int>(std::lround(-flux / two_pi));
}

}  // namespace floquet
