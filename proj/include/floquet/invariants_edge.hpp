#pragma once

// Edge invariants on a cylinder (one open axis), traced over one half-window:
//
//   Ch~_{j}(W) = i T~((W* - 1) grad_j W)
//   N_theta    = -2 pi i T~(G'_theta(U^) U^* grad_j U^)
//
// j is the periodic axis along the edge.

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "floquet/errors.hpp"
#include "floquet/gap_function.hpp"
#include "floquet/invariants_bulk.hpp"
#include "floquet/lattice.hpp"
#include "floquet/spectral.hpp"

namespace floquet {

inline constexpr double deep_bulk_tolerance = 1e-6;

/// Largest absolute row sum of A over the central quarter of the open axis,
/// i.e. sites at distance >= 3L/8 from both edges.
inline double deep_bulk_defect(const Matrix& a, const Geometry& g) {
  if (!g.is_cylinder()) throw UnsupportedGeometry("deep-bulk rows are defined on a cylinder");
  const int L = g.extent(g.open_axis());
  const auto c = g.coordinates(g.open_axis());
  double worst = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    const int x = c[static_cast<std::size_t>(i)];
    if (8 * x < 3 * L || 8 * (L - 1 - x) < 3 * L) continue;
    worst = std::max(worst, a.row(i).cwiseAbs().sum());
  }
  return worst;
}

/// The periodic axis along the boundary of a 2D cylinder.
inline int edge_axis(const Geometry& g) {
  if (!g.is_cylinder()) throw UnsupportedGeometry("edge invariants need a cylinder");
  if (g.dimension() != 2) throw UnsupportedGeometry("edge invariants are implemented for d = 2");
  return g.open_axis() == 2 ? 1 : 2;
}

struct EdgeUnitary {
  LatticeOperator W;
  double bulk_defect = 0.0;  ///< deep-bulk row-sum bound of W - 1
  bool reliable() const noexcept { return bulk_defect < deep_bulk_tolerance; }
};

/// e^{-2 pi i G(U^)}. With a bulk spectrum, every gap of `gf` must be a bulk gap.
inline EdgeUnitary exp_map_unitary(const QuasiEnergySpectrum& edge, const GapFunction& gf,
                                   const QuasiEnergySpectrum* bulk = nullptr) {
  if (bulk) {
    require_in_gap(*bulk, gf.theta());
    if (gf.kind() == GapFunction::Kind::StepPair) require_in_gap(*bulk, gf.theta_prime());
  }
  LatticeOperator w = unitary_function(edge, [&](double phi) { return gf.exp_phase(phi); });
  Matrix d = w.matrix();
  d.diagonal().array() -= 1.0;
  return {w, deep_bulk_defect(d, edge.geometry)};
}

struct EdgeResult {
  ChernResult chern;
  EdgeWindow window = EdgeWindow::Lower;
  double bulk_defect = 0.0;
  bool reliable = true;
};

/// Ch~_J(W) for J = {j}, j the edge axis.
inline EdgeResult edge_odd_chern(const EdgeUnitary& w, const IndexSet& j, EdgeWindow window = EdgeWindow::Lower) {
  const Geometry& g = w.W.geometry();
  const int axis = edge_axis(g);
  if (j.size() != 1 || j.labels()[0] != axis)
    throw DomainError("edge odd Chern index set must be {" + std::to_string(axis) + "}, got " + j.str());
  const Eigen::VectorXd wt = detail::window_weights(g, window);
  Matrix lead = w.W.matrix().adjoint();
  lead.diagonal().array() -= 1.0;
  const Matrix dw = detail::nc_derivative(w.W.matrix(), g, axis);
  const cplx raw = cplx(0.0, 1.0) * detail::weighted_trace_of_product(lead, dw, &wt) / detail::boundary_length(g);
  return {ChernResult::from_raw(raw, j, g), window, w.bulk_defect, w.reliable()};
}

/// N_theta with the bump `gf` centred in a gap.
inline EdgeResult edge_channel_count(const LatticeOperator& uhat, const QuasiEnergySpectrum& s, const GapFunction& gf,
                                     EdgeWindow window = EdgeWindow::Lower, const QuasiEnergySpectrum* bulk = nullptr) {
  if (gf.kind() != GapFunction::Kind::Bump) throw DomainError("edge channel count needs a bump gap function");
  const Geometry& g = uhat.geometry();
  const int axis = edge_axis(g);
  if (bulk) require_in_gap(*bulk, gf.theta());
  const LatticeOperator gp = unitary_function(s, [&](double phi) { return gf.derivative(phi); });
  const Matrix a = gp.matrix() * uhat.matrix().adjoint();
  const Matrix du = detail::nc_derivative(uhat.matrix(), g, axis);
  const Eigen::VectorXd wt = detail::window_weights(g, window);
  const cplx raw = cplx(0.0, -two_pi) * detail::weighted_trace_of_product(a, du, &wt) / detail::boundary_length(g);
  const double defect = deep_bulk_defect(gp.matrix(), g);
  return {ChernResult::from_raw(raw, IndexSet{axis}, g), window, defect, defect < deep_bulk_tolerance};
}

/// Convenience: bump sized to `fraction` of the room in the edge spectrum's gap at theta,
/// taken from the bulk gap when a bulk spectrum is given.
inline EdgeResult edge_channel_count(const LatticeOperator& uhat, const QuasiEnergySpectrum& s, double theta,
                                     double fraction, EdgeWindow window, const QuasiEnergySpectrum& bulk) {
  return edge_channel_count(uhat, s, GapFunction::bump_in_gap(bulk, theta, fraction), window, &bulk);
}

struct IdentityCheck {
  cplx lhs;
  cplx rhs;
  double residual;
};

/// |Ch_{12}(P_[theta,theta']) - (N_theta - N_theta')|.
inline IdentityCheck bbc_band_check(const ChernResult& band, const ChernResult& n_theta, const ChernResult& n_theta_prime) {
  const cplx rhs = n_theta.raw - n_theta_prime.raw;
  return {band.raw, rhs, std::abs(band.raw - rhs)};
}

/// |Ch_{012}(V_theta) - N_theta|.
inline IdentityCheck bbc_anomalous_check(const ChernResult& winding, const ChernResult& n_theta) {
  return {winding.raw, n_theta.raw, std::abs(winding.raw - n_theta.raw)};
}

}  // namespace floquet
