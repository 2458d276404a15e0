#pragma once

// Model zoo: the Chalker-Coddington walk, a driven two-band Chern insulator
// (QWZ form), and the trivial drive.
//
// Chalker-Coddington (fiber components 0 = up, 1 = down):
//   U(1) = [[ s S1, c ], [ c, -s S1* ]]      U(3) = [[ c, s S2 ], [ s S2*, -c ]]
//   U(2) = diag(e^{i lambda phi1}, e^{i lambda phi2}),  U(4) = diag(e^{i lambda phi3}, e^{i lambda phi4})
//   U = U(4) U(3) U(2) U(1),  s = sin(beta), c = cos(beta).
// Bloch form uses S_j -> e^{-i k_j}.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "floquet/errors.hpp"
#include "floquet/evolution.hpp"
#include "floquet/invariants_bulk.hpp"
#include "floquet/lattice.hpp"
#include "floquet/rng.hpp"
#include "floquet/spectral.hpp"

namespace floquet {

struct DisorderConfig {
  std::uint64_t seed = 0;
  double lambda = 0.0;
};

/// phi_field(n) uniform on [0, 2pi); field in 1..4, one draw per site.
inline Eigen::VectorXd disorder_field(const Geometry& g, const DisorderConfig& d, int field) {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(g.sites());
  if (d.lambda == 0.0) return phi;
  for (Index s = 0; s < g.sites(); ++s)
    phi(s) = two_pi * counter_uniform(d.seed, static_cast<std::uint64_t>(field), static_cast<std::uint64_t>(s));
  return phi;
}

namespace detail {

inline Matrix fiber_kron(Index sites, const Matrix& site_op, const Eigen::Matrix2cd& f) {
  // site_op is (sites*2)x(sites*2) acting equally on both fiber components
  const Index n = sites * 2;
  Matrix out = Matrix::Zero(n, n);
  for (Index c = 0; c < n; ++c)
    for (Index r = 0; r < n; ++r) {
      const cplx v = site_op(r, c);
      if (v == cplx{}) continue;
      const Index rs = r / 2, cs = c / 2;
      if (r % 2 != 0 || c % 2 != 0) continue;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          if (f(a, b) != cplx{}) out(rs * 2 + a, cs * 2 + b) += v * f(a, b);
    }
  return out;
}

inline Eigen::Matrix2cd e_(int a, int b) {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  m(a, b) = 1.0;
  return m;
}

}  // namespace detail

struct ChalkerCoddingtonSpec {
  double beta = std::numbers::pi / 8;
  DisorderConfig disorder;
};

struct ChalkerCoddington {
  ChalkerCoddingtonSpec spec;
  std::array<LatticeOperator, 4> steps;
  std::array<double, 4> cuts{};
  DrivingProtocol protocol;
  std::vector<WalkGenerator> generators;

  LatticeOperator floquet_product() const { return steps[3] * steps[2] * steps[1] * steps[0]; }
};

/// Bloch matrices of the four steps at lambda = 0.
inline std::array<Matrix, 4> chalker_coddington_bloch_steps(double beta, double k1, double k2) {
  const double s = std::sin(beta), c = std::cos(beta);
  const cplx z1 = std::polar(1.0, -k1), z2 = std::polar(1.0, -k2);
  Matrix u1(2, 2), u3(2, 2);
  u1 << s * z1, c, c, -s * std::conj(z1);
  u3 << c, s * z2, s * std::conj(z2), -c;
  return {u1, Matrix::Identity(2, 2), u3, Matrix::Identity(2, 2)};
}

inline BlochModel chalker_coddington_bloch(double beta) {
  return {2, [beta](double k1, double k2) {
            const auto u = chalker_coddington_bloch_steps(beta, k1, k2);
            return Matrix(u[3] * u[2] * u[1] * u[0]);
          }};
}

/// Default cut per step: centre of the widest gap of its lambda = 0 Bloch
/// spectrum sampled on a grid x grid Brillouin zone; ties go to the smallest centre.
inline std::array<double, 4> chalker_coddington_default_cuts(double beta, int grid = 64) {
  std::array<double, 4> cuts{};
  for (int step = 0; step < 4; ++step) {
    std::vector<double> ph;
    for (int a = 0; a < grid; ++a)
      for (int b = 0; b < grid; ++b) {
        const auto u = chalker_coddington_bloch_steps(beta, two_pi * a / grid, two_pi * b / grid);
        const auto s = eigen_unitary(u[static_cast<std::size_t>(step)]);
        for (Index k = 0; k < s.size(); ++k) ph.push_back(s.phases(k));
      }
    std::sort(ph.begin(), ph.end());
    QuasiEnergySpectrum all{Geometry{}, Eigen::Map<Eigen::VectorXd>(ph.data(), static_cast<Index>(ph.size())), Matrix()};
    cuts[static_cast<std::size_t>(step)] = largest_gap_center(all);
  }
  return cuts;
}

inline std::array<LatticeOperator, 4> chalker_coddington_steps(const Geometry& g, const ChalkerCoddingtonSpec& spec) {
  if (g.dimension() != 2) throw DomainError("Chalker-Coddington needs a 2D lattice");
  if (g.fiber_dim() != 2) throw DomainError("Chalker-Coddington needs fiber dimension 2");
  if (spec.beta < 0.0 || spec.beta > std::numbers::pi) throw DomainError("beta must lie in [0, pi]");
  if (spec.disorder.lambda < 0.0) throw DomainError("lambda must be >= 0");
  const double s = std::sin(spec.beta), c = std::cos(spec.beta);
  const Index sites = g.sites();
  const Matrix s1 = build_translation(g, 1).matrix();
  const Matrix s2 = build_translation(g, 2).matrix();
  const Matrix one = Matrix::Identity(g.dim(), g.dim());
  using detail::e_;
  using detail::fiber_kron;
  Matrix u1 = s * fiber_kron(sites, s1, e_(0, 0)) + c * fiber_kron(sites, one, e_(0, 1) + e_(1, 0)) -
              s * fiber_kron(sites, s1.adjoint(), e_(1, 1));
  Matrix u3 = c * fiber_kron(sites, one, e_(0, 0) - e_(1, 1)) + s * fiber_kron(sites, s2, e_(0, 1)) +
              s * fiber_kron(sites, s2.adjoint(), e_(1, 0));
  auto diag_step = [&](int fa, int fb) {
    const Eigen::VectorXd pa = disorder_field(g, spec.disorder, fa), pb = disorder_field(g, spec.disorder, fb);
    Matrix u = Matrix::Zero(g.dim(), g.dim());
    for (Index n = 0; n < sites; ++n) {
      u(2 * n, 2 * n) = std::polar(1.0, spec.disorder.lambda * pa(n));
      u(2 * n + 1, 2 * n + 1) = std::polar(1.0, spec.disorder.lambda * pb(n));
    }
    return u;
  };
  std::array<LatticeOperator, 4> out{LatticeOperator(g, std::move(u1)), LatticeOperator(g, diag_step(1, 2)),
                                     LatticeOperator(g, std::move(u3)), LatticeOperator(g, diag_step(3, 4))};
  for (int k = 0; k < 4; ++k) {
    const double defect = out[static_cast<std::size_t>(k)].unitarity_defect();
    if (!(defect < 1e-12)) throw PreconditionError("Chalker-Coddington step " + std::to_string(k + 1) + " not unitary");
  }
  return out;
}

/// Steps, branch cuts (defaults unless given) and the walk protocol on a torus.
inline ChalkerCoddington build_chalker_coddington(const Geometry& g, const ChalkerCoddingtonSpec& spec,
                                                  const std::array<double, 4>* cuts = nullptr) {
  ChalkerCoddington m;
  m.spec = spec;
  m.steps = chalker_coddington_steps(g, spec);
  m.cuts = cuts ? *cuts : chalker_coddington_default_cuts(spec.beta);
  std::vector<WalkStep> ws;
  for (int k = 0; k < 4; ++k)
    ws.push_back({m.steps[static_cast<std::size_t>(k)], PrincipalAt{m.cuts[static_cast<std::size_t>(k)]}});
  m.protocol = quantum_walk_protocol(ws, 1e-9, &m.generators);
  return m;
}

struct DrivenQWZSpec {
  double mass = 1.0;
  double hopping = 1.0;
  double margin = 1.01;
};

/// Static QWZ Hamiltonian H(k) = (u + t cos k1 + t cos k2) sz + t sin k1 sx + t sin k2 sy.
inline Matrix qwz_bloch_hamiltonian(const DrivenQWZSpec& spec, double k1, double k2) {
  const double t = spec.hopping;
  const double dz = spec.mass + t * std::cos(k1) + t * std::cos(k2);
  const double dx = t * std::sin(k1), dy = t * std::sin(k2);
  Matrix h(2, 2);
  h << dz, cplx(dx, -dy), cplx(dx, dy), -dz;
  return h;
}

/// Largest |E(k)| over a grid x grid Brillouin zone, times the margin.
inline double qwz_energy_scale(const DrivenQWZSpec& spec, int grid = 256) {
  double emax = 0.0;
  for (int a = 0; a < grid; ++a)
    for (int b = 0; b < grid; ++b) {
      const Matrix h = qwz_bloch_hamiltonian(spec, two_pi * a / grid, two_pi * b / grid);
      emax = std::max(emax, std::sqrt(std::norm(h(0, 0)) + std::norm(h(1, 0))));
    }
  return emax * spec.margin;
}

inline void check_qwz_spec(const DrivenQWZSpec& spec) {
  if (!(spec.hopping > 0.0)) throw DomainError("QWZ hopping must be positive");
  const double u = std::abs(spec.mass / spec.hopping);
  if (u < 1e-9 || std::abs(u - 2.0) < 1e-9) throw DomainError("QWZ mass sits at a gap-closing point (|u| in {0, 2})");
  if (!(spec.margin > 1.0)) throw DomainError("QWZ rescaling margin must exceed 1");
}

/// Rescaled single-band Hamiltonian 0.5 + 0.45 H / E*, E* from the Bloch maximum.
inline Matrix driven_qwz_bloch_hamiltonian(const DrivenQWZSpec& spec, double scale, double k1, double k2) {
  Matrix h = 0.45 / scale * qwz_bloch_hamiltonian(spec, k1, k2);
  h.diagonal().array() += 0.5;
  return h;
}

inline BlochModel driven_qwz_bloch(const DrivenQWZSpec& spec) {
  check_qwz_spec(spec);
  const double scale = qwz_energy_scale(spec);
  return {2, [spec, scale](double k1, double k2) {
            const auto e = eigen_hermitian(driven_qwz_bloch_hamiltonian(spec, scale, k1, k2));
            Eigen::VectorXcd d(2);
            for (int i = 0; i < 2; ++i) d(i) = std::polar(1.0, -two_pi * e.values(i));
            return reassemble(e.vectors, d);
          }};
}

struct DrivenQWZ {
  DrivenQWZSpec spec;
  double energy_scale = 1.0;
  LatticeOperator hamiltonian;  ///< rescaled, spectrum in (0.05, 0.95)
  DrivingProtocol protocol;
};

inline DrivenQWZ build_driven_qwz(const Geometry& g, const DrivenQWZSpec& spec) {
  if (g.dimension() != 2 || g.fiber_dim() != 2) throw DomainError("driven QWZ needs a 2D lattice with fiber 2");
  check_qwz_spec(spec);
  const double scale = qwz_energy_scale(spec);
  const Index sites = g.sites();
  const Matrix s1 = build_translation(g, 1).matrix();
  const Matrix s2 = build_translation(g, 2).matrix();
  const Matrix one = Matrix::Identity(g.dim(), g.dim());
  Eigen::Matrix2cd sx, sy, sz;
  sx << 0, 1, 1, 0;
  sy << 0, cplx(0, -1), cplx(0, 1), 0;
  sz << 1, 0, 0, -1;
  using detail::fiber_kron;
  const double t = spec.hopping;
  const cplx half_i(0.0, 0.5);  // (S* - S)/(2i) = (i/2)(S - S*)
  Matrix h = spec.mass * fiber_kron(sites, one, sz) + 0.5 * t * fiber_kron(sites, s1 + s1.adjoint(), sz) +
             0.5 * t * fiber_kron(sites, s2 + s2.adjoint(), sz) + t * half_i * fiber_kron(sites, s1 - s1.adjoint(), sx) +
             t * half_i * fiber_kron(sites, s2 - s2.adjoint(), sy);
  h *= 0.45 / scale;
  h.diagonal().array() += 0.5;
  auto gen = Generator::from_operator({g, h});
  const auto& e = gen->eigen();
  if (!(e.values.minCoeff() > 0.05 && e.values.maxCoeff() < 0.95))
    throw PreconditionError("driven QWZ spectrum escapes (0.05, 0.95)");
  DrivenQWZ m{spec, scale, LatticeOperator(g, gen->matrix()), DrivingProtocol(g, {Segment{gen, 1.0, two_pi}})};
  return m;
}

/// H = 0 for the whole period.
inline DrivingProtocol trivial_protocol(const Geometry& g) {
  return DrivingProtocol(g, {Segment{Generator::zero(g), 1.0, two_pi}});
}

/// Invariants offered for a geometry: d = 1 only has m = 1 windings and band densities.
inline std::vector<std::string> supported_invariants(const Geometry& g) {
  if (g.dimension() == 1) return {"band_density", "winding_m1"};
  return {"band_density", "band_chern", "winding_m1", "winding", "edge_count", "edge_winding"};
}

}  // namespace floquet
