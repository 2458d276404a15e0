#pragma once

// Gauss-Legendre rules via Golub-Welsch: nodes are eigenvalues of the Jacobi
// matrix, weights 2 * (first eigenvector component)^2.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "floquet/errors.hpp"

namespace floquet {

struct QuadratureRule {
  std::vector<double> nodes;    ///< on [-1, 1]
  std::vector<double> weights;  ///< sum to 2
};

inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw DomainError("quadrature needs at least one node");
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    j(k, k - 1) = b;
    j(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    r.nodes[k] = es.eigenvalues()(k);
    const double v = es.eigenvectors()(0, k);
    r.weights[k] = 2.0 * v * v;
  }
  return r;
}

/// Nodes/weights mapped onto [a, a + len].
struct MappedNode {
  double offset;  ///< node - a
  double weight;
};

inline std::vector<MappedNode> map_rule(const QuadratureRule& r, double len) {
  std::vector<MappedNode> out(r.nodes.size());
  for (std::size_t k = 0; k < r.nodes.size(); ++k) out[k] = {0.5 * (r.nodes[k] + 1.0) * len, 0.5 * len * r.weights[k]};
  return out;
}

}  // namespace floquet
