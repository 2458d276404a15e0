#pragma once

// Signed permutation sums  sum_rho (-1)^rho Tr(L F_1(rho_1) F_2(rho_2) ... F_m(rho_m)).
//
// Prefixes L F_1 ... F_p are shared between permutations (a prefix tree), and the
// last factor is folded into the trace, so m factors cost sum_{p<m} m!/(m-p)!
// matrix products. Summation order is fixed: lexicographic in rho.

#include <Eigen/Dense>

#include <vector>

#include "floquet/lattice.hpp"

namespace floquet::detail {

struct PermutationTerms {
  const Matrix* lead = nullptr;
  std::vector<const Matrix*> factors;  ///< one per label, in label order
  bool alternate_adjoint = false;      ///< odd positions use the adjoint factor
  const Eigen::VectorXd* weights = nullptr;
};

inline cplx permutation_trace_rec(const PermutationTerms& t, const Matrix& prefix, std::vector<int>& remaining, int pos) {
  cplx acc{};
  const bool adj = t.alternate_adjoint && (pos % 2 == 1);
  for (std::size_t r = 0; r < remaining.size(); ++r) {
    const int label = remaining[r];
    const double sign = (r % 2 == 0) ? 1.0 : -1.0;  // r inversions
    const Matrix& f = *t.factors[static_cast<std::size_t>(label)];
    if (remaining.size() == 1) {
      acc += sign * (adj ? weighted_trace_of_product(prefix, f.adjoint().eval(), t.weights)
                         : weighted_trace_of_product(prefix, f, t.weights));
      continue;
    }
    Matrix next = adj ? Matrix(prefix * f.adjoint()) : Matrix(prefix * f);
    std::vector<int> rest = remaining;
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(r));
    acc += sign * permutation_trace_rec(t, next, rest, pos + 1);
  }
  return acc;
}

inline cplx permutation_trace(const PermutationTerms& t) {
  if (t.factors.empty()) {
    cplx acc{};
    for (Index i = 0; i < t.lead->rows(); ++i) acc += (t.weights ? (*t.weights)(i) : 1.0) * (*t.lead)(i, i);
    return acc;
  }
  std::vector<int> labels(t.factors.size());
  for (std::size_t k = 0; k < labels.size(); ++k) labels[k] = static_cast<int>(k);
  return permutation_trace_rec(t, *t.lead, labels, 0);
}

}  // namespace floquet::detail
