#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <vector>

#include "qprobe/basis.hpp"

namespace qprobe {

using Complex = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<Complex>;
using Vector = Eigen::VectorXcd;

enum class Action { Create, Annihilate, Number };

struct Factor {
  int mode;
  Action action;
};

/// One normal-ordered-as-written product of ladder operators. Factors are
/// listed left to right and applied right to left, like the operator product
/// they spell. For fermionic bases each Create/Annihilate picks up the
/// Jordan-Wigner sign of the canonical mode ordering.
struct MonomialTerm {
  Complex coefficient;
  std::vector<Factor> factors;
};

struct SparseOperator {
  std::uint64_t basis_tag = 0;
  SparseMatrix matrix;
  bool hermitian = false;

  int dimension() const { return static_cast<int>(matrix.rows()); }
};

struct StateVector {
  std::uint64_t basis_tag = 0;
  Vector amplitudes;

  double norm() const { return amplitudes.norm(); }
  void normalize() { amplitudes /= amplitudes.norm(); }
};

// Applies a monomial to an occupation vector in place. Returns the amplitude
// factor (sqrt factors / fermionic signs), or zero if the state is
// annihilated or leaves the basis caps.
Complex apply_monomial(const Basis& basis, const MonomialTerm& term, Occupation& occ);

SparseOperator assemble(const Basis& basis, const std::vector<MonomialTerm>& terms,
                        bool expect_hermitian = false);

// Adds the Hermitian conjugate of every term (used for hopping-type inputs).
std::vector<MonomialTerm> with_conjugates(const std::vector<MonomialTerm>& terms);

Complex expectation(const StateVector& psi, const SparseOperator& op);

StateVector apply(const SparseOperator& op, const StateVector& psi);

double hermiticity_defect(const SparseMatrix& m);

}  // namespace qprobe
