#include "qprobe/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace qprobe {

Complex apply_monomial(const Basis& basis, const MonomialTerm& term, Occupation& occ) {
  Complex amp = term.coefficient;
  for (auto it = term.factors.rbegin(); it != term.factors.rend(); ++it) {
    const int m = it->mode;
    if (m < 0 || m >= basis.mode_count())
      throw std::invalid_argument("apply_monomial: mode index out of range");
    const int n = occ[static_cast<std::size_t>(m)];
    switch (it->action) {
      case Action::Number:
        amp *= static_cast<double>(n);
        break;
      case Action::Annihilate:
        if (n == 0) return Complex(0);
        if (basis.fermionic(m)) {
          int parity = 0;
          for (int k = 0; k < m; ++k) parity += occ[static_cast<std::size_t>(k)];
          amp *= (parity % 2 == 0) ? 1.0 : -1.0;
        } else {
          amp *= std::sqrt(static_cast<double>(n));
        }
        occ[static_cast<std::size_t>(m)] = static_cast<std::uint8_t>(n - 1);
        break;
      case Action::Create:
        if (n >= basis.cap(m)) return Complex(0);
        if (basis.fermionic(m)) {
          int parity = 0;
          for (int k = 0; k < m; ++k) parity += occ[static_cast<std::size_t>(k)];
          amp *= (parity % 2 == 0) ? 1.0 : -1.0;
        } else {
          amp *= std::sqrt(static_cast<double>(n + 1));
        }
        occ[static_cast<std::size_t>(m)] = static_cast<std::uint8_t>(n + 1);
        break;
    }
    if (amp == Complex(0)) return amp;
  }
  return amp;
}

SparseOperator assemble(const Basis& basis, const std::vector<MonomialTerm>& terms,
                        bool expect_hermitian) {
  const int dim = basis.dimension();
  std::vector<Eigen::Triplet<Complex>> triplets;
  triplets.reserve(static_cast<std::size_t>(dim) * (terms.size() + 1) / 2);
  Occupation scratch;
  for (int col = 0; col < dim; ++col) {
    for (const auto& term : terms) {
      scratch = basis.state(col);
      const Complex amp = apply_monomial(basis, term, scratch);
      if (amp == Complex(0)) continue;
      auto row = basis.try_index(scratch);
      if (!row) continue;  // left the enumerated sector (e.g. truncation edge)
      triplets.emplace_back(*row, col, amp);
    }
  }
  SparseOperator op;
  op.basis_tag = basis.tag();
  op.matrix.resize(dim, dim);
  op.matrix.setFromTriplets(triplets.begin(), triplets.end());
  if (expect_hermitian) {
    if (hermiticity_defect(op.matrix) > 1e-12)
      throw std::runtime_error("assemble: operator fails the hermiticity check");
    op.hermitian = true;
  }
  return op;
}

std::vector<MonomialTerm> with_conjugates(const std::vector<MonomialTerm>& terms) {
  std::vector<MonomialTerm> out = terms;
  for (const auto& term : terms) {
    MonomialTerm conj;
    conj.coefficient = std::conj(term.coefficient);
    for (auto it = term.factors.rbegin(); it != term.factors.rend(); ++it) {
      Factor f = *it;
      if (f.action == Action::Create)
        f.action = Action::Annihilate;
      else if (f.action == Action::Annihilate)
        f.action = Action::Create;
      conj.factors.push_back(f);
    }
    out.push_back(std::move(conj));
  }
  return out;
}

Complex expectation(const StateVector& psi, const SparseOperator& op) {
  if (psi.basis_tag != op.basis_tag)
    throw std::invalid_argument("expectation: state and operator live on different bases");
  return psi.amplitudes.dot(op.matrix * psi.amplitudes);
}

StateVector apply(const SparseOperator& op, const StateVector& psi) {
  if (psi.basis_tag != op.basis_tag)
    throw std::invalid_argument("apply: state and operator live on different bases");
  return StateVector{psi.basis_tag, op.matrix * psi.amplitudes};
}

double hermiticity_defect(const SparseMatrix& m) {
  SparseMatrix d = SparseMatrix(m.adjoint()) - m;
  double defect = 0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(d, k); it; ++it) defect = std::max(defect, std::abs(it.value()));
  return defect;
}

}  // namespace qprobe
