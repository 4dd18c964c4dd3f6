#pragma once

#include "qprobe/operators.hpp"

namespace qprobe {

struct GroundStateResult {
  double energy = 0;
  StateVector state;
  double gap_estimate = 0;
  double residual = 0;
  bool near_degenerate = false;
};

/// Lowest eigenpair of a Hermitian sparse operator. Dense diagonalization is
/// used below a dimension threshold, Lanczos with full reorthogonalization
/// above it. Deterministic for a fixed seed.
GroundStateResult ground_state(const SparseOperator& h, double tol = 1e-10, unsigned seed = 1,
                               int dense_threshold = 1024);

/// exp(-i H t) psi via Krylov subspace projection with adaptive step
/// splitting. Norm is preserved to 1e-10.
StateVector evolve(const StateVector& psi, const SparseOperator& h, double duration,
                   double tol = 1e-10);

double operator_scale(const SparseOperator& h);

}  // namespace qprobe
