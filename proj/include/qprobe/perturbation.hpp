#pragma once

#include <vector>

#include "qprobe/probe.hpp"

namespace qprobe {

/// Coupling operators A_m = sum_l lambda_{ml} a_l (or a^dag_l) assembled on a
/// particle-number tower around the system sector, so products that change the
/// particle number stay representable. Moments are evaluated by applying the
/// sparse operators to state vectors, never by forming dense products.
struct CouplingOperators {
  Basis tower;
  std::vector<SparseOperator> a;  // A_m on the tower basis
  CouplingKind kind = CouplingKind::Lowering;
  std::uint64_t system_tag = 0;
  std::vector<int> embed_index;  // system basis index -> tower index

  int ancilla_count() const { return static_cast<int>(a.size()); }
  // Embeds a fixed-N system state into the tower basis.
  Vector embed(const StateVector& system_state) const;
};

CouplingOperators build_coupling_operators(const Basis& system, const CouplingSpec& coupling);

// <A_m^dag A_m>, <A_m A_m^dag>, <(A_m^dag A_m)^2> on a pure state
double first_moment(const StateVector& state, const CouplingOperators& ops, int m = 0);
double reversed_first_moment(const StateVector& state, const CouplingOperators& ops, int m = 0);
double second_moment(const StateVector& state, const CouplingOperators& ops, int m = 0);

struct JointPrediction {
  double p0 = 1;
  std::vector<double> p1;                    // single excitation in ancilla m
  std::vector<std::vector<double>> p2_pair;  // one excitation each in m1 and m2 (m1 < m2)
  std::vector<double> p2_double;             // double excitation of ancilla m

  double total() const;
};

// Second-order (or first-order) perturbative outcome probabilities for an
// arbitrary number of ancillas, from exact expectation values.
JointPrediction predict_joint(const StateVector& state, const CouplingOperators& ops,
                              const std::vector<double>& s, int order = 2);

struct CommutedPrediction {
  double p0 = 1;
  double p1 = 0;
  double p2 = 0;
};

// Single-ancilla soft-boson specialization using [A, A^dag] = 2; requires
// exactly two coupled modes with unit-magnitude coefficients.
CommutedPrediction predict_commuted_boson(const StateVector& state, const CouplingOperators& ops,
                                          double s);

}  // namespace qprobe
