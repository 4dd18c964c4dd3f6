#pragma once

#include <array>
#include <map>
#include <utility>

#include "qprobe/operators.hpp"

namespace qprobe {

/// Hermitian table of hopping amplitudes J_{l1 l2}. Stored once per
/// unordered link; amplitude(l2, l1) returns the conjugate.
class HoppingTable {
 public:
  explicit HoppingTable(int modes = 0) : modes_(modes) {}

  int modes() const { return modes_; }
  void set(int l1, int l2, Complex j12);
  Complex amplitude(int l1, int l2) const;
  bool is_link(int l1, int l2) const;
  // Links as canonically ordered (l1 < l2) pairs.
  std::vector<std::pair<int, int>> links() const;

 private:
  int modes_;
  std::map<std::pair<int, int>, Complex> amp_;
};

struct LadderSpec {
  int rungs = 2;            // L
  double leg_hopping = 1;   // J
  double rung_hopping = 0;  // K
  double flux = 0;          // phi per plaquette
  double interaction = 0;   // U
  bool periodic = false;
  int max_occupancy = ModeSpec::kUnbounded;  // 1 = hard core
  Statistics statistics = Statistics::Boson;

  void validate() const;
  int sites() const { return 2 * rungs; }
  // leg: 0 = left (L), 1 = right (R); y: rung index
  int site(int leg, int y) const { return leg * rungs + y; }
};

struct Model {
  Basis basis;
  HoppingTable hoppings;
  std::vector<MonomialTerm> hamiltonian_terms;
  SparseOperator hamiltonian;
};

struct LinkCurrent {
  int l1 = 0;
  int l2 = 0;
  double magnitude = 0;  // |J_{l1 l2}|
  double phase = 0;      // arg(J_{l1 l2})
  SparseOperator op;
};

struct PlaquetteSpec {
  std::array<int, 3> sites{};  // 1 -> 2 -> 3 -> 1
  HoppingTable hoppings;       // the three links, complex
  double reference_scale = 1;  // J in zeta_{ll'} = |J_{ll'}| / J

  double flux() const;  // Phi in (-pi, pi]
  double zeta(int a, int b) const;
};

HoppingTable ladder_hoppings(const LadderSpec& spec);
Model build_hh_ladder(const LadderSpec& spec, int particles);

// j_{l1 l2} = -i (J_{l1 l2} a^dag_{l1} a_{l2} - h.c.)
std::vector<MonomialTerm> link_current_terms(const HoppingTable& hoppings, int l1, int l2,
                                             bool lab_frame = false);
LinkCurrent link_current(const HoppingTable& hoppings, int l1, int l2, const Basis& basis);

// j_c = j_L - j_R with leg averages over L-1 (open) or L (periodic) links.
SparseOperator chiral_current(const LadderSpec& spec, const Basis& basis);

double mean_current_variance(const StateVector& state, const HoppingTable& hoppings,
                             const Basis& basis);

Model build_triangle(const PlaquetteSpec& plaq, int particles, Statistics statistics,
                     int max_occupancy = ModeSpec::kUnbounded, double interaction = 0);

// Loop current j_tri = j_12 + j_23 + j_31; lab_frame drops Peierls phases.
SparseOperator loop_current(const PlaquetteSpec& plaq, const Basis& basis, bool lab_frame = false);

// Spin-XY/XXZ model on the hard-core basis (S+ = a, S- = a^dag, Sz = 1/2 - n).
// `couplings` is the Hermitian table J_{ll'}; `zz` optionally holds the
// J^z_{ll'} couplings of the XXZ interaction -sum J^z Sz Sz.
Model build_spin_xy(const HoppingTable& couplings, const HoppingTable* zz, int down_spins);

// Spin current j_{l1 l2} = -i (J_{l1 l2} S+_{l1} S-_{l2} - h.c.).
std::vector<MonomialTerm> spin_current_terms(const HoppingTable& couplings, int l1, int l2);
LinkCurrent spin_current(const HoppingTable& couplings, int l1, int l2, const Basis& basis);

std::vector<MonomialTerm> number_terms(int mode);
SparseOperator number_operator(const Basis& basis, int mode);

}  // namespace qprobe
