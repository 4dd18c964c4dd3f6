#pragma once

#include <optional>

#include "qprobe/perturbation.hpp"
#include "qprobe/probe.hpp"

namespace qprobe {

/// Thermal phonon mode truncated at n_max, with the occupation distribution
/// renormalized over the kept levels.
struct ThermalAncilla {
  double omega = 1;
  double temperature = 0;
  int n_max = 8;
  std::vector<double> p;  // p[n], n = 0 .. n_max
  double tail_mass = 0;   // untruncated weight beyond n_max
  bool tail_warning = false;

  double pn(int n) const {
    return n < 0 || n > n_max ? 0.0 : p[static_cast<std::size_t>(n)];
  }
};

// Geometric phonon occupation distribution; n_max < 0 picks the default
// truncation max(8, first level with tail below 1e-8).
ThermalAncilla thermal_distribution(double omega, double temperature, int n_max = -1);

struct IonCoupling {
  int mode = 0;
  double rabi = 1;   // per-ion sideband Rabi frequency
  double eta = 0.1;  // Lamb-Dicke parameter
  double phase = 0;  // laser phase
};

/// Per-ion sideband drive parameters; the coupling coefficient of ion l is
/// lambda_l = rabi_l * eta_l * exp(i phase_l) / (2 * reference_rabi).
struct SidebandCoupling {
  double reference_rabi = 1;
  std::vector<IonCoupling> ions;

  Complex lambda(int mode) const;
};

// Red-sideband coupling probing the spin current on link (l1, l2): the two
// addressed ions get coupling phases theta_{l2} - theta_{l1} = phi_{l1 l2} -
// pi/2 on top of the hardware magnitudes. direction -1 swaps the site roles.
CouplingSpec ion_current_coupling(int l1, int l2, const HoppingTable& couplings,
                                  const SidebandCoupling& hardware, double dt, int direction = +1,
                                  int truncation = 10,
                                  EvolutionMode evolution = EvolutionMode::Full);

// First-order phonon-number probabilities P(n), n = 0 .. n_max, for a
// quasistationary initial phonon distribution.
std::vector<double> predict_thermal_probabilities(const StateVector& state,
                                                  const CouplingOperators& ops,
                                                  const ThermalAncilla& ancilla, double s);

// alpha_n = (2n+1) p_n - n p_{n-1} - (n+1) p_{n+1}
double alpha_coefficient(const ThermalAncilla& ancilla, int n);
// beta_n = p_n - n p_{n-1} + (n+1) p_{n+1}
double beta_coefficient(const ThermalAncilla& ancilla, int n);

/// Phonon-number distributions versus s, from ensemble evolution over the
/// initial thermal mixture, in one or both probing directions.
struct ThermalSweep {
  std::vector<double> s_grid;
  std::vector<std::vector<double>> along;    // P(n) per s point
  std::vector<std::vector<double>> against;  // optional opposite direction
  double coupling_magnitude = 1;

  bool has_against() const { return !against.empty(); }
};

ThermalSweep thermal_sweep(const StateVector& ground, const Basis& system_basis,
                           const std::vector<MonomialTerm>& hamiltonian_terms,
                           const HoppingTable& couplings, int l1, int l2,
                           const SidebandCoupling& hardware, const ThermalAncilla& ancilla,
                           const SweepOptions& options, bool both_directions = true);

// Linear-fit extraction of <j>/|J| from the n-phonon channel. Default path is
// the antisymmetric two-direction combination; with a single direction the
// exact <Sz_{l1} + Sz_{l2}> must be supplied.
ExtractionResult extract_spin_current(const ThermalSweep& sweep, const ThermalAncilla& ancilla,
                                      int n, std::optional<double> sz_sum = std::nullopt,
                                      double window = 0.06);

}  // namespace qprobe
