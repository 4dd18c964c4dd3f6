#pragma once

#include <array>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "qprobe/models.hpp"
#include "qprobe/solver.hpp"

namespace qprobe {

enum class EvolutionMode { Full, PulseOnly };

// Lowering: A_m = sum_l lambda_{ml} a_l (particle-exchange ancilla).
// Raising:  A_m = sum_l lambda_{ml} a^dag_l (red-sideband spin coupling).
enum class CouplingKind { Lowering, Raising };

/// Description of one ancilla pulse: which system modes couple to which
/// ancilla and with which complex coefficients. The pulse strength Omega_m is
/// derived per run from the requested s_m = (Omega_m dt)^2.
struct CouplingSpec {
  struct Coefficient {
    int ancilla;
    int mode;
    Complex lambda;
  };

  int ancilla_count = 1;
  std::vector<Coefficient> coefficients;
  double dt = 0.01;
  int truncation = 2;
  EvolutionMode evolution = EvolutionMode::Full;
  CouplingKind kind = CouplingKind::Lowering;
  Statistics ancilla_statistics = Statistics::Boson;

  void validate() const;
};

struct AncillaDistribution {
  std::vector<double> s;  // effective coupling per ancilla
  std::map<Occupation, double> probabilities;
  EvolutionMode evolution = EvolutionMode::Full;
  bool leakage_warning = false;

  double total() const;
  double p(const Occupation& occ) const;
  double p0() const;
  // P(n particles in ancilla m, all other ancillas empty)
  double p_single(int ancilla, int n) const;
  // total probability of k excitations across all ancillas
  double p_total_excitation(int k) const;
};

struct LinkMeta {
  int l1 = -1;
  int l2 = -1;
  double magnitude = 1;
  double phase = 0;
};

/// Ancilla statistics versus s for one link, probed along the link
/// orientation ("along") and optionally against it ("against").
struct ProbeSweep {
  std::vector<double> s_grid;
  std::vector<AncillaDistribution> along;
  std::vector<AncillaDistribution> against;
  LinkMeta link;
  bool degenerate_flag = false;

  bool has_against() const { return !against.empty(); }
};

struct ExtractionResult {
  std::string estimator;
  double value = 0;
  double raw_slope = 0;  // fitted <A^dag A> (or equivalent), before aux subtraction
  double window_used = 0;
  double s_max_used = 0;
  int points_used = 0;
  int fit_order = 1;
  double residual = 0;
  int sweeps_used = 1;
  bool degenerate_caveat = false;
  std::optional<double> exact_reference;
  std::optional<double> relative_error;
};

struct DetectionErrorModel {
  double alpha = 0;  // false positives
  double beta = 0;   // false negatives
  void validate() const;
};

struct GridPolicy {
  double s0 = 1e-4;
  double ratio = 1.35;
  double s_max = 2.0;
  double p_floor = 0.60;  // stop extending once p(0) in every direction drops below
  int max_points = 64;
};

struct SweepOptions {
  double dt = 0.01;
  int truncation = 2;
  EvolutionMode evolution = EvolutionMode::Full;
  GridPolicy grid;
  double evolve_tol = 1e-10;
  std::uint64_t dim_budget = 0;  // 0: use QPROBE_DIM_BUDGET or the built-in default
  double window_linear = 0.06;    // p(0) depth used for linear fits
  double window_quadratic = 0.20;  // p(0) depth used for quadratic fits
};

std::uint64_t dimension_budget(std::uint64_t override_value = 0);

/// Evolves system plus ancillas through one rectangular pulse and collects
/// the joint ancilla occupation distribution.
class PulseSimulator {
 public:
  PulseSimulator(const Basis& system, const std::vector<MonomialTerm>& hamiltonian_terms,
                 const CouplingSpec& coupling, std::uint64_t dim_budget = 0);

  AncillaDistribution run(const StateVector& system_state, const std::vector<double>& s,
                          const Occupation& initial_ancilla = {}, double tol = 1e-10) const;
  AncillaDistribution run(const StateVector& system_state, double s,
                          const Occupation& initial_ancilla = {}, double tol = 1e-10) const;

  // Composite state after the pulse (for conditional expectation values).
  StateVector evolve_composite(const StateVector& system_state, const std::vector<double>& s,
                               const Occupation& initial_ancilla = {}, double tol = 1e-10) const;
  // Unnormalized system-sector component with the given ancilla occupation.
  StateVector project_system(const StateVector& composite_state, const Occupation& ancilla) const;

  const Basis& composite() const { return composite_; }
  const Basis& system() const { return system_; }
  const CouplingSpec& coupling() const { return cpl_; }

 private:
  Basis system_;
  Basis composite_;
  CouplingSpec cpl_;
  SparseOperator h_embedded_;                  // system Hamiltonian on the composite
  std::vector<SparseOperator> h_coupling_;     // per ancilla, unit pulse strength
};

// M = 1 coupling with the quadrature phase rule theta_{l2} - theta_{l1} =
// phi_{l1 l2} - pi/2. direction -1 probes with the site roles swapped.
CouplingSpec current_coupling(const LinkCurrent& link, const Basis& system_basis, double dt,
                              int direction = +1, int truncation = 2,
                              EvolutionMode evolution = EvolutionMode::Full);

// Equal-phase choice theta_{l1} = theta_{l2} (accesses the hopping correlator).
CouplingSpec correlator_coupling(const LinkCurrent& link, const Basis& system_basis, double dt,
                                 int truncation = 2,
                                 EvolutionMode evolution = EvolutionMode::Full);

CouplingSpec merge_couplings(const CouplingSpec& a, const CouplingSpec& b);

std::vector<AncillaDistribution> sweep(const PulseSimulator& simulator,
                                       const StateVector& system_state,
                                       const std::vector<double>& s_grid, double tol = 1e-10);

// Sweep of one link in both orientations with an auto-extended geometric s
// grid (always starting at s = 0).
ProbeSweep sweep_link(const StateVector& ground, const Basis& system_basis,
                      const std::vector<MonomialTerm>& hamiltonian_terms,
                      const HoppingTable& hoppings, int l1, int l2, const SweepOptions& options,
                      bool both_directions = true, bool degenerate_flag = false);

// Exchanges the two probing directions (and the link orientation metadata),
// so the "against" data can be fed through the one-direction estimators.
ProbeSweep swap_directions(ProbeSweep sweep);

enum class FirstMomentEstimator { P0, PTilde, Antisym };

// Linear-fit extraction of <j>/|J|. density_sum is the separately measured
// <n_{l1} + n_{l2}> subtracted for the P0/PTilde paths (ignored for Antisym).
ExtractionResult estimate_first_moment(const ProbeSweep& sweep, FirstMomentEstimator estimator,
                                       double window, double density_sum);

// Polynomial-fit extraction of the normalized variance Delta j^2 / |J|^2 from
// p(0) - p(2)/3 in both directions. density_sq is the separately measured
// <(n_{l1} + n_{l2})^2>; current_mean is <j>/|J|.
ExtractionResult estimate_variance(const ProbeSweep& sweep, int fit_order, double window,
                                   double density_sq, double current_mean);

// Lueders-rule conditional expectation of a system observable given an
// ancilla measurement outcome.
double conditional_expectation(const PulseSimulator& simulator, const StateVector& ground,
                               double s, const SparseOperator& observable,
                               const Occupation& condition);

struct CorrelationOptions {
  double dt = 0.01;
  int truncation = 2;
  EvolutionMode evolution = EvolutionMode::Full;
  std::vector<double> s_grid;  // shared s1 = s2 = s values (without 0)
  double evolve_tol = 1e-10;
};

// Disjoint pairs: <j_{l1 l2} j_{l3 l4}>. Adjacent pairs (l2 == l3):
// <{j_{l1 l2}, j_{l2 l4}}>. Four direction-combination sweeps.
ExtractionResult correlation_probe(const StateVector& ground, const Basis& system_basis,
                                   const std::vector<MonomialTerm>& hamiltonian_terms,
                                   const HoppingTable& hoppings, std::array<int, 2> pair1,
                                   std::array<int, 2> pair2, const CorrelationOptions& options);

enum class LoopScheme { FluxHalfPi, FullyFrustrated, LabFrame };

ExtractionResult loop_probe(const StateVector& ground, const Basis& system_basis,
                            const std::vector<MonomialTerm>& hamiltonian_terms,
                            const PlaquetteSpec& plaquette, LoopScheme scheme,
                            const SweepOptions& options);

struct GlobalProbeResult {
  ExtractionResult current;   // <j_c>
  ExtractionResult variance;  // Delta j_c^2
};

GlobalProbeResult global_chiral_probe(const StateVector& ground, const Basis& system_basis,
                                      const std::vector<MonomialTerm>& hamiltonian_terms,
                                      const LadderSpec& spec, const SweepOptions& options);

AncillaDistribution apply_detection_errors(const AncillaDistribution& dist,
                                           const DetectionErrorModel& model);

// Undoes the slope rescaling by (1 - alpha - beta).
double correct_detected_slope(double fitted_slope, const DetectionErrorModel& model);

// Optional binomial shot-noise layer: multinomial sampling of the outcome
// distribution with `shots` samples.
AncillaDistribution sample_shots(const AncillaDistribution& dist, int shots, std::mt19937& rng);

}  // namespace qprobe
