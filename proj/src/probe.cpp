#include "qprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "qprobe/fit.hpp"

namespace qprobe {

namespace {
constexpr Complex kI{0.0, 1.0};
constexpr std::uint64_t kDefaultDimBudget = 5'000'000;
}  // namespace

void CouplingSpec::validate() const {
  if (ancilla_count < 1) throw std::invalid_argument("CouplingSpec: need at least one ancilla");
  if (dt <= 0) throw std::invalid_argument("CouplingSpec: pulse duration must be positive");
  if (truncation < 1) throw std::invalid_argument("CouplingSpec: truncation must be >= 1");
  std::vector<bool> seen(static_cast<std::size_t>(ancilla_count), false);
  for (const auto& c : coefficients) {
    if (c.ancilla < 0 || c.ancilla >= ancilla_count)
      throw std::invalid_argument("CouplingSpec: ancilla index out of range");
    if (!std::isfinite(std::abs(c.lambda)))
      throw std::invalid_argument("CouplingSpec: non-finite coupling coefficient");
    seen[static_cast<std::size_t>(c.ancilla)] = true;
  }
  for (bool s : seen)
    if (!s) throw std::invalid_argument("CouplingSpec: every ancilla needs a coefficient");
}

void DetectionErrorModel::validate() const {
  if (alpha < 0 || alpha >= 1 || beta < 0 || beta >= 1 || alpha + beta >= 1)
    throw std::invalid_argument("DetectionErrorModel: require alpha, beta >= 0 and alpha + beta < 1");
}

double AncillaDistribution::total() const {
  double t = 0;
  for (const auto& [occ, p] : probabilities) t += p;
  return t;
}

double AncillaDistribution::p(const Occupation& occ) const {
  auto it = probabilities.find(occ);
  return it == probabilities.end() ? 0.0 : it->second;
}

double AncillaDistribution::p0() const {
  if (probabilities.empty()) return 0;
  return p(Occupation(probabilities.begin()->first.size(), 0));
}

double AncillaDistribution::p_single(int ancilla, int n) const {
  if (probabilities.empty()) return 0;
  Occupation occ(probabilities.begin()->first.size(), 0);
  occ[static_cast<std::size_t>(ancilla)] = static_cast<std::uint8_t>(n);
  return p(occ);
}

double AncillaDistribution::p_total_excitation(int k) const {
  double t = 0;
  for (const auto& [occ, p] : probabilities) {
    int sum = 0;
    for (auto n : occ) sum += n;
    if (sum == k) t += p;
  }
  return t;
}

std::uint64_t dimension_budget(std::uint64_t override_value) {
  if (override_value > 0) return override_value;
  if (const char* env = std::getenv("QPROBE_DIM_BUDGET")) {
    const unsigned long long v = std::strtoull(env, nullptr, 10);
    if (v > 0) return v;
  }
  return kDefaultDimBudget;
}

namespace {

std::vector<AncillaSpec> ancilla_specs(const Basis& system, const CouplingSpec& cpl) {
  Statistics stat = cpl.ancilla_statistics;
  int trunc = cpl.truncation;
  if (system.system_statistics() == Statistics::Fermion && cpl.kind == CouplingKind::Lowering) {
    stat = Statistics::Fermion;
    trunc = 1;
  }
  return std::vector<AncillaSpec>(static_cast<std::size_t>(cpl.ancilla_count),
                                  AncillaSpec{stat, trunc});
}

std::uint64_t composite_dimension_estimate(const Basis& system, const std::vector<AncillaSpec>& anc,
                                           bool conserve) {
  ModeSpec modes{system.mode_count(), system.system_statistics(), system.cap(0)};
  int trunc_total = 0;
  for (const auto& a : anc) trunc_total += a.truncation;
  // ways to distribute k excitations over the ancillas
  std::vector<std::uint64_t> ways(static_cast<std::size_t>(trunc_total) + 1, 0);
  ways[0] = 1;
  for (const auto& a : anc) {
    std::vector<std::uint64_t> next(ways.size(), 0);
    for (std::size_t n = 0; n < ways.size(); ++n)
      for (int k = 0; k <= a.truncation && n + static_cast<std::size_t>(k) < next.size(); ++k)
        next[n + static_cast<std::size_t>(k)] += ways[n];
    ways.swap(next);
  }
  const int n0 = system.particles();
  std::uint64_t dim = 0;
  if (conserve) {
    for (int k = 0; k <= std::min(trunc_total, n0); ++k)
      dim += ways[static_cast<std::size_t>(k)] * sector_dimension(modes, n0 - k);
  } else {
    std::uint64_t anc_dim = 0;
    for (auto w : ways) anc_dim += w;
    std::uint64_t sys_dim = 0;
    for (int n = std::max(0, n0 - trunc_total); n <= n0 + trunc_total; ++n)
      sys_dim += sector_dimension(modes, n);
    dim = anc_dim * sys_dim;
  }
  return dim;
}

}  // namespace

PulseSimulator::PulseSimulator(const Basis& system,
                               const std::vector<MonomialTerm>& hamiltonian_terms,
                               const CouplingSpec& coupling, std::uint64_t dim_budget)
    : system_(system), cpl_(coupling) {
  cpl_.validate();
  const auto ancillas = ancilla_specs(system, cpl_);
  const bool conserve = cpl_.kind == CouplingKind::Lowering;
  const std::uint64_t budget = dimension_budget(dim_budget);
  const std::uint64_t estimate = composite_dimension_estimate(system, ancillas, conserve);
  if (estimate > budget)
    throw std::runtime_error("PulseSimulator: composite dimension " + std::to_string(estimate) +
                             " exceeds budget " + std::to_string(budget) +
                             "; reduce the lattice, the ancilla count, or the truncation");
  composite_ = Basis::compose_with_ancillas(system, ancillas, conserve);

  if (cpl_.evolution == EvolutionMode::Full) {
    h_embedded_ = assemble(composite_, hamiltonian_terms, /*expect_hermitian=*/true);
  } else {
    h_embedded_.basis_tag = composite_.tag();
    h_embedded_.matrix.resize(composite_.dimension(), composite_.dimension());
    h_embedded_.hermitian = true;
  }

  for (int m = 0; m < cpl_.ancilla_count; ++m) {
    const int anc_mode = system.mode_count() + m;
    std::vector<MonomialTerm> terms;
    for (const auto& c : cpl_.coefficients) {
      if (c.ancilla != m) continue;
      if (cpl_.kind == CouplingKind::Lowering)
        terms.push_back({c.lambda, {{anc_mode, Action::Create}, {c.mode, Action::Annihilate}}});
      else
        terms.push_back({c.lambda, {{anc_mode, Action::Create}, {c.mode, Action::Create}}});
    }
    h_coupling_.push_back(assemble(composite_, with_conjugates(terms), /*expect_hermitian=*/true));
  }
}

StateVector PulseSimulator::evolve_composite(const StateVector& system_state,
                                             const std::vector<double>& s,
                                             const Occupation& initial_ancilla, double tol) const {
  if (system_state.basis_tag != system_.tag())
    throw std::invalid_argument("PulseSimulator: state lives on a different system basis");
  if (static_cast<int>(s.size()) != cpl_.ancilla_count)
    throw std::invalid_argument("PulseSimulator: one s value per ancilla required");
  Occupation anc = initial_ancilla;
  if (anc.empty()) anc.assign(static_cast<std::size_t>(cpl_.ancilla_count), 0);
  if (static_cast<int>(anc.size()) != cpl_.ancilla_count)
    throw std::invalid_argument("PulseSimulator: bad initial ancilla occupation");

  Vector amps = Vector::Zero(composite_.dimension());
  Occupation occ(static_cast<std::size_t>(composite_.mode_count()), 0);
  for (int i = 0; i < system_.dimension(); ++i) {
    const Complex a = system_state.amplitudes[i];
    if (a == Complex(0)) continue;
    const Occupation& sys = system_.state(i);
    std::copy(sys.begin(), sys.end(), occ.begin());
    std::copy(anc.begin(), anc.end(), occ.begin() + system_.mode_count());
    auto idx = composite_.try_index(occ);
    if (!idx)
      throw std::invalid_argument("PulseSimulator: initial state outside the composite sector");
    amps[*idx] = a;
  }

  SparseMatrix h_total = h_embedded_.matrix;
  for (int m = 0; m < cpl_.ancilla_count; ++m) {
    if (s[static_cast<std::size_t>(m)] < 0)
      throw std::invalid_argument("PulseSimulator: s must be non-negative");
    const double omega = std::sqrt(s[static_cast<std::size_t>(m)]) / cpl_.dt;
    if (omega != 0) h_total += omega * h_coupling_[static_cast<std::size_t>(m)].matrix;
  }
  SparseOperator h{composite_.tag(), std::move(h_total), true};
  return evolve(StateVector{composite_.tag(), std::move(amps)}, h, cpl_.dt, tol);
}

AncillaDistribution PulseSimulator::run(const StateVector& system_state,
                                        const std::vector<double>& s,
                                        const Occupation& initial_ancilla, double tol) const {
  const StateVector after = evolve_composite(system_state, s, initial_ancilla, tol);
  AncillaDistribution dist;
  dist.s = s;
  dist.evolution = cpl_.evolution;
  double leak = 0;
  for (int i = 0; i < composite_.dimension(); ++i) {
    const double w = std::norm(after.amplitudes[i]);
    if (w == 0) continue;
    const Occupation& st = composite_.state(i);
    Occupation anc(st.begin() + system_.mode_count(), st.end());
    bool at_boundary = false;
    for (int m = 0; m < cpl_.ancilla_count; ++m)
      if (anc[static_cast<std::size_t>(m)] == composite_.cap(system_.mode_count() + m))
        at_boundary = true;
    if (at_boundary) leak += w;
    dist.probabilities[anc] += w;
  }
  dist.leakage_warning = leak > 1e-6;
  return dist;
}

AncillaDistribution PulseSimulator::run(const StateVector& system_state, double s,
                                        const Occupation& initial_ancilla, double tol) const {
  return run(system_state, std::vector<double>(static_cast<std::size_t>(cpl_.ancilla_count), s),
             initial_ancilla, tol);
}

StateVector PulseSimulator::project_system(const StateVector& composite_state,
                                           const Occupation& ancilla) const {
  if (composite_state.basis_tag != composite_.tag())
    throw std::invalid_argument("project_system: state lives on a different composite basis");
  Vector out = Vector::Zero(system_.dimension());
  for (int i = 0; i < composite_.dimension(); ++i) {
    const Complex a = composite_state.amplitudes[i];
    if (a == Complex(0)) continue;
    const Occupation& st = composite_.state(i);
    if (!std::equal(ancilla.begin(), ancilla.end(), st.begin() + system_.mode_count())) continue;
    Occupation sys(st.begin(), st.begin() + system_.mode_count());
    auto idx = system_.try_index(sys);
    if (idx) out[*idx] = a;
  }
  return StateVector{system_.tag(), std::move(out)};
}

CouplingSpec current_coupling(const LinkCurrent& link, const Basis& system_basis, double dt,
                              int direction, int truncation, EvolutionMode evolution) {
  if (direction != 1 && direction != -1)
    throw std::invalid_argument("current_coupling: direction must be +1 or -1");
  CouplingSpec cpl;
  cpl.dt = dt;
  cpl.truncation = truncation;
  cpl.evolution = evolution;
  cpl.kind = CouplingKind::Lowering;
  if (system_basis.system_statistics() == Statistics::Fermion) {
    cpl.ancilla_statistics = Statistics::Fermion;
    cpl.truncation = 1;
  }
  const double half_pi = std::numbers::pi / 2;
  if (direction == 1) {
    // theta_{l2} - theta_{l1} = phi_{l1 l2} - pi/2
    cpl.coefficients = {{0, link.l1, Complex(1)}, {0, link.l2, std::exp(kI * (link.phase - half_pi))}};
  } else {
    cpl.coefficients = {{0, link.l2, Complex(1)}, {0, link.l1, std::exp(kI * (-link.phase - half_pi))}};
  }
  return cpl;
}

CouplingSpec correlator_coupling(const LinkCurrent& link, const Basis& system_basis, double dt,
                                 int truncation, EvolutionMode evolution) {
  CouplingSpec cpl = current_coupling(link, system_basis, dt, +1, truncation, evolution);
  cpl.coefficients = {{0, link.l1, Complex(1)}, {0, link.l2, Complex(1)}};
  return cpl;
}

CouplingSpec merge_couplings(const CouplingSpec& a, const CouplingSpec& b) {
  if (a.dt != b.dt || a.truncation != b.truncation || a.evolution != b.evolution ||
      a.kind != b.kind || a.ancilla_statistics != b.ancilla_statistics)
    throw std::invalid_argument("merge_couplings: incompatible coupling settings");
  CouplingSpec out = a;
  out.ancilla_count = a.ancilla_count + b.ancilla_count;
  for (auto c : b.coefficients) {
    c.ancilla += a.ancilla_count;
    out.coefficients.push_back(c);
  }
  return out;
}

std::vector<AncillaDistribution> sweep(const PulseSimulator& simulator,
                                       const StateVector& system_state,
                                       const std::vector<double>& s_grid, double tol) {
  std::vector<AncillaDistribution> out;
  out.reserve(s_grid.size());
  for (double s : s_grid) out.push_back(simulator.run(system_state, s, {}, tol));
  return out;
}

ProbeSweep sweep_link(const StateVector& ground, const Basis& system_basis,
                      const std::vector<MonomialTerm>& hamiltonian_terms,
                      const HoppingTable& hoppings, int l1, int l2, const SweepOptions& options,
                      bool both_directions, bool degenerate_flag) {
  const LinkCurrent link = link_current(hoppings, l1, l2, system_basis);
  const CouplingSpec cpl_plus =
      current_coupling(link, system_basis, options.dt, +1, options.truncation, options.evolution);
  const PulseSimulator sim_plus(system_basis, hamiltonian_terms, cpl_plus, options.dim_budget);
  std::optional<PulseSimulator> sim_minus;
  if (both_directions) {
    const CouplingSpec cpl_minus =
        current_coupling(link, system_basis, options.dt, -1, options.truncation, options.evolution);
    sim_minus.emplace(system_basis, hamiltonian_terms, cpl_minus, options.dim_budget);
  }

  ProbeSweep sweep;
  sweep.link = LinkMeta{l1, l2, link.magnitude, link.phase};
  sweep.degenerate_flag = degenerate_flag;
  sweep.s_grid.push_back(0.0);
  sweep.along.push_back(sim_plus.run(ground, 0.0, {}, options.evolve_tol));
  if (sim_minus) sweep.against.push_back(sim_minus->run(ground, 0.0, {}, options.evolve_tol));

  double s = options.grid.s0;
  for (int k = 1; k < options.grid.max_points && s <= options.grid.s_max;
       ++k, s *= options.grid.ratio) {
    sweep.s_grid.push_back(s);
    sweep.along.push_back(sim_plus.run(ground, s, {}, options.evolve_tol));
    double p_max = sweep.along.back().p0();
    if (sim_minus) {
      sweep.against.push_back(sim_minus->run(ground, s, {}, options.evolve_tol));
      p_max = std::max(p_max, sweep.against.back().p0());
    }
    if (p_max < options.grid.p_floor) break;
  }
  return sweep;
}

ProbeSweep swap_directions(ProbeSweep sweep) {
  if (!sweep.has_against())
    throw std::invalid_argument("swap_directions: sweep has only one direction");
  std::swap(sweep.along, sweep.against);
  std::swap(sweep.link.l1, sweep.link.l2);
  sweep.link.phase = -sweep.link.phase;
  return sweep;
}

namespace {

struct WindowData {
  std::vector<double> xs, ys;
  double s_max = 0;
};

// Largest s-prefix on which `gate` stays within [1 - window, 1].
WindowData select_window(const std::vector<double>& s_grid, const std::vector<double>& ys,
                         const std::vector<double>& gate, double window) {
  WindowData w;
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (gate[i] < 1.0 - window || gate[i] > 1.0 + 1e-12) break;
    w.xs.push_back(s_grid[i]);
    w.ys.push_back(ys[i]);
    w.s_max = s_grid[i];
  }
  return w;
}

void require_points(const WindowData& w, int order, const char* who) {
  if (static_cast<int>(w.xs.size()) < order + 2)
    throw std::runtime_error(std::string(who) +
                             ": fit window too small for the requested order; widen the window "
                             "or refine the s grid");
}

}  // namespace

ExtractionResult estimate_first_moment(const ProbeSweep& sweep, FirstMomentEstimator estimator,
                                       double window, double density_sum) {
  ExtractionResult r;
  r.window_used = window;
  r.degenerate_caveat = sweep.degenerate_flag;
  std::vector<double> ys, gate;
  switch (estimator) {
    case FirstMomentEstimator::P0: {
      r.estimator = "p0";
      for (const auto& d : sweep.along) ys.push_back(d.p0());
      gate = ys;
      break;
    }
    case FirstMomentEstimator::PTilde: {
      r.estimator = "ptilde";
      for (std::size_t i = 0; i < sweep.along.size(); ++i) {
        const auto& d = sweep.along[i];
        const double s = sweep.s_grid[i];
        ys.push_back(1.0 - (d.p_single(0, 1) + 2.0 * d.p_single(0, 2)) / (1.0 - 2.0 * s / 3.0));
      }
      gate = ys;
      break;
    }
    case FirstMomentEstimator::Antisym: {
      r.estimator = "antisym";
      if (!sweep.has_against())
        throw std::invalid_argument("estimate_first_moment: antisym needs both directions");
      for (std::size_t i = 0; i < sweep.along.size(); ++i) {
        ys.push_back(0.5 * (sweep.along[i].p0() - sweep.against[i].p0()));
        gate.push_back(std::min(sweep.along[i].p0(), sweep.against[i].p0()));
      }
      break;
    }
  }
  const WindowData w = select_window(sweep.s_grid, ys, gate, window);
  require_points(w, 1, "estimate_first_moment");
  const PolyFit fit = polyfit(w.xs, w.ys, 1);
  r.s_max_used = w.s_max;
  r.points_used = static_cast<int>(w.xs.size());
  r.fit_order = 1;
  r.residual = fit.residual;
  r.raw_slope = -fit.coefficients[1];
  if (estimator == FirstMomentEstimator::Antisym) {
    r.value = r.raw_slope;  // slope of (p+ - p-)/2 is -<j>/|J|; densities cancel
    r.sweeps_used = 2;
  } else {
    r.value = r.raw_slope - density_sum;
    r.sweeps_used = 1;
  }
  return r;
}

ExtractionResult estimate_variance(const ProbeSweep& sweep, int fit_order, double window,
                                   double density_sq, double current_mean) {
  if (fit_order != 2 && fit_order != 4)
    throw std::invalid_argument("estimate_variance: fit order must be 2 or 4");
  if (!sweep.has_against())
    throw std::invalid_argument("estimate_variance: both directions are required");

  ExtractionResult r;
  r.estimator = "variance";
  r.window_used = window;
  r.fit_order = fit_order;
  r.sweeps_used = 2;
  r.degenerate_caveat = sweep.degenerate_flag;

  double second_moment_sym = 0;
  for (const auto* dists : {&sweep.along, &sweep.against}) {
    std::vector<double> ys, gate;
    for (const auto& d : *dists) {
      ys.push_back(d.p0() - d.p_total_excitation(2) / 3.0);
      gate.push_back(d.p0());
    }
    const WindowData w = select_window(sweep.s_grid, ys, gate, window);
    require_points(w, fit_order, "estimate_variance");
    const PolyFit fit = polyfit(w.xs, w.ys, fit_order);
    if (fit.condition > 1e12)
      throw std::runtime_error("estimate_variance: ill-conditioned polynomial fit");
    // p(0) - p(2)/3 = 1 - s <A^dag A> + s^2 <(A^dag A)^2> / 3
    second_moment_sym += 0.5 * 3.0 * fit.coefficients[2];
    r.residual = std::max(r.residual, fit.residual);
    r.s_max_used = std::max(r.s_max_used, w.s_max);
    r.points_used = std::max(r.points_used, static_cast<int>(w.xs.size()));
  }
  const double j2 = second_moment_sym - density_sq;  // <j^2>/|J|^2
  r.value = j2 - current_mean * current_mean;
  r.raw_slope = j2;
  return r;
}

double conditional_expectation(const PulseSimulator& simulator, const StateVector& ground,
                               double s, const SparseOperator& observable,
                               const Occupation& condition) {
  const std::vector<double> sv(static_cast<std::size_t>(simulator.coupling().ancilla_count), s);
  const StateVector after = simulator.evolve_composite(ground, sv);
  StateVector block = simulator.project_system(after, condition);
  const double p = block.amplitudes.squaredNorm();
  if (p < 1e-14)
    throw std::runtime_error("conditional_expectation: conditioning outcome has zero probability");
  block.amplitudes /= std::sqrt(p);
  return std::real(expectation(block, observable));
}

ExtractionResult correlation_probe(const StateVector& ground, const Basis& system_basis,
                                   const std::vector<MonomialTerm>& hamiltonian_terms,
                                   const HoppingTable& hoppings, std::array<int, 2> pair1,
                                   std::array<int, 2> pair2, const CorrelationOptions& options) {
  double sign = 1;
  // Count shared sites; reorient so that a shared site sits at pair1[1] and
  // pair2[0] (each reversal flips the sign of that pair's current).
  int shared = 0;
  for (int a : pair1)
    for (int b : pair2)
      if (a == b) ++shared;
  if (shared > 1)
    throw std::invalid_argument(
        "correlation_probe: pairs overlapping in more than one site are unsupported");
  const bool adjacent = shared == 1;
  if (adjacent) {
    if (pair1[0] == pair2[0] || pair1[0] == pair2[1]) {
      std::swap(pair1[0], pair1[1]);
      sign = -sign;
    }
    if (pair1[1] == pair2[1]) {
      std::swap(pair2[0], pair2[1]);
      sign = -sign;
    }
  }

  const LinkCurrent link1 = link_current(hoppings, pair1[0], pair1[1], system_basis);
  const LinkCurrent link2 = link_current(hoppings, pair2[0], pair2[1], system_basis);

  std::vector<double> grid = options.s_grid;
  if (grid.empty()) {
    double s = 0.004;
    for (int i = 0; i < 10; ++i, s *= 1.4) grid.push_back(s);
  }

  // combination values per s: 1/4 [y(+,+) - y(-,+) - y(+,-) + y(-,-)]
  std::vector<double> comb(grid.size(), 0.0);
  for (int d1 : {+1, -1}) {
    for (int d2 : {+1, -1}) {
      const CouplingSpec cpl = merge_couplings(
          current_coupling(link1, system_basis, options.dt, d1, options.truncation,
                           options.evolution),
          current_coupling(link2, system_basis, options.dt, d2, options.truncation,
                           options.evolution));
      const PulseSimulator sim(system_basis, hamiltonian_terms, cpl);
      const double w = 0.25 * d1 * d2;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const AncillaDistribution dist = sim.run(ground, grid[i], {}, options.evolve_tol);
        double y = dist.p0();
        if (adjacent) y -= dist.p({1, 1}) / 3.0;
        comb[i] += w * y;
      }
    }
  }

  // least squares for y = c2 s^2 + c3 s^3
  Eigen::MatrixXd a(static_cast<int>(grid.size()), 2);
  Eigen::VectorXd b(static_cast<int>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    a(static_cast<int>(i), 0) = grid[i] * grid[i];
    a(static_cast<int>(i), 1) = grid[i] * grid[i] * grid[i];
    b(static_cast<int>(i)) = comb[i];
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
  const double c2 = c(0);

  ExtractionResult r;
  r.estimator = adjacent ? "current_anticommutator" : "current_correlator";
  r.fit_order = 3;
  r.points_used = static_cast<int>(grid.size());
  r.s_max_used = grid.back();
  r.sweeps_used = 4;
  r.residual = (a * c - b).norm() / std::sqrt(static_cast<double>(grid.size()));
  const double norm = link1.magnitude * link2.magnitude;
  r.value = sign * norm * (adjacent ? 3.0 * c2 : c2);
  return r;
}

namespace {

CouplingSpec plaquette_coupling(const PlaquetteSpec& plaq, double alpha, double beta,
                                bool lab_frame, const SweepOptions& options) {
  const auto& s = plaq.sites;
  const double r1 = std::sqrt(plaq.zeta(s[0], s[1]) * plaq.zeta(s[2], s[0]) / plaq.zeta(s[1], s[2]));
  const double r2 = std::sqrt(plaq.zeta(s[0], s[1]) * plaq.zeta(s[1], s[2]) / plaq.zeta(s[2], s[0]));
  const double r3 = std::sqrt(plaq.zeta(s[1], s[2]) * plaq.zeta(s[2], s[0]) / plaq.zeta(s[0], s[1]));
  const double phi12 = lab_frame ? 0.0 : std::arg(plaq.hoppings.amplitude(s[0], s[1]));
  const double phi23 = lab_frame ? 0.0 : std::arg(plaq.hoppings.amplitude(s[1], s[2]));
  const double theta1 = 0;
  const double theta2 = theta1 + phi12 - alpha;
  const double theta3 = theta2 + phi23 - beta;
  CouplingSpec cpl;
  cpl.dt = options.dt;
  cpl.truncation = options.truncation;
  cpl.evolution = options.evolution;
  cpl.coefficients = {{0, s[0], r1 * std::exp(kI * theta1)},
                      {0, s[1], r2 * std::exp(kI * theta2)},
                      {0, s[2], r3 * std::exp(kI * theta3)}};
  return cpl;
}

// Linear <A^dag A> estimate from a p(0) sweep with auto-extended grid.
double fitted_slope_p0(const PulseSimulator& sim, const StateVector& ground,
                       const SweepOptions& options, double window) {
  std::vector<double> xs{0.0}, ys{1.0};
  double s = options.grid.s0;
  for (int k = 1; k < options.grid.max_points && s <= options.grid.s_max;
       ++k, s *= options.grid.ratio) {
    const double p = sim.run(ground, s, {}, options.evolve_tol).p0();
    if (p < 1.0 - window) break;
    xs.push_back(s);
    ys.push_back(p);
  }
  if (xs.size() < 3)
    throw std::runtime_error("loop_probe: fit window too small; refine the s grid");
  return -polyfit(xs, ys, 1).coefficients[1];
}

}  // namespace

ExtractionResult loop_probe(const StateVector& ground, const Basis& system_basis,
                            const std::vector<MonomialTerm>& hamiltonian_terms,
                            const PlaquetteSpec& plaq, LoopScheme scheme,
                            const SweepOptions& options) {
  const double pi = std::numbers::pi;
  const double flux = plaq.flux();
  const double window = options.window_linear;

  // exact density aux input n_tri = sum r_k^2 <n_k> (standard measurement)
  const auto& sites = plaq.sites;
  const double r1 = std::sqrt(plaq.zeta(sites[0], sites[1]) * plaq.zeta(sites[2], sites[0]) /
                              plaq.zeta(sites[1], sites[2]));
  const double r2 = std::sqrt(plaq.zeta(sites[0], sites[1]) * plaq.zeta(sites[1], sites[2]) /
                              plaq.zeta(sites[2], sites[0]));
  const double r3 = std::sqrt(plaq.zeta(sites[1], sites[2]) * plaq.zeta(sites[2], sites[0]) /
                              plaq.zeta(sites[0], sites[1]));
  StateVector g = ground;
  double n_tri = 0;
  n_tri += r1 * r1 * std::real(expectation(g, number_operator(system_basis, sites[0])));
  n_tri += r2 * r2 * std::real(expectation(g, number_operator(system_basis, sites[1])));
  n_tri += r3 * r3 * std::real(expectation(g, number_operator(system_basis, sites[2])));

  const double j_scale = plaq.reference_scale;
  ExtractionResult r;
  r.window_used = window;
  r.fit_order = 1;

  switch (scheme) {
    case LoopScheme::FluxHalfPi: {
      if (std::abs(std::abs(flux) - pi / 2) > 1e-9)
        throw std::invalid_argument(
            "loop_probe: flux_half_pi scheme requires Phi = +-pi/2 (constraint alpha + beta + "
            "gamma (mod 2pi) = Phi)");
      const double angle = flux > 0 ? -pi / 2 : pi / 2;
      const PulseSimulator sim(
          system_basis, hamiltonian_terms,
          plaquette_coupling(plaq, angle, angle, false, options), options.dim_budget);
      const double slope = fitted_slope_p0(sim, ground, options, window);
      r.estimator = "loop_flux_half_pi";
      r.value = (slope - n_tri) * j_scale / std::sin(angle);
      r.raw_slope = slope;
      r.sweeps_used = 1;
      break;
    }
    case LoopScheme::FullyFrustrated: {
      if (std::abs(std::abs(flux) - pi) > 1e-9)
        throw std::invalid_argument(
            "loop_probe: fully_frustrated scheme requires Phi = +-pi (constraint alpha + beta + "
            "gamma (mod 2pi) = Phi)");
      const double sgn = 1;  // +-pi coincide modulo 2pi; use the +pi/3, +pi choice
      const PulseSimulator sim1(
          system_basis, hamiltonian_terms,
          plaquette_coupling(plaq, sgn * pi / 3, sgn * pi / 3, false, options), options.dim_budget);
      const PulseSimulator sim2(system_basis, hamiltonian_terms,
                                plaquette_coupling(plaq, sgn * pi, sgn * pi, false, options),
                                options.dim_budget);
      const double s1 = fitted_slope_p0(sim1, ground, options, window);
      const double s2 = fitted_slope_p0(sim2, ground, options, window);
      const double c_over_j = n_tri - s2;  // from A^dag A = n_tri - c/J
      const double j = (s1 - n_tri - 0.5 * c_over_j) * 2.0 / std::sqrt(3.0) * sgn;
      r.estimator = "loop_fully_frustrated";
      r.value = j * j_scale;
      r.raw_slope = s1;
      r.sweeps_used = 2;
      break;
    }
    case LoopScheme::LabFrame: {
      const PulseSimulator sim1(system_basis, hamiltonian_terms,
                                plaquette_coupling(plaq, 2 * pi / 3, 2 * pi / 3, true, options),
                                options.dim_budget);
      const PulseSimulator sim2(system_basis, hamiltonian_terms,
                                plaquette_coupling(plaq, 0, 0, true, options), options.dim_budget);
      const double s1 = fitted_slope_p0(sim1, ground, options, window);
      const double s2 = fitted_slope_p0(sim2, ground, options, window);
      const double c_over_j = s2 - n_tri;  // from A^dag A = n_tri + c_lab/J
      const double j = (s1 - n_tri + 0.5 * c_over_j) * 2.0 / std::sqrt(3.0);
      r.estimator = "loop_lab_frame";
      r.value = j * j_scale;
      r.raw_slope = s1;
      r.sweeps_used = 2;
      break;
    }
  }
  return r;
}

GlobalProbeResult global_chiral_probe(const StateVector& ground, const Basis& system_basis,
                                      const std::vector<MonomialTerm>& hamiltonian_terms,
                                      const LadderSpec& spec, const SweepOptions& options) {
  if (!spec.periodic)
    throw std::invalid_argument("global_chiral_probe: requires periodic boundary conditions");
  const HoppingTable hoppings = ladder_hoppings(spec);
  const int L = spec.rungs;

  std::optional<CouplingSpec> merged;
  for (int leg = 0; leg < 2; ++leg) {
    for (int y = 0; y < L; ++y) {
      const LinkCurrent link =
          link_current(hoppings, spec.site(leg, y), spec.site(leg, (y + 1) % L), system_basis);
      // left-leg currents enter +, right-leg currents - (sign-reversed phases)
      const CouplingSpec one = current_coupling(link, system_basis, options.dt,
                                                leg == 0 ? +1 : -1, options.truncation,
                                                options.evolution);
      merged = merged ? merge_couplings(*merged, one) : one;
    }
  }
  const PulseSimulator sim(system_basis, hamiltonian_terms, *merged, options.dim_budget);

  std::vector<double> s_grid{0.0}, p0s{1.0}, y2s{1.0};
  double s = options.grid.s0;
  for (int k = 1; k < options.grid.max_points && s <= options.grid.s_max;
       ++k, s *= options.grid.ratio) {
    const AncillaDistribution d = sim.run(ground, s, {}, options.evolve_tol);
    s_grid.push_back(s);
    p0s.push_back(d.p0());
    y2s.push_back(d.p0() - d.p_total_excitation(2) / 3.0);
    if (d.p0() < 1.0 - options.window_quadratic - 0.05) break;
  }

  const WindowData lin = select_window(s_grid, p0s, p0s, options.window_linear);
  require_points(lin, 1, "global_chiral_probe");
  const PolyFit lin_fit = polyfit(lin.xs, lin.ys, 1);
  const double g = -lin_fit.coefficients[1];  // <(L/J) j_c + 2N>
  const double n_total = system_basis.particles();
  const double j_over = spec.leg_hopping / L;

  GlobalProbeResult out;
  out.current.estimator = "global_chiral_current";
  out.current.value = (g - 2.0 * n_total) * j_over;
  out.current.raw_slope = g;
  out.current.window_used = options.window_linear;
  out.current.s_max_used = lin.s_max;
  out.current.points_used = static_cast<int>(lin.xs.size());
  out.current.fit_order = 1;
  out.current.residual = lin_fit.residual;
  out.current.sweeps_used = 1;

  const WindowData quad = select_window(s_grid, y2s, p0s, options.window_quadratic);
  require_points(quad, 2, "global_chiral_probe");
  const PolyFit quad_fit = polyfit(quad.xs, quad.ys, 2);
  const double g2 = 3.0 * quad_fit.coefficients[2];  // <((L/J) j_c + 2N)^2>
  out.variance.estimator = "global_chiral_variance";
  out.variance.value = (g2 - g * g) * j_over * j_over;
  out.variance.raw_slope = g2;
  out.variance.window_used = options.window_quadratic;
  out.variance.s_max_used = quad.s_max;
  out.variance.points_used = static_cast<int>(quad.xs.size());
  out.variance.fit_order = 2;
  out.variance.residual = quad_fit.residual;
  out.variance.sweeps_used = 1;
  return out;
}

AncillaDistribution apply_detection_errors(const AncillaDistribution& dist,
                                           const DetectionErrorModel& model) {
  model.validate();
  if (dist.probabilities.empty()) return dist;
  const std::size_t m = dist.probabilities.begin()->first.size();
  if (m != 1)
    throw std::invalid_argument("apply_detection_errors: single-ancilla distributions only");
  const double p0 = dist.p0();
  const double p_pos = 1.0 - p0;
  const double p0_new = (1.0 - model.alpha) * p0 + model.beta * p_pos;

  AncillaDistribution out = dist;
  const Occupation zero(m, 0);
  out.probabilities[zero] = p0_new;
  const double rest = 1.0 - p0_new;
  if (p_pos > 1e-300) {
    const double scale = rest / p_pos;
    for (auto& [occ, p] : out.probabilities)
      if (occ != zero) p *= scale;
  } else if (rest > 0) {
    Occupation one(m, 0);
    one[0] = 1;
    out.probabilities[one] += rest;
  }
  return out;
}

double correct_detected_slope(double fitted_slope, const DetectionErrorModel& model) {
  model.validate();
  return fitted_slope / (1.0 - model.alpha - model.beta);
}

AncillaDistribution sample_shots(const AncillaDistribution& dist, int shots, std::mt19937& rng) {
  if (shots <= 0) throw std::invalid_argument("sample_shots: shots must be positive");
  std::vector<Occupation> outcomes;
  std::vector<double> weights;
  for (const auto& [occ, p] : dist.probabilities) {
    outcomes.push_back(occ);
    weights.push_back(std::max(p, 0.0));
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::map<Occupation, int> counts;
  for (int i = 0; i < shots; ++i) counts[outcomes[pick(rng)]] += 1;
  AncillaDistribution out = dist;
  out.probabilities.clear();
  for (const auto& [occ, c] : counts)
    out.probabilities[occ] = static_cast<double>(c) / shots;
  return out;
}

}  // namespace qprobe
