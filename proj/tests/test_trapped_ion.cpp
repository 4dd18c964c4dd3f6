#include "doctest.h"

#include <cmath>

#include "qprobe/solver.hpp"
#include "qprobe/trapped_ion.hpp"

using namespace qprobe;

namespace {

struct Ring {
  Model model;
  GroundStateResult gs;
  SidebandCoupling hardware;
};

Ring three_spin_ring(double phase = 0.8) {
  HoppingTable j(3);
  j.set(0, 1, std::exp(Complex(0, phase)));
  j.set(1, 2, std::exp(Complex(0, phase)));
  j.set(2, 0, std::exp(Complex(0, phase)));
  Ring r{build_spin_xy(j, nullptr, 1), {}, {}};
  r.gs = ground_state(r.model.hamiltonian);
  r.hardware.reference_rabi = 1.0;
  r.hardware.ions = {{0, 1.0, 0.1, 0.0}, {1, 1.0, 0.1, 0.0}};
  return r;
}

}  // namespace

TEST_CASE("thermal distribution basics") {
  const ThermalAncilla cold = thermal_distribution(1.0, 0.0, 6);
  CHECK(cold.pn(0) == 1.0);
  CHECK(cold.pn(1) == 0.0);
  CHECK(cold.tail_mass == 0.0);

  // omega/T = ln 2: p_n proportional to 2^-n
  const ThermalAncilla half = thermal_distribution(std::log(2.0), 1.0, 40);
  CHECK(half.pn(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(half.pn(3) == doctest::Approx(0.0625).epsilon(1e-9));

  // omega/T = 1, n_max = 10: direct normalization oracle
  const ThermalAncilla warm = thermal_distribution(1.0, 1.0, 10);
  double z = 0;
  for (int n = 0; n <= 10; ++n) z += std::exp(-n);
  for (int n = 0; n <= 10; ++n)
    CHECK(warm.pn(n) == doctest::Approx(std::exp(-n) / z).epsilon(1e-12));
  double total = 0;
  for (int n = 0; n <= 10; ++n) total += warm.pn(n);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(warm.tail_mass == doctest::Approx(std::exp(-11.0)).epsilon(1e-9));
  CHECK(warm.tail_warning);

  CHECK_THROWS(thermal_distribution(-1.0, 1.0));
  CHECK_THROWS(thermal_distribution(1.0, -0.5));
}

TEST_CASE("channel coefficients at zero temperature") {
  const ThermalAncilla cold = thermal_distribution(1.0, 0.0, 4);
  CHECK(alpha_coefficient(cold, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(beta_coefficient(cold, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(alpha_coefficient(cold, 1) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("synthetic linear channels are recovered exactly") {
  const ThermalAncilla warm = thermal_distribution(1.0, 1.0, 6);
  const double j0 = 0.37;
  ThermalSweep sweep;
  sweep.coupling_magnitude = 1.0;
  for (double s : {0.0, 0.002, 0.004, 0.008, 0.012}) {
    sweep.s_grid.push_back(s);
    std::vector<double> along, against;
    for (int n = 0; n <= warm.n_max; ++n) {
      along.push_back(warm.pn(n) - s * alpha_coefficient(warm, n) * j0);
      against.push_back(warm.pn(n) + s * alpha_coefficient(warm, n) * j0);
    }
    sweep.along.push_back(along);
    sweep.against.push_back(against);
  }
  for (int n : {0, 1}) {
    const ExtractionResult r = extract_spin_current(sweep, warm, n);
    CHECK(r.value == doctest::Approx(j0).epsilon(1e-10));
  }
}

TEST_CASE("degenerate channels are rejected with advice") {
  // a flat distribution makes alpha_n vanish in the bulk
  ThermalAncilla flat;
  flat.n_max = 4;
  flat.p = {0.2, 0.2, 0.2, 0.2, 0.2};
  ThermalSweep sweep;
  sweep.s_grid = {0.0, 0.01, 0.02};
  sweep.along.assign(3, flat.p);
  sweep.against.assign(3, flat.p);
  CHECK(alpha_coefficient(flat, 2) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS(extract_spin_current(sweep, flat, 2));
}

TEST_CASE("zero-temperature prediction reduces to the single-ancilla form") {
  const Ring r = three_spin_ring();
  const CouplingSpec cpl = ion_current_coupling(0, 1, r.model.hoppings, r.hardware, 0.01, +1, 6);
  const CouplingOperators ops = build_coupling_operators(r.model.basis, cpl);
  const ThermalAncilla cold = thermal_distribution(1.0, 0.0, 4);
  const double s = 0.03;
  const auto pred = predict_thermal_probabilities(r.gs.state, ops, cold, s);
  CHECK(pred[0] == doctest::Approx(1.0 - s * first_moment(r.gs.state, ops)).epsilon(1e-12));
}

TEST_CASE("thermal prediction stays normalized to first order") {
  const Ring r = three_spin_ring();
  const CouplingSpec cpl = ion_current_coupling(0, 1, r.model.hoppings, r.hardware, 0.01, +1, 40);
  const CouplingOperators ops = build_coupling_operators(r.model.basis, cpl);
  const ThermalAncilla warm = thermal_distribution(2.0, 1.0, 38);
  for (double s : {0.01, 0.05}) {
    const auto pred = predict_thermal_probabilities(r.gs.state, ops, warm, s);
    double total = 0;
    for (double p : pred) total += p;
    // telescoping coefficients: deviation only from the truncated tail
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("ensemble evolution matches the thermal formula to second order") {
  const Ring r = three_spin_ring();
  const ThermalAncilla warm = thermal_distribution(1.0, 1.0, 8);
  const CouplingSpec cpl =
      ion_current_coupling(0, 1, r.model.hoppings, r.hardware, 0.01, +1, warm.n_max + 2,
                           EvolutionMode::PulseOnly);
  const CouplingOperators ops = build_coupling_operators(r.model.basis, cpl);
  const PulseSimulator sim(r.model.basis, r.model.hamiltonian_terms, cpl);

  double prev_err = 0;
  double prev_s = 0;
  for (double s : {0.004, 0.008}) {
    double err = 0;
    for (int n = 0; n <= warm.n_max; ++n) {
      double ensemble = 0;
      for (int n0 = 0; n0 <= warm.n_max; ++n0) {
        if (warm.pn(n0) == 0) continue;
        const AncillaDistribution d =
            sim.run(r.gs.state, s, Occupation{static_cast<std::uint8_t>(n0)});
        ensemble += warm.pn(n0) * d.p({static_cast<std::uint8_t>(n)});
      }
      err = std::max(err,
                     std::abs(ensemble - predict_thermal_probabilities(r.gs.state, ops, warm,
                                                                       s)[static_cast<std::size_t>(n)]));
    }
    if (prev_err > 0) {
      // quadratic remainder: doubling s roughly quadruples the deviation
      const double order = std::log(err / prev_err) / std::log(s / prev_s);
      CHECK(order == doctest::Approx(2.0).epsilon(0.15));
    }
    prev_err = err;
    prev_s = s;
  }
}

TEST_CASE("zero-temperature sweep equals the pure-state pipeline") {
  const Ring r = three_spin_ring();
  const ThermalAncilla cold = thermal_distribution(1.0, 0.0, 4);
  SweepOptions opt;
  const ThermalSweep sweep = thermal_sweep(r.gs.state, r.model.basis, r.model.hamiltonian_terms,
                                           r.model.hoppings, 0, 1, r.hardware, cold, opt);
  const CouplingSpec cpl = ion_current_coupling(0, 1, r.model.hoppings, r.hardware, opt.dt, +1,
                                                cold.n_max + 2, opt.evolution);
  const PulseSimulator sim(r.model.basis, r.model.hamiltonian_terms, cpl);
  for (std::size_t i = 0; i < sweep.s_grid.size(); ++i) {
    const AncillaDistribution d = sim.run(r.gs.state, sweep.s_grid[i]);
    for (int n = 0; n <= cold.n_max; ++n)
      CHECK(sweep.along[i][static_cast<std::size_t>(n)] ==
            doctest::Approx(d.p({static_cast<std::uint8_t>(n)})).epsilon(1e-12));
  }
}

TEST_CASE("spin current extraction on the complex-flux ring matches exact values") {
  const Ring r = three_spin_ring();
  const LinkCurrent lc = spin_current(r.model.hoppings, 0, 1, r.model.basis);
  const double exact = std::real(expectation(r.gs.state, lc.op)) / lc.magnitude;
  REQUIRE(std::abs(exact) > 0.05);

  SweepOptions opt;
  for (double temperature : {0.0, 1.0}) {
    const ThermalAncilla ancilla = thermal_distribution(1.0, temperature, temperature == 0 ? 4 : 8);
    const ThermalSweep sweep = thermal_sweep(r.gs.state, r.model.basis, r.model.hamiltonian_terms,
                                             r.model.hoppings, 0, 1, r.hardware, ancilla, opt);
    const ExtractionResult res = extract_spin_current(sweep, ancilla, 0);
    CHECK(res.value == doctest::Approx(exact).epsilon(0.05));
  }
}

TEST_CASE("fully polarized system only emits into the spins") {
  // all spins down: A = sum lambda S^- annihilates the state
  HoppingTable j(2);
  j.set(0, 1, Complex(1.0));
  const Model model = build_spin_xy(j, nullptr, 2);  // both spins down
  REQUIRE(model.basis.dimension() == 1);
  const StateVector psi{model.basis.tag(), Vector::Ones(1)};
  SidebandCoupling hw;
  hw.ions = {{0, 1.0, 0.1, 0.0}, {1, 1.0, 0.1, 0.0}};
  const CouplingOperators ops =
      build_coupling_operators(model.basis, ion_current_coupling(0, 1, j, hw, 0.01, +1, 4));
  CHECK(first_moment(psi, ops) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(reversed_first_moment(psi, ops) > 0.0);
}

TEST_CASE("hardware validation") {
  HoppingTable j(3);
  j.set(0, 1, Complex(1.0));
  SidebandCoupling hw;
  hw.ions = {{0, 1.0, 0.1, 0.0}, {2, 1.0, 0.1, 0.0}};  // wrong second ion
  CHECK_THROWS(ion_current_coupling(0, 1, j, hw, 0.01));
  hw.ions = {{0, 1.0, 0.1, 0.0}};  // missing drive on ion 1
  CHECK_THROWS(ion_current_coupling(0, 1, j, hw, 0.01));
}
