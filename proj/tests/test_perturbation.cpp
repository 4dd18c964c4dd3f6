#include "doctest.h"

#include <numbers>

#include "qprobe/fit.hpp"
#include "qprobe/perturbation.hpp"
#include "qprobe/solver.hpp"

using namespace qprobe;

namespace {

struct Toy {
  Model model;
  GroundStateResult gs;
  CouplingSpec coupling;
};

// two soft-boson modes with a complex hopping link, probed along the link
Toy two_site_toy() {
  Toy t;
  HoppingTable hop(2);
  hop.set(0, 1, std::exp(Complex(0, 0.6)));
  std::vector<MonomialTerm> terms{
      {-hop.amplitude(0, 1), {{0, Action::Create}, {1, Action::Annihilate}}},
      {-hop.amplitude(1, 0), {{1, Action::Create}, {0, Action::Annihilate}}}};
  Basis basis = Basis::sector({2, Statistics::Boson, ModeSpec::kUnbounded}, 2);
  SparseOperator h = assemble(basis, terms, true);
  t.model = Model{std::move(basis), hop, std::move(terms), std::move(h)};
  t.gs = ground_state(t.model.hamiltonian);
  const LinkCurrent lc = link_current(t.model.hoppings, 0, 1, t.model.basis);
  t.coupling = current_coupling(lc, t.model.basis, 0.01, +1, /*truncation=*/3,
                                EvolutionMode::PulseOnly);
  return t;
}

}  // namespace

TEST_CASE("s = 0 gives the trivial prediction") {
  const Toy t = two_site_toy();
  const CouplingOperators ops = build_coupling_operators(t.model.basis, t.coupling);
  const JointPrediction p = predict_joint(t.gs.state, ops, {0.0});
  CHECK(p.p0 == 1.0);
  CHECK(p.p1[0] == 0.0);
  CHECK(p.p2_double[0] == 0.0);
}

TEST_CASE("order-2 probabilities sum to unity exactly") {
  const Toy t = two_site_toy();
  const CouplingOperators ops = build_coupling_operators(t.model.basis, t.coupling);
  for (double s : {0.01, 0.05, 0.2}) {
    const JointPrediction p = predict_joint(t.gs.state, ops, {s});
    // the s and s^2 coefficients cancel algebraically, so the sum is 1 exactly
    CHECK(p.total() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("commuted soft-boson form equals the general prediction") {
  const Toy t = two_site_toy();
  const CouplingOperators ops = build_coupling_operators(t.model.basis, t.coupling);
  for (double s : {0.005, 0.03, 0.1}) {
    const JointPrediction joint = predict_joint(t.gs.state, ops, {s});
    const CommutedPrediction c = predict_commuted_boson(t.gs.state, ops, s);
    CHECK(c.p0 == doctest::Approx(joint.p0).epsilon(1e-12));
    CHECK(c.p1 == doctest::Approx(joint.p1[0]).epsilon(1e-12));
    CHECK(c.p2 == doctest::Approx(joint.p2_double[0]).epsilon(1e-12));
  }
}

TEST_CASE("occupancy-resolved estimator is linear with zero quadratic term") {
  const Toy t = two_site_toy();
  const CouplingOperators ops = build_coupling_operators(t.model.basis, t.coupling);
  const double n1 = first_moment(t.gs.state, ops);
  for (double s : {0.01, 0.05, 0.15}) {
    const CommutedPrediction c = predict_commuted_boson(t.gs.state, ops, s);
    const double ptilde = 1.0 - (c.p1 + 2.0 * c.p2) / (1.0 - 2.0 * s / 3.0);
    CHECK(ptilde == doctest::Approx(1.0 - s * n1).epsilon(1e-12));
  }
}

TEST_CASE("commuted form rejects hard-core couplings") {
  LadderSpec spec;
  spec.rungs = 2;
  spec.rung_hopping = 1.0;
  spec.flux = 1.0;
  spec.max_occupancy = 1;
  const Model model = build_hh_ladder(spec, 2);
  const GroundStateResult gs = ground_state(model.hamiltonian);
  const LinkCurrent lc = link_current(model.hoppings, 0, 1, model.basis);
  const CouplingOperators ops =
      build_coupling_operators(model.basis, current_coupling(lc, model.basis, 0.01));
  CHECK_THROWS(predict_commuted_boson(gs.state, ops, 0.01));
}

TEST_CASE("fermionic double occupation of one ancilla vanishes") {
  LadderSpec spec;
  spec.rungs = 2;
  spec.rung_hopping = 1.3;
  spec.flux = 0.8;
  spec.statistics = Statistics::Fermion;
  spec.max_occupancy = 1;
  const Model model = build_hh_ladder(spec, 2);
  const GroundStateResult gs = ground_state(model.hamiltonian);
  const LinkCurrent lc = link_current(model.hoppings, 0, 1, model.basis);
  const CouplingOperators ops =
      build_coupling_operators(model.basis, current_coupling(lc, model.basis, 0.01));
  const JointPrediction p = predict_joint(gs.state, ops, {0.05});
  CHECK(p.p2_double[0] == 0.0);
}

TEST_CASE("full pulse evolution deviates from the order-2 oracle at cubic order") {
  const Toy t = two_site_toy();
  const CouplingOperators ops = build_coupling_operators(t.model.basis, t.coupling);
  const PulseSimulator sim(t.model.basis, t.model.hamiltonian_terms, t.coupling);

  std::vector<double> log_s, log_err;
  for (double s = 1e-3; s <= 0.1; s *= 2.5) {
    const double p0 = sim.run(t.gs.state, s).p0();
    const double pred = predict_joint(t.gs.state, ops, {s}).p0;
    const double err = std::abs(p0 - pred);
    REQUIRE(err > 0);
    log_s.push_back(std::log(s));
    log_err.push_back(std::log(err));
  }
  const PolyFit fit = polyfit(log_s, log_err, 1);
  CHECK(fit.coefficients[1] == doctest::Approx(3.0).epsilon(0.07));
}

TEST_CASE("antisymmetric combination has no density term at linear order") {
  const Toy t = two_site_toy();
  const LinkCurrent lc = link_current(t.model.hoppings, 0, 1, t.model.basis);
  const CouplingOperators fwd = build_coupling_operators(
      t.model.basis, current_coupling(lc, t.model.basis, 0.01, +1, 3, EvolutionMode::PulseOnly));
  const CouplingOperators bwd = build_coupling_operators(
      t.model.basis, current_coupling(lc, t.model.basis, 0.01, -1, 3, EvolutionMode::PulseOnly));
  // <A^dag A>_+ = n1 + n2 + j/|J| and <A^dag A>_- = n1 + n2 - j/|J|
  const double n_plus = first_moment(t.gs.state, fwd);
  const double n_minus = first_moment(t.gs.state, bwd);
  double density = 0;
  for (int l : {0, 1})
    density += std::real(expectation(t.gs.state, number_operator(t.model.basis, l)));
  CHECK(n_plus + n_minus == doctest::Approx(2.0 * density).epsilon(1e-12));
  const double j_exact = std::real(expectation(t.gs.state, lc.op)) / lc.magnitude;
  CHECK(0.5 * (n_plus - n_minus) == doctest::Approx(j_exact).epsilon(1e-12));
}

TEST_CASE("predicted probabilities are real and in range inside the window") {
  const Toy t = two_site_toy();
  const CouplingOperators ops = build_coupling_operators(t.model.basis, t.coupling);
  for (double s = 1e-4; s < 0.05; s *= 3) {
    const JointPrediction p = predict_joint(t.gs.state, ops, {s});
    for (double v : {p.p0, p.p1[0], p.p2_double[0]}) {
      CHECK(v >= -1e-12);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}
