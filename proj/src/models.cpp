#include "qprobe/models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qprobe {

namespace {
constexpr Complex kI{0.0, 1.0};

std::pair<int, int> canonical(int l1, int l2) { return l1 < l2 ? std::pair{l1, l2} : std::pair{l2, l1}; }
}  // namespace

void HoppingTable::set(int l1, int l2, Complex j12) {
  if (l1 == l2 || l1 < 0 || l2 < 0 || l1 >= modes_ || l2 >= modes_)
    throw std::invalid_argument("HoppingTable::set: invalid link");
  amp_[canonical(l1, l2)] = l1 < l2 ? j12 : std::conj(j12);
}

Complex HoppingTable::amplitude(int l1, int l2) const {
  auto it = amp_.find(canonical(l1, l2));
  if (it == amp_.end()) throw std::invalid_argument("HoppingTable: not a lattice link");
  return l1 < l2 ? it->second : std::conj(it->second);
}

bool HoppingTable::is_link(int l1, int l2) const {
  return l1 != l2 && amp_.count(canonical(l1, l2)) > 0;
}

std::vector<std::pair<int, int>> HoppingTable::links() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(amp_.size());
  for (const auto& [link, amp] : amp_) out.push_back(link);
  return out;
}

void LadderSpec::validate() const {
  if (rungs < 2) throw std::invalid_argument("LadderSpec: need at least 2 rungs");
  if (leg_hopping <= 0) throw std::invalid_argument("LadderSpec: J must be positive");
  if (rung_hopping < 0) throw std::invalid_argument("LadderSpec: K must be non-negative");
  if (interaction < 0) throw std::invalid_argument("LadderSpec: U must be non-negative");
}

HoppingTable ladder_hoppings(const LadderSpec& spec) {
  spec.validate();
  HoppingTable t(spec.sites());
  const int L = spec.rungs;
  for (int leg = 0; leg < 2; ++leg) {
    for (int y = 0; y + 1 < L; ++y) t.set(spec.site(leg, y), spec.site(leg, y + 1), spec.leg_hopping);
    if (spec.periodic && L > 2) t.set(spec.site(leg, L - 1), spec.site(leg, 0), spec.leg_hopping);
  }
  for (int y = 0; y < L; ++y) {
    // rung gauge: J_{(L,y),(R,y)} = K exp(-i phi y), legs real
    t.set(spec.site(0, y), spec.site(1, y), spec.rung_hopping * std::exp(-kI * (spec.flux * y)));
  }
  return t;
}

namespace {

std::vector<MonomialTerm> hopping_terms(const HoppingTable& t) {
  std::vector<MonomialTerm> terms;
  for (const auto& [l1, l2] : t.links()) {
    const Complex j = t.amplitude(l1, l2);
    if (j == Complex(0)) continue;
    terms.push_back({-j, {{l1, Action::Create}, {l2, Action::Annihilate}}});
    terms.push_back({-std::conj(j), {{l2, Action::Create}, {l1, Action::Annihilate}}});
  }
  return terms;
}

void append_onsite_interaction(std::vector<MonomialTerm>& terms, int sites, double u) {
  if (u == 0) return;
  for (int l = 0; l < sites; ++l) {
    terms.push_back({0.5 * u, {{l, Action::Number}, {l, Action::Number}}});
    terms.push_back({-0.5 * u, {{l, Action::Number}}});
  }
}

}  // namespace

Model build_hh_ladder(const LadderSpec& spec, int particles) {
  spec.validate();
  ModeSpec modes{spec.sites(), spec.statistics, spec.max_occupancy};
  Basis basis = Basis::sector(modes, particles);
  HoppingTable hoppings = ladder_hoppings(spec);
  std::vector<MonomialTerm> terms = hopping_terms(hoppings);
  append_onsite_interaction(terms, spec.sites(), spec.interaction);
  SparseOperator h = assemble(basis, terms, /*expect_hermitian=*/true);
  return Model{std::move(basis), std::move(hoppings), std::move(terms), std::move(h)};
}

std::vector<MonomialTerm> link_current_terms(const HoppingTable& hoppings, int l1, int l2,
                                             bool lab_frame) {
  Complex j = hoppings.amplitude(l1, l2);
  if (lab_frame) j = std::abs(j);
  return {{-kI * j, {{l1, Action::Create}, {l2, Action::Annihilate}}},
          {kI * std::conj(j), {{l2, Action::Create}, {l1, Action::Annihilate}}}};
}

LinkCurrent link_current(const HoppingTable& hoppings, int l1, int l2, const Basis& basis) {
  const Complex j = hoppings.amplitude(l1, l2);
  LinkCurrent lc;
  lc.l1 = l1;
  lc.l2 = l2;
  lc.magnitude = std::abs(j);
  lc.phase = std::arg(j);
  lc.op = assemble(basis, link_current_terms(hoppings, l1, l2), /*expect_hermitian=*/true);
  return lc;
}

SparseOperator chiral_current(const LadderSpec& spec, const Basis& basis) {
  const HoppingTable t = ladder_hoppings(spec);
  const int L = spec.rungs;
  const int n_links = spec.periodic ? L : L - 1;
  std::vector<MonomialTerm> terms;
  for (int leg = 0; leg < 2; ++leg) {
    const double sign = leg == 0 ? 1.0 : -1.0;
    for (int k = 0; k < n_links; ++k) {
      const int y = k, y2 = (k + 1) % L;
      for (MonomialTerm term : link_current_terms(t, spec.site(leg, y), spec.site(leg, y2))) {
        term.coefficient *= sign / n_links;
        terms.push_back(std::move(term));
      }
    }
  }
  return assemble(basis, terms, /*expect_hermitian=*/true);
}

double mean_current_variance(const StateVector& state, const HoppingTable& hoppings,
                             const Basis& basis) {
  double acc = 0;
  int n_links = 0;
  for (const auto& [l1, l2] : hoppings.links()) {
    if (hoppings.amplitude(l1, l2) == Complex(0)) continue;
    const LinkCurrent lc = link_current(hoppings, l1, l2, basis);
    const Vector jpsi = lc.op.matrix * state.amplitudes;
    const double j2 = jpsi.squaredNorm();
    const double j1 = std::real(state.amplitudes.dot(jpsi));
    acc += (j2 - j1 * j1) / (lc.magnitude * lc.magnitude);
    ++n_links;
  }
  if (n_links == 0) throw std::invalid_argument("mean_current_variance: table has no links");
  return acc / n_links;
}

double PlaquetteSpec::flux() const {
  const double phi = std::arg(hoppings.amplitude(sites[0], sites[1])) +
                     std::arg(hoppings.amplitude(sites[1], sites[2])) +
                     std::arg(hoppings.amplitude(sites[2], sites[0]));
  double f = std::remainder(phi, 2 * std::numbers::pi);
  if (f <= -std::numbers::pi) f += 2 * std::numbers::pi;
  return f;
}

double PlaquetteSpec::zeta(int a, int b) const {
  return std::abs(hoppings.amplitude(a, b)) / reference_scale;
}

Model build_triangle(const PlaquetteSpec& plaq, int particles, Statistics statistics,
                     int max_occupancy, double interaction) {
  ModeSpec modes{plaq.hoppings.modes(), statistics, max_occupancy};
  Basis basis = Basis::sector(modes, particles);
  std::vector<MonomialTerm> terms = hopping_terms(plaq.hoppings);
  append_onsite_interaction(terms, plaq.hoppings.modes(), interaction);
  SparseOperator h = assemble(basis, terms, /*expect_hermitian=*/true);
  return Model{std::move(basis), plaq.hoppings, std::move(terms), std::move(h)};
}

SparseOperator loop_current(const PlaquetteSpec& plaq, const Basis& basis, bool lab_frame) {
  std::vector<MonomialTerm> terms;
  const auto& s = plaq.sites;
  for (int k = 0; k < 3; ++k)
    for (MonomialTerm term : link_current_terms(plaq.hoppings, s[static_cast<std::size_t>(k)],
                                                s[static_cast<std::size_t>((k + 1) % 3)], lab_frame))
      terms.push_back(std::move(term));
  return assemble(basis, terms, /*expect_hermitian=*/true);
}

Model build_spin_xy(const HoppingTable& couplings, const HoppingTable* zz, int down_spins) {
  ModeSpec modes{couplings.modes(), Statistics::SpinHalf, 1};
  Basis basis = Basis::sector(modes, down_spins);
  std::vector<MonomialTerm> terms;
  for (const auto& [l1, l2] : couplings.links()) {
    const Complex j = couplings.amplitude(l1, l2);
    if (j == Complex(0)) continue;
    // -J_{l1 l2} S+_{l1} S-_{l2} + h.c. with S+ = a, S- = a^dag
    terms.push_back({-j, {{l1, Action::Annihilate}, {l2, Action::Create}}});
    terms.push_back({-std::conj(j), {{l2, Action::Annihilate}, {l1, Action::Create}}});
  }
  if (zz != nullptr) {
    for (const auto& [l1, l2] : zz->links()) {
      const Complex jz = zz->amplitude(l1, l2);
      if (std::abs(std::imag(jz)) > 1e-14)
        throw std::invalid_argument("build_spin_xy: Jz couplings must be real");
      const double g = -std::real(jz);  // -Jz Sz_{l1} Sz_{l2}
      terms.push_back({0.25 * g, {}});
      terms.push_back({-0.5 * g, {{l1, Action::Number}}});
      terms.push_back({-0.5 * g, {{l2, Action::Number}}});
      terms.push_back({g, {{l1, Action::Number}, {l2, Action::Number}}});
    }
  }
  SparseOperator h = assemble(basis, terms, /*expect_hermitian=*/true);
  return Model{std::move(basis), couplings, std::move(terms), std::move(h)};
}

std::vector<MonomialTerm> spin_current_terms(const HoppingTable& couplings, int l1, int l2) {
  const Complex j = couplings.amplitude(l1, l2);
  // -i (J_{l1 l2} S+_{l1} S-_{l2} - h.c.)
  return {{-kI * j, {{l1, Action::Annihilate}, {l2, Action::Create}}},
          {kI * std::conj(j), {{l2, Action::Annihilate}, {l1, Action::Create}}}};
}

LinkCurrent spin_current(const HoppingTable& couplings, int l1, int l2, const Basis& basis) {
  const Complex j = couplings.amplitude(l1, l2);
  LinkCurrent lc;
  lc.l1 = l1;
  lc.l2 = l2;
  lc.magnitude = std::abs(j);
  lc.phase = std::arg(j);
  lc.op = assemble(basis, spin_current_terms(couplings, l1, l2), /*expect_hermitian=*/true);
  return lc;
}

std::vector<MonomialTerm> number_terms(int mode) { return {{Complex(1), {{mode, Action::Number}}}}; }

SparseOperator number_operator(const Basis& basis, int mode) {
  return assemble(basis, number_terms(mode), /*expect_hermitian=*/true);
}

}  // namespace qprobe
