#include "qprobe/perturbation.hpp"

#include <cmath>
#include <stdexcept>

namespace qprobe {

namespace {

// A lowering application A_m can push the system two sectors down (products
// apply it twice) and the reversed moment <A A^dag> one sector up; enumerate
// the particle-number tower N-2 .. N+2 once and assemble everything there.
Basis tower_basis(const Basis& system) {
  // cap(0) == particles for a soft bosonic sector means the occupancy was
  // never externally capped; keep the tower unbounded in that case.
  int max_occ = system.cap(0);
  if (system.system_statistics() == Statistics::Boson && max_occ >= system.particles())
    max_occ = ModeSpec::kUnbounded;
  ModeSpec modes{system.mode_count(), system.system_statistics(), max_occ};
  std::vector<int> sectors;
  for (int n = system.particles() - 2; n <= system.particles() + 2; ++n)
    if (n >= 0) sectors.push_back(n);
  return Basis::sector_union(modes, sectors);
}

}  // namespace

CouplingOperators build_coupling_operators(const Basis& system, const CouplingSpec& coupling) {
  coupling.validate();
  CouplingOperators ops;
  ops.tower = tower_basis(system);
  ops.kind = coupling.kind;
  ops.system_tag = system.tag();
  ops.embed_index.reserve(static_cast<std::size_t>(system.dimension()));
  for (int i = 0; i < system.dimension(); ++i)
    ops.embed_index.push_back(ops.tower.index_of(system.state(i)));
  for (int m = 0; m < coupling.ancilla_count; ++m) {
    std::vector<MonomialTerm> terms;
    for (const auto& c : coupling.coefficients) {
      if (c.ancilla != m) continue;
      terms.push_back({c.lambda,
                       {{c.mode, coupling.kind == CouplingKind::Lowering ? Action::Annihilate
                                                                         : Action::Create}}});
    }
    ops.a.push_back(assemble(ops.tower, terms));
  }
  return ops;
}

Vector CouplingOperators::embed(const StateVector& system_state) const {
  if (system_state.basis_tag != system_tag)
    throw std::invalid_argument("CouplingOperators: state lives on a different system basis");
  Vector v = Vector::Zero(tower.dimension());
  for (std::size_t i = 0; i < embed_index.size(); ++i)
    v[embed_index[i]] = system_state.amplitudes[static_cast<int>(i)];
  return v;
}

double first_moment(const StateVector& state, const CouplingOperators& ops, int m) {
  const Vector v = ops.embed(state);
  const Vector u = ops.a[static_cast<std::size_t>(m)].matrix * v;
  return u.squaredNorm();
}

double reversed_first_moment(const StateVector& state, const CouplingOperators& ops, int m) {
  const Vector v = ops.embed(state);
  const Vector u = ops.a[static_cast<std::size_t>(m)].matrix.adjoint() * v;
  return u.squaredNorm();
}

double second_moment(const StateVector& state, const CouplingOperators& ops, int m) {
  const Vector v = ops.embed(state);
  const auto& a = ops.a[static_cast<std::size_t>(m)].matrix;
  const Vector u = a.adjoint() * (a * v).eval();
  return u.squaredNorm();
}

double JointPrediction::total() const {
  double t = p0;
  for (double p : p1) t += p;
  for (std::size_t m1 = 0; m1 < p2_pair.size(); ++m1)
    for (std::size_t m2 = m1 + 1; m2 < p2_pair[m1].size(); ++m2) t += p2_pair[m1][m2];
  for (double p : p2_double) t += p;
  return t;
}

JointPrediction predict_joint(const StateVector& state, const CouplingOperators& ops,
                              const std::vector<double>& s, int order) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("predict_joint: order must be 1 or 2");
  const int m_count = ops.ancilla_count();
  if (static_cast<int>(s.size()) != m_count)
    throw std::invalid_argument("predict_joint: one s value per ancilla required");

  const Vector v = ops.embed(state);
  std::vector<Vector> av(static_cast<std::size_t>(m_count));       // A_m |psi>
  std::vector<Vector> adav(static_cast<std::size_t>(m_count));     // A_m^dag A_m |psi>
  for (int m = 0; m < m_count; ++m) {
    const auto& a = ops.a[static_cast<std::size_t>(m)].matrix;
    av[static_cast<std::size_t>(m)] = a * v;
    adav[static_cast<std::size_t>(m)] = a.adjoint() * av[static_cast<std::size_t>(m)];
  }

  std::vector<double> n1(static_cast<std::size_t>(m_count));  // <A_m^dag A_m>
  for (int m = 0; m < m_count; ++m)
    n1[static_cast<std::size_t>(m)] = av[static_cast<std::size_t>(m)].squaredNorm();

  JointPrediction out;
  out.p1.assign(static_cast<std::size_t>(m_count), 0.0);
  out.p2_pair.assign(static_cast<std::size_t>(m_count),
                     std::vector<double>(static_cast<std::size_t>(m_count), 0.0));
  out.p2_double.assign(static_cast<std::size_t>(m_count), 0.0);

  out.p0 = 1;
  for (int m = 0; m < m_count; ++m) {
    out.p0 -= s[static_cast<std::size_t>(m)] * n1[static_cast<std::size_t>(m)];
    out.p1[static_cast<std::size_t>(m)] =
        s[static_cast<std::size_t>(m)] * n1[static_cast<std::size_t>(m)];
  }
  if (order == 1) return out;

  for (int m = 0; m < m_count; ++m) {
    for (int k = 0; k < m_count; ++k) {
      const double smk = s[static_cast<std::size_t>(m)] * s[static_cast<std::size_t>(k)];
      // <A_m^dag A_m A_k^dag A_k> = (A_m^dag A_m psi , A_k^dag A_k psi)
      const Complex prod =
          adav[static_cast<std::size_t>(m)].dot(adav[static_cast<std::size_t>(k)]);
      // <A_m^dag A_k^dag A_k A_m> = |A_k A_m psi|^2
      const double normal = (ops.a[static_cast<std::size_t>(k)].matrix *
                             av[static_cast<std::size_t>(m)])
                                .squaredNorm();
      out.p0 += smk * (std::real(prod) / 3.0 + normal / 6.0);
      // {A_m^dag A_m, A_k^dag A_k}/6 + (2/3) A_m^dag A_k^dag A_k A_m
      out.p1[static_cast<std::size_t>(m)] -=
          smk * (std::real(prod) / 3.0 + 2.0 / 3.0 * normal);
      if (k != m) out.p2_pair[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = smk * normal;
      if (k == m) out.p2_double[static_cast<std::size_t>(m)] = 0.5 * smk * normal;
    }
  }
  return out;
}

CommutedPrediction predict_commuted_boson(const StateVector& state, const CouplingOperators& ops,
                                          double s) {
  if (ops.ancilla_count() != 1)
    throw std::invalid_argument("predict_commuted_boson: single ancilla required");
  if (ops.kind != CouplingKind::Lowering)
    throw std::invalid_argument("predict_commuted_boson: lowering-type coupling required");
  if (ops.tower.system_statistics() != Statistics::Boson)
    throw std::invalid_argument("predict_commuted_boson: bosonic modes required");
  // [A, A^dag] = 2 needs two soft-boson modes with |lambda| = 1; checked
  // directly via <A A^dag> - <A^dag A> = 2 on the given state.
  const double n1 = first_moment(state, ops);
  const double rev = reversed_first_moment(state, ops);
  if (std::abs(rev - n1 - 2.0) > 1e-9)
    throw std::invalid_argument(
        "predict_commuted_boson: coupling does not satisfy [A, A^dag] = 2 on this state "
        "(need two soft-boson modes with unit-magnitude coefficients)");
  const double n2 = second_moment(state, ops);
  CommutedPrediction out;
  out.p0 = 1.0 - s * n1 + s * s * (0.5 * n2 - n1 / 3.0);
  out.p1 = s * n1 - s * s * (n2 - 4.0 / 3.0 * n1);
  out.p2 = s * s * (0.5 * n2 - n1);
  return out;
}

}  // namespace qprobe
