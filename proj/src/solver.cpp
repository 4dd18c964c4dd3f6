#include "qprobe/solver.hpp"

#include <Eigen/Eigenvalues>
#include <random>
#include <stdexcept>

namespace qprobe {

double operator_scale(const SparseOperator& h) {
  // max absolute row sum (infinity norm); cheap upper bound on the spectrum
  Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(h.matrix.rows());
  for (int k = 0; k < h.matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(h.matrix, k); it; ++it)
      row_sum[it.row()] += std::abs(it.value());
  const double s = row_sum.size() > 0 ? row_sum.maxCoeff() : 0.0;
  return s > 0 ? s : 1.0;
}

namespace {

GroundStateResult dense_ground_state(const SparseOperator& h) {
  Eigen::MatrixXcd m(h.matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  GroundStateResult r;
  r.energy = es.eigenvalues()(0);
  r.state = StateVector{h.basis_tag, es.eigenvectors().col(0)};
  r.gap_estimate = m.rows() > 1 ? es.eigenvalues()(1) - es.eigenvalues()(0) : 0.0;
  r.residual = (h.matrix * r.state.amplitudes - r.energy * r.state.amplitudes).norm();
  return r;
}

}  // namespace

GroundStateResult ground_state(const SparseOperator& h, double tol, unsigned seed,
                               int dense_threshold) {
  if (!h.hermitian) throw std::invalid_argument("ground_state: operator is not flagged Hermitian");
  const int dim = h.dimension();
  const double scale = operator_scale(h);

  GroundStateResult result;
  if (dim <= dense_threshold) {
    result = dense_ground_state(h);
  } else {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss;
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = Complex(gauss(rng), gauss(rng));
    v.normalize();

    const int max_iter = std::min(dim, 400);
    std::vector<Vector> krylov;
    krylov.push_back(v);
    std::vector<double> alpha, beta;
    Vector w;
    double e0 = 0, e1 = 0, res = scale;
    Eigen::VectorXd ritz_vec;
    for (int j = 0; j < max_iter; ++j) {
      w = h.matrix * krylov.back();
      const double a = std::real(krylov.back().dot(w));
      alpha.push_back(a);
      w -= a * krylov.back();
      if (j > 0) w -= beta.back() * krylov[krylov.size() - 2];
      // full reorthogonalization, twice
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : krylov) w -= q.dot(w) * q;
      const double b = w.norm();

      const int k = static_cast<int>(alpha.size());
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
      for (int i = 0; i < k; ++i) t(i, i) = alpha[static_cast<std::size_t>(i)];
      for (int i = 0; i + 1 < k; ++i)
        t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      e0 = es.eigenvalues()(0);
      e1 = k > 1 ? es.eigenvalues()(1) : e0;
      ritz_vec = es.eigenvectors().col(0);
      res = b * std::abs(ritz_vec(k - 1));
      if (res <= tol * scale || b < 1e-14 * scale) break;
      if (j + 1 < max_iter) {
        beta.push_back(b);
        krylov.push_back(w / b);
      }
    }
    if (res > tol * scale) {
      // one explicit residual check before giving up; Lanczos residual
      // estimates can be pessimistic after reorthogonalization
      Vector psi = Vector::Zero(dim);
      for (std::size_t i = 0; i < krylov.size(); ++i) psi += ritz_vec(static_cast<int>(i)) * krylov[i];
      psi.normalize();
      const double explicit_res = (h.matrix * psi - e0 * psi).norm();
      if (explicit_res > tol * scale)
        throw std::runtime_error("ground_state: Lanczos did not converge (residual " +
                                 std::to_string(explicit_res) + ")");
    }
    Vector psi = Vector::Zero(dim);
    for (std::size_t i = 0; i < krylov.size(); ++i) psi += ritz_vec(static_cast<int>(i)) * krylov[i];
    psi.normalize();
    result.energy = e0;
    result.state = StateVector{h.basis_tag, psi};
    result.gap_estimate = e1 - e0;
    result.residual = (h.matrix * psi - e0 * psi).norm();
  }
  result.near_degenerate = result.gap_estimate < 1e-8 * scale;
  return result;
}

namespace {

// One Krylov step of exp(-i H t) v for Hermitian H. Returns false if the
// requested tolerance was not reached within the subspace limit.
bool krylov_exp_step(const SparseMatrix& h, const Vector& v, double t, double tol, Vector& out) {
  const int dim = static_cast<int>(v.size());
  const int m_max = std::min(dim, 60);
  std::vector<Vector> q;
  q.push_back(v);
  std::vector<double> alpha, beta;
  Vector w;
  for (int j = 0; j < m_max; ++j) {
    w = h * q.back();
    const double a = std::real(q.back().dot(w));
    alpha.push_back(a);
    w -= a * q.back();
    if (j > 0) w -= beta.back() * q[q.size() - 2];
    for (const auto& p : q) w -= p.dot(w) * p;
    const double b = w.norm();

    const int k = static_cast<int>(alpha.size());
    const bool breakdown = b < 1e-14;
    if (breakdown || k == m_max || k >= 4) {
      Eigen::MatrixXd tmat = Eigen::MatrixXd::Zero(k, k);
      for (int i = 0; i < k; ++i) tmat(i, i) = alpha[static_cast<std::size_t>(i)];
      for (int i = 0; i + 1 < k; ++i)
        tmat(i, i + 1) = tmat(i + 1, i) = beta[static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tmat);
      Eigen::VectorXcd phases(k);
      for (int i = 0; i < k; ++i)
        phases(i) = std::exp(Complex(0, -es.eigenvalues()(i) * t));
      const Eigen::MatrixXcd evec = es.eigenvectors().cast<Complex>();
      const Eigen::VectorXcd e1_coeff = evec.row(0).transpose();
      const Eigen::VectorXcd small = evec * (phases.array() * e1_coeff.array()).matrix();
      const double err = breakdown ? 0.0 : b * std::abs(t) * std::abs(small(k - 1));
      if (breakdown || err <= tol) {
        out = Vector::Zero(dim);
        for (int i = 0; i < k; ++i) out += small(i) * q[static_cast<std::size_t>(i)];
        out *= v.norm() / out.norm();  // unitarity guard
        return true;
      }
    }
    if (j + 1 < m_max) {
      beta.push_back(b);
      q.push_back(w / b);
    }
  }
  return false;
}

}  // namespace

StateVector evolve(const StateVector& psi, const SparseOperator& h, double duration, double tol) {
  if (psi.basis_tag != h.basis_tag)
    throw std::invalid_argument("evolve: state and operator live on different bases");
  if (duration < 0) throw std::invalid_argument("evolve: negative duration");
  if (duration == 0) return psi;

  Vector v = psi.amplitudes;
  int steps = 1;
  const int max_splits = 20;
  for (int split = 0; split < max_splits; ++split, steps *= 2) {
    Vector cur = psi.amplitudes;
    Vector next;
    bool ok = true;
    const double dt = duration / steps;
    for (int s = 0; s < steps && ok; ++s) {
      ok = krylov_exp_step(h.matrix, cur, dt, tol / steps, next);
      if (ok) cur.swap(next);
    }
    if (ok) {
      v = cur;
      return StateVector{psi.basis_tag, v};
    }
  }
  throw std::runtime_error("evolve: Krylov propagation did not converge");
}

}  // namespace qprobe
