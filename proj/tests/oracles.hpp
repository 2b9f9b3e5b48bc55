#pragma once

// Independent reference computations for the tests: dense linear algebra,
// brute-force sampling and slow first-order solvers. Nothing here reuses
// the library's iterative code paths.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "certsdp/qmp_model.hpp"

namespace oracle {

using certsdp::Index;
using certsdp::Matrix;
using certsdp::Vector;

inline Vector gaussian_vector(std::mt19937_64& gen, Index n) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = nd(gen);
  return v;
}

inline Matrix gaussian_matrix(std::mt19937_64& gen, Index r, Index c) {
  std::normal_distribution<double> nd;
  Matrix M(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) M(i, j) = nd(gen);
  }
  return M;
}

/// Random sparse symmetric matrix with roughly `density` of the upper
/// triangle filled.
inline certsdp::SparseSymMatrix random_sparse(std::mt19937_64& gen, Index n, double density) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd;
  std::vector<certsdp::SymEntry> e;
  for (Index r = 0; r < n; ++r) {
    for (Index c = r; c < n; ++c) {
      if (u(gen) < density) e.push_back({r, c, nd(gen)});
    }
  }
  if (e.empty()) e.push_back({0, 0, 1.0});
  return certsdp::SparseSymMatrix(n, std::move(e));
}

inline Vector uniform_in_ball(std::mt19937_64& gen, const certsdp::Ball& ball) {
  const Index m = ball.center.size();
  Vector d = gaussian_vector(gen, m);
  d.normalize();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double rad = ball.radius * std::pow(u(gen), 1.0 / static_cast<double>(m));
  return ball.center + rad * d;
}

/// Random QMP with A_obj = I + small perturbation so A(gamma) stays
/// positive definite for moderate gamma.
inline certsdp::QmpData random_qmp(std::mt19937_64& gen, Index nk, Index k, Index m, double a_scale = 0.3) {
  certsdp::QmpData d;
  d.n_minus_k = nk;
  d.k = k;
  std::vector<certsdp::SymEntry> obj;
  for (Index i = 0; i < nk; ++i) obj.push_back({i, i, 1.0});
  d.objective = {certsdp::SparseSymMatrix(nk, obj), 0.3 * gaussian_matrix(gen, nk, k), 0.1};
  for (Index i = 0; i < m; ++i) {
    certsdp::SparseSymMatrix A = random_sparse(gen, nk, 0.5);
    const Matrix D = A.to_dense();
    Eigen::SelfAdjointEigenSolver<Matrix> es(D, Eigen::EigenvaluesOnly);
    const double nrm = std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(nk - 1)));
    A = A.scaled(a_scale / nrm);
    std::normal_distribution<double> nd;
    d.constraints.push_back({A, 0.5 * gaussian_matrix(gen, nk, k), 0.2 * nd(gen)});
  }
  return d;
}

inline Matrix dense_A(const certsdp::QmpData& d, const Vector& gamma) {
  Matrix A = d.objective.A.to_dense();
  for (Index i = 0; i < d.m(); ++i) A += gamma(i) * d.constraints[i].A.to_dense();
  return A;
}

inline Matrix dense_B(const certsdp::QmpData& d, const Vector& gamma) {
  Matrix B = d.objective.B;
  for (Index i = 0; i < d.m(); ++i) B += gamma(i) * d.constraints[i].B;
  return B;
}

inline double dense_q(const certsdp::QmpTerm& t, const Matrix& X) {
  const Matrix A = t.A.to_dense();
  return 0.5 * (X.transpose() * A * X).trace() + (t.B.transpose() * X).trace() + t.c;
}

inline double dense_q_gamma(const certsdp::QmpData& d, const Vector& gamma, const Matrix& X) {
  double v = dense_q(d.objective, X);
  for (Index i = 0; i < d.m(); ++i) v += gamma(i) * dense_q(d.constraints[i], X);
  return v;
}

inline Vector dense_eigenvalues(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// -A(gamma)^{-1} B(gamma) by dense LDLT.
inline Matrix dense_minimizer(const certsdp::QmpData& d, const Vector& gamma) {
  return -dense_A(d, gamma).ldlt().solve(dense_B(d, gamma));
}

/// Dense slack matrix [A/2, B/2; B'/2, (c/k) I - T].
inline Matrix dense_slack(const certsdp::QmpData& d, const Vector& gamma, const Matrix& T) {
  const Index nk = d.n_minus_k;
  const Index k = d.k;
  double c = d.objective.c;
  for (Index i = 0; i < d.m(); ++i) c += gamma(i) * d.constraints[i].c;
  Matrix M(nk + k, nk + k);
  const Matrix B = dense_B(d, gamma);
  M.topLeftCorner(nk, nk) = 0.5 * dense_A(d, gamma);
  M.topRightCorner(nk, k) = 0.5 * B;
  M.bottomLeftCorner(k, nk) = 0.5 * B.transpose();
  M.bottomRightCorner(k, k) = (c / static_cast<double>(k)) * Matrix::Identity(k, k) - T;
  return M;
}

/// min_X Q_L(Xi; X) by plain projected gradient ascent on the dual for
/// `steps` steps, then reconstruction. Returns the primal value
/// Q_L(Xi; X(gamma)) at the best dual iterate and that X.
struct SlowProx {
  Matrix X;
  Vector gamma;
  double value = 0.0;
  double dual_value = 0.0;
};

inline SlowProx slow_projected_gradient(const certsdp::QmpData& d, const certsdp::Ball& ball, const Matrix& Xi,
                                        double L, long long steps) {
  const Index m = d.m();
  // G matrices and dual data, from dense products.
  std::vector<Matrix> G;
  Vector q(m);
  const Matrix G0 = d.objective.A.to_dense() * Xi + d.objective.B;
  const double q0 = dense_q(d.objective, Xi);
  for (Index i = 0; i < m; ++i) {
    G.push_back(d.constraints[i].A.to_dense() * Xi + d.constraints[i].B);
    q(i) = dense_q(d.constraints[i], Xi);
  }
  auto grad2 = [&](const Vector& g) {
    Matrix out = G0;
    for (Index i = 0; i < m; ++i) out += g(i) * G[i];
    return out;
  };
  auto psi = [&](const Vector& g) { return q0 + q.dot(g) - grad2(g).squaredNorm() / (2.0 * L); };
  auto psi_grad = [&](const Vector& g) {
    const Matrix Gg = grad2(g);
    Vector out(m);
    for (Index i = 0; i < m; ++i) out(i) = q(i) - (G[i].cwiseProduct(Gg)).sum() / L;
    return out;
  };
  Matrix gram(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) gram(i, j) = G[i].cwiseProduct(G[j]).sum();
  }
  const double lip = std::max(dense_eigenvalues(gram)(m - 1) / L, 1e-300);
  Vector g = ball.center;
  for (long long s = 0; s < steps; ++s) g = ball.project(g + psi_grad(g) / lip);
  SlowProx out;
  out.gamma = g;
  out.X = Xi - grad2(g) / L;
  out.dual_value = psi(g);
  // Primal value Q_L at the reconstructed point, from dense pieces.
  const Matrix D = out.X - Xi;
  Vector a(m);
  for (Index i = 0; i < m; ++i) a(i) = q(i) + G[i].cwiseProduct(D).sum();
  out.value = 0.5 * L * D.squaredNorm() + q0 + G0.cwiseProduct(D).sum() + ball.center.dot(a) + ball.radius * a.norm();
  return out;
}

/// Q(X) = max over the ball of q(gamma, X), dense.
inline double dense_QU(const certsdp::QmpData& d, const certsdp::Ball& ball, const Matrix& X) {
  Vector v(d.m());
  for (Index i = 0; i < d.m(); ++i) v(i) = dense_q(d.constraints[i], X);
  return dense_q(d.objective, X) + ball.center.dot(v) + ball.radius * v.norm();
}

}  // namespace oracle
