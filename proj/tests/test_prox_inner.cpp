#include <gtest/gtest.h>

#include <random>

#include "certsdp/cautious_agd.hpp"
#include "certsdp/prox_inner.hpp"
#include "oracles.hpp"

using namespace certsdp;

namespace {

struct ProxCase {
  QmpData data;
  Ball ball;
  Matrix Xi;
  double L = 0.0;
};

ProxCase random_setup(std::mt19937_64& gen, Index nk, Index k, Index m, double radius = 0.5) {
  ProxCase s;
  s.data = oracle::random_qmp(gen, nk, k, m);
  s.ball = Ball{0.2 * oracle::gaussian_vector(gen, m), radius};
  s.Xi = oracle::gaussian_matrix(gen, nk, k);
  s.L = 2.0;
  return s;
}

}  // namespace

TEST(ProxProblem, RejectsBadL) {
  std::mt19937_64 gen(1);
  ProxCase s = random_setup(gen, 4, 2, 2);
  EXPECT_THROW(ProxProblem(s.data, s.ball, s.Xi, 0.0), InvalidInput);
  EXPECT_THROW(ProxProblem(s.data, s.ball, Matrix::Zero(3, 2), 1.0), DimensionMismatch);
}

TEST(Grad2Q, MatchesAggregation) {
  std::mt19937_64 gen(2);
  ProxCase s = random_setup(gen, 6, 2, 3);
  const ProxProblem p(s.data, s.ball, s.Xi, s.L);
  EXPECT_EQ(p.grad2_q(Vector::Zero(3)), p.G_obj());
  Vector e = Vector::Zero(3);
  e(2) = 1.0;
  EXPECT_LE((p.grad2_q(e) - (p.G_obj() + p.G(2))).norm(), 1e-15);
  const Vector g = oracle::gaussian_vector(gen, 3);
  const Matrix ref = apply_A_of_gamma(s.data, g, s.Xi) + B_of_gamma(s.data, g);
  EXPECT_LE((p.grad2_q(g) - ref).norm(), 1e-12 * (1.0 + ref.norm()));
}

TEST(PsiAndGrad, ValueAtZeroAndFiniteDifferences) {
  std::mt19937_64 gen(3);
  ProxCase s = random_setup(gen, 6, 2, 3);
  const ProxProblem p(s.data, s.ball, s.Xi, s.L);
  Vector grad;
  const double v0 = p.psi_and_grad(Vector::Zero(3), grad);
  const double ref0 = -p.G_obj().squaredNorm() / (2.0 * s.L) + oracle::dense_q(s.data.objective, s.Xi);
  EXPECT_NEAR(v0, ref0, 1e-12 * (1.0 + std::abs(ref0)));

  const Vector g = oracle::gaussian_vector(gen, 3);
  const double val = p.psi_and_grad(g, grad);
  const Matrix G = p.grad2_q(g);
  const double direct = oracle::dense_q_gamma(s.data, g, s.Xi) - G.squaredNorm() / (2.0 * s.L);
  EXPECT_NEAR(val, direct, 1e-11 * (1.0 + std::abs(direct)));
  const double h = 1e-5;
  for (Index i = 0; i < 3; ++i) {
    Vector gp = g, gm = g;
    gp(i) += h;
    gm(i) -= h;
    const double fd = (p.psi(gp) - p.psi(gm)) / (2.0 * h);
    EXPECT_NEAR(grad(i), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(PsiAndGrad, ZeroGMatricesGiveLinearPsi) {
  QmpData d;
  d.n_minus_k = 3;
  d.k = 1;
  d.objective = {SparseSymMatrix::identity(3), Matrix::Zero(3, 1), 0.0};
  d.constraints.push_back({SparseSymMatrix::zero(3), Matrix::Zero(3, 1), 0.7});
  d.constraints.push_back({SparseSymMatrix::zero(3), Matrix::Zero(3, 1), -0.2});
  const Matrix Xi = Matrix::Ones(3, 1);
  const ProxProblem p(d, Ball{Vector::Zero(2), 1.0}, Xi, 4.0);
  Vector g(2);
  g << 0.3, -0.5;
  Vector grad;
  const double v = p.psi_and_grad(g, grad);
  EXPECT_NEAR(v, -3.0 / 8.0 + 1.5 + 0.3 * 0.7 + 0.5 * 0.2, 1e-14);
  EXPECT_NEAR(grad(0), 0.7, 1e-15);
  EXPECT_NEAR(grad(1), -0.2, 1e-15);
}

TEST(EvalQL, AtCenterAndDominatesLinearizations) {
  std::mt19937_64 gen(4);
  ProxCase s = random_setup(gen, 5, 2, 3);
  const ProxProblem p0(s.data, Ball{s.ball.center, 0.0}, s.Xi, s.L);
  EXPECT_NEAR(p0.eval_QL(s.Xi), oracle::dense_q_gamma(s.data, s.ball.center, s.Xi), 1e-12);
  const ProxProblem p(s.data, s.ball, s.Xi, s.L);
  EXPECT_NEAR(p.eval_QL(s.Xi), oracle::dense_QU(s.data, s.ball, s.Xi), 1e-12);
  const Matrix X = oracle::gaussian_matrix(gen, 5, 2);
  const double QL = p.eval_QL(X);
  for (int k = 0; k < 1000; ++k) {
    const Vector g = oracle::uniform_in_ball(gen, s.ball);
    const double lin = oracle::dense_q_gamma(s.data, g, s.Xi) + p.grad2_q(g).cwiseProduct(X - s.Xi).sum() +
                       0.5 * s.L * (X - s.Xi).squaredNorm();
    EXPECT_LE(lin, QL + 1e-12 * std::max(1.0, std::abs(QL)));
  }
}

TEST(GramOpnorm, SimpleAndPowerMethod) {
  QmpData d;
  d.n_minus_k = 2;
  d.k = 1;
  d.objective = {SparseSymMatrix::zero(2), Matrix::Zero(2, 1), 0.0};
  Matrix B(2, 1);
  B << 2.0, 0.0;
  d.constraints.push_back({SparseSymMatrix::zero(2), B, 0.0});
  EXPECT_NEAR(gram_opnorm(ProxProblem(d, Ball{Vector::Zero(1), 1.0}, Matrix::Zero(2, 1), 1.0)), 4.0, 1e-14);

  Matrix B2(2, 1);
  B2 << 0.0, 1.0;
  d.constraints[0].B << 1.0, 0.0;
  d.constraints.push_back({SparseSymMatrix::zero(2), B2, 0.0});
  EXPECT_NEAR(gram_opnorm(ProxProblem(d, Ball{Vector::Zero(2), 1.0}, Matrix::Zero(2, 1), 1.0)), 1.0, 1e-14);

  std::mt19937_64 gen(5);
  ProxCase s = random_setup(gen, 6, 2, 4);
  const ProxProblem p(s.data, s.ball, s.Xi, s.L);
  Vector v = Vector::Ones(4).normalized();
  double est = 0.0;
  for (int it = 0; it < 5000; ++it) {
    Matrix Gv = Matrix::Zero(6, 2);
    for (Index i = 0; i < 4; ++i) Gv += v(i) * p.G(i);
    Vector w(4);
    for (Index i = 0; i < 4; ++i) w(i) = p.G(i).cwiseProduct(Gv).sum();
    est = w.norm();
    v = w / est;
  }
  EXPECT_NEAR(gram_opnorm(p), est, 1e-8 * est);
}

TEST(SolveProx, NoConstraintsIsExact) {
  QmpData d;
  d.n_minus_k = 3;
  d.k = 2;
  std::mt19937_64 gen(6);
  d.objective = {SparseSymMatrix::identity(3), oracle::gaussian_matrix(gen, 3, 2), 0.0};
  const Matrix Xi = oracle::gaussian_matrix(gen, 3, 2);
  const ProxProblem p(d, Ball{Vector(0), 0.0}, Xi, 3.0);
  const ProxResult r = solve_prox(p, 1e-9, Vector(0));
  EXPECT_EQ(r.gap, 0.0);
  EXPECT_LE((r.X - (Xi - p.G_obj() / 3.0)).norm(), 1e-15);
}

TEST(SolveProx, ZeroRadiusUsesCenter) {
  std::mt19937_64 gen(7);
  ProxCase s = random_setup(gen, 5, 2, 3, 0.0);
  const ProxProblem p(s.data, s.ball, s.Xi, s.L);
  const ProxResult r = solve_prox(p, 1e-9, Vector(0));
  EXPECT_EQ(r.gamma, s.ball.center);
  EXPECT_LE(r.gap, 1e-12);
  EXPECT_LE((r.X - (s.Xi - p.grad2_q(s.ball.center) / s.L)).norm(), 1e-14);
}

TEST(SolveProx, MatchesSlowProjectedGradient) {
  std::mt19937_64 gen(8);
  ProxCase s = random_setup(gen, 6, 2, 3);
  const ProxProblem p(s.data, s.ball, s.Xi, s.L);
  const double eps = 1e-12;
  const ProxResult r = solve_prox(p, eps, Vector(0));
  EXPECT_LE(r.gap, eps);
  EXPECT_TRUE(s.ball.contains(r.gamma));
  const oracle::SlowProx ref = oracle::slow_projected_gradient(s.data, s.ball, s.Xi, s.L, 1000000);
  EXPECT_LE((r.X - ref.X).norm(), 1e-5);
  EXPECT_LE(p.eval_QL(r.X) - ref.value, eps + 1e-12);
}

TEST(SolveProx, WeakDualitySandwichAlongGammas) {
  std::mt19937_64 gen(9);
  ProxCase s = random_setup(gen, 5, 2, 3);
  const ProxProblem p(s.data, s.ball, s.Xi, s.L);
  const ProxResult best = solve_prox(p, 1e-13, Vector(0));
  const double star = p.eval_QL(best.X);
  for (int k = 0; k < 200; ++k) {
    const Vector g = oracle::uniform_in_ball(gen, s.ball);
    EXPECT_LE(p.psi(g), star + 1e-12);
    EXPECT_GE(p.eval_QL(p.reconstruct(g)), star - 1e-12);
    Vector grad;
    p.psi_and_grad(g, grad);
    const double gap = p.saddle_gap(g, grad);
    EXPECT_NEAR(gap, p.eval_QL(p.reconstruct(g)) - p.psi(g), 1e-10 * (1.0 + std::abs(star)));
  }
}

TEST(SolveProx, IterationCapIsAnError) {
  std::mt19937_64 gen(10);
  ProxCase s = random_setup(gen, 6, 2, 3, 5.0);
  const ProxProblem p(s.data, s.ball, s.Xi, s.L);
  ProxOptions opt;
  opt.max_iter = 1;
  opt.allow_precision_floor = false;
  EXPECT_THROW(solve_prox(p, 1e-14, Vector(0), opt), NumericalFailure);
  const ProxResult r = solve_prox_nothrow(p, 1e-14, Vector(0), opt);
  EXPECT_EQ(r.status, ProxStatus::IterationCap);
  EXPECT_GT(r.gap, 1e-14);
}

TEST(SolveProx, WarmStartProjectedIntoBall) {
  std::mt19937_64 gen(11);
  ProxCase s = random_setup(gen, 5, 2, 2);
  const ProxProblem p(s.data, s.ball, s.Xi, s.L);
  const ProxResult r = solve_prox(p, 1e-10, Vector::Constant(2, 100.0));
  EXPECT_TRUE(s.ball.contains(r.gamma));
  EXPECT_LE(r.gap, 1e-10);
}

TEST(SolveProx, InexactProxInequality) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 5; ++trial) {
    ProxCase s = random_setup(gen, 6, 2, 3, 0.3);
    const Curvature cv = curvature_on_ball(s.data, s.ball, rho_hat(s.data));
    ASSERT_TRUE(cv.certified);
    const StepParams sp = StepParams::from(cv.mu, cv.L);
    const double eps = 1e-6;
    const ProxProblem p(s.data, s.ball, s.Xi, sp.L);
    const ProxResult r = solve_prox(p, eps, Vector(0));
    const Matrix g = sp.L_tilde * (s.Xi - r.X);
    const double QX = oracle::dense_QU(s.data, s.ball, r.X);
    for (int k = 0; k < 100; ++k) {
      const Matrix X = s.Xi + oracle::gaussian_matrix(gen, 6, 2);
      const double rhs = QX + g.squaredNorm() / (2.0 * sp.L_tilde) + g.cwiseProduct(X - s.Xi).sum() +
                         0.5 * sp.mu_tilde * (X - s.Xi).squaredNorm() - 2.0 * sp.kappa * eps;
      EXPECT_GE(oracle::dense_QU(s.data, s.ball, X), rhs - 1e-10);
    }
  }
}
