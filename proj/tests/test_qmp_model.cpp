#include <gtest/gtest.h>

#include <random>

#include "certsdp/qmp_model.hpp"
#include "oracles.hpp"

using namespace certsdp;

TEST(EvalAllQ, AtOriginGivesConstants) {
  std::mt19937_64 gen(1);
  const QmpData d = oracle::random_qmp(gen, 8, 2, 3);
  const QValues q = eval_all_q(d, Matrix::Zero(8, 2));
  EXPECT_EQ(q.objective, d.objective.c);
  for (Index i = 0; i < 3; ++i) EXPECT_EQ(q.constraints(i), d.constraints[i].c);
}

TEST(EvalAllQ, ZeroTermsAreConstant) {
  QmpData d;
  d.n_minus_k = 4;
  d.k = 2;
  d.objective = {SparseSymMatrix::zero(4), Matrix::Zero(4, 2), 0.0};
  d.constraints.push_back({SparseSymMatrix::zero(4), Matrix::Zero(4, 2), 2.5});
  std::mt19937_64 gen(2);
  EXPECT_EQ(eval_all_q(d, oracle::gaussian_matrix(gen, 4, 2)).constraints(0), 2.5);
}

TEST(EvalAllQ, MatchesDenseAndProductsReused) {
  std::mt19937_64 gen(3);
  const QmpData d = oracle::random_qmp(gen, 8, 2, 4);
  const Matrix X = oracle::gaussian_matrix(gen, 8, 2);
  std::vector<Matrix> products;
  const QValues q = eval_all_q(d, X, &products);
  EXPECT_NEAR(q.objective, oracle::dense_q(d.objective, X), 1e-12 * (1.0 + std::abs(q.objective)));
  for (Index i = 0; i < 4; ++i) {
    const double ref = oracle::dense_q(d.constraints[i], X);
    EXPECT_NEAR(q.constraints(i), ref, 1e-12 * (1.0 + std::abs(ref)));
  }
  ASSERT_EQ(products.size(), 5u);
  EXPECT_LE((products[1] - d.constraints[0].A.to_dense() * X).norm(), 1e-12);
}

TEST(EvalAllQ, DimensionMismatch) {
  std::mt19937_64 gen(4);
  const QmpData d = oracle::random_qmp(gen, 5, 2, 1);
  EXPECT_THROW(eval_all_q(d, Matrix::Zero(5, 3)), DimensionMismatch);
  EXPECT_THROW(apply_A_of_gamma(d, Vector::Zero(2), Matrix::Zero(5, 2)), DimensionMismatch);
}

TEST(Aggregates, ZeroUnitAndRandomGamma) {
  std::mt19937_64 gen(5);
  const QmpData d = oracle::random_qmp(gen, 6, 2, 3);
  const Matrix V = oracle::gaussian_matrix(gen, 6, 2);
  EXPECT_LE((apply_A_of_gamma(d, Vector::Zero(3), V) - d.objective.A.to_dense() * V).norm(), 1e-13);
  EXPECT_EQ(apply_A_of_gamma(d, Vector::Ones(3), Matrix::Zero(6, 2)), Matrix::Zero(6, 2));
  EXPECT_EQ(B_of_gamma(d, Vector::Zero(3)), d.objective.B);
  EXPECT_EQ(c_of_gamma(d, Vector::Zero(3)), d.objective.c);
  Vector e = Vector::Zero(3);
  e(1) = 1.0;
  EXPECT_LE((B_of_gamma(d, e) - (d.objective.B + d.constraints[1].B)).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(c_of_gamma(d, e), d.objective.c + d.constraints[1].c);

  const Vector g = oracle::gaussian_vector(gen, 3);
  EXPECT_LE((apply_A_of_gamma(d, g, V) - oracle::dense_A(d, g) * V).norm(), 1e-12);
  EXPECT_LE((B_of_gamma(d, g) - oracle::dense_B(d, g)).norm(), 1e-13);
  long double c = d.objective.c;
  for (Index i = 0; i < 3; ++i) c += static_cast<long double>(g(i)) * d.constraints[i].c;
  EXPECT_NEAR(c_of_gamma(d, g), static_cast<double>(c), 1e-14);
}

TEST(MaxOverBall, DegenerateRadius) {
  std::mt19937_64 gen(6);
  const QmpData d = oracle::random_qmp(gen, 5, 2, 3);
  const Matrix X = oracle::gaussian_matrix(gen, 5, 2);
  const Ball ball{oracle::gaussian_vector(gen, 3), 0.0};
  const BallMax bm = max_over_ball(d, ball, X);
  EXPECT_EQ(bm.argmax, ball.center);
  EXPECT_NEAR(bm.value, q_of_gamma(d, ball.center, X), 1e-12 * (1.0 + std::abs(bm.value)));
}

TEST(MaxOverBall, FeasiblePointReturnsCenter) {
  const Vector v = Vector::Zero(3);
  const Ball ball{Vector::Ones(3), 2.0};
  const BallMax bm = max_over_ball(1.5, v, ball);
  EXPECT_EQ(bm.argmax, ball.center);
  EXPECT_EQ(bm.value, 1.5);
}

TEST(MaxOverBall, DominatesSamplesAndAttainedAtArgmax) {
  std::mt19937_64 gen(7);
  const QmpData d = oracle::random_qmp(gen, 6, 2, 3);
  const Matrix X = oracle::gaussian_matrix(gen, 6, 2);
  const Ball ball{oracle::gaussian_vector(gen, 3), 0.7};
  const BallMax bm = max_over_ball(d, ball, X);
  EXPECT_TRUE(ball.contains(bm.argmax));
  const double at = oracle::dense_q_gamma(d, bm.argmax, X);
  EXPECT_NEAR(bm.value, at, 1e-12 * std::max(1.0, std::abs(at)));
  for (int s = 0; s < 10000; ++s) {
    const Vector g = oracle::uniform_in_ball(gen, ball);
    EXPECT_LE(oracle::dense_q_gamma(d, g, X), bm.value + 1e-12 * std::max(1.0, std::abs(bm.value)));
  }
}

TEST(BallProject, MatchesClosedForm) {
  std::mt19937_64 gen(8);
  const Ball ball{oracle::gaussian_vector(gen, 4), 0.5};
  for (int s = 0; s < 100; ++s) {
    const Vector g = ball.center + 2.0 * oracle::gaussian_vector(gen, 4);
    const Vector diff = g - ball.center;
    const Vector ref = ball.center + std::min(1.0, ball.radius / diff.norm()) * diff;
    EXPECT_LE((ball.project(g) - ref).norm(), 1e-14);
    EXPECT_TRUE(ball.contains(ball.project(g)));
  }
}

namespace {

SdpBlocks random_blocks(std::mt19937_64& gen, Index n, Index k, Index m, const Matrix& Z) {
  SdpBlocks b;
  b.n = n;
  b.k = k;
  b.Zstar = Z;
  auto term = [&] {
    SdpTerm t;
    t.A = oracle::random_sparse(gen, n - k, 0.4);
    t.B_tilde = oracle::gaussian_matrix(gen, n - k, k);
    const Matrix C = oracle::gaussian_matrix(gen, k, k);
    t.C = 0.5 * (C + C.transpose());
    t.d = 0.3;
    return t;
  };
  b.objective = term();
  for (Index i = 0; i < m; ++i) b.constraints.push_back(term());
  return b;
}

Matrix dense_M(const SdpTerm& t) {
  const Index nk = t.A.dim();
  const Index k = t.C.rows();
  Matrix M(nk + k, nk + k);
  M.topLeftCorner(nk, nk) = 0.5 * t.A.to_dense();
  M.topRightCorner(nk, k) = 0.5 * t.B_tilde;
  M.bottomLeftCorner(k, nk) = 0.5 * t.B_tilde.transpose();
  M.bottomRightCorner(k, k) = t.C;
  return M;
}

}  // namespace

TEST(SdpToQmp, IdentityAndScaledZ) {
  std::mt19937_64 gen(9);
  const SdpBlocks b = random_blocks(gen, 6, 2, 2, Matrix::Identity(2, 2));
  const QmpData q = sdp_to_qmp(b);
  EXPECT_LE((q.constraints[0].B - b.constraints[0].B_tilde).norm(), 1e-14);
  EXPECT_NEAR(q.constraints[0].c, b.constraints[0].C.trace() + b.constraints[0].d, 1e-14);
  SdpBlocks b4 = b;
  b4.Zstar = 4.0 * Matrix::Identity(2, 2);
  const QmpData q4 = sdp_to_qmp(b4);
  EXPECT_LE((q4.constraints[1].B - 2.0 * b.constraints[1].B_tilde).norm(), 1e-13);
}

TEST(SdpToQmp, RejectsIndefiniteZ) {
  std::mt19937_64 gen(10);
  Matrix Z = Matrix::Identity(2, 2);
  Z(1, 1) = -1.0;
  EXPECT_THROW(sdp_to_qmp(random_blocks(gen, 5, 2, 1, Z)), InvalidInput);
}

TEST(SdpToQmp, ConsistentWithAssembledY) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 10, k = 3;
    const Matrix G = oracle::gaussian_matrix(gen, k, k);
    const Matrix Z = G * G.transpose() + 0.5 * Matrix::Identity(k, k);
    const SdpBlocks b = random_blocks(gen, n, k, 3, Z);
    const QmpData q = sdp_to_qmp(b);
    const Matrix X = oracle::gaussian_matrix(gen, n - k, k);
    const Matrix Y = assemble_Y(X, Z);
    for (Index i = 0; i < 3; ++i) {
      const double lhs = eval_all_q(q, X).constraints(i);
      const double rhs = dense_M(b.constraints[i]).cwiseProduct(Y).sum() + b.constraints[i].d;
      EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(AssembleY, SimpleCases) {
  const Matrix Y0 = assemble_Y(Matrix::Zero(3, 2), Matrix::Identity(2, 2));
  Matrix ref = Matrix::Zero(5, 5);
  ref.bottomRightCorner(2, 2) = Matrix::Identity(2, 2);
  EXPECT_LE((Y0 - ref).norm(), 1e-15);
  Matrix X = Matrix::Zero(3, 1);
  X(0, 0) = 1.0;
  const Matrix Y1 = assemble_Y(X, Matrix::Ones(1, 1));
  Vector u = Vector::Zero(4);
  u(0) = 1.0;
  u(3) = 1.0;
  EXPECT_LE((Y1 - u * u.transpose()).norm(), 1e-15);
}

TEST(AssembleY, PsdWithRankK) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Index k = 3;
    const Matrix G = oracle::gaussian_matrix(gen, k, k);
    const Matrix Z = G * G.transpose() + 0.1 * Matrix::Identity(k, k);
    const Matrix Y = assemble_Y(oracle::gaussian_matrix(gen, 8, k), Z);
    const Vector ev = oracle::dense_eigenvalues(Y);
    EXPECT_GE(ev(0), -1e-10 * ev(ev.size() - 1));
    int nonzero = 0;
    for (Index i = 0; i < ev.size(); ++i) nonzero += ev(i) > 1e-10 * ev(ev.size() - 1);
    EXPECT_EQ(nonzero, k);
  }
}

TEST(CurvatureOnBall, ZeroRadiusIsExactSpectrum) {
  std::mt19937_64 gen(13);
  const QmpData d = oracle::random_qmp(gen, 20, 2, 3);
  const Vector c = 0.3 * oracle::gaussian_vector(gen, 3);
  const Curvature cv = curvature_on_ball(d, Ball{c, 0.0}, 1.0);
  const Vector ev = oracle::dense_eigenvalues(oracle::dense_A(d, c));
  EXPECT_NEAR(cv.mu, ev(0), 1e-8);
  EXPECT_NEAR(cv.L, ev(ev.size() - 1), 1e-8);
}

TEST(CurvatureOnBall, ZeroConstraintMatricesIgnoreRadius) {
  QmpData d;
  d.n_minus_k = 4;
  d.k = 1;
  d.objective = {SparseSymMatrix::identity(4), Matrix::Zero(4, 1), 0.0};
  d.constraints.push_back({SparseSymMatrix::zero(4), Matrix::Ones(4, 1), 0.0});
  const double rho = rho_hat(d);
  EXPECT_EQ(rho, 0.0);
  const Curvature a = curvature_on_ball(d, Ball{Vector::Zero(1), 0.0}, rho);
  const Curvature b = curvature_on_ball(d, Ball{Vector::Zero(1), 10.0}, rho);
  EXPECT_NEAR(a.mu, b.mu, 1e-14);
  EXPECT_NEAR(a.L, b.L, 1e-14);
}

TEST(CurvatureOnBall, BracketsSampledSpectra) {
  std::mt19937_64 gen(14);
  const QmpData d = oracle::random_qmp(gen, 50, 2, 4);
  const double rho = rho_hat(d);
  const Ball ball{0.2 * oracle::gaussian_vector(gen, 4), 0.8};
  const Curvature cv = curvature_on_ball(d, ball, rho);
  EXPECT_TRUE(cv.eig_converged);
  for (int s = 0; s < 100; ++s) {
    const Vector ev = oracle::dense_eigenvalues(oracle::dense_A(d, oracle::uniform_in_ball(gen, ball)));
    EXPECT_LE(cv.mu, ev(0) + 1e-12);
    EXPECT_GE(cv.L, ev(ev.size() - 1) - 1e-12);
  }
}

TEST(RhoHat, BoundsUnitCombinations) {
  std::mt19937_64 gen(15);
  const QmpData d = oracle::random_qmp(gen, 30, 2, 5, 1.0);
  const double rho = rho_hat(d);
  EXPECT_NEAR(rho, std::sqrt(5.0), 1e-8);
  for (int s = 0; s < 100; ++s) {
    Vector u = oracle::gaussian_vector(gen, 5);
    u.normalize();
    Matrix S = Matrix::Zero(30, 30);
    for (Index i = 0; i < 5; ++i) S += u(i) * d.constraints[i].A.to_dense();
    const Vector ev = oracle::dense_eigenvalues(S);
    EXPECT_LE(std::max(std::abs(ev(0)), std::abs(ev(29))), rho + 1e-12);
  }
}
