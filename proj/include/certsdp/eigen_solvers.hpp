#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>

#include "certsdp/common.hpp"
#include "certsdp/rng.hpp"
#include "certsdp/sparse_sym_matrix.hpp"

namespace certsdp {

enum class Extreme { Min, Max };

struct EigenPair {
  double value = 0.0;
  Vector vector;
  /// ||A v - value v||_2, recomputed with an explicit product.
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Unit vector with i.i.d. normal entries drawn from CounterRng(seed).
inline Vector random_unit_vector(Index n, std::uint64_t seed) {
  CounterRng rng(seed);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  v.normalize();
  return v;
}

/// Lanczos with full reorthogonalization for one extreme eigenpair of a
/// symmetric operator. `apply(x, y)` must set y = A x.
///
/// Converged means ||A v - lambda v|| <= tol * max(1, |lambda|) for the
/// returned Ritz pair. When the Krylov dimension reaches min(n, max_iter)
/// without meeting the tolerance the best Ritz pair is returned with
/// `converged == false`. The start vector is random (from `seed`) unless
/// `start` is given and nonzero.
template <typename Op>
EigenPair lanczos_extreme(Op&& apply, Index n, Extreme which, double tol, int max_iter,
                          std::uint64_t seed, const Vector* start = nullptr) {
  if (n < 1) throw InvalidInput("lanczos_extreme: n must be positive");
  if (max_iter < 1) throw InvalidInput("lanczos_extreme: max_iter must be positive");

  Vector q;
  if (start != nullptr && start->size() == n && start->norm() > 0) {
    q = start->normalized();
  } else {
    q = random_unit_vector(n, seed);
  }

  const Index kmax = std::min<Index>(n, max_iter);
  Matrix basis(n, kmax);
  Vector alpha(kmax);
  Vector beta(kmax);
  Vector w(n);
  Vector Av(n);

  EigenPair best;
  best.value = which == Extreme::Min ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity();
  best.residual = std::numeric_limits<double>::infinity();

  auto ritz_pair = [&](Index size, double& theta, Vector& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> tri;
    Vector diag = alpha.head(size);
    Vector sub = beta.head(std::max<Index>(size - 1, 0));
    tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    const Index pick = which == Extreme::Min ? 0 : size - 1;
    theta = tri.eigenvalues()(pick);
    s = tri.eigenvectors().col(pick);
  };

  auto finalize = [&](Index size, int iters) -> bool {
    double theta = 0.0;
    Vector s;
    ritz_pair(size, theta, s);
    Vector v = basis.leftCols(size) * s;
    v.normalize();
    apply(v, Av);
    const double res = (Av - theta * v).norm();
    if (res < best.residual) {
      best.value = theta;
      best.vector = v;
      best.residual = res;
      best.iterations = iters;
    }
    best.converged = res <= tol * std::max(1.0, std::abs(theta));
    return best.converged;
  };

  Index next_check = std::min<Index>(kmax, 4);
  for (Index j = 0; j < kmax; ++j) {
    basis.col(j) = q;
    apply(q, w);
    alpha(j) = q.dot(w);
    w -= alpha(j) * q;
    if (j > 0) w -= beta(j - 1) * basis.col(j - 1);
    // Two passes of classical Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      const Vector coeffs = basis.leftCols(j + 1).transpose() * w;
      w.noalias() -= basis.leftCols(j + 1) * coeffs;
    }
    beta(j) = w.norm();
    const Index size = j + 1;
    const bool exhausted = size == kmax;
    const bool invariant = beta(j) <= 1e-14 * std::max(1.0, std::abs(alpha(j)));

    if (exhausted || size >= next_check) {
      double theta = 0.0;
      Vector s;
      ritz_pair(size, theta, s);
      const double estimate = beta(j) * std::abs(s(size - 1));
      if (exhausted || estimate <= tol * std::max(1.0, std::abs(theta))) {
        if (finalize(size, static_cast<int>(size))) return best;
        if (exhausted) return best;
      }
      next_check = size + std::max<Index>(2, size / 8);
    }
    if (invariant) {
      // The Krylov space is invariant but may miss the wanted eigenvector:
      // continue with a fresh direction orthogonal to the basis. The
      // tridiagonal matrix decouples because beta(j) = 0.
      beta(j) = 0.0;
      w = random_unit_vector(n, seed + 0x5bd1e995ULL + static_cast<std::uint64_t>(j));
      for (int pass = 0; pass < 2; ++pass) {
        const Vector coeffs = basis.leftCols(j + 1).transpose() * w;
        w.noalias() -= basis.leftCols(j + 1) * coeffs;
      }
      q = w.normalized();
      continue;
    }
    q = w / beta(j);
  }
  return best;
}

/// Lanczos on a stored sparse symmetric matrix.
inline EigenPair lanczos_extreme(const SparseSymMatrix& S, Extreme which, double tol, int max_iter,
                                 std::uint64_t seed) {
  auto apply = [&S](const Vector& x, Vector& y) {
    y.setZero(x.size());
    S.multiply_add(x, y);
  };
  return lanczos_extreme(apply, S.dim(), which, tol, max_iter, seed);
}

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Spectral norm of S by power iteration, tracking ||S v|| for unit v.
/// Converged when the estimate changes by at most tol (relative) on three
/// consecutive iterations.
inline NormEstimate opnorm_estimate(const SparseSymMatrix& S, double tol = 1e-10, int max_iter = 5000,
                                    std::uint64_t seed = 0) {
  NormEstimate out;
  if (S.stored() == 0) {
    out.converged = true;
    return out;
  }
  Vector v = random_unit_vector(S.dim(), seed);
  Vector w(S.dim());
  double previous = 0.0;
  int steady = 0;
  for (int it = 1; it <= max_iter; ++it) {
    w.setZero();
    S.multiply_add(v, w);
    const double est = w.norm();
    out.iterations = it;
    out.value = std::max(out.value, est);
    if (est == 0.0) {
      // v landed in the null space; the norm is still positive since S != 0.
      v = random_unit_vector(S.dim(), seed + static_cast<std::uint64_t>(it));
      continue;
    }
    if (std::abs(est - previous) <= tol * est) {
      if (++steady >= 3) {
        out.converged = true;
        return out;
      }
    } else {
      steady = 0;
    }
    previous = est;
    v = w / est;
  }
  return out;
}

enum class CgStatus { Converged, MaxIterations, NegativeCurvature };

struct CgResult {
  Matrix X;
  CgStatus status = CgStatus::Converged;
  /// Largest relative residual ||A x - b|| / ||b|| over the columns.
  double max_relative_residual = 0.0;
  int iterations = 0;
};

/// Conjugate gradients column by column for an SPD operator.
/// `apply(x, y)` must set y = A x. A zero column of RHS yields a zero column.
/// Stops with NegativeCurvature as soon as p' A p <= 0 is seen.
template <typename Op>
CgResult cg_solve_multi(Op&& apply, const Matrix& rhs, double tol, int max_iter) {
  CgResult out;
  const Index n = rhs.rows();
  out.X = Matrix::Zero(n, rhs.cols());
  Vector r(n), p(n), Ap(n), x(n);
  for (Index col = 0; col < rhs.cols(); ++col) {
    const double bnorm = rhs.col(col).norm();
    if (bnorm == 0.0) continue;
    x.setZero();
    r = rhs.col(col);
    p = r;
    double rr = r.squaredNorm();
    int it = 0;
    int restarts = 0;
    double true_rel = 1.0;
    for (;;) {
      if (std::sqrt(rr) <= tol * bnorm) {
        // The recursive residual drifts from the true one; confirm, and
        // restart from the current iterate if they disagree.
        apply(x, Ap);
        r = rhs.col(col) - Ap;
        rr = r.squaredNorm();
        true_rel = std::sqrt(rr) / bnorm;
        if (true_rel <= tol || restarts == 3) break;
        ++restarts;
        p = r;
        continue;
      }
      if (it >= max_iter) {
        apply(x, Ap);
        true_rel = (rhs.col(col) - Ap).norm() / bnorm;
        break;
      }
      apply(p, Ap);
      const double curvature = p.dot(Ap);
      if (!(curvature > 0.0)) {
        out.status = CgStatus::NegativeCurvature;
        out.X.col(col) = x;
        out.iterations += it;
        return out;
      }
      const double step = rr / curvature;
      x += step * p;
      r -= step * Ap;
      const double rr_next = r.squaredNorm();
      p = r + (rr_next / rr) * p;
      rr = rr_next;
      ++it;
    }
    out.iterations += it;
    out.X.col(col) = x;
    out.max_relative_residual = std::max(out.max_relative_residual, true_rel);
    if (true_rel > tol) out.status = CgStatus::MaxIterations;
  }
  return out;
}

/// Symmetric PSD square root of a small dense matrix via eigendecomposition.
/// Eigenvalues down to -1e-12 * ||Z|| are clipped to zero; anything more
/// negative raises InvalidInput.
inline Matrix sqrtm_psd_small(const Matrix& Z) {
  require_dims(Z.rows() == Z.cols(), "sqrtm_psd_small: matrix must be square");
  if (Z.size() == 0) return Z;
  const Matrix sym = 0.5 * (Z + Z.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector& lambda = eig.eigenvalues();
  const double scale = std::max(std::abs(lambda(0)), std::abs(lambda(lambda.size() - 1)));
  if (lambda(0) < -1e-12 * scale) {
    throw InvalidInput("sqrtm_psd_small: matrix is indefinite");
  }
  const Vector roots = lambda.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace certsdp
