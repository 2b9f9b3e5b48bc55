#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "certsdp/common.hpp"
#include "certsdp/dual_ascent.hpp"
#include "certsdp/eigen_solvers.hpp"
#include "certsdp/qmp_model.hpp"
#include "certsdp/rng.hpp"

namespace certsdp {

struct GenSpec {
  Index n_minus_k = 0;
  Index k = 0;
  Index m = 0;
  double mu_star = 0.1;
  Index nnz = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_minus_k <= 0 || k <= 0 || m <= 0 || nnz <= 0) {
      throw InvalidInput("GenSpec: n_minus_k, k, m, nnz must be positive");
    }
    if (!(mu_star > 0.0 && mu_star < 1.0)) throw InvalidInput("GenSpec: mu_star must lie in (0, 1)");
  }
};

struct GroundTruth {
  Vector gamma_star;
  Matrix X_star;
  Matrix T_star;
  double opt = 0.0;
  double mu_star = 0.0;
};

struct GenOptions {
  double cg_tol = 1e-12;
  double eig_tol = 1e-12;
  double norm_tol = 1e-12;
  int max_direction_draws = 100;
};

/// Sparse symmetric Gaussian matrix: ceil(nnz/2) upper-triangle positions
/// drawn uniformly with replacement, repeats summed.
inline SparseSymMatrix random_sparse_sym(Index dim, Index nnz, CounterRng& rng) {
  const std::uint64_t d = static_cast<std::uint64_t>(dim);
  const std::uint64_t slots = d * (d + 1) / 2;
  const Index draws = (nnz + 1) / 2;
  std::map<std::pair<Index, Index>, double> acc;
  for (Index e = 0; e < draws; ++e) {
    std::uint64_t flat = rng.below(slots);
    // Row r owns the dim - r slots (r, r..dim-1).
    Index r = 0;
    std::uint64_t row_len = d;
    while (flat >= row_len) {
      flat -= row_len;
      ++r;
      --row_len;
    }
    const Index c = r + static_cast<Index>(flat);
    acc[{r, c}] += rng.normal();
  }
  std::vector<SymEntry> entries;
  entries.reserve(acc.size());
  for (const auto& [rc, v] : acc) {
    if (v != 0.0) entries.push_back({rc.first, rc.second, v});
  }
  return SparseSymMatrix(dim, std::move(entries));
}

/// max(|lambda_min|, |lambda_max|) by Lanczos at both ends, no residual padding.
inline double extreme_abs_eigenvalue(const SparseSymMatrix& S, double tol, std::uint64_t seed) {
  if (S.stored() == 0) return 0.0;
  const int iters = static_cast<int>(std::min<Index>(S.dim(), 2000));
  const EigenPair lo = lanczos_extreme(S, Extreme::Min, tol, iters, seed);
  const EigenPair hi = lanczos_extreme(S, Extreme::Max, tol, iters, seed + 1);
  if (!lo.converged || !hi.converged) throw NumericalFailure("generate: Lanczos did not converge on A_i");
  return std::max(std::abs(lo.value), std::abs(hi.value));
}

/// Random distance-minimization instance with known solution.
///
/// A_obj = I, B_obj = 0, c_obj = 0; ||A_i||_2 = 1, ||B_i||_F = 1;
/// gamma* = r gamma_hat with lambda_min(A(gamma*)) = mu*;
/// X* = -A(gamma*)^{-1} B(gamma*); c_i chosen so q_i(X*) = 0.
///
/// Draw order from CounterRng(seed): for each constraint, the A_i
/// positions and values (one `below` then one `normal` per position), then
/// B_i row-major; then gamma_hat (m normals per attempt).
inline std::pair<QmpData, GroundTruth> generate(const GenSpec& spec, const GenOptions& opt = {}) {
  spec.validate();
  CounterRng rng(spec.seed);
  const Index nk = spec.n_minus_k;
  const Index k = spec.k;
  const Index m = spec.m;

  QmpData data;
  data.n_minus_k = nk;
  data.k = k;
  data.objective = {SparseSymMatrix::identity(nk), Matrix::Zero(nk, k), 0.0};
  data.constraints.reserve(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    SparseSymMatrix A = random_sparse_sym(nk, spec.nnz, rng);
    const double an = extreme_abs_eigenvalue(A, opt.norm_tol, spec.seed + 17 * static_cast<std::uint64_t>(i));
    if (!(an > 0.0)) throw NumericalFailure("generate: drew a zero constraint matrix");
    A = A.scaled(1.0 / an);
    Matrix B(nk, k);
    for (Index r = 0; r < nk; ++r) {
      for (Index c = 0; c < k; ++c) B(r, c) = rng.normal();
    }
    B /= B.norm();
    data.constraints.push_back({std::move(A), std::move(B), 0.0});
  }

  const Vector zero_gamma = Vector::Zero(m);
  EigenOptions eig;
  eig.tol = opt.eig_tol;
  eig.max_iter = static_cast<int>(std::min<Index>(nk, 2000));
  eig.seed = spec.seed ^ 0xa5a5a5a5ULL;

  Vector gamma_hat;
  double lam = 0.0;
  int attempt = 0;
  for (;; ++attempt) {
    if (attempt >= opt.max_direction_draws) {
      throw NumericalFailure("generate: no direction with negative curvature in " +
                             std::to_string(opt.max_direction_draws) + " draws");
    }
    gamma_hat.resize(m);
    for (Index i = 0; i < m; ++i) gamma_hat(i) = rng.normal();
    gamma_hat.normalize();
    auto apply = [&](const Vector& x, Vector& y) {
      y.setZero(x.size());
      for (Index i = 0; i < m; ++i) data.constraints[i].A.multiply_add(x, y, gamma_hat(i));
    };
    const EigenPair e = lanczos_extreme(apply, nk, Extreme::Min, eig.tol, eig.max_iter, eig.seed);
    if (!e.converged) throw NumericalFailure("generate: Lanczos did not converge");
    lam = e.value;
    if (lam < -1e-6) break;
  }

  GroundTruth gt;
  gt.mu_star = spec.mu_star;
  gt.gamma_star = ((spec.mu_star - 1.0) / lam) * gamma_hat;
  const Matrix Bs = B_of_gamma(data, gt.gamma_star);
  auto applyA = [&](const Vector& x, Vector& y) {
    y.resize(x.size());
    apply_A_of_gamma_into(data, gt.gamma_star, x, y);
  };
  const CgResult cg = cg_solve_multi(applyA, -Bs, opt.cg_tol, static_cast<int>(20 * nk + 200));
  if (cg.status != CgStatus::Converged) throw NumericalFailure("generate: CG failed for X*");
  gt.X_star = cg.X;

  std::vector<Matrix> products;
  eval_all_q(data, gt.X_star, &products);
  for (Index i = 0; i < m; ++i) {
    const QmpTerm& t = data.constraints[i];
    data.constraints[i].c = -0.5 * gt.X_star.cwiseProduct(products[static_cast<std::size_t>(i) + 1]).sum() -
                            t.B.cwiseProduct(gt.X_star).sum();
  }
  const double cs = c_of_gamma(data, gt.gamma_star);
  const Matrix BX = Bs.transpose() * gt.X_star;
  gt.T_star = (cs / static_cast<double>(k)) * Matrix::Identity(k, k) + 0.25 * (BX + BX.transpose());
  gt.opt = 0.5 * gt.X_star.squaredNorm();
  return {std::move(data), std::move(gt)};
}

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
  }
};

struct VerifyOptions {
  double solve_tol = 1e-6;       ///< ||X* + A(gamma*)^{-1} B(gamma*)||_F
  double mu_tol = 1e-8;          ///< |lambda_min(A(gamma*)) - mu*|
  double feas_tol = 1e-9;        ///< max_i |q_i(X*)|
  double trace_tol = 1e-8;       ///< |tr T* - ||X*||^2/2|, and opt consistency
  double slack_tol = 1e-8;       ///< lambda_min(Mbar(gamma*, T*)) >= -slack_tol
};

/// Checks a ground truth against its instance.
inline VerifyReport verify(const QmpData& data, const GroundTruth& gt, const VerifyOptions& opt = {}) {
  data.validate();
  data.require_gamma(gt.gamma_star, "verify");
  data.require_X(gt.X_star, "verify");
  require_dims(gt.T_star.rows() == data.k && gt.T_star.cols() == data.k, "verify: T* must be k x k");
  VerifyReport rep;
  auto add = [&](std::string name, double value, double threshold, bool ok) {
    rep.checks.push_back({std::move(name), ok, value, threshold});
  };

  EigenOptions eig;
  eig.tol = 1e-12;
  eig.max_iter = static_cast<int>(std::min<Index>(data.n_minus_k, 2000));
  const EigenPair lo = eig_A_of_gamma(data, gt.gamma_star, Extreme::Min, eig);
  const double mu_err = std::abs(lo.value - gt.mu_star);
  add("lambda_min(A(gamma*)) = mu*", mu_err, opt.mu_tol, lo.converged && mu_err <= opt.mu_tol);

  const QValues q = eval_all_q(data, gt.X_star);
  const double maxq = q.constraints.size() ? q.constraints.cwiseAbs().maxCoeff() : 0.0;
  add("max_i |q_i(X*)|", maxq, opt.feas_tol, maxq <= opt.feas_tol);

  const double half = 0.5 * gt.X_star.squaredNorm();
  const double opt_err = std::abs(gt.opt - half);
  add("opt = ||X*||^2/2", opt_err, opt.trace_tol, opt_err <= opt.trace_tol * std::max(1.0, half));
  const double tr_err = std::abs(gt.T_star.trace() - half);
  add("tr(T*) = ||X*||^2/2", tr_err, opt.trace_tol, tr_err <= opt.trace_tol * std::max(1.0, half));

  DualState s;
  s.gamma = gt.gamma_star;
  s.T = gt.T_star;
  s.penalty = 1.0;
  DualEigOptions deig;
  deig.tol = 1e-11;
  const DualEval ev = penalized_dual_value_and_supergradient(data, s, deig);
  add("lambda_min(Mbar(gamma*, T*)) >= -tol", ev.lambda_min, -opt.slack_tol,
      ev.lambda_min >= -opt.slack_tol);

  const Matrix Bs = B_of_gamma(data, gt.gamma_star);
  auto applyA = [&](const Vector& x, Vector& y) {
    y.resize(x.size());
    apply_A_of_gamma_into(data, gt.gamma_star, x, y);
  };
  const CgResult cg = cg_solve_multi(applyA, -Bs, 1e-13, static_cast<int>(20 * data.n_minus_k + 200));
  const double solve_err = (gt.X_star - cg.X).norm();
  add("||X* + A(gamma*)^{-1} B(gamma*)||_F", solve_err, opt.solve_tol,
      cg.status != CgStatus::NegativeCurvature && solve_err <= opt.solve_tol);
  return rep;
}

}  // namespace certsdp
