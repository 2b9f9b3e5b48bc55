#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "certsdp/common.hpp"
#include "certsdp/eigen_solvers.hpp"
#include "certsdp/prox_inner.hpp"
#include "certsdp/qmp_model.hpp"

namespace certsdp {

/// mu~ = mu/2, L~ = L - mu/2, kappa~ = L~/mu~, alpha = kappa~^{-1/2}.
struct StepParams {
  double mu = 0.0;
  double L = 0.0;
  double kappa = 0.0;
  double mu_tilde = 0.0;
  double L_tilde = 0.0;
  double kappa_tilde = 0.0;
  double alpha = 0.0;

  static StepParams from(double mu, double L) {
    if (!(mu > 0.0) || !(L >= mu) || !std::isfinite(L)) {
      throw InvalidInput("StepParams: need 0 < mu <= L");
    }
    StepParams p;
    p.mu = mu;
    p.L = L;
    p.kappa = L / mu;
    p.mu_tilde = mu / 2.0;
    p.L_tilde = L - mu / 2.0;
    p.kappa_tilde = p.L_tilde / p.mu_tilde;
    p.alpha = 1.0 / std::sqrt(p.kappa_tilde);
    return p;
  }

  /// (1 - alpha/2)^t * 4 gap0.
  double bound(double gap0, long long t) const {
    return std::pow(1.0 - alpha / 2.0, static_cast<double>(t)) * 4.0 * gap0;
  }
};

inline double epsilon_schedule(double gap0, double kappa, double alpha, long long t) {
  if (!(gap0 > 0.0)) throw InvalidInput("epsilon_schedule: gap0 must be positive");
  if (t < 0) throw InvalidInput("epsilon_schedule: t must be nonnegative");
  const double base = (gap0 / kappa) * std::pow(1.0 - alpha / 2.0, static_cast<double>(t));
  return t == 0 ? base * (1.0 - alpha / 2.0) : base * (alpha / 2.0);
}

struct Gap0Options {
  double cg_tol = 1e-12;
  int cg_max_iter = 0;  ///< 0 means 10 (n - k) + 100
};

/// Upper bound on Q_U(X0) - Opt using the weak-duality lower bound
/// Opt >= min_X q(c, X). The CG minimizer is corrected by its residual,
/// ||res||^2 / (2 mu), so LB is valid for any CG accuracy.
inline double estimate_gap0(const QmpData& data, const Ball& ball, const Matrix& X0, double mu,
                            const Gap0Options& opt = {}) {
  if (!(mu > 0.0)) throw InvalidInput("estimate_gap0: ball is not certified (mu <= 0)");
  const Vector& c = ball.center;
  const Matrix Bc = B_of_gamma(data, c);
  const int max_iter = opt.cg_max_iter > 0 ? opt.cg_max_iter
                                           : static_cast<int>(10 * data.n_minus_k + 100);
  auto apply = [&](const Vector& x, Vector& y) {
    y.resize(x.size());
    apply_A_of_gamma_into(data, c, x, y);
  };
  const CgResult cg = cg_solve_multi(apply, -Bc, opt.cg_tol, max_iter);
  if (cg.status == CgStatus::NegativeCurvature) {
    throw NumericalFailure("estimate_gap0: A(center) is not positive definite");
  }
  const Matrix& Xc = cg.X;
  const Matrix AX = apply_A_of_gamma(data, c, Xc);
  const Matrix res = AX + Bc;
  const double qc = 0.5 * Xc.cwiseProduct(AX).sum() + Bc.cwiseProduct(Xc).sum() + c_of_gamma(data, c);
  const double lb = qc - res.squaredNorm() / (2.0 * mu);

  const BallMax up = max_over_ball(data, ball, X0);
  // Rounding in the two O(|q|) evaluations.
  const double scale = std::abs(up.value) + std::abs(qc) + Xc.squaredNorm() + X0.squaredNorm() + 1.0;
  const double allowance = 64.0 * kUnitRoundoff * static_cast<double>(X0.size() + data.m()) * scale;
  const double raw = up.value - lb;
  if (raw < -allowance - 1e-8 * scale) {
    throw NumericalFailure("estimate_gap0: Q_U(X0) below the dual lower bound");
  }
  return std::max((std::max(raw, 0.0) + allowance) * (1.0 + 10.0 * opt.cg_tol), 1e-300);
}

/// The a priori value mu kappa^2 R^2 / 2 for ||X0 - X*||_F <= R.
inline double theoretical_gap0(double mu, double L, double R) { return mu * (L / mu) * (L / mu) * R * R / 2.0; }

struct AgdRecord {
  long long t = 0;
  double Q_U = 0.0;
  double residual = 0.0;   ///< ||q_vec(X_t)||_2
  double max_abs_q = 0.0;
  double bound = 0.0;      ///< (1 - alpha/2)^t 4 gap0
  double eps = 0.0;        ///< eps_{t-1} used to produce X_t; 0 at t = 0
  double prox_gap = 0.0;
  int prox_iters = 0;
  bool precision_floor = false;
  double seconds = 0.0;
};

enum class AgdStatus { Optimal, AbortedStagnation, BudgetExhausted };

inline const char* to_string(AgdStatus s) {
  switch (s) {
    case AgdStatus::Optimal: return "optimal";
    case AgdStatus::AbortedStagnation: return "aborted_stagnation";
    case AgdStatus::BudgetExhausted: return "budget_exhausted";
  }
  return "unknown";
}

struct AbortPolicy {
  bool enabled = true;
  int window = 20;
  double factor = 0.9;
  int strikes = 2;
};

struct AgdBudget {
  long long max_outer = std::numeric_limits<long long>::max();
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct AgdOptions {
  double delta_target = 1e-13;
  double feas_tol = 1e-13;
  /// Optional bound on ||q_vec(X_t)||_2 checked alongside feas_tol.
  double residual_tol = std::numeric_limits<double>::infinity();
  AbortPolicy abort;
  AgdBudget budget;
  ProxOptions prox;
  bool keep_history = true;
  std::function<void(const AgdRecord&)> trace;
};

struct AgdState {
  long long t = 0;
  Matrix X;
  Matrix Xi;
  double gap0 = 0.0;
  StepParams params;
  Vector gamma_warm;
  std::vector<AgdRecord> history;
};

struct AgdResult {
  AgdStatus status = AgdStatus::BudgetExhausted;
  /// Iterate of least Q_U seen.
  Matrix X_best;
  double Q_best = std::numeric_limits<double>::infinity();
  AgdState state;
  long long prox_iterations = 0;
};

/// CautiousAGD on min_X max_{gamma in ball} q(gamma, X).
///
/// X_{t+1} is an eps_t-accurate prox point at Xi_t and
/// Xi_{t+1} = X_{t+1} + ((1 - alpha)/(1 + alpha)) (X_{t+1} - X_t).
/// Stops when (1 - alpha/2)^t 4 gap0 <= delta_target and max_i |q_i(X_t)|
/// <= feas_tol.
inline AgdResult run_cautious_agd(const QmpData& data, const Ball& ball, const StepParams& params,
                                  double gap0, const Matrix& X0, const Vector& gamma_warm,
                                  const AgdOptions& opt = {}) {
  data.require_X(X0, "run_cautious_agd");
  if (!(opt.delta_target > 0.0)) throw InvalidInput("run_cautious_agd: delta_target must be positive");
  if (!(gap0 > 0.0)) throw InvalidInput("run_cautious_agd: gap0 must be positive");
  const auto start = std::chrono::steady_clock::now();

  AgdResult res;
  AgdState& s = res.state;
  s.X = X0;
  s.Xi = X0;
  s.gap0 = gap0;
  s.params = params;
  s.gamma_warm = gamma_warm.size() == data.m() ? ball.project(gamma_warm) : ball.center;

  const double beta = (1.0 - params.alpha) / (1.0 + params.alpha);

  auto record = [&](long long t, double eps, const ProxResult* prox) {
    const QValues q = eval_all_q(data, s.X);
    const BallMax up = max_over_ball(q.objective, q.constraints, ball);
    AgdRecord r;
    r.t = t;
    r.Q_U = up.value;
    r.residual = q.constraints.norm();
    r.max_abs_q = q.constraints.size() ? q.constraints.cwiseAbs().maxCoeff() : 0.0;
    r.bound = params.bound(gap0, t);
    r.eps = eps;
    if (prox != nullptr) {
      r.prox_gap = prox->gap;
      r.prox_iters = prox->iterations;
      r.precision_floor = prox->status == ProxStatus::PrecisionFloor;
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (r.Q_U < res.Q_best) {
      res.Q_best = r.Q_U;
      res.X_best = s.X;
    }
    if (opt.trace) opt.trace(r);
    if (opt.keep_history) s.history.push_back(r);
    return r;
  };

  AgdRecord last = record(0, 0.0, nullptr);

  double window_best = std::numeric_limits<double>::infinity();
  double prev_window_best = std::numeric_limits<double>::infinity();
  int window_fill = 0;
  int strikes = 0;

  for (long long t = 0;; ++t) {
    s.t = t;
    if (last.bound <= opt.delta_target && last.max_abs_q <= opt.feas_tol &&
        last.residual <= opt.residual_tol) {
      res.status = AgdStatus::Optimal;
      return res;
    }
    if (t >= opt.budget.max_outer ||
        (opt.budget.deadline && std::chrono::steady_clock::now() >= *opt.budget.deadline)) {
      res.status = AgdStatus::BudgetExhausted;
      return res;
    }

    const double eps = epsilon_schedule(gap0, params.kappa, params.alpha, t);
    const ProxProblem prox_problem(data, ball, s.Xi, params.L);
    const ProxResult prox = solve_prox(prox_problem, eps, s.gamma_warm, opt.prox);
    res.prox_iterations += prox.iterations;
    s.gamma_warm = prox.gamma;

    const Matrix X_next = prox.X;
    s.Xi = X_next + beta * (X_next - s.X);
    s.X = X_next;
    last = record(t + 1, eps, &prox);

    if (opt.abort.enabled) {
      window_best = std::min(window_best, last.max_abs_q);
      if (++window_fill == opt.abort.window) {
        if (window_best > opt.feas_tol && window_best > opt.abort.factor * prev_window_best) {
          if (++strikes >= opt.abort.strikes) {
            s.t = t + 1;
            res.status = AgdStatus::AbortedStagnation;
            return res;
          }
        } else {
          strikes = 0;
        }
        prev_window_best = window_best;
        window_best = std::numeric_limits<double>::infinity();
        window_fill = 0;
      }
    }
  }
}

}  // namespace certsdp
