#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "certsdp/common.hpp"
#include "certsdp/qmp_model.hpp"

namespace certsdp {

/// The prox subproblem min_X Q_L(Xi; X) at a fixed center Xi, with
/// G_obj = A_obj Xi + B_obj and G_i = A_i Xi + B_i precomputed.
///
/// Its dual is psi(gamma) = q(gamma, Xi) - ||G(gamma)||^2 / (2L) over the
/// ball, with G(gamma) = G_obj + sum gamma_i G_i. The Gram data
/// Gamma_ij = <G_i, G_j> and h_i = <G_obj, G_i> make psi an m-dimensional
/// concave quadratic.
class ProxProblem {
 public:
  ProxProblem(const QmpData& data, Ball ball, Matrix Xi, double L)
      : data_(&data), ball_(std::move(ball)), Xi_(std::move(Xi)), L_(L) {
    if (!(L > 0.0) || !std::isfinite(L)) throw InvalidInput("ProxProblem: L must be positive");
    data.require_X(Xi_, "ProxProblem");
    require_dims(ball_.center.size() == data.m(), "ProxProblem: ball has wrong dimension");
    std::vector<Matrix> products;
    const QValues q = eval_all_q(data, Xi_, &products);
    q_obj_ = q.objective;
    q_ = q.constraints;
    const Index m = data.m();
    G_obj_ = products[0] + data.objective.B;
    G_.reserve(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) G_.push_back(products[static_cast<std::size_t>(i) + 1] + data.constraints[i].B);
    gram_.resize(m, m);
    h_.resize(m);
    for (Index i = 0; i < m; ++i) {
      h_(i) = G_obj_.cwiseProduct(G_[i]).sum();
      for (Index j = 0; j <= i; ++j) {
        gram_(i, j) = G_[i].cwiseProduct(G_[j]).sum();
        gram_(j, i) = gram_(i, j);
      }
    }
    g00_ = G_obj_.squaredNorm();
  }

  const QmpData& data() const { return *data_; }
  const Ball& ball() const { return ball_; }
  const Matrix& Xi() const { return Xi_; }
  double L() const { return L_; }
  Index m() const { return data_->m(); }
  const Matrix& G_obj() const { return G_obj_; }
  const Matrix& G(Index i) const { return G_[static_cast<std::size_t>(i)]; }
  const Matrix& gram() const { return gram_; }
  const Vector& h() const { return h_; }
  double q_obj_at_Xi() const { return q_obj_; }
  const Vector& q_at_Xi() const { return q_; }

  /// grad_2 q(gamma, Xi) = G_obj + sum gamma_i G_i.
  Matrix grad2_q(const Vector& gamma) const {
    data_->require_gamma(gamma, "grad2_q");
    Matrix out = G_obj_;
    for (Index i = 0; i < m(); ++i) out += gamma(i) * G_[i];
    return out;
  }

  /// psi(gamma) and its gradient from the Gram data.
  double psi_and_grad(const Vector& gamma, Vector& grad) const {
    data_->require_gamma(gamma, "psi_and_grad");
    const Vector Gg = gram_ * gamma;
    grad = q_ - (h_ + Gg) / L_;
    const double sq = g00_ + 2.0 * h_.dot(gamma) + gamma.dot(Gg);
    return q_obj_ + q_.dot(gamma) - sq / (2.0 * L_);
  }

  double psi(const Vector& gamma) const {
    Vector g;
    return psi_and_grad(gamma, g);
  }

  /// Q_L(Xi; X) = (L/2)||X - Xi||^2 + a_0 + <c, a> + r ||a|| with the
  /// linearization a_i = q_i(Xi) + <G_i, X - Xi>.
  double eval_QL(const Matrix& X) const {
    data_->require_X(X, "eval_QL");
    const Matrix D = X - Xi_;
    Vector a(m());
    for (Index i = 0; i < m(); ++i) a(i) = q_(i) + G_[i].cwiseProduct(D).sum();
    const double a0 = q_obj_ + G_obj_.cwiseProduct(D).sum();
    return 0.5 * L_ * D.squaredNorm() + a0 + ball_.center.dot(a) + ball_.radius * a.norm();
  }

  /// X(gamma) = Xi - grad_2 q(gamma, Xi) / L.
  Matrix reconstruct(const Vector& gamma) const { return Xi_ - grad2_q(gamma) / L_; }

  /// Q_L(Xi; X(gamma)) - psi(gamma) for gamma in the ball, evaluated as the
  /// Frank-Wolfe gap r||a|| + <c - gamma, a> with a = grad psi(gamma).
  double saddle_gap(const Vector& gamma, const Vector& grad) const {
    return ball_.radius * grad.norm() + (ball_.center - gamma).dot(grad);
  }

  /// Saddle gap with a computed from the explicit G(gamma) rather than the
  /// Gram data, together with a bound on its rounding error.
  double saddle_gap_direct(const Vector& gamma, double* rounding = nullptr) const {
    const Matrix Gg = grad2_q(gamma);
    const double gnorm = Gg.norm();
    double mag = G_obj_.norm();
    for (Index i = 0; i < m(); ++i) mag += std::abs(gamma(i)) * G_[i].norm();
    Vector a(m());
    double err_sq = 0.0;
    for (Index i = 0; i < m(); ++i) {
      a(i) = q_(i) - G_[i].cwiseProduct(Gg).sum() / L_;
      const double gi = G_[i].norm();
      const double terms = static_cast<double>(Xi_.size()) + static_cast<double>(m()) + 4.0;
      const double e = terms * kUnitRoundoff * (std::abs(q_(i)) + gi * (gnorm + mag) / L_);
      err_sq += e * e;
    }
    if (rounding != nullptr) {
      *rounding = 2.0 * (ball_.radius + (ball_.center - gamma).norm()) * std::sqrt(err_sq);
    }
    return saddle_gap(gamma, a);
  }

 private:
  const QmpData* data_;
  Ball ball_;
  Matrix Xi_;
  double L_;
  double q_obj_ = 0.0;
  Vector q_;
  Matrix G_obj_;
  std::vector<Matrix> G_;
  Matrix gram_;
  Vector h_;
  double g00_ = 0.0;
};

/// lambda_max of the Gram matrix; psi has an L_psi = gram_opnorm / L
/// Lipschitz gradient.
inline double gram_opnorm(const ProxProblem& p) {
  if (p.m() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(p.gram(), Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues()(p.m() - 1));
}

enum class ProxStatus { Certified, PrecisionFloor, IterationCap };

struct ProxResult {
  Matrix X;
  Vector gamma;
  /// Q_L(Xi; X) - psi(gamma) as evaluated.
  double gap = 0.0;
  /// Estimated rounding error in `gap`.
  double rounding = 0.0;
  int iterations = 0;
  ProxStatus status = ProxStatus::Certified;
};

struct ProxOptions {
  /// 0 means 50 ceil(sqrt(L_psi (2r)^2 / eps)) + 1000.
  long long max_iter = 0;
  /// Accept gap <= rounding when eps is below what binary64 can resolve.
  bool allow_precision_floor = true;
};

inline long long default_prox_iteration_cap(double L_psi, double radius, double eps) {
  const double d = 2.0 * radius;
  const double raw = 50.0 * std::ceil(std::sqrt(L_psi * d * d / eps)) + 1000.0;
  return raw >= 1e15 ? static_cast<long long>(1e15) : static_cast<long long>(raw);
}

/// Approximately solves the prox subproblem: accelerated projected gradient
/// ascent on psi over the ball, stopped on a certified saddle gap <= eps.
///
/// Momentum is reset whenever psi decreases. Throws NumericalFailure when
/// the iteration cap is reached without certification unless the caller
/// inspects `status` via `solve_prox_nothrow`.
inline ProxResult solve_prox_nothrow(const ProxProblem& p, double eps, const Vector& gamma_warm,
                                     const ProxOptions& opt = {}) {
  if (!(eps > 0.0)) throw InvalidInput("solve_prox: eps must be positive");
  const Ball& ball = p.ball();
  ProxResult out;
  auto finish = [&](const Vector& gamma, int iters) {
    out.gamma = gamma;
    out.X = p.reconstruct(gamma);
    out.iterations = iters;
    out.gap = p.saddle_gap_direct(gamma, &out.rounding);
    out.status = out.gap <= eps ? ProxStatus::Certified : ProxStatus::PrecisionFloor;
    return out;
  };

  if (p.m() == 0) return finish(Vector(0), 0);
  if (ball.radius == 0.0) return finish(ball.center, 0);

  const double L_psi = gram_opnorm(p) / p.L();
  Vector grad;
  if (L_psi == 0.0) {
    // psi is affine: maximize the linear part on the ball.
    p.psi_and_grad(ball.center, grad);
    return finish(max_over_ball(0.0, grad, ball).argmax, 1);
  }

  const long long cap = opt.max_iter > 0 ? opt.max_iter
                                         : default_prox_iteration_cap(L_psi, ball.radius, eps);
  const double step = 1.0 / L_psi;

  Vector gamma = gamma_warm.size() == p.m() ? ball.project(gamma_warm) : ball.center;
  Vector prev = gamma;
  Vector y = gamma;
  double psi_prev = p.psi_and_grad(gamma, grad);
  Vector best = gamma;
  double best_gap = p.saddle_gap(gamma, grad);
  double theta = 1.0;

  auto try_accept = [&](const Vector& g, double cheap_gap, long long it) -> bool {
    // The Gram-based gap drifts from the direct one only by rounding; confirm.
    if (cheap_gap > eps && !opt.allow_precision_floor) return false;
    double rounding = 0.0;
    const double direct = p.saddle_gap_direct(g, &rounding);
    if (direct <= eps || (opt.allow_precision_floor && direct <= rounding && cheap_gap <= rounding)) {
      finish(g, static_cast<int>(std::min<long long>(it, std::numeric_limits<int>::max())));
      out.status = direct <= eps ? ProxStatus::Certified : ProxStatus::PrecisionFloor;
      return true;
    }
    return false;
  };

  if (best_gap <= eps && try_accept(gamma, best_gap, 0)) return out;
  double floor_hint = 0.0;
  if (opt.allow_precision_floor) p.saddle_gap_direct(gamma, &floor_hint);

  for (long long it = 1; it <= cap; ++it) {
    Vector gy;
    p.psi_and_grad(y, gy);
    prev = gamma;
    gamma = ball.project(y + step * gy);
    const double psi_now = p.psi_and_grad(gamma, grad);
    const double gap = p.saddle_gap(gamma, grad);
    if (gap < best_gap) {
      best_gap = gap;
      best = gamma;
    }
    if ((gap <= eps || gap <= floor_hint) && try_accept(gamma, gap, it)) return out;
    if (opt.allow_precision_floor && (it & 63) == 0) p.saddle_gap_direct(gamma, &floor_hint);

    if (psi_now < psi_prev) {
      theta = 1.0;
      y = gamma;
    } else {
      const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      y = gamma + ((theta - 1.0) / theta_next) * (gamma - prev);
      theta = theta_next;
    }
    psi_prev = psi_now;
  }
  finish(best, static_cast<int>(std::min<long long>(cap, std::numeric_limits<int>::max())));
  if (out.gap > eps) out.status = ProxStatus::IterationCap;
  return out;
}

/// As solve_prox_nothrow, but an uncertified result raises NumericalFailure.
inline ProxResult solve_prox(const ProxProblem& p, double eps, const Vector& gamma_warm,
                             const ProxOptions& opt = {}) {
  ProxResult r = solve_prox_nothrow(p, eps, gamma_warm, opt);
  if (r.status == ProxStatus::IterationCap) {
    throw NumericalFailure("solve_prox: iteration cap reached with gap " + std::to_string(r.gap) +
                           " > eps " + std::to_string(eps));
  }
  return r;
}

}  // namespace certsdp
