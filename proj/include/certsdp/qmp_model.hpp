#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "certsdp/common.hpp"
#include "certsdp/eigen_solvers.hpp"
#include "certsdp/sparse_sym_matrix.hpp"

namespace certsdp {

/// One quadratic matrix function q(X) = tr(X' A X)/2 + <B, X> + c.
struct QmpTerm {
  SparseSymMatrix A;
  Matrix B;
  double c = 0.0;
};

/// Objective plus m equality constraints q_i(X) = 0 over X of shape
/// (n_minus_k) x k.
struct QmpData {
  Index n_minus_k = 0;
  Index k = 0;
  QmpTerm objective;
  std::vector<QmpTerm> constraints;

  Index m() const { return static_cast<Index>(constraints.size()); }

  /// Throws DimensionMismatch if any term has the wrong shape.
  void validate() const {
    if (n_minus_k <= 0 || k <= 0) throw InvalidInput("QmpData: n_minus_k and k must be positive");
    auto check = [&](const QmpTerm& t, const char* what) {
      require_dims(t.A.dim() == n_minus_k, std::string(what) + ": A has wrong dimension");
      require_dims(t.B.rows() == n_minus_k && t.B.cols() == k,
                   std::string(what) + ": B has wrong shape");
      if (!std::isfinite(t.c) || !t.B.allFinite()) {
        throw InvalidInput(std::string(what) + ": non-finite data");
      }
    };
    check(objective, "objective");
    for (const auto& t : constraints) check(t, "constraint");
  }

  void require_X(const Matrix& X, const char* who) const {
    require_dims(X.rows() == n_minus_k && X.cols() == k,
                 std::string(who) + ": X must be (n_minus_k) x k");
  }
  void require_gamma(const Vector& gamma, const char* who) const {
    require_dims(gamma.size() == m(), std::string(who) + ": gamma must have length m");
  }
};

/// Euclidean ball in R^m.
struct Ball {
  Vector center;
  double radius = 0.0;

  bool contains(const Vector& g, double rel_slack = 1e-12) const {
    return (g - center).norm() <= radius * (1.0 + rel_slack);
  }

  /// Nearest point of the ball.
  Vector project(const Vector& g) const {
    const Vector d = g - center;
    const double dn = d.norm();
    if (dn <= radius) return g;
    return center + (radius / dn) * d;
  }
};

struct QValues {
  double objective = 0.0;
  Vector constraints;
};

inline double quad_value(const QmpTerm& t, const Matrix& X, const Matrix& AX) {
  return 0.5 * X.cwiseProduct(AX).sum() + t.B.cwiseProduct(X).sum() + t.c;
}

/// q_obj(X) and (q_1(X), ..., q_m(X)). If `products` is given it receives
/// A_obj X followed by A_i X.
inline QValues eval_all_q(const QmpData& data, const Matrix& X,
                          std::vector<Matrix>* products = nullptr) {
  data.require_X(X, "eval_all_q");
  QValues out;
  out.constraints.resize(data.m());
  if (products != nullptr) products->clear();
  Matrix AX(X.rows(), X.cols());
  auto one = [&](const QmpTerm& t) {
    AX.setZero();
    t.A.multiply_add(X, AX);
    const double v = quad_value(t, X, AX);
    if (products != nullptr) products->push_back(AX);
    return v;
  };
  out.objective = one(data.objective);
  for (Index i = 0; i < data.m(); ++i) out.constraints(i) = one(data.constraints[i]);
  return out;
}

/// out = A(gamma) V without forming A(gamma).
inline void apply_A_of_gamma_into(const QmpData& data, const Vector& gamma,
                                  Eigen::Ref<const Matrix> V, Eigen::Ref<Matrix> out) {
  out.setZero();
  data.objective.A.multiply_add(V, out);
  for (Index i = 0; i < data.m(); ++i) {
    if (gamma(i) != 0.0) data.constraints[i].A.multiply_add(V, out, gamma(i));
  }
}

inline Matrix apply_A_of_gamma(const QmpData& data, const Vector& gamma, const Matrix& V) {
  data.require_gamma(gamma, "apply_A_of_gamma");
  require_dims(V.rows() == data.n_minus_k, "apply_A_of_gamma: V.rows() != n_minus_k");
  Matrix out(V.rows(), V.cols());
  apply_A_of_gamma_into(data, gamma, V, out);
  return out;
}

inline Matrix B_of_gamma(const QmpData& data, const Vector& gamma) {
  data.require_gamma(gamma, "B_of_gamma");
  Matrix B = data.objective.B;
  for (Index i = 0; i < data.m(); ++i) B += gamma(i) * data.constraints[i].B;
  return B;
}

inline double c_of_gamma(const QmpData& data, const Vector& gamma) {
  data.require_gamma(gamma, "c_of_gamma");
  double c = data.objective.c;
  for (Index i = 0; i < data.m(); ++i) c += gamma(i) * data.constraints[i].c;
  return c;
}

/// q(gamma, X) = q_obj(X) + sum gamma_i q_i(X).
inline double q_of_gamma(const QmpData& data, const Vector& gamma, const Matrix& X) {
  data.require_gamma(gamma, "q_of_gamma");
  const QValues q = eval_all_q(data, X);
  return q.objective + gamma.dot(q.constraints);
}

struct BallMax {
  double value = 0.0;
  Vector argmax;
};

/// max over the ball of q_obj + <gamma, v>, from the values alone.
inline BallMax max_over_ball(double q_obj, const Vector& v, const Ball& ball) {
  require_dims(v.size() == ball.center.size(), "max_over_ball: ball has wrong dimension");
  BallMax out;
  const double vn = v.norm();
  out.value = q_obj + ball.center.dot(v) + ball.radius * vn;
  out.argmax = ball.center;
  if (vn > 0.0 && ball.radius > 0.0) out.argmax += (ball.radius / vn) * v;
  return out;
}

/// Q_U(X) = max_{gamma in ball} q(gamma, X) in closed form.
inline BallMax max_over_ball(const QmpData& data, const Ball& ball, const Matrix& X) {
  const QValues q = eval_all_q(data, X);
  return max_over_ball(q.objective, q.constraints, ball);
}

/// One SDP data block over the split R^n = W + W-perp, W the first n-k
/// coordinates: M = [A/2, Bt/2; Bt'/2, C] with constant offset d.
struct SdpTerm {
  SparseSymMatrix A;
  Matrix B_tilde;
  Matrix C;
  double d = 0.0;
};

struct SdpBlocks {
  Index n = 0;
  Index k = 0;
  SdpTerm objective;
  std::vector<SdpTerm> constraints;
  Matrix Zstar;
};

inline QmpData sdp_to_qmp(const SdpBlocks& blocks) {
  const Index nk = blocks.n - blocks.k;
  require_dims(nk > 0 && blocks.k > 0, "sdp_to_qmp: need 0 < k < n");
  require_dims(blocks.Zstar.rows() == blocks.k && blocks.Zstar.cols() == blocks.k,
               "sdp_to_qmp: Zstar must be k x k");
  const Matrix sym = 0.5 * (blocks.Zstar + blocks.Zstar.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (!(eig.eigenvalues()(0) > 0.0)) throw InvalidInput("sdp_to_qmp: Zstar is not positive definite");
  const Matrix root = sqrtm_psd_small(sym);

  auto convert = [&](const SdpTerm& t) {
    require_dims(t.A.dim() == nk, "sdp_to_qmp: A block has wrong dimension");
    require_dims(t.B_tilde.rows() == nk && t.B_tilde.cols() == blocks.k,
                 "sdp_to_qmp: B_tilde block has wrong shape");
    require_dims(t.C.rows() == blocks.k && t.C.cols() == blocks.k, "sdp_to_qmp: C must be k x k");
    return QmpTerm{t.A, t.B_tilde * root, t.C.cwiseProduct(sym).sum() + t.d};
  };
  QmpData out;
  out.n_minus_k = nk;
  out.k = blocks.k;
  out.objective = convert(blocks.objective);
  for (const auto& t : blocks.constraints) out.constraints.push_back(convert(t));
  return out;
}

/// Y(X) = [X X', X Z^{1/2}; Z^{1/2} X', Z]. Dense; for small n only.
inline Matrix assemble_Y(const Matrix& X, const Matrix& Zstar) {
  require_dims(Zstar.rows() == X.cols() && Zstar.cols() == X.cols(),
               "assemble_Y: Zstar must be k x k");
  const Index nk = X.rows();
  const Index k = X.cols();
  const Matrix root = sqrtm_psd_small(Zstar);
  Matrix Y(nk + k, nk + k);
  Y.topLeftCorner(nk, nk) = X * X.transpose();
  Y.topRightCorner(nk, k) = X * root;
  Y.bottomLeftCorner(k, nk) = root * X.transpose();
  Y.bottomRightCorner(k, k) = 0.5 * (Zstar + Zstar.transpose());
  return Y;
}

struct EigenOptions {
  double tol = 1e-10;
  int max_iter = 1000;
  std::uint64_t seed = 0x51ed2701ULL;
};

/// Extreme eigenpair of A(gamma) by Lanczos.
inline EigenPair eig_A_of_gamma(const QmpData& data, const Vector& gamma, Extreme which,
                                const EigenOptions& opt = {}, const Vector* start = nullptr) {
  data.require_gamma(gamma, "eig_A_of_gamma");
  auto apply = [&](const Vector& x, Vector& y) {
    y.resize(x.size());
    apply_A_of_gamma_into(data, gamma, x, y);
  };
  return lanczos_extreme(apply, data.n_minus_k, which, opt.tol, opt.max_iter, opt.seed, start);
}

struct Curvature {
  double mu = 0.0;
  double L = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  /// mu > 0: A(gamma) is positive definite on the whole ball.
  bool certified = false;
  bool eig_converged = false;
};

/// mu = lambda_min(A(c)) - r rho, L = lambda_max(A(c)) + r rho. The Lanczos
/// residuals widen the interval.
inline Curvature curvature_on_ball(const QmpData& data, const Ball& ball, double rho,
                                   const EigenOptions& opt = {}) {
  const EigenPair lo = eig_A_of_gamma(data, ball.center, Extreme::Min, opt);
  const EigenPair hi = eig_A_of_gamma(data, ball.center, Extreme::Max, opt);
  Curvature out;
  out.lambda_min = lo.value;
  out.lambda_max = hi.value;
  out.eig_converged = lo.converged && hi.converged;
  out.mu = lo.value - lo.residual - ball.radius * rho;
  out.L = hi.value + hi.residual + ball.radius * rho;
  out.certified = out.mu > 0.0 && out.eig_converged;
  return out;
}

/// ||S||_2 as max(|lambda_min|, |lambda_max|) by Lanczos, padded by the
/// Ritz residual.
inline double spectral_norm(const SparseSymMatrix& S, const EigenOptions& opt = {}) {
  if (S.stored() == 0) return 0.0;
  const EigenPair lo = lanczos_extreme(S, Extreme::Min, opt.tol, opt.max_iter, opt.seed);
  const EigenPair hi = lanczos_extreme(S, Extreme::Max, opt.tol, opt.max_iter, opt.seed);
  return std::max(std::abs(lo.value) + lo.residual, std::abs(hi.value) + hi.residual);
}

/// sqrt(sum_i ||A_i||_2^2), an upper bound on ||sum u_i A_i||_2 over unit u.
inline double rho_hat(const QmpData& data, const EigenOptions& opt = {}) {
  double s = 0.0;
  for (const auto& t : data.constraints) {
    const double a = spectral_norm(t.A, opt);
    s += a * a;
  }
  return std::sqrt(s);
}

}  // namespace certsdp
