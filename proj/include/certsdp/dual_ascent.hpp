#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "certsdp/cert_driver.hpp"
#include "certsdp/common.hpp"
#include "certsdp/eigen_solvers.hpp"
#include "certsdp/qmp_model.hpp"

namespace certsdp {

/// Dual point (gamma, T) of the penalized dual
///   max tr(T) + penalty * min(0, lambda_min(Mbar(gamma, T))),
/// Mbar = [A(gamma)/2, B(gamma)/2; B(gamma)'/2, (c(gamma)/k) I - T].
struct DualState {
  Vector gamma;
  Matrix T;
  double penalty = 0.0;
  double lambda_min = 0.0;
  Vector v;  ///< last eigenvector, length n_minus_k + k
};

/// Mbar(gamma, T) applied blockwise; B(gamma) and c(gamma) cached.
class SlackOperator {
 public:
  SlackOperator(const QmpData& data, const Vector& gamma, const Matrix& T)
      : data_(&data), gamma_(gamma), T_(T) {
    data.require_gamma(gamma, "SlackOperator");
    require_dims(T.rows() == data.k && T.cols() == data.k, "SlackOperator: T must be k x k");
    B_ = B_of_gamma(data, gamma);
    c_over_k_ = c_of_gamma(data, gamma) / static_cast<double>(data.k);
  }

  Index dim() const { return data_->n_minus_k + data_->k; }

  void operator()(const Vector& x, Vector& y) const {
    require_dims(x.size() == dim(), "slack_apply: x has wrong length");
    const Index nk = data_->n_minus_k;
    const Index k = data_->k;
    y.resize(dim());
    auto x1 = x.head(nk);
    auto x2 = x.tail(k);
    Vector top(nk);
    apply_A_of_gamma_into(*data_, gamma_, Vector(x1), top);
    y.head(nk) = 0.5 * (top + B_ * x2);
    y.tail(k) = 0.5 * (B_.transpose() * x1) + c_over_k_ * x2 - T_ * x2;
  }

 private:
  const QmpData* data_;
  Vector gamma_;
  Matrix T_;
  Matrix B_;
  double c_over_k_ = 0.0;
};

inline Vector slack_apply(const QmpData& data, const Vector& gamma, const Matrix& T, const Vector& x) {
  const SlackOperator op(data, gamma, T);
  Vector y;
  op(x, y);
  return y;
}

struct DualEval {
  double value = 0.0;
  Vector g_gamma;
  Matrix g_T;
  double lambda_min = 0.0;
  Vector v;
  bool eig_converged = false;
};

struct DualEigOptions {
  double tol = 1e-9;
  int max_iter = 0;  ///< 0 means the operator dimension
  std::uint64_t seed = 0x7f4a7c15ULL;
};

/// Value and a supergradient of the penalized dual at `s`. The eigenvector
/// in `s.v`, if any, warm-starts Lanczos.
inline DualEval penalized_dual_value_and_supergradient(const QmpData& data, const DualState& s,
                                                       const DualEigOptions& opt = {}) {
  const SlackOperator op(data, s.gamma, s.T);
  const Index n = op.dim();
  const int iters = opt.max_iter > 0 ? opt.max_iter : static_cast<int>(n);
  const Vector* start = s.v.size() == n ? &s.v : nullptr;
  const EigenPair eig = lanczos_extreme(op, n, Extreme::Min, opt.tol, iters, opt.seed, start);

  DualEval out;
  out.lambda_min = eig.value;
  out.v = eig.vector;
  out.eig_converged = eig.converged;
  const Index k = data.k;
  out.value = s.T.trace() + s.penalty * std::min(0.0, eig.value);
  out.g_gamma = Vector::Zero(data.m());
  out.g_T = Matrix::Identity(k, k);
  if (eig.value < 0.0 && s.penalty != 0.0) {
    const Index nk = data.n_minus_k;
    const Vector v1 = eig.vector.head(nk);
    const Vector v2 = eig.vector.tail(k);
    Vector Av(nk);
    for (Index i = 0; i < data.m(); ++i) {
      const QmpTerm& t = data.constraints[i];
      Av.setZero();
      t.A.multiply_add(v1, Av);
      out.g_gamma(i) = s.penalty * (0.5 * v1.dot(Av) + v1.dot(t.B * v2) +
                                    (t.c / static_cast<double>(k)) * v2.squaredNorm());
    }
    out.g_T -= s.penalty * (v2 * v2.transpose());
  }
  return out;
}

/// 20 tr(Y*) = 20 (||X*||^2 + tr Z*); Z* = I_k for generated instances.
inline double default_penalty(const Matrix* X_star, const Matrix* Z_star = nullptr,
                              std::optional<double> user = std::nullopt) {
  if (user) {
    if (!(*user > 0.0)) throw InvalidInput("default_penalty: penalty must be positive");
    return *user;
  }
  if (X_star == nullptr) throw InvalidInput("default_penalty: no penalty given and no ground truth");
  const double trZ = Z_star != nullptr ? Z_star->trace() : static_cast<double>(X_star->cols());
  return 20.0 * (X_star->squaredNorm() + trZ);
}

enum class DualMethod { Accelegrad, Subgradient };
enum class DualOutput { Last, Average, Best };

struct DualConfig {
  DualMethod method = DualMethod::Subgradient;
  DualOutput output = DualOutput::Last;
  double penalty = 1.0;
  /// Subgradient step along g / ||g|| of length step_scale / sqrt(i). With
  /// `normalized` off the step is (step_scale / ||g_1||) g / sqrt(i), g_1 the
  /// first nonzero supergradient.
  double step_scale = 1.0;
  bool normalized = true;
  /// Accelegrad diameter guess D and gradient-norm guess G.
  double diameter = 3.0;
  double grad_bound = 0.0;
  DualEigOptions eig;
};

struct DualTraceRecord {
  long long i = 0;
  double value = 0.0;
  double best = 0.0;
  double lambda_min = 0.0;
  double step = 0.0;
};

/// Penalized-dual ascent as a stream of gamma iterates, starting from
/// gamma = 0, T = 0.
class DualAscent : public DualStream {
 public:
  DualAscent(const QmpData& data, DualConfig cfg) : data_(&data), cfg_(std::move(cfg)) {
    if (!(cfg_.penalty > 0.0)) throw InvalidInput("DualAscent: penalty must be positive");
    const Index m = data.m();
    const Index k = data.k;
    x_ = pack(Vector::Zero(m), Matrix::Zero(k, k));
    y_ = x_;
    z_ = x_;
    avg_ = Vector::Zero(x_.size());
    best_x_ = x_;
  }

  std::function<void(const DualTraceRecord&)> trace;

  std::optional<Vector> next() override {
    step();
    return gamma_of(output_point());
  }

  /// One ascent step; returns the dual value at the point queried.
  double step() {
    ++i_;
    if (cfg_.method == DualMethod::Subgradient) {
      const DualEval ev = evaluate(x_);
      Vector g = pack(ev.g_gamma, ev.g_T);
      const double gn = g.norm();
      if (scale_ == 0.0 && gn > 0.0) scale_ = cfg_.step_scale / gn;
      const double c = cfg_.normalized ? (gn > 0.0 ? cfg_.step_scale / gn : 0.0) : scale_;
      const double step = c / std::sqrt(static_cast<double>(i_));
      x_ += step * g;
      accumulate(x_, 1.0);
      emit(ev, step);
      return ev.value;
    }
    // Accelegrad with sign flipped for ascent.
    const double t = static_cast<double>(i_ - 1);
    const double alpha = t <= 2.0 ? 1.0 : (t + 1.0) / 4.0;
    const double tau = 1.0 / alpha;
    const Vector xq = tau * z_ + (1.0 - tau) * y_;
    const DualEval ev = evaluate(xq);
    const Vector g = pack(ev.g_gamma, ev.g_T);
    grad_sq_sum_ += alpha * alpha * g.squaredNorm();
    const double G = cfg_.grad_bound;
    const double denom = std::sqrt(G * G + grad_sq_sum_);
    const double eta = denom > 0.0 ? 2.0 * cfg_.diameter / denom : 0.0;
    z_ += alpha * eta * g;
    y_ = xq + eta * g;
    x_ = y_;
    accumulate(y_, alpha);
    emit(ev, eta);
    return ev.value;
  }

  const DualState& state() const { return state_; }
  long long iterations() const { return i_; }
  double best_value() const { return best_; }
  Vector gamma_last() const { return gamma_of(x_); }
  Vector gamma_average() const { return gamma_of(avg_weight_ > 0.0 ? Vector(avg_ / avg_weight_) : x_); }
  Vector gamma_best() const { return gamma_of(best_x_); }

 private:
  Vector pack(const Vector& g, const Matrix& T) const {
    const Index m = data_->m();
    const Index k = data_->k;
    Vector out(m + k * k);
    out.head(m) = g;
    out.tail(k * k) = Eigen::Map<const Vector>(T.data(), k * k);
    return out;
  }
  Vector gamma_of(const Vector& x) const { return x.head(data_->m()); }
  Matrix T_of(const Vector& x) const {
    const Index k = data_->k;
    Matrix T = Eigen::Map<const Matrix>(x.tail(k * k).data(), k, k);
    return 0.5 * (T + T.transpose());
  }

  DualEval evaluate(const Vector& x) {
    state_.gamma = gamma_of(x);
    state_.T = T_of(x);
    state_.penalty = cfg_.penalty;
    const DualEval ev = penalized_dual_value_and_supergradient(*data_, state_, cfg_.eig);
    state_.lambda_min = ev.lambda_min;
    state_.v = ev.v;
    if (ev.value > best_) {
      best_ = ev.value;
      best_x_ = x;
    }
    return ev;
  }

  void accumulate(const Vector& x, double w) {
    avg_ += w * x;
    avg_weight_ += w;
  }

  Vector output_point() const {
    switch (cfg_.output) {
      case DualOutput::Average: return avg_weight_ > 0.0 ? Vector(avg_ / avg_weight_) : x_;
      case DualOutput::Best: return best_x_;
      case DualOutput::Last: break;
    }
    return x_;
  }

  void emit(const DualEval& ev, double step) {
    if (!trace) return;
    trace({i_, ev.value, best_, ev.lambda_min, step});
  }

  const QmpData* data_;
  DualConfig cfg_;
  DualState state_;
  Vector x_, y_, z_, avg_, best_x_;
  double avg_weight_ = 0.0;
  double scale_ = 0.0;
  double grad_sq_sum_ = 0.0;
  double best_ = -std::numeric_limits<double>::infinity();
  long long i_ = 0;
};

}  // namespace certsdp
