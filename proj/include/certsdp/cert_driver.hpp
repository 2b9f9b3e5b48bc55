#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "certsdp/cautious_agd.hpp"
#include "certsdp/common.hpp"
#include "certsdp/qmp_model.hpp"

namespace certsdp {

struct RegularityParams {
  double mu_hat = 0.0;
  double L_hat = 0.0;
  double R_p = 0.0;
  double R_d = 0.0;
  double rho_hat = 0.0;

  void validate() const {
    if (!(mu_hat > 0.0 && L_hat >= mu_hat && R_p > 0.0 && R_d >= 1.0 && rho_hat > 0.0)) {
      throw InvalidInput("RegularityParams: need 0 < mu <= L, R_p > 0, R_d >= 1, rho > 0");
    }
    if (mu_hat / R_d > rho_hat * (1.0 + 1e-12)) {
      throw InvalidInput("RegularityParams: need mu_hat / R_d <= rho_hat");
    }
  }
};

/// r = (1/rho) lmax lmin / (lmax + lmin) when A(gamma) is positive definite,
/// else 0.
inline double radius_practical_from(double lambda_min, double lambda_max, double rho, double eig_tol) {
  if (!(rho > 0.0)) throw InvalidInput("radius_practical: rho must be positive");
  if (lambda_min <= eig_tol * std::max(1.0, std::abs(lambda_max))) return 0.0;
  return (lambda_max * lambda_min / (lambda_max + lambda_min)) / rho;
}

inline double radius_practical(const QmpData& data, const Vector& gamma, double rho,
                               const EigenOptions& eig = {}) {
  const EigenPair lo = eig_A_of_gamma(data, gamma, Extreme::Min, eig);
  const EigenPair hi = eig_A_of_gamma(data, gamma, Extreme::Max, eig);
  if (!lo.converged || !hi.converged) {
    throw NumericalFailure("radius_practical: Lanczos did not converge");
  }
  return radius_practical_from(lo.value, hi.value, rho, eig.tol);
}

/// Five-term minimum; may be nonpositive.
inline double radius_theoretical_from(double lambda_min, double lambda_max, double gamma_norm,
                                      double B_norm, const RegularityParams& p) {
  const double rho = p.rho_hat;
  return std::min({p.mu_hat / (2.0 * rho), 2.0 * p.R_d - gamma_norm, (lambda_min - p.mu_hat / 2.0) / rho,
                   (2.0 * p.L_hat - lambda_max) / rho, (2.0 * p.L_hat * p.R_p - B_norm) / (rho * p.R_p)});
}

inline double radius_theoretical(const QmpData& data, const Vector& gamma, const RegularityParams& p,
                                 const EigenOptions& eig = {}) {
  p.validate();
  const EigenPair lo = eig_A_of_gamma(data, gamma, Extreme::Min, eig);
  const EigenPair hi = eig_A_of_gamma(data, gamma, Extreme::Max, eig);
  if (!lo.converged || !hi.converged) {
    throw NumericalFailure("radius_theoretical: Lanczos did not converge");
  }
  return radius_theoretical_from(lo.value, hi.value, gamma.norm(), B_of_gamma(data, gamma).norm(), p);
}

struct Tolerances {
  double delta = 0.0;
  double eta = 0.0;
};

/// delta = mu eps^2 / (9 rho R_d R_p)^2, eta = 4 eps / (9 R_d), for
/// 0 < eps <= 9 rho R_d R_p^2.
inline Tolerances tolerances_from_eps(double eps, const RegularityParams& p) {
  p.validate();
  const double hi = 9.0 * p.rho_hat * p.R_d * p.R_p * p.R_p;
  if (!(eps > 0.0) || eps > hi * (1.0 + 1e-12)) {
    throw InvalidInput("tolerances_from_eps: eps out of range (0, 9 rho R_d R_p^2]");
  }
  const double d = 9.0 * p.rho_hat * p.R_d * p.R_p;
  return {p.mu_hat * eps * eps / (d * d), 4.0 * eps / (9.0 * p.R_d)};
}

/// Source of dual iterates gamma^(1), gamma^(2), ...; nullopt when exhausted.
class DualStream {
 public:
  virtual ~DualStream() = default;
  virtual std::optional<Vector> next() = 0;
};

/// Adapts a callable.
class FunctionStream : public DualStream {
 public:
  explicit FunctionStream(std::function<std::optional<Vector>()> f) : f_(std::move(f)) {}
  std::optional<Vector> next() override { return f_(); }

 private:
  std::function<std::optional<Vector>()> f_;
};

/// Repeats one vector, optionally a bounded number of times.
class ConstantStream : public DualStream {
 public:
  explicit ConstantStream(Vector g, long long count = -1) : g_(std::move(g)), left_(count) {}
  std::optional<Vector> next() override {
    if (left_ == 0) return std::nullopt;
    if (left_ > 0) --left_;
    return g_;
  }

 private:
  Vector g_;
  long long left_;
};

/// Runs an inner stream on a producer thread and hands iterates over
/// through a bounded queue. The sequence is the inner sequence unchanged.
class ThreadedStream : public DualStream {
 public:
  ThreadedStream(DualStream& inner, std::size_t capacity)
      : inner_(inner), capacity_(std::max<std::size_t>(capacity, 1)) {
    worker_ = std::thread([this] { produce(); });
  }
  ~ThreadedStream() override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }
  ThreadedStream(const ThreadedStream&) = delete;
  ThreadedStream& operator=(const ThreadedStream&) = delete;

  std::optional<Vector> next() override {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return !queue_.empty() || done_; });
    if (queue_.empty()) {
      if (error_) std::rethrow_exception(error_);
      return std::nullopt;
    }
    Vector g = std::move(queue_.front());
    queue_.pop_front();
    cv_.notify_all();
    return g;
  }

 private:
  void produce() {
    try {
      for (;;) {
        {
          std::unique_lock<std::mutex> lock(mu_);
          cv_.wait(lock, [this] { return queue_.size() < capacity_ || stop_; });
          if (stop_) break;
        }
        std::optional<Vector> g = inner_.next();
        std::lock_guard<std::mutex> lock(mu_);
        if (!g) break;
        queue_.push_back(std::move(*g));
        cv_.notify_all();
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      error_ = std::current_exception();
    }
    std::lock_guard<std::mutex> lock(mu_);
    done_ = true;
    cv_.notify_all();
  }

  DualStream& inner_;
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Vector> queue_;
  bool stop_ = false;
  bool done_ = false;
  std::exception_ptr error_;
  std::thread worker_;
};

enum class Schedule { GuessAndDouble, Linear };
enum class RadiusMode { Practical, Theoretical };

struct CertConfig {
  /// Target accuracy; only used with RegularityParams.
  double eps = 1e-6;
  std::optional<double> delta;  ///< overrides the computed delta
  std::optional<double> eta;    ///< overrides the computed eta
  Schedule schedule = Schedule::Linear;
  long long linear_every = 250;
  double feas_tol = 1e-13;
  double delta_target = 1e-13;
  RadiusMode radius_mode = RadiusMode::Practical;
  std::optional<RegularityParams> regularity;
  /// Overrides the sqrt(sum ||A_i||^2) bound.
  std::optional<double> rho_hat;
  double max_seconds = std::numeric_limits<double>::infinity();
  long long max_dual_iterates = std::numeric_limits<long long>::max();
  long long max_outer_per_ball = std::numeric_limits<long long>::max();
  AbortPolicy abort;
  EigenOptions eig;
  ProxOptions prox;
  std::function<void(const AgdRecord&)> agd_trace;
  /// Called after each ball attempt with (dual index, radius, status).
  std::function<void(long long, double, const std::string&)> ball_trace;
};

enum class SolveStatus { Solved, BudgetExhausted, InfeasibleStream };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "solved";
    case SolveStatus::BudgetExhausted: return "budget_exhausted";
    case SolveStatus::InfeasibleStream: return "infeasible_stream";
  }
  return "unknown";
}

struct GroundTruthRef {
  const Vector* gamma_star = nullptr;
  const Matrix* X_star = nullptr;
};

struct SolveReport {
  Matrix X;
  Vector gamma;  ///< center of the last ball attempted
  double objective = 0.0;
  double residual = 0.0;
  double max_abs_q = 0.0;
  long long dual_iterates = 0;
  long long balls_attempted = 0;
  long long outer_iterations = 0;
  long long inner_iterations = 0;
  double seconds_total = 0.0;
  double seconds_dual = 0.0;
  double seconds_radius = 0.0;
  double seconds_agd = 0.0;
  SolveStatus status = SolveStatus::BudgetExhausted;
  double delta = 0.0;
  double eta = 0.0;
  /// True only when RegularityParams were supplied.
  bool eps_certified = false;
  std::optional<double> dist_sq;
  /// gamma* lies in the accepted ball (ground truth only).
  std::optional<bool> gamma_star_in_ball;
  double accepted_mu = 0.0;
};

/// Dual iterate indices at which a ball is attempted.
inline bool scheduled(const CertConfig& cfg, long long i) {
  if (cfg.schedule == Schedule::GuessAndDouble) return i > 0 && (i & (i - 1)) == 0;
  return i > 0 && i % std::max<long long>(cfg.linear_every, 1) == 0;
}

/// CertSDP: pull dual iterates, build certificate balls at scheduled
/// indices, run CautiousAGD on each, accept the first X with
/// ||q_vec(X)||_2 <= eta.
inline SolveReport run_certsdp(const QmpData& data, DualStream& stream, const CertConfig& cfg,
                               const GroundTruthRef& gt = {}) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };
  std::optional<clock::time_point> deadline;
  if (std::isfinite(cfg.max_seconds)) {
    deadline = start + std::chrono::duration_cast<clock::duration>(
                           std::chrono::duration<double>(std::max(cfg.max_seconds, 0.0)));
  }
  auto out_of_time = [&] { return deadline && clock::now() >= *deadline; };

  SolveReport rep;
  if (cfg.radius_mode == RadiusMode::Theoretical && !cfg.regularity) {
    throw InvalidInput("run_certsdp: theoretical radius needs RegularityParams");
  }
  if (cfg.regularity) {
    const Tolerances tol = tolerances_from_eps(cfg.eps, *cfg.regularity);
    rep.delta = cfg.delta.value_or(tol.delta);
    rep.eta = cfg.eta.value_or(tol.eta);
    rep.eps_certified = !cfg.delta && !cfg.eta;
  } else {
    rep.delta = cfg.delta.value_or(1e-13);
    rep.eta = cfg.eta.value_or(1e-13);
  }
  if (!(rep.delta > 0.0) || !(rep.eta > 0.0)) throw InvalidInput("run_certsdp: delta and eta must be positive");
  const double rho = cfg.rho_hat ? *cfg.rho_hat
                                 : (cfg.regularity ? cfg.regularity->rho_hat : rho_hat(data, cfg.eig));

  Matrix X_warm = Matrix::Zero(data.n_minus_k, data.k);
  Vector gamma_warm;
  bool have_X = false;

  auto finalize = [&](const Matrix& X) {
    const QValues q = eval_all_q(data, X);
    rep.X = X;
    rep.objective = q.objective;
    rep.residual = q.constraints.norm();
    rep.max_abs_q = q.constraints.size() ? q.constraints.cwiseAbs().maxCoeff() : 0.0;
    if (gt.X_star != nullptr) rep.dist_sq = (X - *gt.X_star).squaredNorm();
  };

  for (long long i = 1;; ++i) {
    if (out_of_time() || i > cfg.max_dual_iterates) {
      rep.status = SolveStatus::BudgetExhausted;
      break;
    }
    const auto t_dual = clock::now();
    std::optional<Vector> g = stream.next();
    rep.seconds_dual += std::chrono::duration<double>(clock::now() - t_dual).count();
    if (!g) {
      rep.status = SolveStatus::InfeasibleStream;
      break;
    }
    data.require_gamma(*g, "run_certsdp");
    rep.dual_iterates = i;
    if (!scheduled(cfg, i)) continue;

    const auto t_rad = clock::now();
    const EigenPair lo = eig_A_of_gamma(data, *g, Extreme::Min, cfg.eig);
    const EigenPair hi = eig_A_of_gamma(data, *g, Extreme::Max, cfg.eig);
    double r = 0.0;
    if (cfg.radius_mode == RadiusMode::Practical) {
      r = radius_practical_from(lo.value - lo.residual, hi.value + hi.residual, rho, cfg.eig.tol);
    } else {
      r = radius_theoretical_from(lo.value - lo.residual, hi.value + hi.residual, g->norm(),
                                  B_of_gamma(data, *g).norm(), *cfg.regularity);
    }
    Ball ball{*g, std::max(r, 0.0)};
    Curvature curv;
    if (r > 0.0) {
      curv.lambda_min = lo.value;
      curv.lambda_max = hi.value;
      curv.mu = lo.value - lo.residual - r * rho;
      curv.L = hi.value + hi.residual + r * rho;
      curv.certified = curv.mu > 0.0 && lo.converged && hi.converged;
    }
    rep.seconds_radius += std::chrono::duration<double>(clock::now() - t_rad).count();
    if (!(r > 0.0) || !curv.certified) {
      if (cfg.ball_trace) cfg.ball_trace(i, r, "skipped");
      continue;
    }

    ++rep.balls_attempted;
    rep.gamma = *g;
    const auto t_agd = clock::now();
    const StepParams params = StepParams::from(curv.mu, curv.L);
    const Matrix X0 = have_X ? X_warm : Matrix::Zero(data.n_minus_k, data.k);
    const double gap0 = estimate_gap0(data, ball, X0, curv.mu);

    AgdOptions aopt;
    aopt.delta_target = std::min(cfg.delta_target, rep.delta);
    aopt.feas_tol = cfg.feas_tol;
    aopt.residual_tol = rep.eta;
    aopt.abort = cfg.abort;
    aopt.prox = cfg.prox;
    aopt.keep_history = false;
    aopt.trace = cfg.agd_trace;
    aopt.budget.max_outer = cfg.max_outer_per_ball;
    aopt.budget.deadline = deadline;
    const AgdResult agd = run_cautious_agd(data, ball, params, gap0, X0, gamma_warm, aopt);
    rep.seconds_agd += std::chrono::duration<double>(clock::now() - t_agd).count();
    rep.outer_iterations += agd.state.t;
    rep.inner_iterations += agd.prox_iterations;
    if (cfg.ball_trace) cfg.ball_trace(i, r, to_string(agd.status));

    // Warm start the next ball from the last iterate and prox dual point.
    X_warm = agd.state.X;
    gamma_warm = agd.state.gamma_warm;
    have_X = true;

    const QValues q = eval_all_q(data, agd.state.X);
    if (agd.status == AgdStatus::Optimal && q.constraints.norm() <= rep.eta) {
      finalize(agd.state.X);
      rep.accepted_mu = curv.mu;
      if (gt.gamma_star != nullptr) rep.gamma_star_in_ball = ball.contains(*gt.gamma_star);
      rep.status = SolveStatus::Solved;
      rep.seconds_total = elapsed();
      return rep;
    }
  }
  finalize(X_warm);
  rep.seconds_total = elapsed();
  return rep;
}

}  // namespace certsdp
