#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "certsdp/certsdp.hpp"
#include "json.hpp"

namespace certsdp::cli {

enum Exit : int { kOk = 0, kUsage = 1, kFailed = 2 };

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct GenerateArgs {
  long long n = 0;  ///< n - k, the row count of X
  long long k = 10;
  long long m = 10;
  double mu_star = 0.1;
  std::optional<long long> nnz;  ///< defaults to n
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  GenSpec spec;
  spec.n_minus_k = a.n;
  spec.k = a.k;
  spec.m = a.m;
  spec.mu_star = a.mu_star;
  spec.nnz = a.nnz.value_or(a.n);
  spec.seed = a.seed;
  auto [data, gt] = generate(spec);
  save_instance(a.out, data, &gt);
  out << "wrote " << a.out << ": n_minus_k=" << spec.n_minus_k << " k=" << spec.k << " m=" << spec.m
      << " mu_star=" << fmt(spec.mu_star) << " nnz=" << spec.nnz << " seed=" << spec.seed
      << " opt=" << fmt(gt.opt) << "\n";
  return kOk;
}

struct SolveArgs {
  std::string instance;
  double eps = 1e-6;
  double feas_tol = 1e-13;
  double delta_target = 1e-13;
  std::string schedule = "linear:250";
  std::string radius = "practical";
  std::string dual = "subgradient";
  std::optional<double> dual_scale;
  std::optional<double> penalty;
  double max_seconds = std::numeric_limits<double>::infinity();
  long long max_dual_iters = std::numeric_limits<long long>::max();
  bool threaded = false;
  std::optional<double> mu_hat, L_hat, R_p, R_d, rho;
  std::string trace;
  std::string report;
};

inline void apply_schedule(const std::string& s, CertConfig& cfg) {
  if (s == "double") {
    cfg.schedule = Schedule::GuessAndDouble;
    return;
  }
  if (s == "linear") {
    cfg.schedule = Schedule::Linear;
    cfg.linear_every = 250;
    return;
  }
  if (s.rfind("linear:", 0) == 0) {
    long long every = 0;
    const std::string tail = s.substr(7);
    const auto r = std::from_chars(tail.data(), tail.data() + tail.size(), every);
    if (r.ec != std::errc() || r.ptr != tail.data() + tail.size() || every <= 0) {
      throw CLI::ValidationError("--schedule", "expected linear:N with N > 0");
    }
    cfg.schedule = Schedule::Linear;
    cfg.linear_every = every;
    return;
  }
  throw CLI::ValidationError("--schedule", "expected 'double' or 'linear:N'");
}

/// Thread-safe JSON-lines sink; a no-op without a file.
class TraceSink {
 public:
  explicit TraceSink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
      if (!*file_) throw Error("cannot write '" + path + "'");
    }
  }
  bool enabled() const { return file_ != nullptr; }
  void write(const nlohmann::json& j) {
    if (!file_) return;
    std::lock_guard<std::mutex> lock(mu_);
    *file_ << j.dump() << "\n";
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::mutex mu_;
};

struct SolveOutcome {
  SolveReport report;
  SolutionFile solution;
};

inline SolveOutcome solve_loaded(const LoadedInstance& inst, const SolveArgs& a, TraceSink& sink) {
  const QmpData& data = inst.data;
  data.validate();
  const GroundTruth* gt = inst.ground_truth ? &*inst.ground_truth : nullptr;

  CertConfig cfg;
  cfg.eps = a.eps;
  cfg.feas_tol = a.feas_tol;
  cfg.delta_target = a.delta_target;
  cfg.max_seconds = a.max_seconds;
  cfg.max_dual_iterates = a.max_dual_iters;
  apply_schedule(a.schedule, cfg);
  if (a.radius == "theoretical") {
    if (!a.mu_hat || !a.L_hat || !a.R_p || !a.R_d || !a.rho) {
      throw CLI::ValidationError("--radius", "theoretical mode needs --mu-hat --L-hat --Rp --Rd --rho");
    }
    cfg.radius_mode = RadiusMode::Theoretical;
    cfg.regularity = RegularityParams{*a.mu_hat, *a.L_hat, *a.R_p, *a.R_d, *a.rho};
  } else if (a.radius != "practical") {
    throw CLI::ValidationError("--radius", "expected 'practical' or 'theoretical'");
  }
  if (a.rho) cfg.rho_hat = *a.rho;

  DualConfig dc;
  if (a.dual == "accelegrad") {
    dc.method = DualMethod::Accelegrad;
    if (a.dual_scale) dc.diameter = *a.dual_scale;
  } else if (a.dual == "subgradient") {
    dc.method = DualMethod::Subgradient;
    if (a.dual_scale) dc.step_scale = *a.dual_scale;
  } else {
    throw CLI::ValidationError("--dual", "expected 'accelegrad' or 'subgradient'");
  }
  dc.penalty = default_penalty(gt ? &gt->X_star : nullptr, nullptr, a.penalty);

  if (sink.enabled()) {
    cfg.agd_trace = [&sink](const AgdRecord& r) {
      sink.write({{"kind", "agd"},        {"t", r.t},
                  {"Q_U", r.Q_U},         {"residual", r.residual},
                  {"max_abs_q", r.max_abs_q}, {"bound", r.bound},
                  {"eps", r.eps},         {"prox_gap", r.prox_gap},
                  {"prox_iters", r.prox_iters}, {"precision_floor", r.precision_floor},
                  {"time", r.seconds}});
    };
    cfg.ball_trace = [&sink](long long i, double r, const std::string& status) {
      sink.write({{"kind", "ball"}, {"i", i}, {"radius", r}, {"status", status}});
    };
  }

  DualAscent ascent(data, dc);
  if (sink.enabled()) {
    ascent.trace = [&sink](const DualTraceRecord& r) {
      sink.write({{"kind", "dual"}, {"i", r.i}, {"value", r.value}, {"best", r.best},
                  {"lambda_min", r.lambda_min}, {"step", r.step}});
    };
  }

  GroundTruthRef ref;
  if (gt) ref = {&gt->gamma_star, &gt->X_star};
  SolveOutcome out;
  if (a.threaded) {
    ThreadedStream stream(ascent, 4);
    out.report = run_certsdp(data, stream, cfg, ref);
  } else {
    out.report = run_certsdp(data, ascent, cfg, ref);
  }
  const SolveReport& r = out.report;
  SolutionFile& s = out.solution;
  s.X = r.X;
  s.gamma = r.gamma.size() == data.m() ? r.gamma : Vector(Vector::Zero(data.m()));
  s.objective = r.objective;
  s.residual = r.residual;
  s.max_abs_q = r.max_abs_q;
  s.time_sec = r.seconds_total;
  s.outer_iters = r.outer_iterations;
  s.inner_iters = r.inner_iterations;
  s.dist_sq = r.dist_sq;
  s.status = to_string(r.status);
  return out;
}

inline int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const LoadedInstance inst = load_instance(a.instance);
  TraceSink sink(a.trace);
  const SolveOutcome o = solve_loaded(inst, a, sink);
  if (!a.report.empty()) save_solution(a.report, o.solution);
  const SolveReport& r = o.report;
  out << "status=" << to_string(r.status) << " objective=" << fmt(r.objective)
      << " residual=" << fmt(r.residual) << " max_abs_q=" << fmt(r.max_abs_q);
  if (r.dist_sq) out << " dist_sq=" << fmt(*r.dist_sq);
  out << " dual_iterates=" << r.dual_iterates << " balls=" << r.balls_attempted
      << " outer=" << r.outer_iterations << " inner=" << r.inner_iterations
      << " time_sec=" << fmt(r.seconds_total) << "\n";
  return r.status == SolveStatus::Solved ? kOk : kFailed;
}

struct VerifyArgs {
  std::string instance;
  std::string solution;
};

inline bool close(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

inline int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const LoadedInstance inst = load_instance(a.instance);
  const QmpData& data = inst.data;
  data.validate();
  bool ok = true;
  if (a.solution.empty()) {
    if (!inst.ground_truth) {
      out << "instance ok (no ground truth to check)\n";
      return kOk;
    }
    const VerifyReport rep = verify(data, *inst.ground_truth);
    for (const auto& c : rep.checks) {
      out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << fmt(c.value) << " (threshold "
          << fmt(c.threshold) << ")\n";
    }
    ok = rep.passed();
  } else {
    const SolutionFile s = load_solution(a.solution);
    if (s.X.rows() != data.n_minus_k || s.X.cols() != data.k) {
      throw FormatError("solution: X shape does not match the instance");
    }
    const QValues q = eval_all_q(data, s.X);
    const double residual = q.constraints.norm();
    const double maxq = q.constraints.size() ? q.constraints.cwiseAbs().maxCoeff() : 0.0;
    auto line = [&](const char* name, double recomputed, std::optional<double> stored) {
      const bool match = !stored || close(recomputed, *stored);
      ok = ok && match;
      out << (match ? "PASS " : "FAIL ") << name << ": " << fmt(recomputed);
      if (stored) out << " (reported " << fmt(*stored) << ")";
      out << "\n";
    };
    line("objective", q.objective, s.objective);
    line("residual", residual, s.residual);
    line("max_abs_q", maxq, s.max_abs_q);
    if (inst.ground_truth) line("dist_sq", (s.X - inst.ground_truth->X_star).squaredNorm(), s.dist_sq);
    out << "status " << s.status << "\n";
  }
  out << (ok ? "verified\n" : "verification failed\n");
  return ok ? kOk : kFailed;
}

struct BenchArgs {
  std::string instances;
  std::string config;
  std::string out;
  int jobs = 1;
};

inline SolveArgs solve_args_from_config(const nlohmann::json& j) {
  SolveArgs a;
  if (!j.is_object()) throw FormatError("bench config: expected a JSON object");
  auto num = [&](const char* key, auto& dst) {
    if (auto it = j.find(key); it != j.end()) {
      if (!it->is_number()) throw FormatError(std::string("bench config: '") + key + "' must be a number");
      dst = it->template get<std::decay_t<decltype(dst)>>();
    }
  };
  auto opt_num = [&](const char* key, std::optional<double>& dst) {
    if (auto it = j.find(key); it != j.end()) {
      if (!it->is_number()) throw FormatError(std::string("bench config: '") + key + "' must be a number");
      dst = it->get<double>();
    }
  };
  auto str = [&](const char* key, std::string& dst) {
    if (auto it = j.find(key); it != j.end()) {
      if (!it->is_string()) throw FormatError(std::string("bench config: '") + key + "' must be a string");
      dst = it->get<std::string>();
    }
  };
  static const char* known[] = {"eps",   "feas_tol", "delta_target", "schedule", "radius", "dual",
                                "dual_scale", "penalty", "max_seconds", "max_dual_iters", "mu_hat",
                                "L_hat", "Rp", "Rd", "rho"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known)) {
      throw FormatError("bench config: unknown key '" + it.key() + "'");
    }
  }
  num("eps", a.eps);
  num("feas_tol", a.feas_tol);
  num("delta_target", a.delta_target);
  str("schedule", a.schedule);
  str("radius", a.radius);
  str("dual", a.dual);
  opt_num("dual_scale", a.dual_scale);
  opt_num("penalty", a.penalty);
  num("max_seconds", a.max_seconds);
  num("max_dual_iters", a.max_dual_iters);
  opt_num("mu_hat", a.mu_hat);
  opt_num("L_hat", a.L_hat);
  opt_num("Rp", a.R_p);
  opt_num("Rd", a.R_d);
  opt_num("rho", a.rho);
  return a;
}

struct BenchRecord {
  std::string instance;
  long long n_minus_k = 0, k = 0, m = 0;
  double time_sec = 0.0;
  std::optional<double> dist_sq;
  std::optional<double> residual;
  std::string status;
};

inline std::string csv_row(const BenchRecord& r) {
  std::string s = r.instance + "," + std::to_string(r.n_minus_k) + "," + std::to_string(r.k) + "," +
                  std::to_string(r.m) + "," + fmt(r.time_sec) + ",";
  if (r.dist_sq) s += fmt(*r.dist_sq);
  s += ",";
  if (r.residual) s += fmt(*r.residual);
  s += "," + r.status;
  return s;
}

inline constexpr const char* kCsvHeader = "instance,n_minus_k,k,m,time_sec,dist_sq,residual,status";

inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(a.instances)) throw Error("not a directory: '" + a.instances + "'");
  SolveArgs base;
  if (!a.config.empty()) base = solve_args_from_config(io_detail::parse_text(io_detail::read_file(a.config), a.config));

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.instances)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<BenchRecord> rows(files.size());
  auto run_one = [&](std::size_t idx) {
    BenchRecord& rec = rows[idx];
    rec.instance = files[idx].stem().string();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const LoadedInstance inst = load_instance(files[idx].string());
      rec.n_minus_k = inst.data.n_minus_k;
      rec.k = inst.data.k;
      rec.m = inst.data.m();
      TraceSink none("");
      const SolveOutcome o = solve_loaded(inst, base, none);
      rec.dist_sq = o.report.dist_sq;
      rec.residual = o.report.residual;
      rec.status = to_string(o.report.status);
    } catch (const std::exception&) {
      rec.status = "error";
    }
    rec.time_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const int jobs = std::max(1, a.jobs);
  if (jobs == 1 || files.size() < 2) {
    for (std::size_t i = 0; i < files.size(); ++i) run_one(i);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= files.size()) return;
            i = next++;
          }
          run_one(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  std::string text = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) text += csv_row(r) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    io_detail::write_file(a.out, text);
    out << "wrote " << rows.size() << " records to " << a.out << "\n";
  }
  return kOk;
}

/// Parses argv and dispatches; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"certsdp: storage-optimal first-order solver for rank-k exact QMP-like SDPs"};
  app.require_subcommand(1);

  GenerateArgs g;
  auto* gen = app.add_subcommand("generate", "write a random instance with known solution");
  gen->add_option("--n", g.n, "rows of X (n - k)")->required()->check(CLI::PositiveNumber);
  gen->add_option("--k", g.k, "rank k")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--m", g.m, "number of constraints")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--mu-star", g.mu_star, "lambda_min(A(gamma*)), in (0, 1)")
      ->capture_default_str()
      ->check(CLI::Validator(
          [](std::string& s) -> std::string {
            double v = 0.0;
            try {
              v = std::stod(s);
            } catch (...) {
              return "not a number";
            }
            return (v > 0.0 && v < 1.0) ? std::string() : "must lie in (0, 1)";
          },
          "(0,1)"));
  gen->add_option("--nnz", g.nnz, "nonzeros per A_i (default: --n)")->check(CLI::PositiveNumber);
  gen->add_option("--seed", g.seed, "random seed")->capture_default_str();
  gen->add_option("--out", g.out, "output instance file")->required();

  SolveArgs s;
  auto* sol = app.add_subcommand("solve", "run CertSDP on an instance");
  sol->add_option("--instance", s.instance, "instance file")->required()->check(CLI::ExistingFile);
  sol->add_option("--eps", s.eps, "target accuracy (with regularity parameters)")->capture_default_str();
  sol->add_option("--feas-tol", s.feas_tol, "max_i |q_i| tolerance")->capture_default_str();
  sol->add_option("--delta-target", s.delta_target, "CautiousAGD optimality target")->capture_default_str();
  sol->add_option("--schedule", s.schedule, "double | linear:N")->capture_default_str();
  sol->add_option("--radius", s.radius, "practical | theoretical")
      ->capture_default_str()
      ->check(CLI::IsMember({"practical", "theoretical"}));
  sol->add_option("--dual", s.dual, "accelegrad | subgradient")
      ->capture_default_str()
      ->check(CLI::IsMember({"accelegrad", "subgradient"}));
  sol->add_option("--dual-scale", s.dual_scale, "subgradient step scale or Accelegrad diameter");
  sol->add_option("--penalty", s.penalty, "penalty (default 20 tr(Y*) from ground truth)");
  sol->add_option("--max-seconds", s.max_seconds, "wall-clock budget");
  sol->add_option("--max-dual-iters", s.max_dual_iters, "dual iterate budget");
  sol->add_flag("--threaded", s.threaded, "produce dual iterates on a separate thread");
  sol->add_option("--mu-hat", s.mu_hat);
  sol->add_option("--L-hat", s.L_hat);
  sol->add_option("--Rp", s.R_p);
  sol->add_option("--Rd", s.R_d);
  sol->add_option("--rho", s.rho, "bound on ||sum u_i A_i|| over unit u");
  sol->add_option("--trace", s.trace, "JSON-lines trace file");
  sol->add_option("--report", s.report, "solution JSON file");

  VerifyArgs v;
  auto* ver = app.add_subcommand("verify", "check an instance, or a solution against it");
  ver->add_option("--instance", v.instance, "instance file")->required()->check(CLI::ExistingFile);
  ver->add_option("--solution", v.solution, "solution file")->check(CLI::ExistingFile);

  BenchArgs b;
  auto* ben = app.add_subcommand("bench", "solve every instance in a directory, write CSV");
  ben->add_option("--instances", b.instances, "directory of *.json instances")->required();
  ben->add_option("--config", b.config, "JSON solver configuration")->check(CLI::ExistingFile);
  ben->add_option("--out", b.out, "CSV output file (default stdout)");
  ben->add_option("--jobs", b.jobs, "parallel workers")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << app.help();
    return kUsage;
  }

  try {
    if (*gen) return cmd_generate(g, out);
    if (*sol) return cmd_solve(s, out);
    if (*ver) return cmd_verify(v, out);
    if (*ben) return cmd_bench(b, out);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalFailure& e) {
    err << "error: " << e.what() << "\n";
    return kFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace certsdp::cli
