#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "certsdp/common.hpp"
#include "certsdp/instance_gen.hpp"
#include "certsdp/qmp_model.hpp"

namespace certsdp {

/// Malformed or incompatible instance/solution file.
class FormatError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kFormatVersion = 1;

namespace io_detail {

using nlohmann::json;

inline json flat(const Matrix& M) {
  json a = json::array();
  for (Index r = 0; r < M.rows(); ++r) {
    for (Index c = 0; c < M.cols(); ++c) a.push_back(M(r, c));
  }
  return a;
}

inline json flat(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(where + ": missing key '" + key + "'");
  return *it;
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw FormatError(where + ": expected a number");
  return j.get<double>();
}

inline Index integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw FormatError(where + ": expected an integer");
  return j.get<Index>();
}

inline Matrix matrix(const json& j, Index rows, Index cols, const std::string& where) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows * cols) {
    throw FormatError(where + ": expected an array of " + std::to_string(rows * cols) + " numbers");
  }
  Matrix M(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      M(r, c) = number(j[static_cast<std::size_t>(r * cols + c)], where);
    }
  }
  return M;
}

inline Vector vector(const json& j, Index n, const std::string& where) {
  if (!j.is_array() || static_cast<Index>(j.size()) != n) {
    throw FormatError(where + ": expected an array of " + std::to_string(n) + " numbers");
  }
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = number(j[static_cast<std::size_t>(i)], where);
  return v;
}

inline json sparse(const SparseSymMatrix& S) {
  json rows = json::array(), cols = json::array(), vals = json::array();
  for (std::size_t e = 0; e < S.stored(); ++e) {
    rows.push_back(S.rows()[e]);
    cols.push_back(S.cols()[e]);
    vals.push_back(S.values()[e]);
  }
  return {{"rows", rows}, {"cols", cols}, {"vals", vals}};
}

inline SparseSymMatrix sparse(const json& j, Index dim, const std::string& where) {
  const json& rows = field(j, "rows", where);
  const json& cols = field(j, "cols", where);
  const json& vals = field(j, "vals", where);
  if (!rows.is_array() || !cols.is_array() || !vals.is_array() || rows.size() != cols.size() ||
      rows.size() != vals.size()) {
    throw FormatError(where + ": rows, cols, vals must be arrays of equal length");
  }
  std::vector<SymEntry> entries;
  entries.reserve(rows.size());
  for (std::size_t e = 0; e < rows.size(); ++e) {
    entries.push_back({integer(rows[e], where + ".rows"), integer(cols[e], where + ".cols"),
                       number(vals[e], where + ".vals")});
  }
  try {
    return SparseSymMatrix(dim, std::move(entries));
  } catch (const InvalidInput& ex) {
    throw FormatError(where + ": " + ex.what());
  }
}

inline json term(const QmpTerm& t) { return {{"A", sparse(t.A)}, {"B", flat(t.B)}, {"c", t.c}}; }

inline QmpTerm term(const json& j, Index nk, Index k, const std::string& where) {
  QmpTerm t;
  t.A = sparse(field(j, "A", where), nk, where + ".A");
  t.B = matrix(field(j, "B", where), nk, k, where + ".B");
  t.c = number(field(j, "c", where), where + ".c");
  return t;
}

inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& ex) {
    // ex.what() carries line and column.
    throw FormatError(source + ": parse error at byte " + std::to_string(ex.byte) + ": " + ex.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace io_detail

inline nlohmann::json instance_to_json(const QmpData& data, const GroundTruth* gt = nullptr) {
  using io_detail::flat;
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["n_minus_k"] = data.n_minus_k;
  j["k"] = data.k;
  j["m"] = data.m();
  j["objective"] = io_detail::term(data.objective);
  nlohmann::json cons = nlohmann::json::array();
  for (const auto& t : data.constraints) cons.push_back(io_detail::term(t));
  j["constraints"] = cons;
  if (gt != nullptr) {
    j["ground_truth"] = {{"gamma_star", flat(gt->gamma_star)}, {"X_star", flat(gt->X_star)},
                         {"T_star", flat(gt->T_star)},        {"opt", gt->opt},
                         {"mu_star", gt->mu_star}};
  }
  return j;
}

struct LoadedInstance {
  QmpData data;
  std::optional<GroundTruth> ground_truth;
};

inline LoadedInstance instance_from_json(const nlohmann::json& j) {
  using namespace io_detail;
  const Index version = integer(field(j, "format_version", "instance"), "format_version");
  if (version != kFormatVersion) {
    throw FormatError("instance: unsupported format_version " + std::to_string(version) + " (expected " +
                      std::to_string(kFormatVersion) + ")");
  }
  LoadedInstance out;
  QmpData& d = out.data;
  d.n_minus_k = integer(field(j, "n_minus_k", "instance"), "n_minus_k");
  d.k = integer(field(j, "k", "instance"), "k");
  const Index m = integer(field(j, "m", "instance"), "m");
  if (d.n_minus_k <= 0 || d.k <= 0 || m < 0) throw FormatError("instance: sizes must be positive");
  d.objective = term(field(j, "objective", "instance"), d.n_minus_k, d.k, "objective");
  const json& cons = field(j, "constraints", "instance");
  if (!cons.is_array() || static_cast<Index>(cons.size()) != m) {
    throw FormatError("instance: constraints must be an array of length m");
  }
  for (std::size_t i = 0; i < cons.size(); ++i) {
    d.constraints.push_back(term(cons[i], d.n_minus_k, d.k, "constraints[" + std::to_string(i) + "]"));
  }
  if (auto it = j.find("ground_truth"); it != j.end() && !it->is_null()) {
    const json& g = *it;
    GroundTruth gt;
    gt.gamma_star = vector(field(g, "gamma_star", "ground_truth"), m, "ground_truth.gamma_star");
    gt.X_star = matrix(field(g, "X_star", "ground_truth"), d.n_minus_k, d.k, "ground_truth.X_star");
    gt.T_star = matrix(field(g, "T_star", "ground_truth"), d.k, d.k, "ground_truth.T_star");
    gt.opt = number(field(g, "opt", "ground_truth"), "ground_truth.opt");
    gt.mu_star = number(field(g, "mu_star", "ground_truth"), "ground_truth.mu_star");
    out.ground_truth = std::move(gt);
  }
  return out;
}

inline void save_instance(const std::string& path, const QmpData& data, const GroundTruth* gt = nullptr) {
  io_detail::write_file(path, instance_to_json(data, gt).dump() + "\n");
}

inline LoadedInstance load_instance(const std::string& path) {
  return instance_from_json(io_detail::parse_text(io_detail::read_file(path), path));
}

struct SolutionFile {
  Matrix X;
  Vector gamma;
  double objective = 0.0;
  double residual = 0.0;
  double max_abs_q = 0.0;
  double time_sec = 0.0;
  long long outer_iters = 0;
  long long inner_iters = 0;
  std::optional<double> dist_sq;
  std::string status;
};

inline nlohmann::json solution_to_json(const SolutionFile& s) {
  nlohmann::json metrics = {{"objective", s.objective},     {"residual", s.residual},
                            {"max_abs_q", s.max_abs_q},     {"time_sec", s.time_sec},
                            {"outer_iters", s.outer_iters}, {"inner_iters", s.inner_iters}};
  if (s.dist_sq) metrics["dist_sq"] = *s.dist_sq;
  return {{"X", io_detail::flat(s.X)},
          {"X_shape", {s.X.rows(), s.X.cols()}},
          {"gamma", io_detail::flat(s.gamma)},
          {"metrics", metrics},
          {"status", s.status}};
}

inline SolutionFile solution_from_json(const nlohmann::json& j) {
  using namespace io_detail;
  SolutionFile s;
  const json& shape = field(j, "X_shape", "solution");
  if (!shape.is_array() || shape.size() != 2) throw FormatError("solution: X_shape must be [rows, cols]");
  const Index rows = integer(shape[0], "X_shape");
  const Index cols = integer(shape[1], "X_shape");
  s.X = matrix(field(j, "X", "solution"), rows, cols, "solution.X");
  const json& g = field(j, "gamma", "solution");
  if (!g.is_array()) throw FormatError("solution.gamma: expected an array");
  s.gamma = vector(g, static_cast<Index>(g.size()), "solution.gamma");
  const json& m = field(j, "metrics", "solution");
  s.objective = number(field(m, "objective", "metrics"), "metrics.objective");
  s.residual = number(field(m, "residual", "metrics"), "metrics.residual");
  s.max_abs_q = number(field(m, "max_abs_q", "metrics"), "metrics.max_abs_q");
  s.time_sec = number(field(m, "time_sec", "metrics"), "metrics.time_sec");
  s.outer_iters = integer(field(m, "outer_iters", "metrics"), "metrics.outer_iters");
  s.inner_iters = integer(field(m, "inner_iters", "metrics"), "metrics.inner_iters");
  if (auto it = m.find("dist_sq"); it != m.end()) s.dist_sq = number(*it, "metrics.dist_sq");
  const json& st = field(j, "status", "solution");
  if (!st.is_string()) throw FormatError("solution.status: expected a string");
  s.status = st.get<std::string>();
  return s;
}

inline void save_solution(const std::string& path, const SolutionFile& s) {
  io_detail::write_file(path, solution_to_json(s).dump() + "\n");
}

inline SolutionFile load_solution(const std::string& path) {
  return solution_from_json(io_detail::parse_text(io_detail::read_file(path), path));
}

}  // namespace certsdp
