#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "certsdp/common.hpp"

namespace certsdp {

struct SymEntry {
  Index row;
  Index col;
  double value;
};

/// Symmetric sparse matrix stored as its upper triangle in coordinate form.
/// Entry (r, c, v) with r <= c stands for S(r, c) = S(c, r) = v.
/// Immutable once built; entries are kept sorted by (row, col).
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;

  /// Throws InvalidInput on out-of-range indices, a lower-triangle entry,
  /// a non-finite value, or a repeated (row, col) pair.
  SparseSymMatrix(Index dim, std::vector<SymEntry> entries) : dim_(dim) {
    if (dim <= 0) throw InvalidInput("SparseSymMatrix: dim must be positive");
    std::sort(entries.begin(), entries.end(), [](const SymEntry& a, const SymEntry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    rows_.reserve(entries.size());
    cols_.reserve(entries.size());
    vals_.reserve(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const auto& [r, c, v] = entries[e];
      if (r < 0 || c < 0 || r >= dim || c >= dim) {
        throw InvalidInput("SparseSymMatrix: index out of range (" + std::to_string(r) + ", " +
                           std::to_string(c) + ")");
      }
      if (r > c) throw InvalidInput("SparseSymMatrix: entries must satisfy row <= col");
      if (!std::isfinite(v)) throw InvalidInput("SparseSymMatrix: non-finite value");
      if (e > 0 && entries[e - 1].row == r && entries[e - 1].col == c) {
        throw InvalidInput("SparseSymMatrix: duplicate entry (" + std::to_string(r) + ", " +
                           std::to_string(c) + ")");
      }
      rows_.push_back(r);
      cols_.push_back(c);
      vals_.push_back(v);
    }
  }

  static SparseSymMatrix identity(Index dim) {
    std::vector<SymEntry> diag;
    diag.reserve(static_cast<std::size_t>(dim));
    for (Index i = 0; i < dim; ++i) diag.push_back({i, i, 1.0});
    return SparseSymMatrix(dim, std::move(diag));
  }

  static SparseSymMatrix zero(Index dim) { return SparseSymMatrix(dim, {}); }

  Index dim() const { return dim_; }
  /// Number of stored (upper-triangle) entries.
  std::size_t stored() const { return vals_.size(); }
  /// Number of nonzero positions in the full symmetric matrix.
  std::size_t full_nnz() const {
    std::size_t n = 0;
    for (std::size_t e = 0; e < vals_.size(); ++e) n += (rows_[e] == cols_[e]) ? 1 : 2;
    return n;
  }

  const std::vector<Index>& rows() const { return rows_; }
  const std::vector<Index>& cols() const { return cols_; }
  const std::vector<double>& values() const { return vals_; }

  SymEntry entry(std::size_t e) const { return {rows_[e], cols_[e], vals_[e]}; }

  SparseSymMatrix scaled(double s) const {
    SparseSymMatrix out = *this;
    for (double& v : out.vals_) v *= s;
    return out;
  }

  Matrix to_dense() const {
    Matrix D = Matrix::Zero(dim_, dim_);
    for (std::size_t e = 0; e < vals_.size(); ++e) {
      D(rows_[e], cols_[e]) = vals_[e];
      D(cols_[e], rows_[e]) = vals_[e];
    }
    return D;
  }

  /// out += scale * S * V. Caller guarantees shapes.
  void multiply_add(Eigen::Ref<const Matrix> V, Eigen::Ref<Matrix> out, double scale = 1.0) const {
    for (Index j = 0; j < V.cols(); ++j) {
      multiply_add_column(V.col(j).data(), out.col(j).data(), scale);
    }
  }

 private:
  void multiply_add_column(const double* x, double* y, double scale) const {
    const std::size_t nnz = vals_.size();
    for (std::size_t e = 0; e < nnz; ++e) {
      const Index r = rows_[e];
      const Index c = cols_[e];
      const double v = scale * vals_[e];
      y[r] += v * x[c];
      if (r != c) y[c] += v * x[r];
    }
  }

  Index dim_ = 0;
  std::vector<Index> rows_;
  std::vector<Index> cols_;
  std::vector<double> vals_;
};

/// S * V, exploiting the implied symmetry.
inline Matrix spmv(const SparseSymMatrix& S, const Matrix& V) {
  require_dims(V.rows() == S.dim(), "spmv: V.rows() != S.dim()");
  Matrix out = Matrix::Zero(V.rows(), V.cols());
  S.multiply_add(V, out);
  return out;
}

inline Vector spmv(const SparseSymMatrix& S, const Vector& v) {
  require_dims(v.size() == S.dim(), "spmv: v.size() != S.dim()");
  Vector out = Vector::Zero(v.size());
  S.multiply_add(v, out);
  return out;
}

}  // namespace certsdp
