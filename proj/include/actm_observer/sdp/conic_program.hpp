#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "actm_observer/errors.hpp"

namespace actm::sdp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Scaled lower-triangular vectorization of a symmetric matrix, column-major:
/// diagonal entries as-is, off-diagonal entries times sqrt(2), so that
/// <A, B> = svec(A)' svec(B).
inline Eigen::VectorXd svec(const Eigen::MatrixXd& S) {
  const Eigen::Index k = S.rows();
  Eigen::VectorXd v(k * (k + 1) / 2);
  Eigen::Index pos = 0;
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = j; i < k; ++i)
      v(pos++) = i == j ? S(i, j) : std::sqrt(2.0) * S(i, j);
  return v;
}

/// Inverse of svec.
inline Eigen::MatrixXd smat(const Eigen::VectorXd& v) {
  const auto k = static_cast<Eigen::Index>(std::lround((std::sqrt(8.0 * v.size() + 1.0) - 1.0) / 2.0));
  if (k * (k + 1) / 2 != v.size()) throw ModelError("smat: length is not triangular");
  Eigen::MatrixXd S(k, k);
  Eigen::Index pos = 0;
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = j; i < k; ++i) {
      const double value = i == j ? v(pos) : v(pos) / std::sqrt(2.0);
      S(i, j) = S(j, i) = value;
      ++pos;
    }
  return S;
}

/// Lower-triangular coordinate of one symmetric coefficient.
struct Entry {
  int row;
  int col;
  double value;
};

/// One symmetric LMI block: S(y) = sum_i y_i F_i - G must be PSD.
struct ConicBlock {
  int size = 0;
  Eigen::MatrixXd G;
  // (variable index, lower-triangular entries of F_i); only variables that
  // appear in this block, in increasing index order.
  std::vector<std::pair<int, std::vector<Entry>>> terms;
  std::string label;
};

/// minimize c'y  subject to  S_b(y) = sum_i y_i F_{b,i} - G_b  PSD for every b.
///
/// The paired multiplier problem is maximize sum_b <G_b, X_b> subject to
/// sum_b <F_{b,i}, X_b> = c_i, X_b PSD.
struct ConicProgram {
  int num_variables = 0;
  Eigen::VectorXd c;
  std::vector<ConicBlock> blocks;

  Eigen::MatrixXd slack(std::size_t b, const Eigen::VectorXd& y) const {
    const auto& blk = blocks.at(b);
    Eigen::MatrixXd S = -blk.G;
    for (const auto& [var, entries] : blk.terms)
      for (const auto& e : entries) {
        S(e.row, e.col) += y(var) * e.value;
        if (e.row != e.col) S(e.col, e.row) += y(var) * e.value;
      }
    return S;
  }

  /// Columns are svec(F_{b,i}) for every variable i.
  SparseMatrix svec_coefficients(std::size_t b) const {
    const auto& blk = blocks.at(b);
    std::vector<Triplet> trips;
    for (const auto& [var, entries] : blk.terms)
      for (const auto& e : entries) {
        const double scale = e.row == e.col ? 1.0 : std::sqrt(2.0);
        trips.emplace_back(svec_index(blk.size, e.row, e.col), var, scale * e.value);
      }
    SparseMatrix F(blk.size * (blk.size + 1) / 2, num_variables);
    F.setFromTriplets(trips.begin(), trips.end());
    return F;
  }

  Eigen::VectorXd svec_constant(std::size_t b) const { return svec(blocks.at(b).G); }

  static Eigen::Index svec_index(int k, int row, int col) {
    // column-major lower triangle: column j starts after sum_{t<j} (k - t)
    return static_cast<Eigen::Index>(col) * k - static_cast<Eigen::Index>(col) * (col - 1) / 2 +
           (row - col);
  }
};

/// Matrix-valued affine expression M(y) = M0 + sum_i y_i M_i with sparse
/// coefficients, used to write LMIs blockwise before lowering them to a
/// ConicProgram.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(Eigen::Index rows, Eigen::Index cols)
      : constant_(Eigen::MatrixXd::Zero(rows, cols)) {}
  explicit AffineMatrix(Eigen::MatrixXd constant) : constant_(std::move(constant)) {}

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  const Eigen::MatrixXd& constant() const { return constant_; }
  const std::map<int, SparseMatrix>& terms() const { return terms_; }

  void add_term(int var, const SparseMatrix& coeff) {
    auto [it, inserted] = terms_.try_emplace(var, coeff);
    if (!inserted) it->second += coeff;
  }

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd out = constant_;
    for (const auto& [var, coeff] : terms_) out += y(var) * Eigen::MatrixXd(coeff);
    return out;
  }

  AffineMatrix transpose() const {
    AffineMatrix out(Eigen::MatrixXd(constant_.transpose()));
    for (const auto& [var, coeff] : terms_) out.terms_.emplace(var, SparseMatrix(coeff.transpose()));
    return out;
  }

  AffineMatrix operator-() const { return *this * -1.0; }

  friend AffineMatrix operator*(const AffineMatrix& m, double s) {
    AffineMatrix out(Eigen::MatrixXd(m.constant_ * s));
    for (const auto& [var, coeff] : m.terms_) out.terms_.emplace(var, SparseMatrix(coeff * s));
    return out;
  }
  friend AffineMatrix operator*(double s, const AffineMatrix& m) { return m * s; }

  friend AffineMatrix operator*(const AffineMatrix& m, const Eigen::MatrixXd& right) {
    const SparseMatrix rs = right.sparseView();
    AffineMatrix out(Eigen::MatrixXd(m.constant_ * right));
    for (const auto& [var, coeff] : m.terms_) {
      SparseMatrix prod = (coeff * rs).pruned();
      if (prod.nonZeros() > 0) out.terms_.emplace(var, std::move(prod));
    }
    return out;
  }
  friend AffineMatrix operator*(const Eigen::MatrixXd& left, const AffineMatrix& m) {
    const SparseMatrix ls = left.sparseView();
    AffineMatrix out(Eigen::MatrixXd(left * m.constant_));
    for (const auto& [var, coeff] : m.terms_) {
      SparseMatrix prod = (ls * coeff).pruned();
      if (prod.nonZeros() > 0) out.terms_.emplace(var, std::move(prod));
    }
    return out;
  }

  friend AffineMatrix operator+(const AffineMatrix& a, const AffineMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw ModelError("AffineMatrix sum: dimension mismatch");
    AffineMatrix out(Eigen::MatrixXd(a.constant_ + b.constant_));
    out.terms_ = a.terms_;
    for (const auto& [var, coeff] : b.terms_) out.add_term(var, coeff);
    return out;
  }
  friend AffineMatrix operator-(const AffineMatrix& a, const AffineMatrix& b) { return a + (-b); }

  /// Assembles a block matrix from a grid of expressions. Every row of the
  /// grid must agree on heights and every column on widths.
  static AffineMatrix blocks(const std::vector<std::vector<AffineMatrix>>& grid) {
    if (grid.empty() || grid.front().empty()) throw ModelError("empty block grid");
    std::vector<Eigen::Index> heights, widths;
    for (const auto& row : grid) heights.push_back(row.front().rows());
    for (const auto& cell : grid.front()) widths.push_back(cell.cols());
    Eigen::Index total_rows = 0, total_cols = 0;
    for (auto h : heights) total_rows += h;
    for (auto w : widths) total_cols += w;

    AffineMatrix out(total_rows, total_cols);
    std::map<int, std::vector<Triplet>> trips;
    Eigen::Index r0 = 0;
    for (std::size_t bi = 0; bi < grid.size(); ++bi) {
      if (grid[bi].size() != widths.size()) throw ModelError("ragged block grid");
      Eigen::Index c0 = 0;
      for (std::size_t bj = 0; bj < grid[bi].size(); ++bj) {
        const auto& cell = grid[bi][bj];
        if (cell.rows() != heights[bi] || cell.cols() != widths[bj])
          throw ModelError("block grid: inconsistent cell dimensions");
        out.constant_.block(r0, c0, cell.rows(), cell.cols()) = cell.constant_;
        for (const auto& [var, coeff] : cell.terms_) {
          auto& list = trips[var];
          for (int k = 0; k < coeff.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(coeff, k); it; ++it)
              list.emplace_back(static_cast<int>(r0 + it.row()), static_cast<int>(c0 + it.col()),
                                it.value());
        }
        c0 += widths[bj];
      }
      r0 += heights[bi];
    }
    for (auto& [var, list] : trips) {
      SparseMatrix m(total_rows, total_cols);
      m.setFromTriplets(list.begin(), list.end());
      out.terms_.emplace(var, std::move(m));
    }
    return out;
  }

 private:
  Eigen::MatrixXd constant_;
  std::map<int, SparseMatrix> terms_;
};

/// Allocates decision variables and hands out expressions referring to them.
class VariableRegistry {
 public:
  int count() const { return count_; }

  int scalar() { return count_++; }

  /// k x k symmetric matrix variable; one variable per lower-triangular entry.
  AffineMatrix symmetric(int k) {
    AffineMatrix out(k, k);
    for (int j = 0; j < k; ++j)
      for (int i = j; i < k; ++i) {
        std::vector<Triplet> t{{i, j, 1.0}};
        if (i != j) t.emplace_back(j, i, 1.0);
        SparseMatrix e(k, k);
        e.setFromTriplets(t.begin(), t.end());
        out.add_term(count_++, e);
      }
    return out;
  }

  /// rows x cols unstructured matrix variable, column-major.
  AffineMatrix full(int rows, int cols) {
    AffineMatrix out(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) {
        SparseMatrix e(rows, cols);
        e.insert(i, j) = 1.0;
        out.add_term(count_++, e);
      }
    return out;
  }

  /// var * I_k.
  static AffineMatrix scaled_identity(int var, int k) {
    AffineMatrix out(k, k);
    SparseMatrix eye(k, k);
    eye.setIdentity();
    out.add_term(var, eye);
    return out;
  }

 private:
  int count_ = 0;
};

/// Lowers `expr` PSD (or NSD when `negate`) into a conic block. The expression
/// must be square; its coefficients are symmetrized.
inline ConicBlock make_block(const AffineMatrix& expr, bool negate, std::string label) {
  if (expr.rows() != expr.cols()) throw ModelError("LMI block must be square");
  const double sign = negate ? -1.0 : 1.0;
  ConicBlock blk;
  blk.size = static_cast<int>(expr.rows());
  blk.label = std::move(label);
  const Eigen::MatrixXd c0 = sign * expr.constant();
  blk.G = -0.5 * (c0 + c0.transpose());
  for (const auto& [var, coeff] : expr.terms()) {
    const SparseMatrix sym = 0.5 * sign * (coeff + SparseMatrix(coeff.transpose()));
    std::vector<Entry> entries;
    for (int k = 0; k < sym.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(sym, k); it; ++it)
        if (it.row() >= it.col() && it.value() != 0.0)
          entries.push_back({static_cast<int>(it.row()), static_cast<int>(it.col()), it.value()});
    if (!entries.empty()) blk.terms.emplace_back(var, std::move(entries));
  }
  return blk;
}

}  // namespace actm::sdp
