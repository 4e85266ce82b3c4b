#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "actm_observer/sdp/conic_program.hpp"

namespace actm::sdp {

struct SdpOptions {
  int max_iterations = 120;
  // relative duality gap and relative primal/dual residuals
  double tolerance = 1e-9;
  // Looser gap/primal level accepted when the iterates stall.
  double stall_tolerance = 1e-6;
  // Iterations without improvement before a stalled run stops early.
  int stall_iterations = 8;
  // A multiplier X with <G, X> = 1 and ||A(X)|| = r shows that every feasible
  // y has ||y|| >= 1/r. Below this r the LMI is reported infeasible.
  double infeasibility_tolerance = 1e-6;
  double step_fraction = 0.95;
};

enum class SdpStatus { kOptimal, kNearOptimal, kInfeasible, kMaxIterations, kNumericalFailure };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal: return "optimal";
    case SdpStatus::kNearOptimal: return "near_optimal";
    case SdpStatus::kInfeasible: return "infeasible";
    case SdpStatus::kMaxIterations: return "max_iterations";
    case SdpStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

struct SdpSolution {
  SdpStatus status = SdpStatus::kNumericalFailure;
  Eigen::VectorXd y;
  std::vector<Eigen::MatrixXd> X;  // multipliers
  std::vector<Eigen::MatrixXd> Z;  // slacks
  double objective = 0.0;          // c'y
  double multiplier_objective = 0.0;
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double certificate_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double seconds = 0.0;
};

/// Infeasible-start primal-dual path-following method with the HKM search
/// direction and Mehrotra predictor-corrector steps.
///
/// The Schur complement M_ij = tr(F_i X F_j Z^-1) is assembled entrywise from
/// the sparse coefficient lists, so cost scales with the product of nonzero
/// counts rather than block size.
class InteriorPointSolver {
 public:
  explicit InteriorPointSolver(SdpOptions opts = {}) : opts_(opts) {}

  SdpSolution solve(const ConicProgram& prog) const {
    const auto t0 = std::chrono::steady_clock::now();
    const int m = prog.num_variables;
    if (prog.c.size() != m) throw ModelError("conic program: objective size mismatch");
    const std::size_t nb = prog.blocks.size();
    std::vector<FlatBlock> flat;
    flat.reserve(nb);
    for (const auto& blk : prog.blocks) flat.push_back(flatten(blk));

    SdpSolution sol;
    std::vector<Eigen::MatrixXd> X(nb), Z(nb);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    initial_point(prog, X, Z);

    double total_dim = 0.0;
    for (const auto& blk : prog.blocks) total_dim += blk.size;
    const double c_norm = prog.c.norm();
    double g_norm = 0.0;
    for (const auto& blk : prog.blocks) g_norm = std::max(g_norm, blk.G.norm());

    // Best dual-feasible iterate so far, used when the method stalls.
    struct Snapshot {
      double score = std::numeric_limits<double>::infinity();
      Eigen::VectorXd y;
      std::vector<Eigen::MatrixXd> X, Z;
      double objective = 0, multiplier_objective = 0, gap = 0, pres = 0, dres = 0;
      int iteration = 0;
    } best;

    auto finish = [&](SdpStatus status, int iters) {
      if ((status == SdpStatus::kMaxIterations || status == SdpStatus::kNumericalFailure) &&
          std::max(best.gap, best.pres) < opts_.stall_tolerance &&
          best.dres < opts_.tolerance) {
        status = SdpStatus::kNearOptimal;
        y = best.y;
        X = best.X;
        Z = best.Z;
        sol.objective = best.objective;
        sol.multiplier_objective = best.multiplier_objective;
        sol.relative_gap = best.gap;
        sol.primal_residual = best.pres;
        sol.dual_residual = best.dres;
      }
      sol.status = status;
      sol.y = y;
      sol.X = X;
      sol.Z = Z;
      sol.iterations = iters;
      sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return sol;
    };

    for (int iter = 0; iter <= opts_.max_iterations; ++iter) {
      std::vector<Eigen::MatrixXd> Rd = adjoint(prog, y);
      for (std::size_t b = 0; b < nb; ++b) Rd[b] -= Z[b] + prog.blocks[b].G;
      const Eigen::VectorXd AX = apply(prog, X);
      const Eigen::VectorXd rp = prog.c - AX;

      double dobj = 0.0, xz = 0.0, rd_norm = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        dobj += (prog.blocks[b].G.array() * X[b].array()).sum();
        xz += (X[b].array() * Z[b].array()).sum();
        rd_norm = std::max(rd_norm, Rd[b].norm());
      }
      const double pobj = prog.c.dot(y);
      sol.objective = pobj;
      sol.multiplier_objective = dobj;
      sol.relative_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      sol.primal_residual = rp.norm() / (1.0 + c_norm);
      sol.dual_residual = rd_norm / (1.0 + g_norm);
      if (dobj > 0.0) sol.certificate_residual = std::min(sol.certificate_residual, AX.norm() / dobj);
      if (!std::isfinite(pobj) || !std::isfinite(dobj) || !std::isfinite(rd_norm))
        return finish(SdpStatus::kNumericalFailure, iter);
      if (sol.dual_residual < opts_.tolerance &&
          std::max(sol.relative_gap, sol.primal_residual) < best.score) {
        best.score = std::max(sol.relative_gap, sol.primal_residual);
        best.y = y;
        best.X = X;
        best.Z = Z;
        best.objective = pobj;
        best.multiplier_objective = dobj;
        best.gap = sol.relative_gap;
        best.pres = sol.primal_residual;
        best.dres = sol.dual_residual;
        best.iteration = iter;
      }

      if (sol.relative_gap < opts_.tolerance && sol.primal_residual < opts_.tolerance &&
          sol.dual_residual < opts_.tolerance)
        return finish(SdpStatus::kOptimal, iter);
      if (sol.certificate_residual < opts_.infeasibility_tolerance)
        return finish(SdpStatus::kInfeasible, iter);
      if (iter == opts_.max_iterations) break;
      if (best.score < opts_.stall_tolerance && iter - best.iteration >= opts_.stall_iterations)
        return finish(SdpStatus::kMaxIterations, iter);

      const double mu = xz / total_dim;
      std::vector<Eigen::MatrixXd> Zinv(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        Eigen::LLT<Eigen::MatrixXd> llt(Z[b]);
        if (llt.info() != Eigen::Success) return finish(SdpStatus::kNumericalFailure, iter);
        Zinv[b] = llt.solve(Eigen::MatrixXd::Identity(Z[b].rows(), Z[b].cols()));
        Zinv[b] = 0.5 * (Zinv[b] + Zinv[b].transpose()).eval();
      }

      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
      for (std::size_t b = 0; b < nb; ++b) accumulate_schur(flat[b], X[b], Zinv[b], M);
      Eigen::LDLT<Eigen::MatrixXd> schur(M);
      if (schur.info() != Eigen::Success) return finish(SdpStatus::kNumericalFailure, iter);

      // Predictor (affine scaling), then corrector with second-order term.
      Direction pred = direction(prog, schur, X, Zinv, Rd, 0.0, nullptr);
      double ap = max_step(X, pred.dX), ad = max_step(Z, pred.dZ);
      ap = std::min(1.0, opts_.step_fraction * ap);
      ad = std::min(1.0, opts_.step_fraction * ad);
      double xz_aff = 0.0;
      for (std::size_t b = 0; b < nb; ++b)
        xz_aff += ((X[b] + ap * pred.dX[b]).array() * (Z[b] + ad * pred.dZ[b]).array()).sum();
      const double sigma = std::min(1.0, std::pow(std::max(xz_aff, 0.0) / xz, 3.0));

      std::vector<Eigen::MatrixXd> second(nb);
      for (std::size_t b = 0; b < nb; ++b) second[b] = pred.dX[b] * pred.dZ[b];
      Direction corr = direction(prog, schur, X, Zinv, Rd, sigma * mu, &second);
      ap = std::min(1.0, opts_.step_fraction * max_step(X, corr.dX));
      ad = std::min(1.0, opts_.step_fraction * max_step(Z, corr.dZ));

      for (std::size_t b = 0; b < nb; ++b) {
        X[b] += ap * corr.dX[b];
        Z[b] += ad * corr.dZ[b];
        X[b] = 0.5 * (X[b] + X[b].transpose()).eval();
        Z[b] = 0.5 * (Z[b] + Z[b].transpose()).eval();
      }
      y += ad * corr.dy;
    }
    return finish(SdpStatus::kMaxIterations, opts_.max_iterations);
  }

  /// <F_i, X> for every variable.
  static Eigen::VectorXd apply(const ConicProgram& prog, const std::vector<Eigen::MatrixXd>& X) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(prog.num_variables);
    for (std::size_t b = 0; b < prog.blocks.size(); ++b)
      for (const auto& [var, entries] : prog.blocks[b].terms) {
        double s = 0.0;
        for (const auto& e : entries)
          s += e.row == e.col ? e.value * X[b](e.row, e.col)
                              : e.value * (X[b](e.row, e.col) + X[b](e.col, e.row));
        out(var) += s;
      }
    return out;
  }

  /// sum_i y_i F_i per block.
  static std::vector<Eigen::MatrixXd> adjoint(const ConicProgram& prog, const Eigen::VectorXd& y) {
    std::vector<Eigen::MatrixXd> out;
    for (const auto& blk : prog.blocks) {
      Eigen::MatrixXd S = Eigen::MatrixXd::Zero(blk.size, blk.size);
      for (const auto& [var, entries] : blk.terms)
        for (const auto& e : entries) {
          S(e.row, e.col) += y(var) * e.value;
          if (e.row != e.col) S(e.col, e.row) += y(var) * e.value;
        }
      out.push_back(std::move(S));
    }
    return out;
  }

 private:
  struct FlatBlock {
    std::vector<int> vars;
    std::vector<int> start;  // size vars+1, offsets into rows/cols/vals
    std::vector<int> rows, cols;
    std::vector<double> vals;
  };

  struct Direction {
    Eigen::VectorXd dy;
    std::vector<Eigen::MatrixXd> dX, dZ;
  };

  static FlatBlock flatten(const ConicBlock& blk) {
    FlatBlock f;
    for (const auto& [var, entries] : blk.terms) {
      f.vars.push_back(var);
      f.start.push_back(static_cast<int>(f.vals.size()));
      for (const auto& e : entries) {
        f.rows.push_back(e.row);
        f.cols.push_back(e.col);
        f.vals.push_back(e.value);
        if (e.row != e.col) {
          f.rows.push_back(e.col);
          f.cols.push_back(e.row);
          f.vals.push_back(e.value);
        }
      }
    }
    f.start.push_back(static_cast<int>(f.vals.size()));
    return f;
  }

  // M_ij += sum over entries (r,c,v) of F_i and (r',c',v') of F_j of
  //         v v' X(c, r') Zinv(c', r)
  static void accumulate_schur(const FlatBlock& f, const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Zinv, Eigen::MatrixXd& M) {
    const std::size_t nv = f.vars.size();
    for (std::size_t a = 0; a < nv; ++a) {
      const int i = f.vars[a];
      for (std::size_t b = a; b < nv; ++b) {
        const int j = f.vars[b];
        double s = 0.0;
        for (int e = f.start[a]; e < f.start[a + 1]; ++e) {
          const int r = f.rows[e], c = f.cols[e];
          const double v = f.vals[e];
          for (int g = f.start[b]; g < f.start[b + 1]; ++g)
            s += v * f.vals[g] * X(c, f.rows[g]) * Zinv(f.cols[g], r);
        }
        M(i, j) += s;
        if (i != j) M(j, i) += s;
      }
    }
  }

  Direction direction(const ConicProgram& prog, const Eigen::LDLT<Eigen::MatrixXd>& schur,
                      const std::vector<Eigen::MatrixXd>& X,
                      const std::vector<Eigen::MatrixXd>& Zinv,
                      const std::vector<Eigen::MatrixXd>& Rd, double target,
                      const std::vector<Eigen::MatrixXd>* second) const {
    const std::size_t nb = X.size();
    std::vector<Eigen::MatrixXd> W(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      Eigen::MatrixXd K = X[b] * Rd[b];
      if (second) K += (*second)[b];
      W[b] = target * Zinv[b] - K * Zinv[b];
    }
    Direction d;
    d.dy = schur.solve(apply(prog, W) - prog.c);
    d.dZ = adjoint(prog, d.dy);
    d.dX.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      d.dZ[b] += Rd[b];
      Eigen::MatrixXd K = X[b] * d.dZ[b];
      if (second) K += (*second)[b];
      Eigen::MatrixXd dX = target * Zinv[b] - X[b] - K * Zinv[b];
      d.dX[b] = 0.5 * (dX + dX.transpose());
    }
    return d;
  }

  // Largest t with S + t dS PSD (infinity if dS does not decrease S).
  static double max_step(const std::vector<Eigen::MatrixXd>& S,
                         const std::vector<Eigen::MatrixXd>& dS) {
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < S.size(); ++b) {
      Eigen::LLT<Eigen::MatrixXd> llt(S[b]);
      if (llt.info() != Eigen::Success) return 0.0;
      const Eigen::MatrixXd Linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(S[b].rows(), S[b].cols()));
      Eigen::MatrixXd W = Linv * dS[b] * Linv.transpose();
      W = 0.5 * (W + W.transpose()).eval();
      const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(W, Eigen::EigenvaluesOnly)
                              .eigenvalues()
                              .minCoeff();
      if (lmin < 0.0) step = std::min(step, -1.0 / lmin);
    }
    return step;
  }

  static void initial_point(const ConicProgram& prog, std::vector<Eigen::MatrixXd>& X,
                            std::vector<Eigen::MatrixXd>& Z) {
    // Scaled identities in the style of CSDP's default start.
    std::vector<double> fnorm(prog.num_variables, 0.0);
    for (const auto& blk : prog.blocks)
      for (const auto& [var, entries] : blk.terms) {
        double s = 0.0;
        for (const auto& e : entries) s += (e.row == e.col ? 1.0 : 2.0) * e.value * e.value;
        fnorm[var] += s;
      }
    double x_scale = 0.0, f_max = 0.0;
    for (int i = 0; i < prog.num_variables; ++i) {
      const double nrm = std::sqrt(fnorm[i]);
      f_max = std::max(f_max, nrm);
      x_scale = std::max(x_scale, (1.0 + std::abs(prog.c(i))) / (1.0 + nrm));
    }
    for (std::size_t b = 0; b < prog.blocks.size(); ++b) {
      const auto& blk = prog.blocks[b];
      const double k = blk.size;
      const double alpha = 10.0 * k * x_scale;
      const double beta = 10.0 * (1.0 + std::max(f_max, blk.G.norm())) / std::sqrt(k);
      X[b] = alpha * Eigen::MatrixXd::Identity(blk.size, blk.size);
      Z[b] = beta * Eigen::MatrixXd::Identity(blk.size, blk.size);
    }
  }

  SdpOptions opts_;
};

}  // namespace actm::sdp
