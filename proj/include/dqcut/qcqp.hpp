#pragma once

// Primal-dual interior-point method (Mehrotra predictor-corrector) for
// small dense convex programs
//
//   min  1/2 w'P0 w + c0'w + k0
//   s.t. G w <= h
//        1/2 w'P_j w + a_j'w + beta_j <= 0      (P_j PSD, dense or rank one)
//
// Slack form g(w) + s = 0, s >= 0, with multipliers lambda >= 0.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dqcut/errors.hpp"
#include "dqcut/linalg.hpp"

namespace dqcut {

/// 1/2 w'Pw + a'w + beta <= 0. A rank-one curvature is stored as
/// P = weight * u u'.
struct QuadraticConstraint {
  enum class Curvature { dense, rank_one };
  Curvature curvature = Curvature::dense;
  MatrixXd P;
  VectorXd u;
  double weight = 0.0;
  VectorXd a;
  double beta = 0.0;

  [[nodiscard]] double value(const VectorXd& w) const {
    if (curvature == Curvature::rank_one) {
      const double t = u.dot(w);
      return 0.5 * weight * t * t + a.dot(w) + beta;
    }
    return 0.5 * w.dot(P * w) + a.dot(w) + beta;
  }
  [[nodiscard]] VectorXd gradient(const VectorXd& w) const {
    if (curvature == Curvature::rank_one) return weight * u.dot(w) * u + a;
    return P * w + a;
  }
  void add_hessian(MatrixXd& H, double scale) const {
    if (curvature == Curvature::rank_one) {
      H.noalias() += (scale * weight) * (u * u.transpose());
    } else {
      H.noalias() += scale * P;
    }
  }
};

struct ConvexProgram {
  MatrixXd P0;
  VectorXd c0;
  double k0 = 0.0;
  MatrixXd G;  // rows of linear inequalities
  VectorXd h;
  std::vector<QuadraticConstraint> quad;

  [[nodiscard]] Eigen::Index dim() const { return c0.size(); }
  [[nodiscard]] Eigen::Index num_constraints() const {
    return G.rows() + static_cast<Eigen::Index>(quad.size());
  }
  [[nodiscard]] double objective(const VectorXd& w) const {
    return 0.5 * w.dot(P0 * w) + c0.dot(w) + k0;
  }
};

enum class IpmStatus { optimal, acceptable, max_iter, numerical };

inline const char* to_string(IpmStatus s) {
  switch (s) {
    case IpmStatus::optimal: return "optimal";
    case IpmStatus::acceptable: return "acceptable";
    case IpmStatus::max_iter: return "max_iter";
    case IpmStatus::numerical: return "numerical";
  }
  return "?";
}

struct IpmOptions {
  double tol = 1e-9;
  double acceptable_tol = 1e-6;
  int max_iter = 200;
  double step_fraction = 0.99;
};

struct IpmResult {
  IpmStatus status = IpmStatus::numerical;
  VectorXd w;
  VectorXd lambda_linear;  // multipliers of G w <= h
  VectorXd lambda_quad;    // multipliers of the quadratic constraints
  double objective = std::numeric_limits<double>::quiet_NaN();
  double lagrangian = std::numeric_limits<double>::quiet_NaN();  // f + lambda'g
  double dual_residual = 0.0;    // scaled, infinity norm
  double primal_residual = 0.0;  // max constraint violation, unscaled
  double complementarity = 0.0;  // scaled average s'lambda
  int iterations = 0;

  [[nodiscard]] bool usable() const {
    return status == IpmStatus::optimal || status == IpmStatus::acceptable;
  }
};

namespace detail {

struct ScaledProgram {
  const ConvexProgram& prog;
  double obj_scale = 1.0;
  VectorXd row_scale;  // linear rows then quadratic constraints

  [[nodiscard]] Eigen::Index nlin() const { return prog.G.rows(); }

  void constraints(const VectorXd& w, VectorXd& g, MatrixXd& J) const {
    const Eigen::Index nl = nlin();
    const Eigen::Index K = prog.num_constraints();
    g.resize(K);
    J.resize(K, prog.dim());
    if (nl > 0) {
      g.head(nl) = prog.G * w - prog.h;
      J.topRows(nl) = prog.G;
    }
    for (std::size_t j = 0; j < prog.quad.size(); ++j) {
      const auto r = nl + static_cast<Eigen::Index>(j);
      g(r) = prog.quad[j].value(w);
      J.row(r) = prog.quad[j].gradient(w).transpose();
    }
    g.array() *= row_scale.array();
    J = row_scale.asDiagonal() * J;
  }

  [[nodiscard]] MatrixXd hessian(const VectorXd& lambda) const {
    MatrixXd H = obj_scale * prog.P0;
    const Eigen::Index nl = nlin();
    for (std::size_t j = 0; j < prog.quad.size(); ++j) {
      const auto r = nl + static_cast<Eigen::Index>(j);
      prog.quad[j].add_hessian(H, lambda(r) * row_scale(r));
    }
    return H;
  }
};

inline double max_step(const VectorXd& v, const VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  }
  return a;
}

}  // namespace detail

/// Solves a convex program. The caller guarantees convexity; w0 is an
/// optional starting point (need not be feasible).
inline IpmResult solve_convex_program(const ConvexProgram& prog, const IpmOptions& opt = {},
                                      const std::optional<VectorXd>& w0 = std::nullopt) {
  const Eigen::Index N = prog.dim();
  const Eigen::Index K = prog.num_constraints();
  if (prog.P0.rows() != N || prog.P0.cols() != N) throw DomainError("solve_convex_program: P0 shape");
  if (prog.G.rows() > 0 && prog.G.cols() != N) throw DomainError("solve_convex_program: G shape");
  if (prog.h.size() != prog.G.rows()) throw DomainError("solve_convex_program: h shape");

  VectorXd w = w0.value_or(VectorXd::Zero(N));
  if (w.size() != N) throw DomainError("solve_convex_program: start has wrong length");

  detail::ScaledProgram sp{prog};
  sp.obj_scale = 1.0 / std::max({1.0, max_abs(prog.P0), max_abs(prog.c0)});
  sp.row_scale = VectorXd::Ones(K);
  {
    // Constraint rows are normalized by their gradient magnitude at w0.
    for (Eigen::Index r = 0; r < prog.G.rows(); ++r) {
      const double nrm = prog.G.row(r).cwiseAbs().maxCoeff();
      if (nrm > 0.0) sp.row_scale(r) = 1.0 / nrm;
    }
    for (std::size_t j = 0; j < prog.quad.size(); ++j) {
      const auto& qc = prog.quad[j];
      double nrm = max_abs(VectorXd(qc.gradient(w)));
      nrm = std::max(nrm, qc.curvature == QuadraticConstraint::Curvature::rank_one
                              ? qc.weight * qc.u.squaredNorm()
                              : max_abs(qc.P));
      sp.row_scale(prog.G.rows() + static_cast<Eigen::Index>(j)) = 1.0 / std::max(1.0, nrm);
    }
  }
  const VectorXd c = sp.obj_scale * prog.c0;
  const MatrixXd P = sp.obj_scale * prog.P0;

  IpmResult res;
  VectorXd g;
  MatrixXd J;
  sp.constraints(w, g, J);
  VectorXd s = (-g).cwiseMax(1.0);
  VectorXd lam = VectorXd::Ones(K);

  const double cscale = 1.0 + max_abs(c);
  auto residuals = [&](VectorXd& rd, VectorXd& rp) {
    sp.constraints(w, g, J);
    rd = P * w + c;
    if (K > 0) rd.noalias() += J.transpose() * lam;
    rp = g + s;
  };

  VectorXd rd, rp;
  double best_merit = std::numeric_limits<double>::infinity();
  VectorXd best_w = w, best_lam = lam;
  IpmStatus best_status = IpmStatus::max_iter;

  for (int it = 0; it <= opt.max_iter; ++it) {
    residuals(rd, rp);
    const double mu = K > 0 ? s.dot(lam) / static_cast<double>(K) : 0.0;
    const double fval = 0.5 * w.dot(P * w) + c.dot(w);
    const double er_d = max_abs(rd) / cscale;
    const double er_p = max_abs(rp);
    const double er_c = mu / (1.0 + std::abs(fval));
    const double merit = std::max({er_d, er_p, er_c});
    if (!std::isfinite(merit)) break;
    if (merit < best_merit) {
      best_merit = merit;
      best_w = w;
      best_lam = lam;
      best_status = merit <= opt.tol ? IpmStatus::optimal
                    : merit <= opt.acceptable_tol ? IpmStatus::acceptable
                                                  : IpmStatus::max_iter;
    }
    res.iterations = it;
    if (merit <= opt.tol || it == opt.max_iter) break;

    const VectorXd D = lam.cwiseQuotient(s);
    MatrixXd M = sp.hessian(lam);
    if (K > 0) M.noalias() += J.transpose() * D.asDiagonal() * J;
    M = symmetric_part(M);
    Eigen::LLT<MatrixXd> llt;
    double reg = 1e-14 * std::max(1.0, max_abs(M));
    bool factored = false;
    for (int attempt = 0; attempt < 8 && !factored; ++attempt) {
      llt.compute(M + reg * MatrixXd::Identity(N, N));
      factored = llt.info() == Eigen::Success;
      reg *= 100.0;
    }
    if (!factored) break;

    auto solve_dir = [&](const VectorXd& rc, VectorXd& dw, VectorXd& dl, VectorXd& ds) {
      VectorXd rhs = -rd;
      if (K > 0) rhs.noalias() -= J.transpose() * (D.cwiseProduct(rp) - rc.cwiseQuotient(s));
      dw = llt.solve(rhs);
      if (K > 0) {
        dl = D.cwiseProduct(J * dw + rp) - rc.cwiseQuotient(s);
        ds = -(rc + s.cwiseProduct(dl)).cwiseQuotient(lam);
      } else {
        dl.resize(0);
        ds.resize(0);
      }
    };

    VectorXd dw, dl, ds;
    double alpha = 1.0;
    if (K > 0) {
      VectorXd rc = s.cwiseProduct(lam);
      solve_dir(rc, dw, dl, ds);
      const double a_aff = std::min(detail::max_step(s, ds), detail::max_step(lam, dl));
      const double mu_aff =
          (s + a_aff * ds).dot(lam + a_aff * dl) / static_cast<double>(K);
      const double sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3);
      // Complementarity running far ahead of dual feasibility leaves the
      // normal equations too ill-conditioned to reduce the dual residual.
      const double floor_mu = std::min(mu, 0.1 * std::max(er_d, er_p) * (1.0 + std::abs(fval)));
      rc += ds.cwiseProduct(dl);
      rc.array() -= std::max(sigma * mu, floor_mu);
      solve_dir(rc, dw, dl, ds);
      alpha = std::min(1.0, opt.step_fraction *
                                std::min(detail::max_step(s, ds), detail::max_step(lam, dl)));    } else {
      solve_dir(VectorXd(), dw, dl, ds);
    }
    if (!dw.allFinite()) break;
    w += alpha * dw;
    if (K > 0) {
      s += alpha * ds;
      lam += alpha * dl;
      s = s.cwiseMax(1e-300);
      lam = lam.cwiseMax(1e-300);
    }
  }

  w = best_w;
  lam = best_lam;
  res.status = best_status;
  if (!std::isfinite(best_merit)) res.status = IpmStatus::numerical;
  res.w = w;
  sp.constraints(w, g, J);
  VectorXd lam_unscaled = lam.cwiseProduct(sp.row_scale) / sp.obj_scale;
  res.lambda_linear = lam_unscaled.head(prog.G.rows());
  res.lambda_quad = lam_unscaled.tail(static_cast<Eigen::Index>(prog.quad.size()));
  res.objective = prog.objective(w);
  VectorXd graw = g.cwiseQuotient(sp.row_scale);
  res.lagrangian = res.objective + lam_unscaled.dot(graw);
  res.primal_residual = K > 0 ? std::max(0.0, graw.maxCoeff()) : 0.0;
  VectorXd rdf = P * w + c;
  if (K > 0) rdf.noalias() += J.transpose() * lam;
  res.dual_residual = max_abs(rdf) / cscale;
  res.complementarity = K > 0 ? std::abs(g.dot(lam)) / static_cast<double>(K) : 0.0;
  return res;
}

}  // namespace dqcut
