#pragma once

// Convex relaxations over a box [L, U] intersected with {Ax = b}:
//   - the perturbed QP  min x'(Q+diag d)x + q'x - d'y  with y eliminated,
//   - the QCP  min v + q'x  s.t.  v >= x'(Q+diag d)x - d'y  for d in a pool,
// both posed in nullspace coordinates x = xhat + Z z over the free
// variables, plus the cutting-surface loop that grows the pool.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dqcut/errors.hpp"
#include "dqcut/linalg.hpp"
#include "dqcut/model.hpp"
#include "dqcut/qcqp.hpp"
#include "dqcut/separation.hpp"

namespace dqcut {

inline double feasibility_scale(const VectorXd& L, const VectorXd& U) {
  double s = 1.0;
  if (L.size()) s = std::max({s, max_abs(L), max_abs(U)});
  return s;
}

// ---------------------------------------------------------------------------
// Bound propagation over the equality rows
// ---------------------------------------------------------------------------

/// Tightens [L, U] using implied bounds of each row of Ax = b. Discrete
/// domains are snapped to their admissible values; continuous variables
/// are only fixed when their implied range collapses. Returns false when
/// the box is proven empty.
inline bool propagate_bounds(const MiqpInstance& inst, VectorXd& L, VectorXd& U) {
  const int n = inst.n;
  const double tol = 1e-9 * feasibility_scale(L, U);
  for (int i = 0; i < n; ++i)
    if (L(i) > U(i) + tol) return false;
  if (inst.m == 0) return true;
  bool changed = true;
  for (int pass = 0; changed && pass < 10 * n + 10; ++pass) {
    changed = false;
    for (int r = 0; r < inst.m; ++r) {
      double lo = 0.0, hi = 0.0;
      for (int j = 0; j < n; ++j) {
        const double a = inst.A(r, j);
        lo += a > 0 ? a * L(j) : a * U(j);
        hi += a > 0 ? a * U(j) : a * L(j);
      }
      const double row_scale = std::max(1.0, inst.A.row(r).cwiseAbs().maxCoeff());
      if (lo > inst.b(r) + tol * row_scale * n || hi < inst.b(r) - tol * row_scale * n) return false;
      for (int j = 0; j < n; ++j) {
        const double a = inst.A(r, j);
        if (std::abs(a) <= 1e-9 * row_scale || L(j) == U(j)) continue;
        const double lo_j = a > 0 ? a * L(j) : a * U(j);
        const double hi_j = a > 0 ? a * U(j) : a * L(j);
        const double rest_lo = lo - lo_j;
        const double rest_hi = hi - hi_j;
        double imp_lo = (inst.b(r) - rest_hi) / a;
        double imp_hi = (inst.b(r) - rest_lo) / a;
        if (a < 0) std::swap(imp_lo, imp_hi);
        const double ltol = tol * std::max(1.0, std::abs(a) > 0 ? row_scale / std::abs(a) : 1.0);
        if (imp_lo > U(j) + ltol || imp_hi < L(j) - ltol) return false;
        const auto& dom = inst.domain(j);
        double nl = L(j), nu = U(j);
        switch (dom.kind) {
          case DomainKind::binary:
          case DomainKind::two_point:
            if (imp_hi < U(j) - ltol) nu = nl;
            else if (imp_lo > L(j) + ltol) nl = nu;
            break;
          case DomainKind::integer_range:
            nl = std::max(L(j), std::ceil(imp_lo - 1e-9));
            nu = std::min(U(j), std::floor(imp_hi + 1e-9));
            if (nl > nu) return false;
            break;
          case DomainKind::interval:
            if (imp_hi - imp_lo <= ltol) {
              const double v = std::clamp(0.5 * (imp_lo + imp_hi), L(j), U(j));
              nl = nu = v;
            }
            break;
        }
        if (nl != L(j) || nu != U(j)) {
          L(j) = nl;
          U(j) = nu;
          changed = true;
          lo = 0.0;
          hi = 0.0;
          for (int k = 0; k < n; ++k) {
            const double ak = inst.A(r, k);
            lo += ak > 0 ? ak * L(k) : ak * U(k);
            hi += ak > 0 ? ak * U(k) : ak * L(k);
          }
        }
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Problem restricted to the free variables of a box
// ---------------------------------------------------------------------------

/// The instance restricted to a box: fixed variables substituted, dependent
/// equality rows dropped, nullspace basis and a feasible starting point.
struct ReducedProblem {
  VectorXd L, U;              // full-length box after propagation
  std::vector<int> free_idx;  // reduced index -> original index
  VectorXd x_fixed;           // full-length; meaningful on fixed indices
  MatrixXd Q;                 // Q over free indices
  VectorXd q;                 // q_F + 2 Q_{F,fix} x_fix
  double constant = 0.0;      // objective contribution of the fixed part
  VectorXd cross;             // 2 Q_{F,fix} x_fix
  double fixed_quad = 0.0;    // x_fix' Q_fix x_fix
  MatrixXd A;                 // independent rows over free indices
  VectorXd b;
  MatrixXd Z;
  VectorXd xhat;
  VectorXd z_start;           // phase-one point, x = xhat + Z z_start in the box
  VectorXd Lr, Ur;
  std::vector<DomainKind> kinds;
  std::vector<HullTerm> hull;
  bool infeasible = false;

  [[nodiscard]] int nfree() const { return static_cast<int>(free_idx.size()); }
  [[nodiscard]] bool single_point() const { return !infeasible && Z.cols() == 0; }

  [[nodiscard]] VectorXd full_x(const VectorXd& xr) const {
    VectorXd x = x_fixed;
    for (int r = 0; r < nfree(); ++r) x(free_idx[static_cast<std::size_t>(r)]) = xr(r);
    return x;
  }
  [[nodiscard]] VectorXd restrict(const VectorXd& full) const {
    VectorXd v(nfree());
    for (int r = 0; r < nfree(); ++r) v(r) = full(free_idx[static_cast<std::size_t>(r)]);
    return v;
  }
  /// Embeds a reduced perturbation; fixed coordinates keep `fill` values.
  [[nodiscard]] VectorXd embed(const VectorXd& dr, const VectorXd& fill) const {
    VectorXd d = fill;
    for (int r = 0; r < nfree(); ++r) d(free_idx[static_cast<std::size_t>(r)]) = dr(r);
    return d;
  }
  [[nodiscard]] double upper_hull(int r, double x) const {
    const auto& t = hull[static_cast<std::size_t>(r)];
    return t.upper_slope * x + t.upper_intercept;
  }
  [[nodiscard]] bool affine(int r) const {
    return hull[static_cast<std::size_t>(r)].lower == HullTerm::Lower::affine;
  }
};

namespace detail {

inline IpmOptions relaxation_ipm_options() {
  IpmOptions o;
  o.tol = 1e-10;
  o.acceptable_tol = 1e-7;
  o.max_iter = 150;
  return o;
}

/// min t  s.t.  L - x <= t,  x - U <= t,  x = xhat + Z z.
inline std::optional<VectorXd> phase_one(const ReducedProblem& R) {
  const Eigen::Index k = R.Z.cols();
  const int nf = R.nfree();
  const double tol = 1e-8 * feasibility_scale(R.Lr, R.Ur);
  std::vector<int> rows;
  for (int r = 0; r < nf; ++r) {
    if (k > 0 && R.Z.row(r).cwiseAbs().maxCoeff() > 1e-12) {
      rows.push_back(r);
    } else if (R.xhat(r) < R.Lr(r) - tol || R.xhat(r) > R.Ur(r) + tol) {
      return std::nullopt;
    }
  }
  ConvexProgram p;
  p.P0 = MatrixXd::Zero(k + 1, k + 1);
  p.c0 = VectorXd::Zero(k + 1);
  p.c0(k) = 1.0;
  p.G = MatrixXd::Zero(2 * static_cast<Eigen::Index>(rows.size()), k + 1);
  p.h = VectorXd::Zero(p.G.rows());
  double viol = 0.0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const int r = rows[t];
    const auto up = static_cast<Eigen::Index>(2 * t);
    p.G.row(up).head(k) = R.Z.row(r);
    p.G(up, k) = -1.0;
    p.h(up) = R.Ur(r) - R.xhat(r);
    p.G.row(up + 1).head(k) = -R.Z.row(r);
    p.G(up + 1, k) = -1.0;
    p.h(up + 1) = R.xhat(r) - R.Lr(r);
    viol = std::max({viol, R.xhat(r) - R.Ur(r), R.Lr(r) - R.xhat(r)});
  }
  VectorXd w0 = VectorXd::Zero(k + 1);
  w0(k) = viol + 1.0;
  IpmOptions o;
  o.tol = 1e-10;
  o.acceptable_tol = 1e-7;
  o.max_iter = 200;
  const IpmResult res = solve_convex_program(p, o, w0);
  if (res.w.size() != k + 1 || !res.w.allFinite()) throw NumericalError("phase one: solver failed");
  if (res.w(k) > tol) return std::nullopt;
  return VectorXd(res.w.head(k));
}

}  // namespace detail

/// Restricts the instance to the box [L, U]. Returns a problem flagged
/// infeasible when propagation, row consistency or phase one fails.
inline ReducedProblem reduce(const MiqpInstance& inst, VectorXd L, VectorXd U) {
  ReducedProblem R;
  if (L.size() != inst.n || U.size() != inst.n) throw DomainError("reduce: box has wrong length");
  if (!propagate_bounds(inst, L, U)) {
    R.L = L;
    R.U = U;
    R.infeasible = true;
    return R;
  }
  R.L = L;
  R.U = U;
  const int n = inst.n;
  R.x_fixed = VectorXd::Zero(n);
  std::vector<int> fixed;
  for (int i = 0; i < n; ++i) {
    if (U(i) > L(i)) {
      R.free_idx.push_back(i);
    } else {
      fixed.push_back(i);
      R.x_fixed(i) = L(i);
    }
  }
  const int nf = R.nfree();
  R.Q.resize(nf, nf);
  R.q.resize(nf);
  R.cross.resize(nf);
  R.Lr.resize(nf);
  R.Ur.resize(nf);
  for (int r = 0; r < nf; ++r) {
    const int i = R.free_idx[static_cast<std::size_t>(r)];
    for (int c = 0; c < nf; ++c) R.Q(r, c) = inst.Q(i, R.free_idx[static_cast<std::size_t>(c)]);
    double cr = 0.0;
    for (int j : fixed) cr += 2.0 * inst.Q(i, j) * R.x_fixed(j);
    R.cross(r) = cr;
    R.q(r) = inst.q(i) + cr;
    R.Lr(r) = L(i);
    R.Ur(r) = U(i);
    R.kinds.push_back(inst.domain(i).kind);
    R.hull.push_back(make_hull_term(inst.domain(i).kind, L(i), U(i)));
  }
  for (int a : fixed) {
    R.constant += inst.q(a) * R.x_fixed(a);
    for (int c : fixed) R.fixed_quad += R.x_fixed(a) * inst.Q(a, c) * R.x_fixed(c);
  }
  R.constant += R.fixed_quad;

  MatrixXd Af(inst.m, nf);
  VectorXd bf = inst.b;
  for (int r = 0; r < nf; ++r) Af.col(r) = inst.A.col(R.free_idx[static_cast<std::size_t>(r)]);
  for (int j : fixed) bf -= inst.A.col(j) * R.x_fixed(j);

  if (nf == 0) {
    const double scale = std::max({1.0, max_abs(inst.b), max_abs(inst.A) * max_abs(R.x_fixed)});
    R.infeasible = inst.m > 0 && max_abs(bf) > 1e-8 * scale;
    R.A.resize(0, 0);
    R.b.resize(0);
    R.Z.resize(0, 0);
    R.xhat.resize(0);
    R.z_start.resize(0);
    return R;
  }
  const RowSelection sel = select_independent_rows(Af, bf);
  if (!sel.consistent) {
    R.infeasible = true;
    return R;
  }
  R.A.resize(static_cast<Eigen::Index>(sel.kept.size()), nf);
  R.b.resize(static_cast<Eigen::Index>(sel.kept.size()));
  for (std::size_t t = 0; t < sel.kept.size(); ++t) {
    R.A.row(static_cast<Eigen::Index>(t)) = Af.row(sel.kept[t]);
    R.b(static_cast<Eigen::Index>(t)) = bf(sel.kept[t]);
  }
  R.Z = nullspace_basis(R.A).Z;
  R.xhat = least_norm_solution(R.A, R.b);
  if (R.Z.cols() == 0) {
    const double tol = 1e-8 * feasibility_scale(R.Lr, R.Ur);
    for (int r = 0; r < nf; ++r) {
      if (R.xhat(r) < R.Lr(r) - tol || R.xhat(r) > R.Ur(r) + tol) R.infeasible = true;
    }
    R.xhat = R.xhat.cwiseMax(R.Lr).cwiseMin(R.Ur);
    R.z_start.resize(0);
    return R;
  }
  auto z = detail::phase_one(R);
  if (!z) {
    R.infeasible = true;
    return R;
  }
  R.z_start = *z;
  return R;
}

// ---------------------------------------------------------------------------
// Relaxation solutions
// ---------------------------------------------------------------------------

struct RelaxationSolution {
  bool infeasible = false;
  IpmStatus status = IpmStatus::numerical;
  VectorXd x;  // full-length
  VectorXd y;  // full-length
  double v = 0.0;  // full-space epigraph value
  double bound = -std::numeric_limits<double>::infinity();
  VectorXd cut_multipliers;
  double kkt_residual = 0.0;
  int iterations = 0;
  // reduced-space copies used for cut tests
  VectorXd xr, yr;
  double vr = 0.0;

  [[nodiscard]] bool certified() const {
    return !infeasible && (status == IpmStatus::optimal || status == IpmStatus::acceptable);
  }
};

namespace detail {

inline double kkt_residual(const IpmResult& r) {
  return std::max({r.dual_residual, r.primal_residual, r.complementarity});
}

inline void clamp_hull(const ReducedProblem& R, VectorXd& xr, VectorXd& yr) {
  for (int r = 0; r < R.nfree(); ++r) {
    xr(r) = std::clamp(xr(r), R.Lr(r), R.Ur(r));
    const double up = R.upper_hull(r, xr(r));
    if (R.affine(r)) {
      yr(r) = up;
    } else {
      yr(r) = std::clamp(yr(r), xr(r) * xr(r), std::max(up, xr(r) * xr(r)));
    }
  }
}

inline void finish_full(const ReducedProblem& R, RelaxationSolution& s) {
  s.x = R.full_x(s.xr);
  s.y = VectorXd(s.x.size());
  for (Eigen::Index i = 0; i < s.x.size(); ++i) s.y(i) = s.x(i) * s.x(i);
  for (int r = 0; r < R.nfree(); ++r) s.y(R.free_idx[static_cast<std::size_t>(r)]) = s.yr(r);
  s.v = s.vr + (R.nfree() ? R.cross.dot(s.xr) : 0.0) + R.fixed_quad;
}

/// Box rows x_r in [L_r, U_r] expressed in z; rows with Z_r = 0 are skipped.
inline void add_box_rows(const ReducedProblem& R, Eigen::Index N, std::vector<VectorXd>& rows,
                         std::vector<double>& rhs) {
  const Eigen::Index k = R.Z.cols();
  for (int r = 0; r < R.nfree(); ++r) {
    if (R.Z.cols() == 0 || R.Z.row(r).cwiseAbs().maxCoeff() <= 1e-12) continue;
    VectorXd up = VectorXd::Zero(N);
    up.head(k) = R.Z.row(r).transpose();
    rows.push_back(up);
    rhs.push_back(R.Ur(r) - R.xhat(r));
    rows.push_back(-up);
    rhs.push_back(R.xhat(r) - R.Lr(r));
  }
}

inline void stack_rows(const std::vector<VectorXd>& rows, const std::vector<double>& rhs,
                       Eigen::Index N, ConvexProgram& p) {
  p.G.resize(static_cast<Eigen::Index>(rows.size()), N);
  p.h.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    p.G.row(static_cast<Eigen::Index>(t)) = rows[t].transpose();
    p.h(static_cast<Eigen::Index>(t)) = rhs[t];
  }
}

/// Radius bound on |x - xhat| over the box, for the shift correction.
inline double box_radius_sq(const ReducedProblem& R) {
  double s = 0.0;
  for (int r = 0; r < R.nfree(); ++r) {
    const double m = std::max(std::abs(R.Lr(r) - R.xhat(r)), std::abs(R.Ur(r) - R.xhat(r)));
    s += m * m;
  }
  return s;
}

}  // namespace detail

inline RelaxationSolution infeasible_solution() {
  RelaxationSolution s;
  s.infeasible = true;
  s.status = IpmStatus::optimal;
  s.bound = std::numeric_limits<double>::infinity();
  return s;
}

/// Exact objective at a reduced problem whose feasible set is a point.
inline RelaxationSolution solve_single_point(const MiqpInstance& inst, const ReducedProblem& R) {
  RelaxationSolution s;
  s.status = IpmStatus::optimal;
  s.xr = R.nfree() ? R.xhat : VectorXd();
  s.yr = s.xr.cwiseProduct(s.xr);
  s.vr = s.xr.size() ? s.xr.dot(R.Q * s.xr) : 0.0;
  detail::finish_full(R, s);
  s.bound = evaluate_objective(inst, s.x);
  return s;
}

/// min x'(Q + diag d)x + q'x - d'y over the reduced feasible set, with y
/// eliminated: y_i = u_i(x_i) when d_i >= 0 or the hull is affine, else
/// y_i = x_i^2.
inline RelaxationSolution solve_qp_reduced(const MiqpInstance& inst, const ReducedProblem& R,
                                           const VectorXd& d_full,
                                           const IpmOptions& opt = detail::relaxation_ipm_options()) {
  if (R.infeasible) return infeasible_solution();
  if (R.single_point() || R.nfree() == 0) return solve_single_point(inst, R);
  const int nf = R.nfree();
  const VectorXd d = R.restrict(d_full);
  VectorXd dt = VectorXd::Zero(nf);
  VectorXd lin = R.q;
  double k_lin = 0.0;
  std::vector<bool> upper_choice(static_cast<std::size_t>(nf));
  for (int r = 0; r < nf; ++r) {
    const auto& t = R.hull[static_cast<std::size_t>(r)];
    const bool up = R.affine(r) || d(r) >= 0.0;
    upper_choice[static_cast<std::size_t>(r)] = up;
    if (up) {
      dt(r) = d(r);
      lin(r) -= d(r) * t.upper_slope;
      k_lin -= d(r) * t.upper_intercept;
    }
  }
  MatrixXd M = R.Q;
  M.diagonal() += dt;
  const MatrixXd& Z = R.Z;
  const Eigen::Index k = Z.cols();
  ConvexProgram p;
  p.P0 = symmetric_part(2.0 * Z.transpose() * M * Z);
  const double lmin = min_eigenvalue(p.P0);
  const double scale = std::max(1.0, max_abs(p.P0));
  if (lmin < -1e-6 * scale) {
    throw NumericalError("solve_qp: perturbation does not convexify the relaxation (lambda_min " +
                         std::to_string(lmin) + ")");
  }
  double shift = 0.0;
  if (lmin < 0.0) {
    shift = -lmin;
    p.P0.diagonal().array() += shift;
  }
  p.c0 = Z.transpose() * (2.0 * M * R.xhat + lin);
  p.k0 = R.xhat.dot(M * R.xhat) + lin.dot(R.xhat) + k_lin + R.constant;
  std::vector<VectorXd> rows;
  std::vector<double> rhs;
  detail::add_box_rows(R, k, rows, rhs);
  detail::stack_rows(rows, rhs, k, p);

  const IpmResult res = solve_convex_program(p, opt, R.z_start);
  RelaxationSolution s;
  s.status = res.status;
  s.iterations = res.iterations;
  s.kkt_residual = detail::kkt_residual(res);
  s.xr = R.xhat + Z * res.w;
  s.yr = VectorXd(nf);
  for (int r = 0; r < nf; ++r) {
    s.yr(r) = upper_choice[static_cast<std::size_t>(r)] ? R.upper_hull(r, s.xr(r)) : s.xr(r) * s.xr(r);
  }
  detail::clamp_hull(R, s.xr, s.yr);
  MatrixXd Md = R.Q;
  Md.diagonal() += d;
  s.vr = s.xr.dot(Md * s.xr) - d.dot(s.yr);
  detail::finish_full(R, s);
  s.bound = std::min(res.objective, res.lagrangian) - 0.5 * shift * detail::box_radius_sq(R);
  return s;
}

inline RelaxationSolution solve_qp_child(const MiqpInstance& inst, const VectorXd& d, const VectorXd& L,
                                         const VectorXd& U) {
  return solve_qp_reduced(inst, reduce(inst, L, U), d);
}

/// min x'(Q + mu I)x + q'x - mu sum u_i(x_i) over {Ax = b, L <= x <= U}.
inline RelaxationSolution solve_eigenvalue_relaxation(const MiqpInstance& inst, double mu) {
  if (mu < 0.0) throw DomainError("solve_eigenvalue_relaxation: mu must be nonnegative");
  const ReducedProblem R = reduce(inst, inst.lower_bounds(), inst.upper_bounds());
  if (R.infeasible) throw InfeasibleError("eigenvalue relaxation: {Ax = b, L <= x <= U} is empty");
  return solve_qp_reduced(inst, R, VectorXd::Constant(inst.n, mu));
}

// ---------------------------------------------------------------------------
// alpha selection and initial perturbations
// ---------------------------------------------------------------------------

/// mu(alpha) = -lambda_min(Q, I + alpha A'A).
inline double mu_of_alpha(const MatrixXd& Q, const MatrixXd& A, double alpha) {
  const Eigen::Index n = Q.rows();
  MatrixXd N = MatrixXd::Identity(n, n);
  if (A.rows() > 0) N.noalias() += alpha * (A.transpose() * A);
  return -min_generalized_eigenvalue(Q, N);
}

struct AlphaSelection {
  double alpha = 0.0;
  double mu = 0.0;
  bool capped = false;
  std::vector<std::pair<double, double>> trace;  // (alpha, mu(alpha))
};

inline AlphaSelection select_alpha(const MiqpInstance& inst) {
  AlphaSelection s;
  if (inst.m == 0) {
    s.mu = -min_eigenvalue(inst.Q);
    return s;
  }
  const MatrixXd AtA = inst.A.transpose() * inst.A;
  const double alpha0 = std::max(1.0, inst.Q.norm() / std::max(1.0, AtA.norm()));
  double alpha = alpha0;
  double mu = mu_of_alpha(inst.Q, inst.A, alpha);
  for (int t = 0; t <= 8; ++t) {
    alpha = alpha0 * std::pow(10.0, t);
    if (t > 0) mu = mu_of_alpha(inst.Q, inst.A, alpha);
    const double mu_next = mu_of_alpha(inst.Q, inst.A, 10.0 * alpha);
    s.trace.emplace_back(alpha, mu);
    if (std::abs(mu_next - mu) <= 1e-3 * std::max(1.0, std::abs(mu))) {
      s.alpha = alpha;
      s.mu = mu;
      return s;
    }
  }
  s.alpha = alpha;
  s.mu = mu;
  s.capped = true;
  return s;
}

inline double indefiniteness_tolerance(const MatrixXd& M) { return 1e-9 * std::max(1.0, max_abs(M)); }

/// True when the objective is convex on the feasible affine set.
inline bool convex_on_nullspace(const MatrixXd& Q, const MatrixXd& Z) {
  if (Z.cols() == 0) return true;
  return projected_min_eigenvalue(Q, Z) >= -indefiniteness_tolerance(Q);
}

/// d0 = mu 1 with mu = -lambda_min(Q) (m = 0) or -lambda_min(Z'QZ), the
/// limit of mu(alpha) (m > 0); empty when the objective is already convex
/// on the nullspace.
inline std::optional<VectorXd> initial_perturbation(const MiqpInstance& inst, double /*alpha*/) {
  const MatrixXd Z = nullspace_basis(inst.A).Z;
  if (convex_on_nullspace(inst.Q, Z)) return std::nullopt;
  const double mu = inst.m == 0 ? -min_eigenvalue(inst.Q) : -projected_min_eigenvalue(inst.Q, Z);
  return VectorXd::Constant(inst.n, std::max(mu, 0.0));
}

// ---------------------------------------------------------------------------
// QCP over a cut pool
// ---------------------------------------------------------------------------

struct CutPool {
  std::vector<VectorXd> cuts;  // cuts[0] is the initial perturbation
  VectorXd multipliers;        // from the last QCP solve
  double alpha = 0.0;

  [[nodiscard]] std::size_t size() const { return cuts.size(); }
};

/// x'(Q + diag d)x - d'y - v (positive means the cut is violated).
inline double cut_violation(const MatrixXd& Q, const VectorXd& d, const VectorXd& x, const VectorXd& y,
                            double v) {
  return x.dot(Q * x) + d.dot(x.cwiseProduct(x)) - d.dot(y) - v;
}

inline bool violates(double violation, double v) { return violation > 1e-6 * std::max(1.0, std::abs(v)); }

struct QcpModel {
  ConvexProgram program;
  const ReducedProblem* reduced = nullptr;
  Eigen::Index k = 0;             // nullspace coordinates
  std::vector<int> y_slot;        // reduced var -> position in w, -1 if eliminated
  Eigen::Index v_slot = 0;
  std::vector<VectorXd> cuts_r;   // cuts restricted to free indices
  VectorXd w0;
};

inline QcpModel assemble_qcp(const ReducedProblem& R, const std::vector<VectorXd>& pool) {
  if (pool.empty()) throw DomainError("assemble_qcp: empty cut pool");
  if (R.infeasible) throw InfeasibleError("assemble_qcp: relaxation domain is empty");
  QcpModel m;
  m.reduced = &R;
  const int nf = R.nfree();
  const Eigen::Index k = R.Z.cols();
  m.k = k;
  Eigen::Index N = k;
  m.y_slot.assign(static_cast<std::size_t>(nf), -1);
  for (int r = 0; r < nf; ++r)
    if (!R.affine(r)) m.y_slot[static_cast<std::size_t>(r)] = static_cast<int>(N++);
  m.v_slot = N++;
  const MatrixXd& Z = R.Z;

  ConvexProgram& p = m.program;
  p.P0 = MatrixXd::Zero(N, N);
  p.c0 = VectorXd::Zero(N);
  p.c0.head(k) = Z.transpose() * R.q;
  p.c0(m.v_slot) = 1.0;
  p.k0 = R.q.dot(R.xhat) + R.constant;

  for (const VectorXd& d_full : pool) {
    const VectorXd d = R.restrict(d_full);
    m.cuts_r.push_back(d);
    MatrixXd M = R.Q;
    M.diagonal() += d;
    QuadraticConstraint c;
    c.curvature = QuadraticConstraint::Curvature::dense;
    c.P = MatrixXd::Zero(N, N);
    c.P.topLeftCorner(k, k) = symmetric_part(2.0 * Z.transpose() * M * Z);
    c.a = VectorXd::Zero(N);
    VectorXd lin = 2.0 * M * R.xhat;
    c.beta = R.xhat.dot(M * R.xhat);
    for (int r = 0; r < nf; ++r) {
      const auto slot = m.y_slot[static_cast<std::size_t>(r)];
      if (slot >= 0) {
        c.a(slot) = -d(r);
      } else {
        const auto& t = R.hull[static_cast<std::size_t>(r)];
        lin(r) -= d(r) * t.upper_slope;
        c.beta -= d(r) * (t.upper_slope * R.xhat(r) + t.upper_intercept);
      }
    }
    c.a.head(k) = Z.transpose() * lin;
    c.a(m.v_slot) = -1.0;
    p.quad.push_back(std::move(c));
  }
  std::vector<VectorXd> rows;
  std::vector<double> rhs;
  detail::add_box_rows(R, N, rows, rhs);
  for (int r = 0; r < nf; ++r) {
    const auto slot = m.y_slot[static_cast<std::size_t>(r)];
    if (slot < 0) continue;
    const auto& t = R.hull[static_cast<std::size_t>(r)];
    // y_r <= s x_r + c
    VectorXd row = VectorXd::Zero(N);
    row.head(k) = -t.upper_slope * Z.row(r).transpose();
    row(slot) = 1.0;
    rows.push_back(row);
    rhs.push_back(t.upper_slope * R.xhat(r) + t.upper_intercept);
    // x_r^2 - y_r <= 0
    QuadraticConstraint c;
    c.curvature = QuadraticConstraint::Curvature::rank_one;
    c.u = VectorXd::Zero(N);
    c.u.head(k) = Z.row(r).transpose();
    c.weight = 2.0;
    c.a = VectorXd::Zero(N);
    c.a.head(k) = 2.0 * R.xhat(r) * Z.row(r).transpose();
    c.a(slot) = -1.0;
    c.beta = R.xhat(r) * R.xhat(r);
    p.quad.push_back(std::move(c));
  }
  detail::stack_rows(rows, rhs, N, p);

  // Start inside: phase-one x, y halfway between the hull functions, v
  // above every cut.
  m.w0 = VectorXd::Zero(N);
  m.w0.head(k) = R.z_start;
  const VectorXd x0 = R.xhat + Z * R.z_start;
  for (int r = 0; r < nf; ++r) {
    const auto slot = m.y_slot[static_cast<std::size_t>(r)];
    if (slot >= 0) m.w0(slot) = 0.5 * (x0(r) * x0(r) + R.upper_hull(r, x0(r)));
  }
  double vmax = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pool.size(); ++j) {
    VectorXd w = m.w0;
    w(m.v_slot) = 0.0;
    vmax = std::max(vmax, p.quad[j].value(w));
  }
  m.w0(m.v_slot) = vmax + 1.0 + 0.1 * std::abs(vmax);
  return m;
}

inline RelaxationSolution solve_qcp(const MiqpInstance& inst, const QcpModel& m,
                                    const IpmOptions& opt = detail::relaxation_ipm_options()) {
  const ReducedProblem& R = *m.reduced;
  if (R.single_point()) {
    RelaxationSolution s = solve_single_point(inst, R);
    s.cut_multipliers = VectorXd::Zero(static_cast<Eigen::Index>(m.cuts_r.size()));
    if (s.cut_multipliers.size()) s.cut_multipliers(0) = 1.0;
    return s;
  }
  const IpmResult res = solve_convex_program(m.program, opt, m.w0);
  RelaxationSolution s;
  s.status = res.status;
  s.iterations = res.iterations;
  s.kkt_residual = detail::kkt_residual(res);
  const int nf = R.nfree();
  s.xr = R.xhat + R.Z * res.w.head(m.k);
  s.yr = VectorXd(nf);
  for (int r = 0; r < nf; ++r) {
    const auto slot = m.y_slot[static_cast<std::size_t>(r)];
    s.yr(r) = slot >= 0 ? res.w(slot) : R.upper_hull(r, s.xr(r));
  }
  detail::clamp_hull(R, s.xr, s.yr);
  s.vr = res.w(m.v_slot);
  // v must dominate every cut at the polished point.
  for (const VectorXd& d : m.cuts_r) s.vr = std::max(s.vr, cut_violation(R.Q, d, s.xr, s.yr, 0.0));
  detail::finish_full(R, s);
  s.cut_multipliers = res.lambda_quad.head(static_cast<Eigen::Index>(m.cuts_r.size()));
  s.bound = std::min(res.objective, res.lagrangian);
  return s;
}

// ---------------------------------------------------------------------------
// Surrogate perturbation and the cutting-surface loop
// ---------------------------------------------------------------------------

/// sum nu_i d_i / sum nu_i; falls back to the member with the largest
/// multiplier (or the first member) when the weights vanish.
inline VectorXd surrogate_perturbation(const std::vector<VectorXd>& cuts, const VectorXd& nu) {
  if (cuts.empty()) throw DomainError("surrogate_perturbation: no cuts");
  if (nu.size() != static_cast<Eigen::Index>(cuts.size())) throw DomainError("surrogate_perturbation: size");
  const double total = nu.cwiseMax(0.0).sum();
  if (total > 1e-12) {
    VectorXd d = VectorXd::Zero(cuts.front().size());
    for (std::size_t i = 0; i < cuts.size(); ++i) d += std::max(0.0, nu(static_cast<Eigen::Index>(i))) * cuts[i];
    return d / total;
  }
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < nu.size(); ++i)
    if (nu(i) > nu(best)) best = i;
  return nu(best) > 0.0 ? cuts[static_cast<std::size_t>(best)] : cuts.front();
}

/// Root perturbation: weighted average over the generated cuts (the
/// initial member excluded); falls back to the largest-multiplier member
/// of the pool, else the initial perturbation.
inline VectorXd surrogate_root_perturbation(const CutPool& pool) {
  if (pool.cuts.empty()) throw DomainError("surrogate_root_perturbation: empty pool");
  const auto nc = static_cast<Eigen::Index>(pool.cuts.size());
  VectorXd nu = pool.multipliers.size() == nc ? pool.multipliers : VectorXd::Zero(nc);
  if (nc > 1) {
    std::vector<VectorXd> gen(pool.cuts.begin() + 1, pool.cuts.end());
    const VectorXd tail = nu.tail(nc - 1);
    if (tail.cwiseMax(0.0).sum() > 1e-12) return surrogate_perturbation(gen, tail);
  }
  return surrogate_perturbation(pool.cuts, nu);
}

struct CuttingSurfaceConfig {
  int max_cuts = 20;  // MaxNC
  SeparationConfig separation;
};

struct CuttingSurfaceResult {
  bool convex = false;      // gate failed; no cuts were generated
  double initial_bound = -std::numeric_limits<double>::infinity();
  double bound = -std::numeric_limits<double>::infinity();
  std::vector<double> bounds;      // running bound after each QCP solve
  std::vector<double> raw_bounds;  // QCP values as solved
  CutPool pool;
  RelaxationSolution last;
  std::vector<SeparationResult> separations;
  std::vector<VectorXd> separation_d;  // full-length d of every separation call
  int solver_failures = 0;
  std::string stop_reason;
};

/// Separation on the reduced problem; returns a full-length perturbation.
inline std::optional<SeparationResult> separate_reduced(const ReducedProblem& R, double alpha,
                                                        const VectorXd& eta_r,
                                                        const SeparationConfig& cfg) {
  if (R.nfree() == 0) return std::nullopt;
  SeparationInput in;
  in.Q = R.Q;
  in.A = R.A.rows() ? R.A : MatrixXd(0, R.nfree());
  in.alpha = alpha;
  in.eta = eta_r;
  in.delta_max = (R.Ur - R.Lr).maxCoeff();
  if (!(separation_shift(in.Q, in.A, alpha) > 0.0)) return std::nullopt;
  return separate(in, cfg);
}

inline CuttingSurfaceResult cutting_surface(const MiqpInstance& inst, double alpha,
                                            const CuttingSurfaceConfig& cfg = {}) {
  CuttingSurfaceResult out;
  out.pool.alpha = alpha;
  const auto d0 = initial_perturbation(inst, alpha);
  if (!d0) {
    out.convex = true;
    out.stop_reason = "convex";
    return out;
  }
  const ReducedProblem R = reduce(inst, inst.lower_bounds(), inst.upper_bounds());
  if (R.infeasible) throw InfeasibleError("cutting_surface: {Ax = b, L <= x <= U} is empty");
  out.pool.cuts.push_back(*d0);

  // The single-cut QCP and the eigenvalue QP share one optimum; the better
  // of the two numerical values is kept.
  const RelaxationSolution eig = solve_qp_reduced(inst, R, *d0);
  QcpModel model = assemble_qcp(R, out.pool.cuts);
  RelaxationSolution sol = solve_qcp(inst, model);
  out.raw_bounds.push_back(sol.bound);
  double bound = -std::numeric_limits<double>::infinity();
  if (eig.certified()) bound = eig.bound;
  if (sol.certified()) {
    bound = std::max(bound, sol.bound);
  } else {
    ++out.solver_failures;
  }
  out.initial_bound = bound;
  out.bounds.push_back(bound);
  out.last = sol.certified() ? sol : eig;
  out.pool.multipliers = sol.certified() ? VectorXd(sol.cut_multipliers) : VectorXd::Ones(1);
  if (!sol.certified()) {
    out.bound = bound;
    out.stop_reason = "qcp solver failure";
    return out;
  }

  out.stop_reason = "max cuts";
  for (int k = 1; k <= cfg.max_cuts; ++k) {
    const RelaxationSolution& cur = out.last;
    VectorXd eta_r = cur.yr - cur.xr.cwiseProduct(cur.xr);
    // Gaps below the interior-point accuracy are noise.
    eta_r = (eta_r.array() > 1e-7).select(eta_r, 0.0);
    if (eta_r.size() == 0 || eta_r.maxCoeff() <= 0.0) {
      out.stop_reason = "relaxation exact";
      break;
    }
    auto sep = separate_reduced(R, alpha, eta_r, cfg.separation);
    if (!sep) {
      out.stop_reason = "separation not applicable";
      break;
    }
    const VectorXd d_new = R.embed(sep->d, VectorXd::Zero(inst.n));
    out.separation_d.push_back(d_new);
    const double viol = cut_violation(R.Q, sep->d, cur.xr, cur.yr, cur.vr);
    out.separations.push_back(std::move(*sep));
    if (!violates(viol, cur.vr)) {
      out.stop_reason = "cut not violated";
      break;
    }
    out.pool.cuts.push_back(d_new);
    model = assemble_qcp(R, out.pool.cuts);
    RelaxationSolution next = solve_qcp(inst, model);
    out.raw_bounds.push_back(next.bound);
    if (!next.certified()) {
      ++out.solver_failures;
      out.pool.cuts.pop_back();
      out.stop_reason = "qcp solver failure";
      break;
    }
    bound = std::max(bound, next.bound);
    out.bounds.push_back(bound);
    out.pool.multipliers = next.cut_multipliers;
    out.last = std::move(next);
  }
  out.bound = bound;
  return out;
}

}  // namespace dqcut
