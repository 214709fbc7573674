#pragma once

// Barrier coordinate minimization for the regularized separation problems
//
//   smooth:    min  eta'd + rho d'd           s.t. Q + diag(d) + alpha A'A >= 0
//   nonsmooth: min  eta'd + lambda sum [d]_+  s.t. the same cone
//
// Both solve a sequence of log-det penalized problems, one coordinate at a
// time, keeping V = (Q + diag(d) + alpha A'A)^{-1} up to date by rank-one
// updates.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dqcut/errors.hpp"
#include "dqcut/linalg.hpp"

namespace dqcut {

enum class SeparationMode { smooth, nonsmooth };

inline const char* to_string(SeparationMode m) {
  return m == SeparationMode::smooth ? "smooth" : "nonsmooth";
}

struct SeparationConfig {
  SeparationMode mode = SeparationMode::smooth;
  int max_iter_per_var = 500;  // MaxIter = 500 n
  double sigma_min = 1e-5;
  double sigma_upd = 0.8;
  double eps_upd = 0.03;
  int omega_check = 10;
  double eps_check = 1e-4;
  double rho_upd = 10.0;
  double restart_factor = 10.0;  // restart when max|d| > restart_factor * mu
  int max_restarts = 12;
  double rho_override = 0.0;     // > 0 replaces the data-driven initial rho
  bool allow_restarts = true;
  bool record_trace = false;
};

struct SeparationInput {
  MatrixXd Q;
  MatrixXd A;  // may have zero rows
  double alpha = 0.0;
  VectorXd eta;
  double delta_max = 1.0;  // largest domain width, feeds the initial rho
};

struct SeparationTraceEntry {
  int iteration = 0;  // counter within the current run
  int restart = 0;
  int index = -1;
  double delta = 0.0;
  double sigma = 0.0;
  double rho = 0.0;
  double objective = 0.0;  // regularized objective
  double penalized = 0.0;  // regularized objective minus sigma * logdet
  bool sigma_updated = false;
};

struct SeparationResult {
  VectorXd d;
  int iterations = 0;  // total over all runs
  double sigma = 0.0;
  double rho = 0.0;
  double lambda = 0.0;
  int restarts = 0;
  bool restart_cap_hit = false;
  bool max_iter_hit = false;
  bool converged = false;
  bool exact_relaxation = false;  // eta == 0, initial point returned
  bool repaired = false;          // final d shifted to pass the PSD certificate
  double objective = 0.0;
  int refactorizations = 0;
  std::vector<SeparationTraceEntry> trace;
};

/// eta_i = y_i - x_i^2, small negatives clamped to zero.
inline VectorXd eta_from_relaxation(const VectorXd& x, const VectorXd& y) {
  if (x.size() != y.size()) throw DomainError("eta_from_relaxation: length mismatch");
  VectorXd eta = y - x.cwiseProduct(x);
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (eta(i) < -1e-10) {
      throw NumericalError("eta_from_relaxation: y_" + std::to_string(i) + " < x_" +
                           std::to_string(i) + "^2 (inconsistent relaxation solution)");
    }
    eta(i) = std::max(eta(i), 0.0);
  }
  return eta;
}

/// Largest |Q_ij| over the upper triangle.
inline double q_max_upper(const MatrixXd& Q) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < Q.rows(); ++i)
    for (Eigen::Index j = i; j < Q.cols(); ++j) m = std::max(m, std::abs(Q(i, j)));
  return m;
}

inline double rho_init(double q_max, double delta_max) {
  if (!(delta_max > 0.0)) throw DomainError("rho_init: all variables are fixed (delta_max = 0)");
  const double num = std::pow(10.0, 4.0 * std::floor(std::log10(delta_max)));
  const double den = std::max(1.0, std::floor(q_max / 100.0) * q_max);
  return 1e-4 * num / den;
}

inline double rho_init(const MatrixXd& Q, const VectorXd& L, const VectorXd& U) {
  const double delta_max = (U - L).size() ? (U - L).maxCoeff() : 0.0;
  return rho_init(q_max_upper(Q), delta_max);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of an empty list");
  const std::size_t k = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  if (v.size() % 2 == 1) return v[k];
  const double hi = v[k];
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k));
  return 0.5 * (lo + hi);
}

/// median_i |(eta_i + 2 rho d_i) / V_ii|.
inline double sigma_init_smooth(const VectorXd& eta, double rho, const VectorXd& d, const MatrixXd& V) {
  std::vector<double> r;
  for (Eigen::Index i = 0; i < eta.size(); ++i) r.push_back(std::abs((eta(i) + 2.0 * rho * d(i)) / V(i, i)));
  return median(std::move(r));
}

/// median_i |beta_i / V_ii| (the subgradient of r_i at d_i > 0 is beta_i).
inline double sigma_init_nonsmooth(const VectorXd& beta, const MatrixXd& V) {
  std::vector<double> r;
  for (Eigen::Index i = 0; i < beta.size(); ++i) r.push_back(std::abs(beta(i) / V(i, i)));
  return median(std::move(r));
}

/// grad_j = eta_j + 2 rho d_j - sigma V_jj.
inline VectorXd smooth_gradient(const VectorXd& eta, double rho, double sigma, const VectorXd& d,
                                const MatrixXd& V) {
  return eta + 2.0 * rho * d - sigma * V.diagonal();
}

/// First index of the largest magnitude entry.
inline Eigen::Index argmax_abs(const VectorXd& g) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < g.size(); ++j)
    if (std::abs(g(j)) > std::abs(g(best))) best = j;
  return best;
}

inline Eigen::Index select_index_smooth(const VectorXd& grad) { return argmax_abs(grad); }

/// Minimizer of eta_i t + rho (d_i + t)^2 - sigma log(1 + t V_ii) over
/// t > -1/V_ii. The larger root of the stationarity quadratic, evaluated
/// without cancellation.
inline double coordinate_step_smooth(double Vii, double eta_i, double rho, double d_i, double sigma) {
  const double phi = 1.0 / (2.0 * Vii);
  const double tau = (eta_i + 2.0 * rho * d_i) / (4.0 * rho);
  const double kappa = sigma / (2.0 * rho);
  const double z = phi - tau;
  const double root = std::sqrt(z * z + kappa);
  double step;
  if (phi + tau > 0.0) {
    step = (kappa - 4.0 * phi * tau) / ((phi + tau) + root);
  } else {
    step = -(phi + tau) + root;
  }
  // 1 + step V_ii = V_ii (z + root); recompute the margin stably when it
  // would round to a nonpositive value.
  if (!(1.0 + step * Vii > 0.0)) {
    const double margin = z >= 0.0 ? z + root : kappa / (root - z);
    step = (margin * Vii - 1.0) / Vii;
    if (!(1.0 + step * Vii > 0.0)) step = std::nextafter(-1.0 / Vii, 0.0);
  }
  // Newton polish in extended precision: near the barrier the closed form
  // can be several ulps from the root.
  using ld = long double;
  auto g = [&](ld t) { return ld(eta_i) + 2 * ld(rho) * (ld(d_i) + t) - ld(sigma) * Vii / (1 + t * Vii); };
  ld t = step;
  for (int it = 0; it < 4; ++it) {
    const ld m = 1 + t * Vii;
    const ld next = t - g(t) / (2 * ld(rho) + ld(sigma) * Vii * Vii / (m * m));
    if (!(1 + next * Vii > 0)) break;
    t = next;
  }
  double best = step;
  for (double c : {static_cast<double>(t), std::nextafter(static_cast<double>(t), -HUGE_VAL),
                   std::nextafter(static_cast<double>(t), HUGE_VAL)}) {
    if (1.0 + c * Vii > 0.0 && std::abs(g(c)) < std::abs(g(best))) best = c;
  }
  return best;
}

/// Residual of the one-dimensional stationarity condition at step t.
inline double smooth_step_residual(double Vii, double eta_i, double rho, double d_i, double sigma, double t) {
  return eta_i + 2.0 * rho * (d_i + t) - sigma * Vii / (1.0 + t * Vii);
}

inline bool check_restart(const VectorXd& d, double mu, double factor = 10.0) {
  return max_abs(d) > factor * mu;
}

inline double update_sigma(double sigma, double ratio, const SeparationConfig& cfg) {
  return ratio <= cfg.eps_upd ? std::max(cfg.sigma_min, cfg.sigma_upd * sigma) : sigma;
}

/// Minimum-norm element of the subdifferential of
/// sum_i r_i(d_i) - sigma logdet, r_i = beta_i d for d > 0, eta_i d otherwise.
inline VectorXd nonsmooth_subgradient(const VectorXd& eta, const VectorXd& beta, double sigma,
                                      const VectorXd& d, const MatrixXd& V) {
  VectorXd s(d.size());
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    const double bar = sigma * V(j, j);
    if (d(j) > 0.0) {
      s(j) = beta(j) - bar;
    } else if (d(j) < 0.0) {
      s(j) = eta(j) - bar;
    } else {
      s(j) = std::clamp(0.0, eta(j) - bar, beta(j) - bar);
    }
  }
  return s;
}

/// Closed-form minimizer of r_i(d_i + t) - sigma log(1 + t V_ii).
inline double coordinate_step_nonsmooth(double Vii, double eta_i, double beta_i, double d_i, double sigma) {
  const double slack = 1.0 - d_i * Vii;
  if (slack <= 0.0) return sigma / beta_i - 1.0 / Vii;
  const double r = sigma * Vii / slack;
  if (r > beta_i) return sigma / beta_i - 1.0 / Vii;
  if (r < eta_i) return sigma / eta_i - 1.0 / Vii;
  return -d_i;
}

/// mu = -lambda_min(Q + alpha A'A); separation only runs when mu > 0.
inline double separation_shift(const MatrixXd& Q, const MatrixXd& A, double alpha) {
  MatrixXd M = Q;
  if (A.rows() > 0 && alpha != 0.0) M.noalias() += alpha * (A.transpose() * A);
  return -min_eigenvalue(M);
}

inline double log_det_pd(const MatrixXd& M) {
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw NumericalError("log_det_pd: matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline MatrixXd separation_base(const SeparationInput& in) {
  MatrixXd M = symmetric_part(in.Q);
  if (in.A.rows() > 0 && in.alpha != 0.0) M.noalias() += in.alpha * (in.A.transpose() * in.A);
  return M;
}

namespace detail {

inline void validate_separation_input(const SeparationInput& in) {
  const Eigen::Index n = in.Q.rows();
  if (n == 0 || in.Q.cols() != n) throw DomainError("separation: Q must be square and nonempty");
  if (in.eta.size() != n) throw DomainError("separation: eta has wrong length");
  if (in.A.rows() > 0 && in.A.cols() != n) throw DomainError("separation: A has wrong width");
  if (in.alpha < 0.0) throw DomainError("separation: alpha must be nonnegative");
  if ((in.eta.array() < -1e-10).any()) throw DomainError("separation: eta must be nonnegative");
}

/// Keeps the returned perturbation inside the certified cone.
inline void certify(const MatrixXd& base, SeparationResult& res) {
  MatrixXd M = base;
  M.diagonal() += res.d;
  if (psd_certificate(M, 1e-8)) return;
  const double lmin = min_eigenvalue(M);
  res.d.array() += -lmin + 1e-10 * std::max(1.0, max_abs(M));
  res.repaired = true;
}

inline double smooth_objective(const VectorXd& eta, double rho, const VectorXd& d) {
  return eta.dot(d) + rho * d.squaredNorm();
}

inline double nonsmooth_objective(const VectorXd& eta, double lambda, const VectorXd& d) {
  return eta.dot(d) + lambda * d.cwiseMax(0.0).sum();
}

inline bool stalled(double previous, double current, double eps) {
  const double denom = std::max({std::abs(previous), std::abs(current), 1e-12});
  return (previous - current) / denom < eps;
}

}  // namespace detail

inline SeparationResult solve_smooth(const SeparationInput& in, const SeparationConfig& cfg = {}) {
  detail::validate_separation_input(in);
  const Eigen::Index n = in.Q.rows();
  const MatrixXd base = separation_base(in);
  const double mu = -min_eigenvalue(base);
  if (!(mu > 0.0)) {
    throw DomainError("separation: Q + alpha A'A is positive semidefinite; separation is not needed");
  }
  const VectorXd eta = in.eta.cwiseMax(0.0);
  const VectorXd d_hat = VectorXd::Constant(n, 1.5 * mu);

  SeparationResult res;
  res.rho = cfg.rho_override > 0.0 ? cfg.rho_override : rho_init(q_max_upper(in.Q), in.delta_max);
  if (eta.squaredNorm() == 0.0) {
    res.d = d_hat;
    res.exact_relaxation = true;
    res.converged = true;
    res.objective = 0.0;
    return res;
  }
  const double eta_norm = eta.norm();
  const int max_iter = cfg.max_iter_per_var * static_cast<int>(n);
  const int check_every = cfg.omega_check * static_cast<int>(n);

  for (;;) {
    const double rho = res.rho;
    MatrixXd M0 = base;
    M0.diagonal() += d_hat;
    InverseState st = factor_inverse(M0);
    VectorXd d = d_hat;
    double sigma = sigma_init_smooth(eta, rho, d, st.V);
    double logdet = log_det_pd(M0);
    double last_check = detail::smooth_objective(eta, rho, d);
    bool restart = false;
    int k = 0;
    while (k < max_iter) {
      ++k;
      ++res.iterations;
      const VectorXd grad = smooth_gradient(eta, rho, sigma, d, st.V);
      const Eigen::Index i = select_index_smooth(grad);
      const double Vii = st.V(i, i);
      const double step = coordinate_step_smooth(Vii, eta(i), rho, d(i), sigma);
      d(i) += step;
      const bool can_restart = cfg.allow_restarts && res.restarts < cfg.max_restarts;
      if (check_restart(d, mu, cfg.restart_factor)) {
        if (can_restart) {
          restart = true;
          break;
        }
        res.restart_cap_hit = res.restart_cap_hit || cfg.allow_restarts;
      }
      logdet += std::log1p(step * Vii);
      sherman_morrison_update(st, i, step);
      const VectorXd g2 = smooth_gradient(eta, rho, sigma, d, st.V);
      const double new_sigma = update_sigma(sigma, g2.norm() / eta_norm, cfg);
      const bool sigma_changed = new_sigma != sigma;
      if (cfg.record_trace) {
        SeparationTraceEntry e;
        e.iteration = k;
        e.restart = res.restarts;
        e.index = static_cast<int>(i);
        e.delta = step;
        e.sigma = sigma;
        e.rho = rho;
        e.objective = detail::smooth_objective(eta, rho, d);
        e.penalized = e.objective - sigma * logdet;
        e.sigma_updated = sigma_changed;
        res.trace.push_back(e);
      }
      sigma = new_sigma;
      if (k % check_every == 0) {
        const double obj = detail::smooth_objective(eta, rho, d);
        if (detail::stalled(last_check, obj, cfg.eps_check)) {
          res.converged = true;
          break;
        }
        last_check = obj;
      }
    }
    res.refactorizations += st.refactorizations;
    if (restart) {
      res.rho *= cfg.rho_upd;
      ++res.restarts;
      continue;
    }
    res.max_iter_hit = !res.converged;
    res.d = d;
    res.sigma = sigma;
    res.objective = detail::smooth_objective(eta, rho, d);
    break;
  }
  detail::certify(base, res);
  return res;
}

inline SeparationResult solve_nonsmooth(const SeparationInput& in, const SeparationConfig& cfg = {}) {
  detail::validate_separation_input(in);
  const Eigen::Index n = in.Q.rows();
  const MatrixXd base = separation_base(in);
  const double mu = -min_eigenvalue(base);
  if (!(mu > 0.0)) {
    throw DomainError("separation: Q + alpha A'A is positive semidefinite; separation is not needed");
  }
  const VectorXd eta = in.eta.cwiseMax(0.0);
  const VectorXd d_hat = VectorXd::Constant(n, 1.5 * mu);

  SeparationResult res;
  res.lambda = eta.sum();
  if (!(res.lambda > 0.0)) {
    res.d = d_hat;
    res.exact_relaxation = true;
    res.converged = true;
    return res;
  }
  const VectorXd beta = eta.array() + res.lambda;
  const double beta_norm = beta.norm();
  const int max_iter = cfg.max_iter_per_var * static_cast<int>(n);
  const int check_every = cfg.omega_check * static_cast<int>(n);

  MatrixXd M0 = base;
  M0.diagonal() += d_hat;
  InverseState st = factor_inverse(M0);
  VectorXd d = d_hat;
  double sigma = sigma_init_nonsmooth(beta, st.V);
  double logdet = log_det_pd(M0);
  double last_check = detail::nonsmooth_objective(eta, res.lambda, d);
  int k = 0;
  while (k < max_iter) {
    ++k;
    ++res.iterations;
    const VectorXd s = nonsmooth_subgradient(eta, beta, sigma, d, st.V);
    const Eigen::Index i = argmax_abs(s);
    const double Vii = st.V(i, i);
    double step = coordinate_step_nonsmooth(Vii, eta(i), beta(i), d(i), sigma);
    if (!(1.0 + step * Vii > 0.0)) step = 0.0;
    d(i) += step;
    logdet += std::log1p(step * Vii);
    sherman_morrison_update(st, i, step);
    const VectorXd s2 = nonsmooth_subgradient(eta, beta, sigma, d, st.V);
    const double new_sigma = update_sigma(sigma, s2.norm() / beta_norm, cfg);
    if (cfg.record_trace) {
      SeparationTraceEntry e;
      e.iteration = k;
      e.index = static_cast<int>(i);
      e.delta = step;
      e.sigma = sigma;
      e.objective = detail::nonsmooth_objective(eta, res.lambda, d);
      e.penalized = e.objective - sigma * logdet;
      e.sigma_updated = new_sigma != sigma;
      res.trace.push_back(e);
    }
    sigma = new_sigma;
    if (k % check_every == 0) {
      const double obj = detail::nonsmooth_objective(eta, res.lambda, d);
      if (detail::stalled(last_check, obj, cfg.eps_check)) {
        res.converged = true;
        break;
      }
      last_check = obj;
    }
  }
  res.refactorizations = st.refactorizations;
  res.max_iter_hit = !res.converged;
  res.d = d;
  res.sigma = sigma;
  res.objective = detail::nonsmooth_objective(eta, res.lambda, d);
  detail::certify(base, res);
  return res;
}

inline SeparationResult separate(const SeparationInput& in, const SeparationConfig& cfg = {}) {
  return cfg.mode == SeparationMode::smooth ? solve_smooth(in, cfg) : solve_nonsmooth(in, cfg);
}

}  // namespace dqcut
