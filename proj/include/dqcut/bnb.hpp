#pragma once

// Best-first branch and bound. The root is bounded by the cutting-surface
// QCP; every other node by one or two perturbed QPs, the first using the
// perturbation inherited from its parent.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "dqcut/errors.hpp"
#include "dqcut/linalg.hpp"
#include "dqcut/metrics.hpp"
#include "dqcut/model.hpp"
#include "dqcut/relax.hpp"
#include "dqcut/separation.hpp"

namespace dqcut {

enum class SolveStatus { optimal, infeasible, time_limit, node_limit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::time_limit: return "time_limit";
    case SolveStatus::node_limit: return "node_limit";
  }
  return "?";
}

struct BnbConfig {
  double time_limit = 60.0;  // seconds
  double rel_tol = 1e-6;
  double abs_tol = 1e-6;
  int max_cuts = 20;
  SeparationMode mode = SeparationMode::smooth;
  long node_limit = 1000000;
  bool record_pruned = false;
  bool record_trace = false;  // keep separation traces of the root loop
};

/// A box discarded by bound, with the bound that justified it.
struct PrunedBox {
  VectorXd L, U;
  double lower_bound = 0.0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::infeasible;
  double lower_bound = -std::numeric_limits<double>::infinity();
  double upper_bound = std::numeric_limits<double>::infinity();
  double relative_gap = std::numeric_limits<double>::infinity();  // percent
  VectorXd best_x;
  long nodes = 0;
  long max_open_nodes = 0;
  double wall_time = 0.0;
  double alpha = 0.0;
  bool convex = false;
  bool qp_bounding = false;
  double root_initial_bound = -std::numeric_limits<double>::infinity();
  double root_bound = -std::numeric_limits<double>::infinity();
  int root_cuts = 0;
  VectorXd d_root;
  long kkt_failures = 0;
  std::vector<PrunedBox> pruned;
  std::vector<SeparationResult> root_separations;
  std::vector<std::string> diagnostics;
};

// ---------------------------------------------------------------------------
// Enumeration oracle
// ---------------------------------------------------------------------------

struct OracleResult {
  bool feasible = false;
  double value = std::numeric_limits<double>::infinity();
  VectorXd x;
  long evaluated = 0;
};

namespace detail {

/// Global minimum of the objective over the continuous variables `cont`
/// with everything else fixed in x, by enumerating faces of the box: each
/// continuous variable sits at L, at U, or is free; on a face the only
/// interior candidate is the stationary point of a strictly convex
/// restriction.
inline void minimize_continuous(const MiqpInstance& inst, const std::vector<int>& cont, VectorXd x,
                                OracleResult& best) {
  const auto nc = cont.size();
  long faces = 1;
  for (std::size_t t = 0; t < nc; ++t) faces *= 3;
  for (long code = 0; code < faces; ++code) {
    long c = code;
    std::vector<int> freev;
    for (std::size_t t = 0; t < nc; ++t) {
      const int i = cont[t];
      const int s = static_cast<int>(c % 3);
      c /= 3;
      if (s == 0) x(i) = inst.domain(i).L;
      else if (s == 1) x(i) = inst.domain(i).U;
      else freev.push_back(i);
    }
    VectorXd cand = x;
    const auto nf = static_cast<Eigen::Index>(freev.size());
    if (nf > 0) {
      MatrixXd Af(inst.m, nf);
      VectorXd rhs = inst.b;
      VectorXd fixed = x;
      for (Eigen::Index r = 0; r < nf; ++r) {
        Af.col(r) = inst.A.col(freev[static_cast<std::size_t>(r)]);
        fixed(freev[static_cast<std::size_t>(r)]) = 0.0;
      }
      if (inst.m > 0) rhs -= inst.A * fixed;
      const RowSelection sel = select_independent_rows(Af, rhs);
      if (!sel.consistent) continue;
      MatrixXd Ak(static_cast<Eigen::Index>(sel.kept.size()), nf);
      VectorXd bk(static_cast<Eigen::Index>(sel.kept.size()));
      for (std::size_t t = 0; t < sel.kept.size(); ++t) {
        Ak.row(static_cast<Eigen::Index>(t)) = Af.row(sel.kept[t]);
        bk(static_cast<Eigen::Index>(t)) = rhs(sel.kept[t]);
      }
      const MatrixXd Z = nullspace_basis(Ak).Z;
      const VectorXd xh = least_norm_solution(Ak, bk);
      MatrixXd Qff(nf, nf);
      VectorXd g(nf);
      for (Eigen::Index r = 0; r < nf; ++r) {
        const int i = freev[static_cast<std::size_t>(r)];
        for (Eigen::Index s2 = 0; s2 < nf; ++s2) Qff(r, s2) = inst.Q(i, freev[static_cast<std::size_t>(s2)]);
        g(r) = inst.q(i) + 2.0 * inst.Q.row(i).dot(fixed);
      }
      VectorXd xf = xh;
      if (Z.cols() > 0) {
        const MatrixXd H = Z.transpose() * Qff * Z;
        if (min_eigenvalue(H) <= 1e-10 * std::max(1.0, max_abs(H))) continue;
        const VectorXd rhs_z = -Z.transpose() * (2.0 * Qff * xh + g);
        xf = xh + Z * (2.0 * H).ldlt().solve(rhs_z);
      }
      for (Eigen::Index r = 0; r < nf; ++r) cand(freev[static_cast<std::size_t>(r)]) = xf(r);
    }
    ++best.evaluated;
    if (!is_feasible(inst, cand, 1e-9)) continue;
    const double f = evaluate_objective(inst, cand);
    if (f < best.value) {
      best.value = f;
      best.x = cand;
      best.feasible = true;
    }
  }
}

}  // namespace detail

/// Exact global optimum by enumeration of discrete assignments and, for
/// continuous variables, faces of the box. Limited to at most 2^20
/// discrete combinations and 4 continuous variables.
inline OracleResult brute_force_oracle(const MiqpInstance& inst, long max_points = 1L << 20,
                                       int max_continuous = 4) {
  std::vector<int> disc, cont;
  std::vector<std::vector<double>> values;
  double combos = 1.0;
  for (int i = 0; i < inst.n; ++i) {
    const auto& d = inst.domain(i);
    if (d.kind == DomainKind::interval && d.L < d.U) {
      cont.push_back(i);
      continue;
    }
    disc.push_back(i);
    std::vector<double> v;
    if (d.kind == DomainKind::integer_range) {
      for (double t = d.L; t <= d.U; t += 1.0) v.push_back(t);
    } else if (d.L == d.U) {
      v.push_back(d.L);
    } else {
      v = {d.L, d.U};
    }
    combos *= static_cast<double>(v.size());
    values.push_back(std::move(v));
  }
  if (combos > static_cast<double>(max_points)) {
    throw DomainError("brute_force_oracle: " + std::to_string(static_cast<long long>(combos)) +
                      " discrete combinations exceed the cap");
  }
  if (static_cast<int>(cont.size()) > max_continuous) {
    throw DomainError("brute_force_oracle: too many continuous variables");
  }
  OracleResult best;
  VectorXd x = VectorXd::Zero(inst.n);
  std::vector<std::size_t> idx(disc.size(), 0);
  for (;;) {
    for (std::size_t t = 0; t < disc.size(); ++t) x(disc[t]) = values[t][idx[t]];
    if (cont.empty()) {
      ++best.evaluated;
      if (is_feasible(inst, x, 1e-9)) {
        const double f = evaluate_objective(inst, x);
        if (f < best.value) {
          best.value = f;
          best.x = x;
          best.feasible = true;
        }
      }
    } else {
      detail::minimize_continuous(inst, cont, x, best);
    }
    std::size_t t = 0;
    while (t < disc.size() && ++idx[t] == values[t].size()) idx[t++] = 0;
    if (t == disc.size()) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Primal heuristics
// ---------------------------------------------------------------------------

namespace detail {

inline double snap(const VariableDomain& d, double v) {
  switch (d.kind) {
    case DomainKind::interval: return std::clamp(v, d.L, d.U);
    case DomainKind::binary:
    case DomainKind::two_point: return std::abs(v - d.L) <= std::abs(v - d.U) ? d.L : d.U;
    case DomainKind::integer_range: return std::clamp(std::round(v), d.L, d.U);
  }
  return v;
}

/// Exact coordinate descent for m = 0: each variable moves to its best
/// admissible value with the others held.
inline void coordinate_polish(const MiqpInstance& inst, VectorXd& x) {
  if (inst.m != 0) return;
  VectorXd Qx = inst.Q * x;
  const double scale = 1e-12 * std::max(1.0, max_abs(inst.Q));
  for (int sweep = 0; sweep < 50; ++sweep) {
    bool improved = false;
    for (int i = 0; i < inst.n; ++i) {
      const auto& d = inst.domain(i);
      const double a = inst.Q(i, i);
      const double g = 2.0 * (Qx(i) - a * x(i)) + inst.q(i);
      auto f = [&](double t) { return a * t * t + g * t; };
      std::vector<double> cand = {d.L, d.U};
      if (a > 0.0) {
        const double t = -g / (2.0 * a);
        if (d.kind == DomainKind::interval) cand.push_back(std::clamp(t, d.L, d.U));
        if (d.kind == DomainKind::integer_range) {
          cand.push_back(std::clamp(std::floor(t), d.L, d.U));
          cand.push_back(std::clamp(std::ceil(t), d.L, d.U));
        }
      }
      double bestv = x(i), bestf = f(x(i));
      for (double c : cand) {
        if (f(c) < bestf - scale * (1.0 + std::abs(bestf))) {
          bestf = f(c);
          bestv = c;
        }
      }
      if (bestv != x(i)) {
        Qx += inst.Q.col(i) * (bestv - x(i));
        x(i) = bestv;
        improved = true;
      }
    }
    if (!improved) break;
  }
}

/// Fixes discrete variables one at a time (least fractional first) to the
/// nearest admissible value, propagating the equality rows after each
/// fixing; the remaining continuous part takes the phase-one point.
inline std::optional<VectorXd> rounding_dive(const MiqpInstance& inst, const VectorXd& xbar, VectorXd L,
                                             VectorXd U) {
  std::vector<int> order;
  for (int i = 0; i < inst.n; ++i)
    if (is_discrete(inst.domain(i).kind) && L(i) < U(i)) order.push_back(i);
  auto frac = [&](int i) { return std::abs(xbar(i) - snap(inst.domain(i), xbar(i))); };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac(a) < frac(b); });
  for (int i : order) {
    if (L(i) == U(i)) continue;
    const auto& d = inst.domain(i);
    const double lo = L(i), hi = U(i);
    std::vector<double> cand;
    const double v = std::clamp(xbar(i), lo, hi);
    if (d.kind == DomainKind::integer_range) {
      const double r = std::clamp(std::round(v), lo, hi);
      cand = {r, std::clamp(v >= r ? r + 1.0 : r - 1.0, lo, hi)};
    } else {
      const bool low_first = std::abs(v - lo) <= std::abs(v - hi);
      cand = low_first ? std::vector<double>{lo, hi} : std::vector<double>{hi, lo};
    }
    bool ok = false;
    for (double c : cand) {
      VectorXd L2 = L, U2 = U;
      L2(i) = U2(i) = c;
      if (propagate_bounds(inst, L2, U2)) {
        L = L2;
        U = U2;
        ok = true;
        break;
      }
    }
    if (!ok) return std::nullopt;
  }
  const ReducedProblem R = reduce(inst, L, U);
  if (R.infeasible) return std::nullopt;
  VectorXd xr;
  if (R.nfree() == 0) {
    xr.resize(0);
  } else if (inst.m == 0) {
    xr = R.restrict(xbar).cwiseMax(R.Lr).cwiseMin(R.Ur);
  } else if (R.single_point()) {
    xr = R.xhat;
  } else {
    xr = R.xhat + R.Z * R.z_start;
  }
  VectorXd x = R.full_x(xr);
  for (int i = 0; i < inst.n; ++i)
    if (is_discrete(inst.domain(i).kind)) x(i) = snap(inst.domain(i), x(i));
  return x;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

namespace detail {

struct Node {
  VectorXd L, U;
  VectorXd d;        // perturbation passed to children
  double lb = 0.0;
  int depth = 0;
  long id = 0;
  VectorXd x, y;     // relaxation solution used for branching
  bool convex = false;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.lb != b.lb) return a.lb > b.lb;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id > b.id;
  }
};

struct NodeBound {
  bool infeasible = false;
  double lb = -std::numeric_limits<double>::infinity();
  VectorXd d;
  RelaxationSolution sol;
  VectorXd L, U;  // box after propagation
  bool convex = false;
  bool kkt_failure = false;
};

class Search {
 public:
  Search(const MiqpInstance& inst, const BnbConfig& cfg) : inst_(inst), cfg_(cfg) {
    start_ = std::chrono::steady_clock::now();
  }

  SolveReport run();

 private:
  const MiqpInstance& inst_;
  BnbConfig cfg_;
  std::chrono::steady_clock::time_point start_;
  SolveReport rep_;
  double alpha_ = 0.0;
  bool qp_bounding_ = false;

  [[nodiscard]] double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  [[nodiscard]] double prune_tol() const {
    if (!std::isfinite(rep_.upper_bound)) return 0.0;
    return std::max(cfg_.abs_tol, cfg_.rel_tol * std::abs(rep_.upper_bound));
  }
  [[nodiscard]] bool prunable(double lb) const {
    return std::isfinite(rep_.upper_bound) && lb >= rep_.upper_bound - prune_tol();
  }

  void offer(const VectorXd& x) {
    if (!is_feasible(inst_, x, 1e-8)) return;
    const double f = evaluate_objective(inst_, x);
    if (f < rep_.upper_bound) {
      rep_.upper_bound = f;
      rep_.best_x = x;
    }
  }

  void heuristics(const RelaxationSolution& sol, const VectorXd& L, const VectorXd& U) {
    if (sol.x.size() != inst_.n) return;
    VectorXd x = sol.x;
    for (int i = 0; i < inst_.n; ++i) x(i) = snap(inst_.domain(i), x(i));
    if (is_feasible(inst_, x, 1e-8)) {
      VectorXd p = x;
      coordinate_polish(inst_, p);
      offer(x);
      offer(p);
    }
    if (auto dive = rounding_dive(inst_, sol.x, L, U)) {
      VectorXd p = *dive;
      coordinate_polish(inst_, p);
      offer(*dive);
      offer(p);
    }
  }

  RelaxationSolution qp(const ReducedProblem& R, const VectorXd& d, bool& failed) {
    RelaxationSolution s;
    try {
      s = solve_qp_reduced(inst_, R, d);
      if (!s.certified()) {
        IpmOptions tight = relaxation_ipm_options();
        tight.tol = 1e-11;
        tight.max_iter = 400;
        RelaxationSolution again = solve_qp_reduced(inst_, R, d, tight);
        if (again.certified() || again.kkt_residual < s.kkt_residual) s = std::move(again);
      }
    } catch (const NumericalError&) {
      s = RelaxationSolution{};
    }
    failed = !s.certified();
    return s;
  }

  NodeBound bound_node(const VectorXd& L, const VectorXd& U, const VectorXd& d_parent, double parent_lb);
  bool branch(const Node& node, std::vector<std::pair<VectorXd, VectorXd>>& children) const;
};

inline NodeBound Search::bound_node(const VectorXd& L, const VectorXd& U, const VectorXd& d_parent,
                                    double parent_lb) {
  NodeBound nb;
  ++rep_.nodes;
  const ReducedProblem R = reduce(inst_, L, U);
  nb.L = R.L;
  nb.U = R.U;
  nb.d = d_parent;
  if (R.infeasible) {
    nb.infeasible = true;
    return nb;
  }
  if (R.nfree() == 0 || R.single_point()) {
    nb.sol = solve_single_point(inst_, R);
    nb.lb = nb.sol.bound;
    nb.convex = true;
    return nb;
  }
  bool failed = false;
  if (convex_on_nullspace(R.Q, R.Z)) {
    nb.convex = true;
    nb.sol = qp(R, VectorXd::Zero(inst_.n), failed);
  } else if (qp_bounding_) {
    nb.sol = qp(R, d_parent, failed);
    if (!failed) {
      VectorXd eta = (nb.sol.yr - nb.sol.xr.cwiseProduct(nb.sol.xr)).cwiseMax(0.0);
      if (eta.size() > 0 && eta.maxCoeff() > 0.0) {
        SeparationConfig sc;
        sc.mode = cfg_.mode;
        std::optional<SeparationResult> sep;
        try {
          sep = separate_reduced(R, alpha_, eta, sc);
        } catch (const NumericalError&) {
          sep.reset();
        }
        if (sep && violates(cut_violation(R.Q, sep->d, nb.sol.xr, nb.sol.yr, nb.sol.vr), nb.sol.vr)) {
          const VectorXd d_new = R.embed(sep->d, d_parent);
          bool failed2 = false;
          RelaxationSolution s2 = qp(R, d_new, failed2);
          if (!failed2 && s2.bound >= nb.sol.bound) {
            nb.sol = std::move(s2);
            nb.d = d_new;
          }
        }
      }
    }
  } else {
    const double mu = std::max(0.0, -projected_min_eigenvalue(R.Q, R.Z));
    nb.sol = qp(R, VectorXd::Constant(inst_.n, mu), failed);
  }
  if (failed) {
    ++rep_.kkt_failures;
    nb.kkt_failure = true;
    nb.lb = parent_lb;
  } else {
    nb.lb = std::max(nb.sol.bound, parent_lb);
  }
  return nb;
}

/// Picks the variable with the largest eta among free variables; for
/// general integers with eta ~ 0 but fractional values, the most
/// fractional one. Returns false when the node needs no branching.
inline bool Search::branch(const Node& node, std::vector<std::pair<VectorXd, VectorXd>>& children) const {
  const int n = inst_.n;
  int best = -1;
  double best_eta = 1e-9;
  for (int i = 0; i < n; ++i) {
    if (!(node.U(i) > node.L(i))) continue;
    if (node.convex && !is_discrete(inst_.domain(i).kind)) continue;
    const double eta = node.y(i) - node.x(i) * node.x(i);
    if (eta > best_eta) {
      best_eta = eta;
      best = i;
    }
  }
  if (best < 0) {
    double best_frac = 1e-9;
    for (int i = 0; i < n; ++i) {
      if (!(node.U(i) > node.L(i))) continue;
      const auto& d = inst_.domain(i);
      if (!is_discrete(d.kind)) continue;
      const double f = std::abs(node.x(i) - snap(d, node.x(i)));
      if (f > best_frac) {
        best_frac = f;
        best = i;
      }
    }
  }
  if (best < 0) return false;
  const int i = best;
  const double lo = node.L(i), hi = node.U(i);
  const double xb = std::clamp(node.x(i), lo, hi);
  VectorXd L1 = node.L, U1 = node.U, L2 = node.L, U2 = node.U;
  switch (inst_.domain(i).kind) {
    case DomainKind::binary:
    case DomainKind::two_point:
      U1(i) = lo;
      L2(i) = hi;
      break;
    case DomainKind::integer_range: {
      double f = std::floor(xb);
      if (std::abs(xb - std::round(xb)) <= 1e-9) {
        f = std::round(xb);
        if (f >= hi) f = hi - 1.0;
      }
      U1(i) = f;
      L2(i) = f + 1.0;
      break;
    }
    case DomainKind::interval: {
      const double w = hi - lo;
      const double p = std::clamp(xb, lo + 0.1 * w, hi - 0.1 * w);
      U1(i) = p;
      L2(i) = p;
      break;
    }
  }
  children.emplace_back(L1, U1);
  children.emplace_back(L2, U2);
  return true;
}

inline SolveReport Search::run() {
  const VectorXd L0 = inst_.lower_bounds();
  const VectorXd U0 = inst_.upper_bounds();
  rep_.diagnostics = inst_.diagnostics;

  const ReducedProblem R0 = reduce(inst_, L0, U0);
  if (R0.infeasible) {
    rep_.status = SolveStatus::infeasible;
    rep_.nodes = 1;
    rep_.wall_time = elapsed();
    return rep_;
  }

  // Root.
  Node root;
  root.id = 0;
  const AlphaSelection as = select_alpha(inst_);
  alpha_ = as.alpha;
  rep_.alpha = alpha_;
  const MatrixXd Z = nullspace_basis(inst_.A).Z;
  rep_.convex = convex_on_nullspace(inst_.Q, Z);
  ++rep_.nodes;
  RelaxationSolution root_sol;
  if (rep_.convex) {
    bool failed = false;
    root_sol = qp(R0, VectorXd::Zero(inst_.n), failed);
    if (failed) ++rep_.kkt_failures;
    root.d = VectorXd::Zero(inst_.n);
    root.lb = failed ? -std::numeric_limits<double>::infinity() : root_sol.bound;
    root.convex = true;
    rep_.root_initial_bound = rep_.root_bound = root.lb;
  } else {
    CuttingSurfaceConfig cc;
    cc.max_cuts = cfg_.max_cuts;
    cc.separation.mode = cfg_.mode;
    cc.separation.record_trace = cfg_.record_trace;
    CuttingSurfaceResult cs = cutting_surface(inst_, alpha_, cc);
    rep_.root_initial_bound = cs.initial_bound;
    rep_.root_bound = cs.bound;
    rep_.root_cuts = static_cast<int>(cs.pool.size()) - 1;
    rep_.kkt_failures += cs.solver_failures;
    if (cfg_.record_trace) rep_.root_separations = cs.separations;
    rep_.d_root = surrogate_root_perturbation(cs.pool);
    qp_bounding_ = cs.bound > cs.initial_bound + 1e-9;
    root.d = rep_.d_root;
    root.lb = cs.bound;
    root_sol = cs.last;
  }
  rep_.qp_bounding = qp_bounding_;
  root.L = R0.L;
  root.U = R0.U;
  root.x = root_sol.x;
  root.y = root_sol.y;
  heuristics(root_sol, R0.L, R0.U);

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long next_id = 1;
  rep_.status = SolveStatus::optimal;
  if (root.x.size() == inst_.n) {
    open.push(root);
  }
  rep_.max_open_nodes = static_cast<long>(open.size());

  while (!open.empty()) {
    if (elapsed() > cfg_.time_limit) {
      rep_.status = SolveStatus::time_limit;
      break;
    }
    if (rep_.nodes >= cfg_.node_limit) {
      rep_.status = SolveStatus::node_limit;
      break;
    }
    Node node = open.top();
    open.pop();
    if (prunable(node.lb)) {
      if (cfg_.record_pruned) rep_.pruned.push_back({node.L, node.U, node.lb});
      continue;
    }
    std::vector<std::pair<VectorXd, VectorXd>> kids;
    if (!branch(node, kids)) {
      // Relaxation solution is feasible; the heuristics already offered it.
      VectorXd x = node.x;
      for (int i = 0; i < inst_.n; ++i) x(i) = snap(inst_.domain(i), x(i));
      offer(x);
      if (cfg_.record_pruned) rep_.pruned.push_back({node.L, node.U, node.lb});
      continue;
    }
    for (auto& [L, U] : kids) {
      NodeBound nb = bound_node(L, U, node.d, node.lb);
      if (nb.infeasible) continue;
      if (nb.sol.x.size() == inst_.n) heuristics(nb.sol, nb.L, nb.U);
      if (prunable(nb.lb)) {
        if (cfg_.record_pruned) rep_.pruned.push_back({nb.L, nb.U, nb.lb});
        continue;
      }
      if (nb.sol.x.size() != inst_.n) continue;
      Node child;
      child.L = nb.L;
      child.U = nb.U;
      child.d = nb.d;
      child.lb = nb.lb;
      child.depth = node.depth + 1;
      child.id = next_id++;
      child.x = nb.sol.x;
      child.y = nb.sol.y;
      child.convex = nb.convex;
      open.push(std::move(child));
    }
    rep_.max_open_nodes = std::max(rep_.max_open_nodes, static_cast<long>(open.size()));
  }

  double open_lb = std::numeric_limits<double>::infinity();
  while (!open.empty()) {
    open_lb = std::min(open_lb, open.top().lb);
    open.pop();
  }
  if (rep_.status == SolveStatus::optimal) {
    if (!std::isfinite(rep_.upper_bound)) {
      rep_.status = SolveStatus::infeasible;
      rep_.lower_bound = std::numeric_limits<double>::infinity();
    } else {
      rep_.lower_bound = rep_.upper_bound;
    }
  } else {
    rep_.lower_bound = std::min(open_lb, rep_.upper_bound);
  }
  if (std::isfinite(rep_.lower_bound) && std::isfinite(rep_.upper_bound)) {
    rep_.relative_gap = dqcut::relative_gap(rep_.lower_bound, rep_.upper_bound);
  }
  rep_.wall_time = elapsed();
  return rep_;
}

}  // namespace detail

inline SolveReport solve(const MiqpInstance& inst, const BnbConfig& cfg = {}) {
  detail::Search s(inst, cfg);
  return s.run();
}

}  // namespace dqcut
