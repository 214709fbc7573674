#pragma once

// Problem data for
//   min x'Qx + q'x  s.t.  Ax = b,  x_i in S_i,
// with bounded domains S_i, plus the per-variable hull functions
// l_i <= y_i <= u_i describing conv{(x_i, x_i^2) : x_i in S_i}.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dqcut/errors.hpp"
#include "dqcut/linalg.hpp"
#include "json.hpp"

namespace dqcut {

enum class DomainKind { interval, binary, two_point, integer_range };

inline std::string_view to_string(DomainKind k) {
  switch (k) {
    case DomainKind::interval: return "interval";
    case DomainKind::binary: return "binary";
    case DomainKind::two_point: return "two_point";
    case DomainKind::integer_range: return "integer_range";
  }
  return "?";
}

inline DomainKind parse_domain_kind(std::string_view s) {
  if (s == "interval") return DomainKind::interval;
  if (s == "binary") return DomainKind::binary;
  if (s == "two_point") return DomainKind::two_point;
  if (s == "integer_range") return DomainKind::integer_range;
  throw ValidationError("unsupported domain kind '" + std::string(s) + "'");
}

/// Discrete kinds need branching to reach feasibility.
inline bool is_discrete(DomainKind k) { return k != DomainKind::interval; }

/// Kinds whose convex hull of {(x, x^2)} is the segment y = secant(x).
inline bool has_affine_hull(DomainKind k) {
  return k == DomainKind::binary || k == DomainKind::two_point;
}

struct VariableDomain {
  DomainKind kind = DomainKind::interval;
  double L = 0.0;
  double U = 1.0;

  static VariableDomain interval(double lo, double hi) { return {DomainKind::interval, lo, hi}; }
  static VariableDomain binary() { return {DomainKind::binary, 0.0, 1.0}; }
  static VariableDomain two_point(double a, double b) { return {DomainKind::two_point, a, b}; }
  static VariableDomain integer_range(double lo, double hi) {
    return {DomainKind::integer_range, lo, hi};
  }

  friend bool operator==(const VariableDomain&, const VariableDomain&) = default;
};

inline void validate_domain(const VariableDomain& d, std::size_t i) {
  const std::string where = "domain " + std::to_string(i) + ": ";
  if (!std::isfinite(d.L) || !std::isfinite(d.U)) throw ValidationError(where + "bounds must be finite");
  if (d.L > d.U) throw ValidationError(where + "L > U");
  switch (d.kind) {
    case DomainKind::interval: break;
    case DomainKind::binary:
      if (d.L != 0.0 || d.U != 1.0) throw ValidationError(where + "binary requires L=0, U=1");
      break;
    case DomainKind::two_point:
      if (!(d.L < d.U)) throw ValidationError(where + "two_point requires distinct points");
      break;
    case DomainKind::integer_range:
      if (d.L != std::floor(d.L) || d.U != std::floor(d.U)) {
        throw ValidationError(where + "integer_range requires integral L and U");
      }
      break;
  }
}

/// Hull of (x, x^2) over one variable: u(x) = (L+U)x - LU is the secant;
/// l(x) is x^2 for interval/integer kinds and the secant otherwise.
struct HullTerm {
  enum class Lower { square, affine };
  double upper_slope = 0.0;
  double upper_intercept = 0.0;
  Lower lower = Lower::square;
  double lower_slope = 0.0;  // meaningful when lower == affine
  double lower_intercept = 0.0;
};

struct HullForm {
  std::vector<HullTerm> terms;
};

inline HullTerm make_hull_term(DomainKind kind, double L, double U) {
  HullTerm t;
  t.upper_slope = L + U;
  t.upper_intercept = -L * U;
  if (has_affine_hull(kind) || L == U) {
    t.lower = HullTerm::Lower::affine;
    t.lower_slope = t.upper_slope;
    t.lower_intercept = t.upper_intercept;
  }
  return t;
}

inline double secant(double L, double U, double x) { return (L + U) * x - L * U; }

struct MiqpInstance {
  int n = 0;
  int m = 0;
  MatrixXd Q;  // symmetric n x n
  VectorXd q;
  MatrixXd A;  // m x n, full row rank
  VectorXd b;
  std::vector<VariableDomain> domains;
  HullForm hull;
  std::vector<std::string> diagnostics;  // warnings raised during construction

  [[nodiscard]] VectorXd lower_bounds() const {
    VectorXd L(n);
    for (int i = 0; i < n; ++i) L(i) = domains[static_cast<std::size_t>(i)].L;
    return L;
  }
  [[nodiscard]] VectorXd upper_bounds() const {
    VectorXd U(n);
    for (int i = 0; i < n; ++i) U(i) = domains[static_cast<std::size_t>(i)].U;
    return U;
  }
  [[nodiscard]] const VariableDomain& domain(int i) const {
    return domains.at(static_cast<std::size_t>(i));
  }
};

/// Validates and canonicalizes raw data: symmetrizes Q, drops dependent
/// equality rows (checking consistency of b), derives the hull form.
inline MiqpInstance make_instance(MatrixXd Q, VectorXd q, MatrixXd A, VectorXd b,
                                  std::vector<VariableDomain> domains) {
  MiqpInstance inst;
  const Eigen::Index n = Q.rows();
  if (Q.cols() != n) throw ValidationError("Q must be square");
  if (q.size() != n) throw ValidationError("q has length " + std::to_string(q.size()) + ", expected n");
  if (static_cast<Eigen::Index>(domains.size()) != n) throw ValidationError("domains must have n entries");
  if (A.rows() > 0 && A.cols() != n) throw ValidationError("A must have n columns");
  if (A.rows() == 0) A.resize(0, n);
  if (b.size() != A.rows()) throw ValidationError("b must have m entries");
  if (!Q.allFinite() || !q.allFinite() || !A.allFinite() || !b.allFinite()) {
    throw ValidationError("problem data must be finite");
  }
  for (std::size_t i = 0; i < domains.size(); ++i) validate_domain(domains[i], i);

  const double asym = max_abs(MatrixXd(Q - Q.transpose()));
  if (asym > 1e-9 * std::max(1.0, max_abs(Q))) {
    inst.diagnostics.push_back("Q is not symmetric (max asymmetry " + std::to_string(asym) +
                               "); using (Q+Q')/2");
  }
  inst.Q = symmetric_part(Q);
  inst.q = std::move(q);

  const RowSelection sel = select_independent_rows(A, b);
  if (!sel.consistent) {
    throw InfeasibleError("equality constraints are inconsistent (dependent rows disagree on b)");
  }
  if (!sel.dropped.empty()) {
    std::string rows;
    for (auto r : sel.dropped) rows += (rows.empty() ? "" : ",") + std::to_string(r);
    inst.diagnostics.push_back("A is rank deficient; dropped dependent rows {" + rows + "}");
    MatrixXd Ak(static_cast<Eigen::Index>(sel.kept.size()), n);
    VectorXd bk(static_cast<Eigen::Index>(sel.kept.size()));
    for (std::size_t k = 0; k < sel.kept.size(); ++k) {
      Ak.row(static_cast<Eigen::Index>(k)) = A.row(sel.kept[k]);
      bk(static_cast<Eigen::Index>(k)) = b(sel.kept[k]);
    }
    A = std::move(Ak);
    b = std::move(bk);
  }
  inst.A = std::move(A);
  inst.b = std::move(b);
  inst.n = static_cast<int>(n);
  inst.m = static_cast<int>(inst.A.rows());
  inst.domains = std::move(domains);
  for (const auto& d : inst.domains) inst.hull.terms.push_back(make_hull_term(d.kind, d.L, d.U));
  return inst;
}

namespace detail {
inline void check_in_domain(const MiqpInstance& inst, int i, double x) {
  if (i < 0 || i >= inst.n) throw DomainError("variable index out of range");
  const auto& d = inst.domain(i);
  const double slack = 1e-12 * std::max({1.0, std::abs(d.L), std::abs(d.U)});
  if (!(x >= d.L - slack && x <= d.U + slack)) {
    throw DomainError("x = " + std::to_string(x) + " outside [" + std::to_string(d.L) + ", " +
                      std::to_string(d.U) + "] for variable " + std::to_string(i));
  }
}
}  // namespace detail

/// u_i(x) = (L_i + U_i) x - L_i U_i.
inline double hull_upper(const MiqpInstance& inst, int i, double x) {
  detail::check_in_domain(inst, i, x);
  const auto& t = inst.hull.terms[static_cast<std::size_t>(i)];
  return t.upper_slope * x + t.upper_intercept;
}

/// l_i(x): x^2 for interval/integer kinds, the secant for binary/two_point.
inline double hull_lower(const MiqpInstance& inst, int i, double x) {
  detail::check_in_domain(inst, i, x);
  const auto& t = inst.hull.terms[static_cast<std::size_t>(i)];
  return t.lower == HullTerm::Lower::square ? x * x : t.lower_slope * x + t.lower_intercept;
}

inline double evaluate_objective(const MiqpInstance& inst, const VectorXd& x) {
  if (x.size() != inst.n) throw DomainError("evaluate_objective: x has wrong length");
  return x.dot(inst.Q * x) + inst.q.dot(x);
}

inline bool is_feasible(const MiqpInstance& inst, const VectorXd& x, double tol) {
  if (x.size() != inst.n) return false;
  if (inst.m > 0 && max_abs(VectorXd(inst.A * x - inst.b)) > tol) return false;
  for (int i = 0; i < inst.n; ++i) {
    const auto& d = inst.domain(i);
    const double xi = x(i);
    if (xi < d.L - tol || xi > d.U + tol) return false;
    switch (d.kind) {
      case DomainKind::interval: break;
      case DomainKind::binary:
      case DomainKind::two_point:
        if (std::abs(xi - d.L) > tol && std::abs(xi - d.U) > tol) return false;
        break;
      case DomainKind::integer_range:
        if (std::abs(xi - std::round(xi)) > tol) return false;
        break;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// JSON instance files
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline const json& require_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

inline double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

inline long as_index(const json& v, const std::string& where) {
  if (!v.is_number_integer() && !(v.is_number() && v.get<double>() == std::floor(v.get<double>()))) {
    throw ParseError(where + ": expected an integer index");
  }
  return static_cast<long>(v.get<double>());
}

inline VectorXd read_vector(const json& j, const char* key, long len) {
  const json& arr = require_field(j, key);
  if (!arr.is_array()) throw ParseError(std::string("field '") + key + "': expected an array");
  if (static_cast<long>(arr.size()) != len) {
    throw ParseError(std::string("field '") + key + "': expected " + std::to_string(len) +
                     " entries, got " + std::to_string(arr.size()));
  }
  VectorXd v(len);
  for (long k = 0; k < len; ++k) {
    v(k) = as_number(arr[static_cast<std::size_t>(k)], std::string(key) + "[" + std::to_string(k) + "]");
  }
  return v;
}

struct Triplet {
  long i, j;
  double val;
};

inline std::vector<Triplet> read_triplets(const json& j, const char* key, long rows, long cols) {
  const json& arr = require_field(j, key);
  if (!arr.is_array()) throw ParseError(std::string("field '") + key + "': expected an array");
  std::vector<Triplet> out;
  std::vector<std::pair<long, long>> seen;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const std::string where = std::string(key) + "[" + std::to_string(k) + "]";
    const json& t = arr[k];
    if (!t.is_array() || t.size() != 3) throw ParseError(where + ": expected [i, j, value]");
    Triplet tr{as_index(t[0], where), as_index(t[1], where), as_number(t[2], where)};
    if (tr.i < 0 || tr.i >= rows || tr.j < 0 || tr.j >= cols) {
      throw ParseError(where + ": index (" + std::to_string(tr.i) + "," + std::to_string(tr.j) +
                       ") out of range");
    }
    seen.emplace_back(tr.i, tr.j);
    out.push_back(tr);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw ParseError(std::string("field '") + key + "': duplicate (i,j) entry");
  }
  return out;
}

/// Entries given once fill both (i,j) and (j,i); entries given on both
/// sides are averaged, i.e. (T + T')/2.
inline MatrixXd assemble_symmetric(const std::vector<Triplet>& trips, long n, std::vector<std::string>& warn) {
  MatrixXd T = MatrixXd::Zero(n, n);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> present =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
  for (const auto& t : trips) {
    T(t.i, t.j) = t.val;
    present(t.i, t.j) = true;
  }
  MatrixXd Q = MatrixXd::Zero(n, n);
  double asym = 0.0;
  for (long i = 0; i < n; ++i) {
    for (long j = i; j < n; ++j) {
      const bool up = present(i, j);
      const bool lo = present(j, i);
      double v = 0.0;
      if (up && lo && i != j) {
        v = 0.5 * (T(i, j) + T(j, i));
        asym = std::max(asym, std::abs(T(i, j) - T(j, i)));
      } else if (up) {
        v = T(i, j);
      } else if (lo) {
        v = T(j, i);
      }
      Q(i, j) = v;
      Q(j, i) = v;
    }
  }
  if (asym > 1e-9 * std::max(1.0, max_abs(Q))) {
    warn.push_back("Q triplets are not symmetric (max asymmetry " + std::to_string(asym) +
                   "); using (Q+Q')/2");
  }
  return Q;
}

}  // namespace detail

inline MiqpInstance instance_from_json(const nlohmann::json& j) {
  using detail::require_field;
  if (!j.is_object()) throw ParseError("instance must be a JSON object");
  const long n = detail::as_index(require_field(j, "n"), "n");
  if (n < 1) throw ParseError("n must be positive");
  const long m = j.contains("m") ? detail::as_index(j["m"], "m") : 0;
  if (m < 0) throw ParseError("m must be nonnegative");

  std::vector<std::string> warn;
  MatrixXd Q = detail::assemble_symmetric(detail::read_triplets(j, "Q", n, n), n, warn);
  VectorXd q = detail::read_vector(j, "q", n);
  MatrixXd A = MatrixXd::Zero(m, n);
  VectorXd b = VectorXd::Zero(m);
  if (m > 0) {
    for (const auto& t : detail::read_triplets(j, "A", m, n)) A(t.i, t.j) = t.val;
    b = detail::read_vector(j, "b", m);
  }

  const auto& doms = require_field(j, "domains");
  if (!doms.is_array() || static_cast<long>(doms.size()) != n) {
    throw ParseError("field 'domains': expected an array of n entries");
  }
  std::vector<VariableDomain> domains;
  for (std::size_t k = 0; k < doms.size(); ++k) {
    const std::string where = "domains[" + std::to_string(k) + "]";
    const auto& d = doms[k];
    if (!d.is_object()) throw ParseError(where + ": expected an object");
    auto kind_it = d.find("kind");
    if (kind_it == d.end() || !kind_it->is_string()) throw ParseError(where + ": missing 'kind'");
    VariableDomain dom;
    try {
      dom.kind = parse_domain_kind(kind_it->get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (dom.kind == DomainKind::binary && !d.contains("L") && !d.contains("U")) {
      dom.L = 0.0;
      dom.U = 1.0;
    } else {
      dom.L = detail::as_number(require_field(d, "L"), where + ".L");
      dom.U = detail::as_number(require_field(d, "U"), where + ".U");
    }
    if (auto pts = d.find("points"); pts != d.end()) {
      if (dom.kind != DomainKind::two_point || !pts->is_array() || pts->size() != 2) {
        throw ParseError(where + ": 'points' is only valid as a pair on two_point domains");
      }
      const double a = detail::as_number((*pts)[0], where + ".points");
      const double c = detail::as_number((*pts)[1], where + ".points");
      if (std::min(a, c) != dom.L || std::max(a, c) != dom.U) {
        throw ValidationError(where + ": two_point points must equal {L, U}");
      }
    }
    domains.push_back(dom);
  }
  MiqpInstance inst = make_instance(std::move(Q), std::move(q), std::move(A), std::move(b), std::move(domains));
  inst.diagnostics.insert(inst.diagnostics.begin(), warn.begin(), warn.end());
  return inst;
}

inline MiqpInstance parse_instance(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("instance JSON: ") + e.what());
  }
  return instance_from_json(j);
}

inline MiqpInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open instance file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_instance(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Canonical JSON: upper-triangle Q triplets and nonzero A triplets in
/// row-major order.
inline nlohmann::json to_json(const MiqpInstance& inst) {
  using nlohmann::json;
  json j;
  j["n"] = inst.n;
  j["m"] = inst.m;
  json Qt = json::array();
  for (int i = 0; i < inst.n; ++i)
    for (int k = i; k < inst.n; ++k)
      if (inst.Q(i, k) != 0.0) Qt.push_back(json::array({i, k, inst.Q(i, k)}));
  j["Q"] = std::move(Qt);
  j["q"] = std::vector<double>(inst.q.data(), inst.q.data() + inst.q.size());
  json At = json::array();
  for (int i = 0; i < inst.m; ++i)
    for (int k = 0; k < inst.n; ++k)
      if (inst.A(i, k) != 0.0) At.push_back(json::array({i, k, inst.A(i, k)}));
  j["A"] = std::move(At);
  j["b"] = std::vector<double>(inst.b.data(), inst.b.data() + inst.b.size());
  json doms = json::array();
  for (const auto& d : inst.domains) {
    doms.push_back({{"kind", std::string(to_string(d.kind))}, {"L", d.L}, {"U", d.U}});
  }
  j["domains"] = std::move(doms);
  return j;
}

inline std::string to_json_text(const MiqpInstance& inst) { return to_json(inst).dump(1) + "\n"; }

inline void save_instance(const MiqpInstance& inst, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write instance file '" + path + "'");
  out << to_json_text(inst);
}

}  // namespace dqcut
