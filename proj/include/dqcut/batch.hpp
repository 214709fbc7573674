#pragma once

// Batch harness: root bounds for every instance of a manifest, optional
// branch and bound, one CSV row per instance plus a geomean row.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dqcut/bnb.hpp"
#include "dqcut/errors.hpp"
#include "dqcut/metrics.hpp"
#include "dqcut/model.hpp"
#include "dqcut/relax.hpp"

namespace dqcut {

struct ManifestEntry {
  std::string path;  // resolved against the manifest directory
  std::optional<double> sdp_bound;
};

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("instances") || !j["instances"].is_array()) {
    throw ParseError(path + ": expected {\"instances\": [...]}");
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> out;
  for (const auto& e : j["instances"]) {
    if (!e.is_object() || !e.contains("path") || !e["path"].is_string()) {
      throw ParseError(path + ": every instance needs a string 'path'");
    }
    ManifestEntry me;
    std::filesystem::path p = e["path"].get<std::string>();
    me.path = p.is_absolute() ? p.string() : (base / p).string();
    if (e.contains("sdp_bound") && !e["sdp_bound"].is_null()) {
      if (!e["sdp_bound"].is_number()) throw ParseError(path + ": 'sdp_bound' must be a number");
      me.sdp_bound = e["sdp_bound"].get<double>();
    }
    out.push_back(std::move(me));
  }
  return out;
}

struct MetricsRow {
  std::string instance;
  int n = 0, m = 0;
  std::optional<double> alpha, eig, eigns, qcp_sreg, qcp_nsreg, sdp;
  std::optional<double> root_gap_sreg, root_gap_nsreg;
  std::optional<double> iters_sreg, iters_nsreg;
  std::optional<double> bnb_lb, bnb_ub, rel_gap, nodes, max_nodes;
  double time_s = 0.0;
  std::string status;
  std::string error;
};

struct BatchOptions {
  bool bnb = false;
  double time_limit = 60.0;
  int max_cuts = 20;
};

namespace detail {

struct RootBound {
  double bound;
  long iterations;
};

inline RootBound root_qcp_bound(const MiqpInstance& inst, double alpha, SeparationMode mode, int max_cuts,
                                double convex_bound) {
  CuttingSurfaceConfig cc;
  cc.max_cuts = max_cuts;
  cc.separation.mode = mode;
  const CuttingSurfaceResult cs = cutting_surface(inst, alpha, cc);
  if (cs.convex) return {convex_bound, 0};
  long it = 0;
  for (const auto& s : cs.separations) it += s.iterations;
  return {cs.bound, it};
}

}  // namespace detail

inline MetricsRow evaluate_instance(const ManifestEntry& e, const BatchOptions& opt) {
  MetricsRow row;
  row.instance = e.path;
  row.sdp = e.sdp_bound;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const MiqpInstance inst = load_instance(e.path);
    row.n = inst.n;
    row.m = inst.m;
    const AlphaSelection as = select_alpha(inst);
    row.alpha = as.alpha;
    const double mu = std::max(0.0, -min_eigenvalue(inst.Q));
    const MatrixXd Z = nullspace_basis(inst.A).Z;
    const double mu_ns = inst.m == 0 ? mu : std::max(0.0, -projected_min_eigenvalue(inst.Q, Z));
    const RelaxationSolution eig = solve_eigenvalue_relaxation(inst, mu);
    const RelaxationSolution eigns = inst.m == 0 ? eig : solve_eigenvalue_relaxation(inst, mu_ns);
    row.eig = eig.bound;
    row.eigns = eigns.bound;
    const auto s = detail::root_qcp_bound(inst, as.alpha, SeparationMode::smooth, opt.max_cuts, eigns.bound);
    const auto ns = detail::root_qcp_bound(inst, as.alpha, SeparationMode::nonsmooth, opt.max_cuts, eigns.bound);
    row.qcp_sreg = s.bound;
    row.qcp_nsreg = ns.bound;
    row.iters_sreg = static_cast<double>(s.iterations);
    row.iters_nsreg = static_cast<double>(ns.iterations);
    if (row.sdp) {
      row.root_gap_sreg = root_gap(*row.sdp, s.bound, eigns.bound);
      row.root_gap_nsreg = root_gap(*row.sdp, ns.bound, eigns.bound);
    }
    row.status = "root";
    if (opt.bnb) {
      BnbConfig bc;
      bc.time_limit = opt.time_limit;
      bc.max_cuts = opt.max_cuts;
      const SolveReport rep = solve(inst, bc);
      row.status = to_string(rep.status);
      if (std::isfinite(rep.lower_bound)) row.bnb_lb = rep.lower_bound;
      if (std::isfinite(rep.upper_bound)) row.bnb_ub = rep.upper_bound;
      if (std::isfinite(rep.relative_gap)) row.rel_gap = rep.relative_gap;
      row.nodes = static_cast<double>(rep.nodes);
      row.max_nodes = static_cast<double>(rep.max_open_nodes);
    }
  } catch (const InfeasibleError& ex) {
    row.status = "infeasible";
    row.error = ex.what();
  } catch (const std::exception& ex) {
    row.status = "error";
    row.error = ex.what();
  }
  row.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

inline std::vector<MetricsRow> run_batch(const std::vector<ManifestEntry>& entries, const BatchOptions& opt) {
  std::vector<MetricsRow> rows;
  rows.reserve(entries.size());
  for (const auto& e : entries) rows.push_back(evaluate_instance(e, opt));
  return rows;
}

inline const char* csv_header() {
  return "instance,n,m,alpha,eig,eigns,qcp_sreg,qcp_nsreg,sdp,root_gap_sreg,root_gap_nsreg,"
         "iters_sreg,iters_nsreg,bnb_lb,bnb_ub,rel_gap,nodes,max_nodes,time_s,status";
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string format_cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct AggregateRow {
  std::optional<double> iters_sreg, iters_nsreg, rel_gap, nodes, max_nodes, time_s;
};

/// Shifted geomeans: shift 10 for iteration and node counts, 1 for gaps
/// and times. Rows without a value in a column are skipped for it.
inline AggregateRow aggregate(const std::vector<MetricsRow>& rows) {
  auto col = [&](auto get, double shift) -> std::optional<double> {
    std::vector<double> v;
    for (const auto& r : rows)
      if (auto x = get(r)) v.push_back(std::max(0.0, *x));
    if (v.empty()) return std::nullopt;
    return shifted_geomean(v, shift);
  };
  AggregateRow a;
  a.iters_sreg = col([](const MetricsRow& r) { return r.iters_sreg; }, 10.0);
  a.iters_nsreg = col([](const MetricsRow& r) { return r.iters_nsreg; }, 10.0);
  a.rel_gap = col([](const MetricsRow& r) { return r.rel_gap; }, 1.0);
  a.nodes = col([](const MetricsRow& r) { return r.nodes; }, 10.0);
  a.max_nodes = col([](const MetricsRow& r) { return r.max_nodes; }, 10.0);
  a.time_s = col([](const MetricsRow& r) { return std::optional<double>(r.time_s); }, 1.0);
  return a;
}

inline void write_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << csv_header() << "\n";
  for (const auto& r : rows) {
    out << csv_quote(r.instance) << ',' << r.n << ',' << r.m << ',' << format_cell(r.alpha) << ','
        << format_cell(r.eig) << ',' << format_cell(r.eigns) << ',' << format_cell(r.qcp_sreg) << ','
        << format_cell(r.qcp_nsreg) << ',' << format_cell(r.sdp) << ',' << format_cell(r.root_gap_sreg) << ','
        << format_cell(r.root_gap_nsreg) << ',' << format_cell(r.iters_sreg) << ','
        << format_cell(r.iters_nsreg) << ',' << format_cell(r.bnb_lb) << ',' << format_cell(r.bnb_ub) << ','
        << format_cell(r.rel_gap) << ',' << format_cell(r.nodes) << ',' << format_cell(r.max_nodes) << ','
        << format_number(r.time_s) << ',' << csv_quote(r.status) << "\n";
  }
  if (rows.empty()) return;
  const AggregateRow a = aggregate(rows);
  out << "shifted_geomean,,,,,,,,,,," << format_cell(a.iters_sreg) << ',' << format_cell(a.iters_nsreg) << ",,,"
      << format_cell(a.rel_gap) << ',' << format_cell(a.nodes) << ',' << format_cell(a.max_nodes) << ','
      << format_cell(a.time_s) << ",\n";
}

}  // namespace dqcut
