#pragma once

// Command-line front end: solve, gen, batch.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <ostream>
#include <string>

#include "dqcut/batch.hpp"
#include "dqcut/bnb.hpp"
#include "dqcut/errors.hpp"
#include "dqcut/generate.hpp"
#include "dqcut/model.hpp"

namespace dqcut {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_input = 2, exit_failure = 3 };

inline void write_trace(std::ostream& out, const std::vector<SeparationResult>& seps) {
  out << "separation,restart,iteration,index,delta,sigma,rho,objective\n";
  for (std::size_t s = 0; s < seps.size(); ++s) {
    for (const auto& t : seps[s].trace) {
      out << s << ',' << t.restart << ',' << t.iteration << ',' << t.index << ',' << format_number(t.delta) << ','
          << format_number(t.sigma) << ',' << format_number(t.rho) << ',' << format_number(t.objective) << "\n";
    }
  }
}

inline void print_report(std::ostream& out, const SolveReport& r) {
  out << "status " << to_string(r.status) << "\n"
      << "lower_bound " << format_number(r.lower_bound) << "\n"
      << "upper_bound " << format_number(r.upper_bound) << "\n"
      << "relative_gap_percent " << format_number(r.relative_gap) << "\n"
      << "nodes " << r.nodes << "\n"
      << "max_open_nodes " << r.max_open_nodes << "\n"
      << "time_s " << format_number(r.wall_time) << "\n"
      << "alpha " << format_number(r.alpha) << "\n"
      << "root_initial_bound " << format_number(r.root_initial_bound) << "\n"
      << "root_bound " << format_number(r.root_bound) << "\n"
      << "root_cuts " << r.root_cuts << "\n"
      << "qp_bounding " << (r.qp_bounding ? "on" : "off") << "\n";
  if (r.best_x.size() > 0) {
    out << "x";
    for (Eigen::Index i = 0; i < r.best_x.size(); ++i) out << ' ' << format_number(r.best_x(i));
    out << "\n";
  }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"dqcut: global solver for nonconvex mixed-integer QPs with equality constraints"};
  app.require_subcommand(1);

  std::string file, trace_path, sep = "smooth";
  BnbConfig bc;
  auto* solve_cmd = app.add_subcommand("solve", "Solve an instance by branch and bound");
  solve_cmd->add_option("file", file, "Instance JSON")->required();
  solve_cmd->add_option("--time-limit", bc.time_limit, "Wall-clock limit in seconds")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--rel-tol", bc.rel_tol, "Relative gap tolerance")->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--abs-tol", bc.abs_tol, "Absolute gap tolerance")->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--maxnc", bc.max_cuts, "Cuts added at the root")->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--node-limit", bc.node_limit, "Node limit")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--sep", sep, "Separation solver")->check(CLI::IsMember({"smooth", "nonsmooth"}));
  solve_cmd->add_option("--trace", trace_path, "Write the root separation trace as CSV");

  std::string family, gen_out;
  int gen_n = 0;
  double density = 0.0;
  std::uint64_t seed = 0;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a random instance");
  gen_cmd->add_option("family", family, "boxqp | binary_card | eq_integer")->required();
  gen_cmd->add_option("n", gen_n, "Number of variables")->required();
  gen_cmd->add_option("density", density, "Density of Q in (0,1]")->required();
  gen_cmd->add_option("seed", seed, "Seed")->required();
  gen_cmd->add_option("-o,--output", gen_out, "Output file (stdout if omitted)");

  std::string manifest, report;
  BatchOptions bo;
  auto* batch_cmd = app.add_subcommand("batch", "Root bounds (and optionally B&B) over a manifest");
  batch_cmd->add_option("manifest", manifest, "Manifest JSON")->required();
  batch_cmd->add_option("-o,--output", report, "CSV report")->required();
  batch_cmd->add_flag("--bnb", bo.bnb, "Also run branch and bound");
  batch_cmd->add_option("--time-limit", bo.time_limit, "B&B limit per instance")->check(CLI::PositiveNumber);
  batch_cmd->add_option("--maxnc", bo.max_cuts, "Cuts added at the root")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*solve_cmd) {
      MiqpInstance inst;
      try {
        inst = load_instance(file);
      } catch (const InfeasibleError& e) {
        // Inconsistent equality rows: nothing to search.
        err << "note: " << e.what() << "\n";
        SolveReport r;
        r.status = SolveStatus::infeasible;
        print_report(out, r);
        return exit_ok;
      }
      for (const auto& d : inst.diagnostics) err << "warning: " << d << "\n";
      bc.mode = sep == "smooth" ? SeparationMode::smooth : SeparationMode::nonsmooth;
      bc.record_trace = !trace_path.empty();
      const SolveReport r = solve(inst, bc);
      print_report(out, r);
      if (!trace_path.empty()) {
        std::ofstream t(trace_path);
        if (!t) throw Error("cannot write trace file '" + trace_path + "'");
        write_trace(t, r.root_separations);
      }
    } else if (*gen_cmd) {
      GeneratorOptions g;
      g.family = parse_family(family);
      g.n = gen_n;
      g.density = density;
      g.seed = seed;
      const MiqpInstance inst = generate_instance(g);
      if (gen_out.empty()) {
        out << to_json_text(inst);
      } else {
        save_instance(inst, gen_out);
      }
    } else if (*batch_cmd) {
      const auto rows = run_batch(load_manifest(manifest), bo);
      for (const auto& r : rows)
        if (!r.error.empty()) err << r.instance << ": " << r.error << "\n";
      std::ofstream csv(report);
      if (!csv) throw Error("cannot write report '" + report + "'");
      write_csv(csv, rows);
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_input;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return exit_input;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_failure;
  }
  return exit_ok;
}

}  // namespace dqcut
