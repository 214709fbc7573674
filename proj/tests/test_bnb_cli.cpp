#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dqcut/cli.hpp"
#include "support.hpp"

using namespace dqcut;
namespace fs = std::filesystem;

namespace {

BnbConfig exact_config() {
  BnbConfig c;
  c.rel_tol = 0.0;
  c.abs_tol = 1e-7;
  return c;
}

/// All feasible points of a small pure-discrete instance.
std::vector<VectorXd> enumerate_feasible(const MiqpInstance& inst) {
  std::vector<VectorXd> out;
  std::vector<std::vector<double>> vals;
  for (const auto& d : inst.domains) {
    std::vector<double> v;
    if (d.kind == DomainKind::integer_range)
      for (double t = d.L; t <= d.U; t += 1) v.push_back(t);
    else
      v = {d.L, d.U};
    vals.push_back(v);
  }
  std::vector<std::size_t> idx(vals.size(), 0);
  VectorXd x(inst.n);
  for (;;) {
    for (int i = 0; i < inst.n; ++i) x(i) = vals[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
    if (is_feasible(inst, x, 1e-9)) out.push_back(x);
    std::size_t t = 0;
    while (t < idx.size() && ++idx[t] == vals[t].size()) idx[t++] = 0;
    if (t == idx.size()) break;
  }
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int cli(std::vector<std::string> args, std::string& out, std::string& err) {
  args.insert(args.begin(), "dqcut");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  out = o.str();
  err = e.str();
  return rc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------- bnb

TEST(Bnb, TwoBinaryExample) {
  MatrixXd Q(2, 2);
  Q << 0, 2, 2, 0;
  const auto inst = make_instance(Q, VectorXd::Constant(2, -1.0), MatrixXd(0, 2), VectorXd(0),
                                  {VariableDomain::binary(), VariableDomain::binary()});
  EXPECT_DOUBLE_EQ(brute_force_oracle(inst).value, -1.0);
  const auto r = solve(inst);
  EXPECT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.upper_bound, -1.0, 1e-9);
  EXPECT_NEAR(std::abs(r.best_x(0) - r.best_x(1)), 1.0, 1e-9);
}

TEST(Bnb, ConvexInstanceSolvedAtRoot) {
  const auto inst = make_instance(MatrixXd::Identity(3, 3), Eigen::Vector3d(-1, 0.5, 0), MatrixXd(0, 3), VectorXd(0),
                                  {VariableDomain::interval(-1, 1), VariableDomain::interval(-1, 1),
                                   VariableDomain::interval(-1, 1)});
  const auto r = solve(inst);
  EXPECT_EQ(r.status, SolveStatus::optimal);
  EXPECT_EQ(r.nodes, 1);
  EXPECT_TRUE(r.convex);
  EXPECT_NEAR(r.upper_bound, -0.25 - 0.0625, 1e-7);
}

TEST(Bnb, InfeasibleBoxAndRows) {
  MatrixXd A(1, 3);
  A << 1, 1, 1;
  const auto inst = make_instance(-MatrixXd::Identity(3, 3), VectorXd::Zero(3), A, VectorXd::Constant(1, 2.5),
                                  {VariableDomain::binary(), VariableDomain::binary(), VariableDomain::binary()});
  const auto r = solve(inst);
  EXPECT_EQ(r.status, SolveStatus::infeasible);
  EXPECT_FALSE(brute_force_oracle(inst).feasible);
}

TEST(Bnb, OracleWithEqualityFilter) {
  MatrixXd A(1, 3);
  A << 1, 1, 1;
  MatrixXd Q = MatrixXd::Zero(3, 3);
  const auto inst = make_instance(Q, Eigen::Vector3d(3, 1, 2), A, VectorXd::Ones(1),
                                  {VariableDomain::binary(), VariableDomain::binary(), VariableDomain::binary()});
  const auto o = brute_force_oracle(inst);
  EXPECT_DOUBLE_EQ(o.value, 1.0);
  EXPECT_EQ(o.x, Eigen::Vector3d(0, 1, 0));
}

TEST(Bnb, OracleOnFixedInstance) {
  const auto inst = make_instance(MatrixXd::Identity(2, 2), Eigen::Vector2d(1, 1), MatrixXd(0, 2), VectorXd(0),
                                  {VariableDomain::interval(2, 2), VariableDomain::integer_range(-1, -1)});
  EXPECT_DOUBLE_EQ(brute_force_oracle(inst).value, 4 + 1 + 2 - 1);
  EXPECT_NEAR(solve(inst).upper_bound, 6.0, 1e-12);
}

TEST(Bnb, OracleCapAndContinuousFaces) {
  GeneratorOptions g;
  g.family = Family::binary_card;
  g.n = 21;
  EXPECT_THROW(brute_force_oracle(generate_instance(g)), DomainError);
  // min -x^2 + x over [-1, 2]: endpoints give -2 and -2; interior stationary
  // point is a maximum. Convex direction: (x - 0.3)^2.
  const auto inst = make_instance(Eigen::Vector2d(-1, 1).asDiagonal().toDenseMatrix(), Eigen::Vector2d(1, -0.6),
                                  MatrixXd(0, 2), VectorXd(0),
                                  {VariableDomain::interval(-1, 2), VariableDomain::interval(-1, 1)});
  EXPECT_NEAR(brute_force_oracle(inst).value, -2.0 - 0.09, 1e-12);
}

TEST(Bnb, MatchesOracleOnSeededDiscreteInstances) {
  for (int k = 0; k < 30; ++k) {
    GeneratorOptions g;
    g.family = k % 2 ? Family::binary_card : Family::eq_integer;
    g.n = 4 + k % 6;
    g.density = 0.7;
    g.seed = 500 + static_cast<std::uint64_t>(k);
    const auto inst = generate_instance(g);
    const auto o = brute_force_oracle(inst);
    const auto r = solve(inst, exact_config());
    ASSERT_EQ(r.status, o.feasible ? SolveStatus::optimal : SolveStatus::infeasible);
    if (!o.feasible) continue;
    EXPECT_NEAR(r.upper_bound, o.value, 1e-6) << "seed " << g.seed;
    EXPECT_TRUE(is_feasible(inst, r.best_x, 1e-8));
    EXPECT_LE(r.lower_bound, r.upper_bound + 1e-9);
  }
}

TEST(Bnb, MatchesOracleOnSmallBoxQp) {
  for (int k = 0; k < 6; ++k) {
    GeneratorOptions g;
    g.family = Family::boxqp;
    g.n = 2 + k % 3;
    g.seed = 600 + static_cast<std::uint64_t>(k);
    const auto inst = generate_instance(g);
    const auto r = solve(inst);
    const auto o = brute_force_oracle(inst);
    EXPECT_EQ(r.status, SolveStatus::optimal);
    EXPECT_NEAR(r.upper_bound, o.value, 1e-6 * std::max(1.0, std::abs(o.value)) + 1e-6);
  }
}

TEST(Bnb, PrunedBoxesHoldNoBetterPoint) {
  for (int k = 0; k < 8; ++k) {
    GeneratorOptions g;
    g.family = k % 2 ? Family::binary_card : Family::eq_integer;
    g.n = 6 + k % 3;
    g.seed = 700 + static_cast<std::uint64_t>(k);
    const auto inst = generate_instance(g);
    BnbConfig cfg;
    cfg.record_pruned = true;
    const auto r = solve(inst, cfg);
    if (r.status != SolveStatus::optimal) continue;
    const auto pts = enumerate_feasible(inst);
    for (const auto& box : r.pruned) {
      for (const auto& x : pts) {
        const bool inside = ((x - box.L).minCoeff() >= -1e-9) && ((box.U - x).minCoeff() >= -1e-9);
        if (!inside) continue;
        EXPECT_GE(evaluate_objective(inst, x), r.upper_bound - cfg.abs_tol - 1e-6 * std::abs(r.upper_bound));
        EXPECT_GE(evaluate_objective(inst, x), box.lower_bound - 1e-7 * std::max(1.0, std::abs(box.lower_bound)));
      }
    }
  }
}

TEST(Bnb, LimitsProduceStatusCodes) {
  GeneratorOptions g;
  g.family = Family::boxqp;
  g.n = 30;
  g.seed = 42;
  const auto inst = generate_instance(g);
  BnbConfig cfg;
  cfg.node_limit = 3;
  const auto r = solve(inst, cfg);
  EXPECT_EQ(r.status, SolveStatus::node_limit);
  EXPECT_LE(r.lower_bound, r.upper_bound + 1e-9);
  EXPECT_TRUE(std::isfinite(r.relative_gap));
  BnbConfig quick;
  quick.time_limit = 1e-9;
  EXPECT_EQ(solve(inst, quick).status, SolveStatus::time_limit);
}

TEST(Bnb, RootPerturbationAndAlphaAreReported) {
  const auto inst = dqcut::testing::family_instance(2, 8);
  const auto r = solve(inst);
  EXPECT_EQ(r.alpha, select_alpha(inst).alpha);
  if (!r.convex) {
    ASSERT_EQ(r.d_root.size(), inst.n);
    EXPECT_GE(r.root_bound, r.root_initial_bound);
    EXPECT_EQ(r.qp_bounding, r.root_bound > r.root_initial_bound + 1e-9);
  }
}

// ---------------------------------------------------------------- metrics

TEST(Metrics, RootGap) {
  EXPECT_NEAR(*root_gap(-10, -12, -20), 20.0, 1e-12);
  EXPECT_NEAR(*root_gap(-10, -10, -20), 0.0, 1e-12);
  EXPECT_NEAR(*root_gap(-10, -20, -20), 100.0, 1e-12);
  EXPECT_FALSE(root_gap(-10, -12, -10).has_value());
  EXPECT_FALSE(root_gap(-10, -12, -5).has_value());
}

TEST(Metrics, RelativeGap) {
  EXPECT_NEAR(relative_gap(-12, -10), 100.0 / 6.0, 1e-12);
  EXPECT_EQ(relative_gap(3, 3), 0.0);
  EXPECT_NEAR(relative_gap(0, 1), 1e5, 1e-9);
}

TEST(Metrics, ShiftedGeomean) {
  const std::vector<double> a = {1, 10};
  EXPECT_NEAR(shifted_geomean(a, 1), std::sqrt(22.0) - 1, 1e-12);
  const std::vector<double> c = {4.5, 4.5, 4.5};
  EXPECT_NEAR(shifted_geomean(c, 1), 4.5, 1e-12);
  const std::vector<double> z = {0, 0};
  EXPECT_NEAR(shifted_geomean(z, 10), 0.0, 1e-12);
  EXPECT_THROW(shifted_geomean(std::vector<double>{}, 1), DomainError);
}

// ---------------------------------------------------------------- generator

TEST(Generator, Deterministic) {
  for (int f = 0; f < 3; ++f) {
    GeneratorOptions g;
    g.family = static_cast<Family>(f);
    g.n = 9;
    g.density = 0.4;
    g.seed = 99;
    EXPECT_EQ(to_json_text(generate_instance(g)), to_json_text(generate_instance(g)));
    GeneratorOptions h = g;
    h.seed = 100;
    EXPECT_NE(to_json_text(generate_instance(g)), to_json_text(generate_instance(h)));
  }
}

TEST(Generator, FamilyShapes) {
  GeneratorOptions g;
  g.family = Family::binary_card;
  g.n = 6;
  const auto bc = generate_instance(g);
  EXPECT_EQ(bc.m, 1);
  EXPECT_EQ(bc.A, MatrixXd::Ones(1, 6));
  EXPECT_EQ(bc.b(0), 3.0);
  g.family = Family::boxqp;
  const auto bq = generate_instance(g);
  EXPECT_EQ(bq.m, 0);
  EXPECT_EQ(select_alpha(bq).alpha, 0.0);
  for (const auto& d : bq.domains) EXPECT_EQ(d, VariableDomain::interval(0, 1));
  g.family = Family::eq_integer;
  g.n = 12;
  const auto ei = generate_instance(g);
  EXPECT_EQ(ei.m, 3);
  EXPECT_EQ(numerical_rank(ei.A), 3);
  EXPECT_EQ(solve(ei).status, SolveStatus::optimal);
  for (int i = 0; i < ei.n; ++i) {
    for (int j = 0; j < ei.n; ++j) {
      EXPECT_LE(std::abs(ei.Q(i, j)), 50.0);
      EXPECT_EQ(ei.Q(i, j), std::round(ei.Q(i, j)));
    }
  }
  g.n = 7;
  EXPECT_TRUE(brute_force_oracle(generate_instance(g)).feasible);
  g.n = 1;
  EXPECT_THROW(generate_instance(g), ValidationError);
  g.n = 4;
  g.density = 0.0;
  EXPECT_THROW(generate_instance(g), ValidationError);
}

// ---------------------------------------------------------------- batch / cli

TEST(Batch, ManifestToCsv) {
  TempDir dir("dqcut_batch_test");
  for (int k = 0; k < 3; ++k) {
    save_instance(dqcut::testing::family_instance(k, 5), (dir.path / ("i" + std::to_string(k) + ".json")).string());
  }
  std::ofstream(dir.path / "manifest.json")
      << R"({"instances":[{"path":"i0.json","sdp_bound":-1e9},{"path":"i1.json"},{"path":"i2.json","sdp_bound":1e6}]})";
  const auto entries = load_manifest((dir.path / "manifest.json").string());
  ASSERT_EQ(entries.size(), 3u);
  BatchOptions opt;
  opt.bnb = true;
  const auto rows = run_batch(entries, opt);
  ASSERT_EQ(rows.size(), 3u);
  // Supplied SDP bound below the QP bound: gap undefined.
  EXPECT_FALSE(rows[0].root_gap_sreg.has_value());
  EXPECT_FALSE(rows[1].root_gap_sreg.has_value());
  EXPECT_TRUE(rows[2].root_gap_sreg.has_value());
  for (const auto& r : rows) {
    EXPECT_EQ(r.status, "optimal");
    EXPECT_GE(*r.qcp_sreg, *r.eigns - 1e-9 * std::max(1.0, std::abs(*r.eigns)));
    EXPECT_LE(*r.bnb_lb, *r.bnb_ub + 1e-9);
  }
  std::ostringstream csv;
  write_csv(csv, rows);
  std::istringstream in(csv.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], csv_header());
  EXPECT_EQ(lines[4].rfind("shifted_geomean,", 0), 0u);

  // Aggregate matches a recomputation from the rows.
  std::vector<double> nodes;
  for (const auto& r : rows) nodes.push_back(*r.nodes);
  EXPECT_NEAR(*aggregate(rows).nodes, shifted_geomean(nodes, 10.0), 1e-12);

  // Printed bounds re-parse to the printed value.
  const double v = std::stod(format_number(*rows[0].eig));
  EXPECT_EQ(format_number(v), format_number(*rows[0].eig));

  // Rerun: identical modulo the timing column.
  const auto again = run_batch(entries, opt);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(format_cell(rows[k].qcp_sreg), format_cell(again[k].qcp_sreg));
    EXPECT_EQ(format_cell(rows[k].bnb_ub), format_cell(again[k].bnb_ub));
    EXPECT_EQ(rows[k].nodes, again[k].nodes);
  }
}

TEST(Batch, FailuresAreRecordedAndBatchContinues) {
  TempDir dir("dqcut_batch_fail");
  save_instance(dqcut::testing::family_instance(0, 4), (dir.path / "ok.json").string());
  std::ofstream(dir.path / "bad.json") << "{not json";
  std::ofstream(dir.path / "m.json") << R"({"instances":[{"path":"bad.json"},{"path":"ok.json"}]})";
  const auto rows = run_batch(load_manifest((dir.path / "m.json").string()), {});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].status, "error");
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_EQ(rows[1].status, "root");
}

TEST(Cli, GenerateIsByteIdentical) {
  TempDir dir("dqcut_cli_gen");
  std::string out, err;
  const auto a = (dir.path / "a.json").string(), b = (dir.path / "b.json").string();
  ASSERT_EQ(cli({"gen", "binary_card", "6", "0.5", "3", "-o", a}, out, err), 0) << err;
  ASSERT_EQ(cli({"gen", "binary_card", "6", "0.5", "3", "-o", b}, out, err), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  ASSERT_EQ(cli({"gen", "binary_card", "6", "0.5", "3"}, out, err), 0);
  EXPECT_EQ(out, slurp(a));
  EXPECT_EQ(cli({"gen", "nope", "6", "0.5", "3"}, out, err), exit_input);
  EXPECT_EQ(cli({"gen", "boxqp", "1", "0.5", "3"}, out, err), exit_input);
}

TEST(Cli, SolveReportsOptimum) {
  TempDir dir("dqcut_cli_solve");
  const auto f = (dir.path / "p.json").string();
  std::ofstream(f) << R"({"n":2,"Q":[[0,1,2]],"q":[-1,-1],"domains":[{"kind":"binary"},{"kind":"binary"}]})";
  std::string out, err;
  ASSERT_EQ(cli({"solve", f, "--sep", "nonsmooth", "--trace", (dir.path / "t.csv").string()}, out, err), 0) << err;
  EXPECT_NE(out.find("status optimal"), std::string::npos);
  EXPECT_NE(out.find("upper_bound -1\n"), std::string::npos);
  EXPECT_EQ(slurp(dir.path / "t.csv").rfind("separation,restart,iteration", 0), 0u);
}

TEST(Cli, SolveInfeasibleAndBadInput) {
  TempDir dir("dqcut_cli_bad");
  const auto f = (dir.path / "inf.json").string();
  std::ofstream(f) << R"({"n":2,"m":2,"Q":[],"q":[0,0],"A":[[0,0,1],[1,0,1]],"b":[0,1],
    "domains":[{"kind":"binary"},{"kind":"binary"}]})";
  std::string out, err;
  EXPECT_EQ(cli({"solve", f}, out, err), 0);
  EXPECT_NE(out.find("status infeasible"), std::string::npos);
  const auto g = (dir.path / "bad.json").string();
  std::ofstream(g) << R"({"n":2})";
  EXPECT_EQ(cli({"solve", g}, out, err), exit_input);
  EXPECT_NE(err.find("error"), std::string::npos);
  EXPECT_EQ(cli({"solve", f, "--sep", "other"}, out, err), exit_usage);
  EXPECT_EQ(cli({}, out, err), exit_usage);
}

TEST(Cli, BatchWritesCsv) {
  TempDir dir("dqcut_cli_batch");
  std::string out, err;
  for (int k = 0; k < 3; ++k) {
    ASSERT_EQ(cli({"gen", "boxqp", "5", "0.8", std::to_string(k + 1), "-o", (dir.path / ("b" + std::to_string(k) + ".json")).string()}, out, err), 0);
  }
  std::ofstream(dir.path / "m.json") << R"({"instances":[{"path":"b0.json"},{"path":"b1.json"},{"path":"b2.json"}]})";
  const auto report = (dir.path / "r.csv").string();
  ASSERT_EQ(cli({"batch", (dir.path / "m.json").string(), "-o", report, "--bnb"}, out, err), 0) << err;
  const auto text = slurp(report);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
  EXPECT_NE(text.find("shifted_geomean"), std::string::npos);
}
