#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "dqcut/dqcut.hpp"

namespace dqcut::testing {

/// Q = [[0,2],[2,-1]], A = [0,1], b = 0.5, box [0,1]^2.
inline MiqpInstance example_one() {
  MatrixXd Q(2, 2);
  Q << 0, 2, 2, -1;
  MatrixXd A(1, 2);
  A << 0, 1;
  return make_instance(Q, VectorXd::Zero(2), A, VectorXd::Constant(1, 0.5),
                       {VariableDomain::interval(0, 1), VariableDomain::interval(0, 1)});
}

inline MatrixXd random_symmetric(std::mt19937_64& g, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) M(i, j) = M(j, i) = u(g);
  return M;
}

inline MatrixXd random_matrix(std::mt19937_64& g, int r, int c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatrixXd M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = u(g);
  return M;
}

inline MatrixXd random_pd(std::mt19937_64& g, int n) {
  const MatrixXd B = random_matrix(g, n, n);
  return B * B.transpose() + MatrixXd::Identity(n, n);
}

/// Seeded instances cycling through the three generator families.
inline MiqpInstance family_instance(int k, int n, double density = 0.6) {
  GeneratorOptions g;
  g.family = static_cast<Family>(k % 3);
  g.n = n;
  g.density = density;
  g.seed = static_cast<std::uint64_t>(1000 + k);
  return generate_instance(g);
}

/// Feasible points of the discrete problem: box samples for pure
/// intervals with m = 0, otherwise rounding dives from random points.
inline std::vector<VectorXd> sample_feasible(const MiqpInstance& inst, int count, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<VectorXd> out;
  const VectorXd L = inst.lower_bounds(), U = inst.upper_bounds();
  for (int attempt = 0; attempt < 20 * count && static_cast<int>(out.size()) < count; ++attempt) {
    VectorXd x(inst.n);
    for (int i = 0; i < inst.n; ++i) x(i) = L(i) + u(g) * (U(i) - L(i));
    if (inst.m > 0 || std::any_of(inst.domains.begin(), inst.domains.end(),
                                  [](const VariableDomain& d) { return is_discrete(d.kind); })) {
      auto p = detail::rounding_dive(inst, x, L, U);
      if (!p) continue;
      x = *p;
    }
    if (is_feasible(inst, x, 1e-8)) out.push_back(x);
  }
  return out;
}

}  // namespace dqcut::testing
