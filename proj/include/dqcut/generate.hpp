#pragma once

// Seeded random instances. Draws go through mt19937_64 with hand-rolled
// mappings so that output is identical across standard libraries.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dqcut/errors.hpp"
#include "dqcut/linalg.hpp"
#include "dqcut/model.hpp"

namespace dqcut {

enum class Family { boxqp, binary_card, eq_integer };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::boxqp: return "boxqp";
    case Family::binary_card: return "binary_card";
    case Family::eq_integer: return "eq_integer";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  if (s == "boxqp") return Family::boxqp;
  if (s == "binary_card") return Family::binary_card;
  if (s == "eq_integer") return Family::eq_integer;
  throw ValidationError("unknown instance family '" + s + "' (expected boxqp, binary_card or eq_integer)");
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi].
  long integer(long lo, long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do r = eng_(); while (r >= limit);
    return lo + static_cast<long>(r % span);
  }

 private:
  std::mt19937_64 eng_;
};

struct GeneratorOptions {
  Family family = Family::boxqp;
  int n = 10;
  double density = 0.5;
  std::uint64_t seed = 1;
};

/// Q symmetric with each upper-triangle entry present with probability
/// `density`; entries and q are integers uniform in [-50, 50].
/// boxqp: intervals [0,1], no rows. binary_card: binaries with sum = n/2.
/// eq_integer: ranges [0, U_i] with U_i in 1..4 and max(1, n/4) integer
/// rows with entries in [-5, 5], made consistent through a random point.
inline MiqpInstance generate_instance(const GeneratorOptions& opt) {
  if (opt.n < 2) throw ValidationError("generator: n must be at least 2");
  if (!(opt.density > 0.0 && opt.density <= 1.0)) throw ValidationError("generator: density must be in (0, 1]");
  const int n = opt.n;
  Rng rng(opt.seed);
  MatrixXd Q = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      if (rng.uniform() < opt.density) Q(i, j) = Q(j, i) = static_cast<double>(rng.integer(-50, 50));
  VectorXd q(n);
  for (int i = 0; i < n; ++i) q(i) = static_cast<double>(rng.integer(-50, 50));

  std::vector<VariableDomain> doms;
  MatrixXd A(0, n);
  VectorXd b(0);
  switch (opt.family) {
    case Family::boxqp:
      doms.assign(static_cast<std::size_t>(n), VariableDomain::interval(0.0, 1.0));
      break;
    case Family::binary_card:
      doms.assign(static_cast<std::size_t>(n), VariableDomain::binary());
      A = MatrixXd::Ones(1, n);
      b = VectorXd::Constant(1, static_cast<double>(n / 2));
      break;
    case Family::eq_integer: {
      VectorXd x0(n);
      for (int i = 0; i < n; ++i) {
        const long u = rng.integer(1, 4);
        doms.push_back(VariableDomain::integer_range(0.0, static_cast<double>(u)));
        x0(i) = static_cast<double>(rng.integer(0, u));
      }
      const int m = std::max(1, n / 4);
      for (int attempt = 0;; ++attempt) {
        A.resize(m, n);
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < n; ++c) A(r, c) = static_cast<double>(rng.integer(-5, 5));
        if (numerical_rank(A) == m) break;
        if (attempt > 100) throw NumericalError("generator: could not draw full-rank rows");
      }
      b = A * x0;
      break;
    }
  }
  return make_instance(std::move(Q), std::move(q), std::move(A), std::move(b), std::move(doms));
}

}  // namespace dqcut
