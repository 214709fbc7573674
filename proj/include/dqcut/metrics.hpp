#pragma once

#include <cmath>
#include <optional>
#include <span>

#include "dqcut/errors.hpp"

namespace dqcut {

/// Percentage of the SDP-vs-QP gap left open by the QCP bound:
/// 100 (sdp - qcp) / (sdp - qp). Undefined when sdp <= qp + 1e-9.
inline std::optional<double> root_gap(double sdp, double qcp, double qp) {
  const double den = sdp - qp;
  if (!(den > 1e-9)) return std::nullopt;
  return 100.0 * (sdp - qcp) / den;
}

/// 100 (ub - lb) / max(|lb|, 1e-3).
inline double relative_gap(double lb, double ub) {
  return 100.0 * (ub - lb) / std::max(std::abs(lb), 1e-3);
}

/// exp(mean(log(v + shift))) - shift.
inline double shifted_geomean(std::span<const double> values, double shift) {
  if (values.empty()) throw DomainError("shifted_geomean: empty list");
  if (!(shift > 0.0)) throw DomainError("shifted_geomean: shift must be positive");
  double acc = 0.0;
  for (double v : values) {
    if (!(v >= 0.0)) throw DomainError("shifted_geomean: values must be nonnegative");
    acc += std::log(v + shift);
  }
  return std::exp(acc / static_cast<double>(values.size())) - shift;
}

}  // namespace dqcut
