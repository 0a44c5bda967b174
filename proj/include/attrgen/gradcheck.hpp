#pragma once

#include <string>
#include <vector>

#include "attrgen/models.hpp"

namespace attrgen {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  std::int64_t coords = 0;  // finite-difference coordinates evaluated
  int trials = 0;
};

/// |a - n| / max(|a|, |n|), treating a pair of near-zero values as exact.
double relative_error(double analytic, double numeric);

/// Central finite differences (64-bit, eps = 1e-3) against the analytic
/// gradients: every layer kind exhaustively on small tensors, plus sampled
/// coordinates through full reduced-resolution stage-1 and stage-2 networks
/// under an MSE head. Trials with activations too close to a ReLU or pooling
/// kink are reseeded so the comparison is well-posed.
std::vector<GradCheckReport> run_gradient_suite(int trials, std::uint64_t seed);

inline bool suite_passes(const std::vector<GradCheckReport>& reports, double tol = 1e-4) {
  for (const auto& r : reports)
    if (!(r.max_rel_err < tol)) return false;
  return !reports.empty();
}

}  // namespace attrgen
