#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace raglab {

struct StatsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WilcoxonResult {
  double w = 0.0;            // min(W+, W-)
  double p_two_sided = 1.0;
  double p_one_sided = 1.0;  // P(T+ <= W), the observed direction's tail
  std::size_t n_nonzero = 0;
  bool exact = false;     // exact enumeration (n <= 25) vs normal approximation
  bool all_zero = false;  // every difference was zero; p forced to 1
};

/// Paired Wilcoxon signed-rank test over a[i] - b[i]. Zero differences are
/// dropped; ties receive average ranks. Exact p by sign-assignment
/// enumeration when n <= 25, otherwise a continuity-corrected normal
/// approximation with the tie variance correction.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b);

struct TTestResult {
  double t = 0.0;
  double p_two_sided = 1.0;
  double df = 0.0;
  bool degenerate = false;  // zero variance of differences; t/p meaningless
};

/// Paired t-test: t = mean(d) / (sd(d)/sqrt(n)) with df = n-1. A zero-variance
/// difference vector is signaled via `degenerate`, not thrown.
TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b);

}  // namespace raglab
