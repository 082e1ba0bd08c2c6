#include "raglab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace raglab {

namespace {

std::vector<double> paired_differences(const std::vector<double>& a,
                                       const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw StatsError("length mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

/// Average ranks (1-based) of the values' magnitudes, ties averaged.
/// Also accumulates the tie correction term sum(t^3 - t).
std::vector<double> average_ranks(const std::vector<double>& abs_d,
                                  double& tie_correction) {
  const std::size_t n = abs_d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&abs_d](std::size_t x, std::size_t y) {
    return abs_d[x] < abs_d[y];
  });
  std::vector<double> ranks(n);
  tie_correction = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
    // Positions i..j (0-based) share the average of ranks i+1..j+1.
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    const double t = static_cast<double>(j - i + 1);
    tie_correction += t * t * t - t;
    i = j + 1;
  }
  return ranks;
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

/// P(T+ <= w) under the null, by subset-sum counting over doubled ranks.
/// Doubled average ranks are integers, so the distribution is exact; counts
/// stay below 2^25 and are exact in double.
double exact_lower_tail(const std::vector<double>& ranks, double w) {
  std::vector<long long> doubled;
  doubled.reserve(ranks.size());
  long long total = 0;
  for (double r : ranks) {
    const long long d2 = std::llround(2.0 * r);
    doubled.push_back(d2);
    total += d2;
  }
  std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
  ways[0] = 1.0;
  for (long long r : doubled) {
    for (long long s = total; s >= r; --s) {
      ways[static_cast<std::size_t>(s)] +=
          ways[static_cast<std::size_t>(s - r)];
    }
  }
  const long long threshold = std::llround(2.0 * w);
  double tail = 0.0;
  for (long long s = 0; s <= threshold && s <= total; ++s) {
    tail += ways[static_cast<std::size_t>(s)];
  }
  return tail / std::ldexp(1.0, static_cast<int>(ranks.size()));
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  const std::vector<double> d_all = paired_differences(a, b);
  if (d_all.empty()) {
    throw StatsError("wilcoxon requires at least one pair");
  }
  std::vector<double> d;
  for (double v : d_all) {
    if (v != 0.0) d.push_back(v);
  }

  WilcoxonResult result;
  result.n_nonzero = d.size();
  if (d.empty()) {
    result.all_zero = true;
    result.exact = true;
    result.w = 0.0;
    result.p_two_sided = 1.0;
    result.p_one_sided = 1.0;
    return result;
  }

  std::vector<double> abs_d(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) abs_d[i] = std::fabs(d[i]);
  double tie_correction = 0.0;
  const std::vector<double> ranks = average_ranks(abs_d, tie_correction);

  double w_plus = 0.0;
  double w_minus = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) {
      w_plus += ranks[i];
    } else {
      w_minus += ranks[i];
    }
  }
  result.w = std::min(w_plus, w_minus);

  const double n = static_cast<double>(d.size());
  if (d.size() <= 25) {
    result.exact = true;
    result.p_one_sided = exact_lower_tail(ranks, result.w);
    result.p_two_sided = std::min(1.0, 2.0 * result.p_one_sided);
  } else {
    result.exact = false;
    const double mean = n * (n + 1.0) / 4.0;
    const double var =
        n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_correction / 48.0;
    const double z = (result.w - mean + 0.5) / std::sqrt(var);
    result.p_one_sided = normal_cdf(z);
    result.p_two_sided = std::min(1.0, 2.0 * result.p_one_sided);
  }
  return result;
}

namespace {

/// Continued-fraction core of the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3.0e-14;
  constexpr double kTiny = 1.0e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) -
                             std::lgamma(b) + a * std::log(x) +
                             b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * betacf(a, b, x) / a;
  }
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b) {
  const std::vector<double> d = paired_differences(a, b);
  if (d.size() < 2) {
    throw StatsError("paired t-test requires at least two pairs");
  }
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double var = ss / (n - 1.0);

  TTestResult result;
  result.df = n - 1.0;
  if (var == 0.0) {
    result.degenerate = true;
    result.t = std::numeric_limits<double>::quiet_NaN();
    result.p_two_sided = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  result.t = mean / (std::sqrt(var) / std::sqrt(n));
  result.p_two_sided = incomplete_beta(
      result.df / 2.0, 0.5, result.df / (result.df + result.t * result.t));
  return result;
}

}  // namespace raglab
