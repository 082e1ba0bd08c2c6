#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "raglab/stats.hpp"

using namespace raglab;

TEST_CASE("wilcoxon worked example: six positive differences") {
  const std::vector<double> a = {5, 6, 7, 8, 9, 10};
  const std::vector<double> b = {1, 2, 3, 4, 5, 6};
  const WilcoxonResult r = wilcoxon_signed_rank(a, b);
  CHECK(r.n_nonzero == 6);
  CHECK(r.exact);
  CHECK_FALSE(r.all_zero);
  CHECK(r.w == 0.0);
  // One-sided tail is 1/2^6; two-sided doubles it.
  CHECK(r.p_one_sided == doctest::Approx(1.0 / 64.0).epsilon(1e-15));
  CHECK(r.p_two_sided == doctest::Approx(0.03125).epsilon(1e-15));
}

TEST_CASE("wilcoxon worked example: one up, one down") {
  const std::vector<double> a = {2, 1};
  const std::vector<double> b = {1, 2};
  const WilcoxonResult r = wilcoxon_signed_rank(a, b);
  CHECK(r.n_nonzero == 2);
  CHECK(r.w == 1.5);  // tied magnitudes share rank 1.5
  CHECK(r.p_two_sided == 1.0);
}

TEST_CASE("wilcoxon drops zero differences") {
  const std::vector<double> a = {1, 2, 3, 10};
  const std::vector<double> b = {1, 2, 3, 4};
  const WilcoxonResult r = wilcoxon_signed_rank(a, b);
  CHECK(r.n_nonzero == 1);
  CHECK(r.w == 0.0);
  CHECK(r.p_two_sided == 1.0);  // 2 * (1/2) capped
}

TEST_CASE("wilcoxon all-zero differences") {
  const std::vector<double> a = {1, 2, 3};
  const WilcoxonResult r = wilcoxon_signed_rank(a, a);
  CHECK(r.all_zero);
  CHECK(r.n_nonzero == 0);
  CHECK(r.p_two_sided == 1.0);
  CHECK(r.p_one_sided == 1.0);
}

TEST_CASE("wilcoxon input validation") {
  CHECK_THROWS_AS((void)wilcoxon_signed_rank({1.0}, {1.0, 2.0}), StatsError);
  CHECK_THROWS_AS((void)wilcoxon_signed_rank({}, {}), StatsError);
}

TEST_CASE("wilcoxon exact equals full enumeration on random 0/1 pairs") {
  std::mt19937 rng(4242);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 11;  // 2..12
    std::vector<double> a(n);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = coin(rng) ? 1.0 : 0.0;
      b[i] = coin(rng) ? 1.0 : 0.0;
    }
    std::vector<double> diffs(n);
    for (std::size_t i = 0; i < n; ++i) diffs[i] = a[i] - b[i];
    const double oracle = oracles::wilcoxon_enumeration_p(diffs);
    const WilcoxonResult r = wilcoxon_signed_rank(a, b);
    if (oracle < 0.0) {
      CHECK(r.all_zero);
      CHECK(r.p_two_sided == 1.0);
    } else {
      CHECK(r.exact);
      CHECK(r.p_two_sided == doctest::Approx(oracle).epsilon(1e-12));
    }
  }
}

TEST_CASE("wilcoxon exact equals enumeration on mixed-magnitude data") {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> mag(-3, 3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + rng() % 8;
    std::vector<double> a(n);
    std::vector<double> b(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<double>(mag(rng));
    const double oracle = oracles::wilcoxon_enumeration_p(a);
    const WilcoxonResult r = wilcoxon_signed_rank(a, b);
    if (oracle < 0.0) {
      CHECK(r.all_zero);
    } else {
      CHECK(r.p_two_sided == doctest::Approx(oracle).epsilon(1e-12));
    }
  }
}

TEST_CASE("wilcoxon symmetry under swapping the runs") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng() % 30;  // crosses the exact/approx border
    std::vector<double> a(n);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = dist(rng);
      b[i] = dist(rng);
    }
    const WilcoxonResult ab = wilcoxon_signed_rank(a, b);
    const WilcoxonResult ba = wilcoxon_signed_rank(b, a);
    CHECK(ab.w == ba.w);
    CHECK(ab.p_two_sided == ba.p_two_sided);
    CHECK(ab.exact == ba.exact);
  }
}

TEST_CASE("wilcoxon switches to the normal approximation past n = 25") {
  std::vector<double> a(26);
  std::vector<double> b(26, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<double>(i % 2 == 0 ? i + 1 : -(static_cast<int>(i) + 1));
  }
  const WilcoxonResult r = wilcoxon_signed_rank(a, b);
  CHECK_FALSE(r.exact);
  CHECK(r.n_nonzero == 26);
  CHECK(r.p_two_sided > 0.0);
  CHECK(r.p_two_sided <= 1.0);

  // At n = 25 the test still enumerates exactly.
  std::vector<double> a25(a.begin(), a.begin() + 25);
  std::vector<double> b25(25, 0.0);
  CHECK(wilcoxon_signed_rank(a25, b25).exact);
}

TEST_CASE("normal approximation tracks the exact test near the boundary") {
  // Same data evaluated both ways: exact at n=25, and the approximation
  // on the same differences must land in the same neighborhood.
  std::mt19937 rng(555);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> a(25);
  std::vector<double> b(25);
  for (std::size_t i = 0; i < 25; ++i) {
    a[i] = dist(rng);
    b[i] = dist(rng);
  }
  const WilcoxonResult exact = wilcoxon_signed_rank(a, b);
  REQUIRE(exact.exact);
  // Re-run with one zero-difference pair appended: n_nonzero stays 25.
  std::vector<double> a2 = a;
  std::vector<double> b2 = b;
  a2.push_back(3.3);
  b2.push_back(3.3);
  const WilcoxonResult again = wilcoxon_signed_rank(a2, b2);
  CHECK(again.exact);
  CHECK(again.w == exact.w);
  CHECK(again.p_two_sided == exact.p_two_sided);
}

TEST_CASE("paired t worked example") {
  const std::vector<double> a = {2, 2, 2, 0};
  const std::vector<double> b = {1, 1, 1, 1};
  // d = {1, 1, 1, -1}: mean 0.5, sd 1, n 4 -> t = 1.0, df = 3.
  const TTestResult r = paired_t_test(a, b);
  CHECK_FALSE(r.degenerate);
  CHECK(r.t == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.df == 3.0);
  CHECK(r.p_two_sided == doctest::Approx(0.3910022).epsilon(1e-6));
}

TEST_CASE("paired t against numeric integration") {
  std::mt19937 rng(31337);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 20; ++trial) {
    const std::size_t n = 3 + rng() % 20;
    std::vector<double> a(n);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = dist(rng);
      b[i] = dist(rng);
    }
    const TTestResult r = paired_t_test(a, b);
    if (r.degenerate) continue;
    ++checked;
    const double numeric = oracles::t_pvalue_numeric(r.t, r.df);
    CHECK(r.p_two_sided == doctest::Approx(numeric).epsilon(1e-6));
  }
  CHECK(checked == 20);
}

TEST_CASE("paired t symmetry under swapping the runs") {
  const std::vector<double> a = {5, 3, 8, 1, 9, 2};
  const std::vector<double> b = {4, 4, 6, 2, 5, 2};
  const TTestResult ab = paired_t_test(a, b);
  const TTestResult ba = paired_t_test(b, a);
  CHECK(ab.t == -ba.t);
  CHECK(ab.p_two_sided == ba.p_two_sided);
  CHECK(ab.df == ba.df);
}

TEST_CASE("paired t degenerate and error cases") {
  const TTestResult same = paired_t_test({1, 2, 3}, {0, 1, 2});
  CHECK(same.degenerate);  // all differences equal 1 -> zero variance
  CHECK(std::isnan(same.t));
  CHECK(std::isnan(same.p_two_sided));

  const TTestResult zero = paired_t_test({1, 2}, {1, 2});
  CHECK(zero.degenerate);

  CHECK_THROWS_AS((void)paired_t_test({1.0}, {2.0}), StatsError);
  CHECK_THROWS_AS((void)paired_t_test({1, 2}, {1}), StatsError);
}

TEST_CASE("t p-value decreases as |t| grows") {
  double prev = 1.1;
  for (double t = 0.0; t <= 5.0; t += 0.5) {
    const double p = oracles::t_pvalue_numeric(t, 7.0);
    CHECK(p < prev + 1e-12);
    prev = p;
  }
}
