#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "dmap/error.hpp"
#include "dmap/rng.hpp"
#include "dmap/stats.hpp"
#include "support/oracles.hpp"

using namespace dmap;

TEST_CASE("terrell_scott_bins") {
  CHECK(terrell_scott_bins(500) == 10);
  CHECK(terrell_scott_bins(400) == 9);
  CHECK(terrell_scott_bins(1) == 2);
  CHECK(terrell_scott_bins(50000) == 46);
  CHECK(terrell_scott_bins(10000) == 27);
  // Exact cubes: 2T = n^3.
  for (std::size_t n = 4; n < 200; n += 2) {
    CHECK(terrell_scott_bins(n * n * n / 2) == n);
    CHECK(terrell_scott_bins(n * n * n / 2 - 1) == n - 1);
  }
}

TEST_CASE("frequencies") {
  auto f = frequencies(std::vector{0.05, 0.55, 0.95}, 2);
  CHECK(f[0] == doctest::Approx(1.0 / 3));
  CHECK(f[1] == doctest::Approx(2.0 / 3));
  CHECK(frequencies(std::vector{1.0}, 4) == std::vector{0.0, 0.0, 0.0, 1.0});
  CHECK(frequencies(std::vector{0.5}, 2) == std::vector{0.0, 1.0});
  // Bin edges fall in the upper bin for every k.
  for (std::size_t k = 1; k <= 60; ++k) {
    for (std::size_t i = 1; i < k; ++i) {
      const double edge = static_cast<double>(i) / static_cast<double>(k);
      auto g = frequencies(std::vector{edge}, k);
      CHECK(g[i] == 1.0);
    }
  }
  CHECK_THROWS_AS(frequencies(std::vector<double>{}, 3), EmptyInputError);
  CHECK_THROWS_AS(frequencies(std::vector{1.5}, 3), ParameterError);
}

TEST_CASE("chi_square_stat") {
  CHECK(chi_square_stat(std::vector{0.5, 0.5}, 123) == 0.0);
  CHECK(chi_square_stat(std::vector{0.6, 0.4}, 100) == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(chi_square_stat(std::vector{1.0, 0.0}, 50) == doctest::Approx(50.0).epsilon(1e-14));
}

TEST_CASE("chi_square_pvalue reference values") {
  CHECK(chi_square_pvalue(0.0, 9).p == 1.0);
  CHECK(chi_square_pvalue(0.0, 9).log10_p == 0.0);
  // Reference values from an independent statistics package.
  CHECK(chi_square_pvalue(4.0, 1).p == doctest::Approx(0.04550026389635857).epsilon(1e-12));
  CHECK(chi_square_pvalue(16.919, 9).p == doctest::Approx(0.049999640848349826).epsilon(1e-10));
  CHECK(chi_square_pvalue(100.0, 9).p == doctest::Approx(1.5735176303753876e-17).epsilon(1e-9));
  // Far tails, where p itself underflows: log10 values from arbitrary-precision arithmetic.
  CHECK(chi_square_pvalue(500.0, 9).log10_p == doctest::Approx(-101.24037642516202).epsilon(1e-12));
  CHECK(chi_square_pvalue(2000.0, 45).log10_p == doctest::Approx(-390.16214034703433).epsilon(1e-12));
  CHECK(chi_square_pvalue(10000.0, 1).log10_p == doctest::Approx(-2173.5705128733704).epsilon(1e-12));
  CHECK(chi_square_pvalue(10000.0, 1).p == 0.0);
  CHECK_THROWS_AS(chi_square_pvalue(1.0, 0), ParameterError);
}

TEST_CASE("chi_square_pvalue agrees with quadrature of the density") {
  const std::vector<double> stats{0.01, 0.1, 0.5, 1, 2, 3.5, 5, 8, 11, 15, 20, 30, 45, 60, 80, 120, 200};
  const std::vector<int> dfs{1, 2, 3, 4, 5, 9, 11, 20, 45, 100};
  for (int df : dfs) {
    double previous = 2.0;
    for (double s : stats) {
      const double got = chi_square_pvalue(s, df).p;
      const double want = static_cast<double>(oracle::chi_square_upper_tail(s, df));
      CAPTURE(df);
      CAPTURE(s);
      CHECK(std::fabs(got - want) <= 1e-8);
      CHECK(got <= previous);
      previous = got;
      if (got > 1e-300) {
        CHECK(chi_square_pvalue(s, df).log10_p == doctest::Approx(std::log10(got)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("incomplete gamma complements") {
  for (double a : {0.5, 1.0, 4.5, 22.5}) {
    for (double x : {0.0, 0.3, 1.0, 5.0, 23.0, 60.0}) {
      CHECK(regularized_gamma_p(a, x) + regularized_gamma_q(a, x) == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  // Q(1, x) = exp(-x).
  CHECK(regularized_gamma_q(1.0, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
  CHECK(log_regularized_gamma_q(1.0, 900.0) == doctest::Approx(-900.0).epsilon(1e-12));
}

TEST_CASE("shape_summary examples") {
  auto u = shape_summary(std::vector<double>(40, 1.0));
  CHECK(u.classification == ShapeClass::kUniform);
  CHECK(u.head_mass == doctest::Approx(0.25));
  CHECK(u.tail_mass == doctest::Approx(0.25));

  // Heights of 2 - 2x averaged over 40 bins.
  std::vector<double> falling(40);
  for (std::size_t j = 0; j < 40; ++j) falling[j] = 2.0 - 2.0 * (j + 0.5) / 40.0;
  auto h = shape_summary(falling);
  CHECK(h.head_mass == doctest::Approx(0.4375).epsilon(1e-12));
  CHECK(h.classification == ShapeClass::kHeadBiased);

  std::vector<double> rising(falling.rbegin(), falling.rend());
  CHECK(shape_summary(rising).classification == ShapeClass::kTailBiased);

  std::vector<double> collapse(20, 1.05);
  collapse.back() = 0.05;
  auto c = shape_summary(collapse);
  CHECK(c.last_slice_ratio == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(c.classification == ShapeClass::kTailCollapse);

  std::vector<double> bumpy{1.5, 0.5, 0.5, 1.5};
  CHECK(shape_summary(bumpy).classification == ShapeClass::kMixed);
}

TEST_CASE("shape classification ignores sub-1e-12 perturbations") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 4 + rng.below(60);
    std::vector<double> h(k);
    double z = 0.0;
    for (double& v : h) z += (v = 0.3 + 1.4 * rng.uniform());
    for (double& v : h) v *= static_cast<double>(k) / z;
    auto base = shape_summary(h).classification;
    for (double& v : h) v += (rng.uniform() - 0.5) * 2e-12;
    CHECK(shape_summary(h).classification == base);
  }
}

TEST_CASE("uniformity_report") {
  std::vector<double> xs;
  for (int i = 0; i < 1000; ++i) xs.push_back((i + 0.5) / 1000.0);
  auto r = uniformity_report(xs, 0);
  CHECK(r.T == 1000);
  CHECK(r.k == 12);
  CHECK(r.df == 11);
  CHECK(r.p_value > 0.99);
  CHECK_FALSE(r.small_sample_warning);

  auto bad = uniformity_report(xs, 2);
  CHECK(bad.p_value == 0.0);
  CHECK(std::isinf(bad.log10_p));
  CHECK(bad.impossible_tokens == 2);

  auto tiny = uniformity_report(std::vector{0.1, 0.9}, 0);
  CHECK(tiny.small_sample_warning);
  auto fixed = uniformity_report(xs, 0, 40);
  CHECK(fixed.k == 40);
  CHECK_THROWS_AS(uniformity_report(std::vector<double>{}, 0), EmptyInputError);
}

TEST_CASE("null p-values are uniform") {
  std::vector<double> ps;
  std::vector<double> xs(1000);
  for (std::uint64_t t = 0; t < 2000; ++t) {
    auto rng = SplitMix64::keyed(77, StreamTag::kNull, t);
    for (double& x : xs) x = rng.uniform();
    const double c = chi_square_stat(frequencies(xs, 12), xs.size());
    ps.push_back(chi_square_pvalue(c, 11).p);
  }
  CHECK(oracle::ks_uniform_pvalue(ps) > 0.01);
}
