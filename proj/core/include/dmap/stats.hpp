#pragma once

// Histogram statistics and the chi-square uniformity test used to check a
// claimed generation strategy against DMAP samples.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dmap/decoding.hpp"
#include "dmap/engine.hpp"
#include "dmap/records.hpp"

namespace dmap {

// max(2, floor((2T)^(1/3))).
std::size_t terrell_scott_bins(std::size_t T);

// f_i = #{x : (i-1)/k <= x < i/k} / T, with x == 1 counted in the last bin.
std::vector<double> frequencies(std::span<const double> xs, std::size_t k);

// T * k * sum_i (f_i - 1/k)^2.
double chi_square_stat(std::span<const double> f, std::size_t T);

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);
// ln Q(a, x), accurate far into the tail where Q underflows.
double log_regularized_gamma_q(double a, double x);

struct PValue {
  double p = 1.0;
  double log10_p = 0.0;  // -inf when p is exactly zero
};

// Upper tail P(X > stat) for X ~ chi-square with df degrees of freedom.
PValue chi_square_pvalue(double stat, std::size_t df);

// Thresholds that turn histogram masses into a shape label. Ratios compare
// a region's mass to its share under the uniform density.
struct ShapeThresholds {
  double bias_high = 1.15;      // over-represented
  double bias_low = 0.9;        // the opposite end must not be over this
  double collapse_ratio = 0.5;  // last 5% slice at or below this density
  double uniform_lo = 0.85;
  double uniform_hi = 1.15;
};

enum class ShapeClass { kUniform, kHeadBiased, kTailBiased, kTailCollapse, kMixed };

std::string_view to_string(ShapeClass c);

struct ShapeSummary {
  double head_mass = 0.0;         // mass on [0, 0.25]
  double tail_mass = 0.0;         // mass on [0.75, 1]
  double last_slice_ratio = 0.0;  // mass on [0.95, 1] / 0.05
  ShapeClass classification = ShapeClass::kMixed;
};

// Mass of the histogram (k equal bins on [0, 1], heights integrating to 1)
// over [lo, hi].
double histogram_mass(std::span<const double> heights, double lo, double hi);

ShapeSummary shape_summary(std::span<const double> heights,
                           const ShapeThresholds& thresholds = {});

struct UniformityReport {
  std::size_t T = 0;
  std::size_t k = 0;
  double chi2 = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
  double log10_p = 0.0;
  std::size_t impossible_tokens = 0;
  std::size_t tied_positions = 0;
  bool small_sample_warning = false;
  ShapeSummary shape;
  std::vector<double> frequencies;
};

// Chi-square test of plain DMAP samples evaluated under the claimed spec.
// `bins` overrides the Terrell-Scott count. Any impossible token forces
// p_value = 0.
UniformityReport uniformity_report(std::span<const double> xs, std::size_t impossible_tokens,
                                   std::optional<std::size_t> bins = std::nullopt);

UniformityReport validate_generation(std::span<const TextRecordStream> streams,
                                     const DecodingSpec& claimed, const EngineConfig& cfg,
                                     std::optional<std::size_t> bins = std::nullopt);

}  // namespace dmap
