#include "dmap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmap/error.hpp"
#include "dmap/numeric.hpp"

namespace dmap {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

// ln of x^a e^-x / Gamma(a): the common prefactor of both expansions.
double log_prefactor(double a, double x) {
  return a * std::log(x) - x - std::lgamma(a);
}

// Series for P(a, x): sum_n x^n / (a (a+1) ... (a+n)). Converges fast for
// x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum;  // P = sum * exp(log_prefactor)
}

// Continued fraction for Q(a, x) by the modified Lentz method. Converges fast
// for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;  // Q = h * exp(log_prefactor)
}

void check_gamma_args(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) {
    throw ParameterError("incomplete gamma requires a > 0 and x >= 0");
  }
}

}  // namespace

std::size_t terrell_scott_bins(std::size_t T) {
  const double k = std::cbrt(2.0 * static_cast<double>(T));
  auto n = static_cast<std::size_t>(std::floor(k));
  // cbrt of an exact cube can land one ulp low.
  if (static_cast<double>((n + 1) * (n + 1) * (n + 1)) <= 2.0 * static_cast<double>(T)) ++n;
  return std::max<std::size_t>(2, n);
}

std::vector<double> frequencies(std::span<const double> xs, std::size_t k) {
  if (xs.empty()) throw EmptyInputError("no samples to bin");
  if (k == 0) throw ParameterError("bin count must be positive");
  std::vector<std::size_t> counts(k, 0);
  const double kd = static_cast<double>(k);
  for (double x : xs) {
    if (!(x >= 0.0 && x <= 1.0)) throw ParameterError("sample outside [0, 1]");
    auto b = static_cast<std::size_t>(std::floor(x * kd));
    // floor(x * k) can round across a bin edge; fix it up against the exact
    // half-open rule (b/k <= x < (b+1)/k).
    if (b > 0 && x < static_cast<double>(b) / kd) --b;
    if (b + 1 < k && x >= static_cast<double>(b + 1) / kd) ++b;
    counts[std::min(b, k - 1)]++;
  }
  std::vector<double> f(k);
  const double T = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < k; ++i) f[i] = static_cast<double>(counts[i]) / T;
  return f;
}

double chi_square_stat(std::span<const double> f, std::size_t T) {
  const double k = static_cast<double>(f.size());
  CompensatedSum s;
  for (double fi : f) {
    const double d = fi - 1.0 / k;
    s += d * d;
  }
  return static_cast<double>(T) * k * s.value();
}

double regularized_gamma_p(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return std::min(1.0, gamma_p_series(a, x) * std::exp(log_prefactor(a, x)));
  return 1.0 - regularized_gamma_q(a, x);
}

double regularized_gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - regularized_gamma_p(a, x);
  return std::min(1.0, gamma_q_fraction(a, x) * std::exp(log_prefactor(a, x)));
}

double log_regularized_gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) {
    const double p = gamma_p_series(a, x) * std::exp(log_prefactor(a, x));
    return std::log1p(-std::min(p, 1.0));
  }
  return std::min(0.0, std::log(gamma_q_fraction(a, x)) + log_prefactor(a, x));
}

PValue chi_square_pvalue(double stat, std::size_t df) {
  if (df == 0) throw ParameterError("chi-square needs at least one degree of freedom");
  if (!(stat >= 0.0)) throw ParameterError("chi-square statistic must be non-negative");
  const double a = 0.5 * static_cast<double>(df);
  const double x = 0.5 * stat;
  PValue out;
  const double lnq = log_regularized_gamma_q(a, x);
  out.log10_p = lnq / std::log(10.0);
  out.p = std::clamp(regularized_gamma_q(a, x), 0.0, 1.0);
  return out;
}

std::string_view to_string(ShapeClass c) {
  switch (c) {
    case ShapeClass::kUniform: return "uniform";
    case ShapeClass::kHeadBiased: return "head_biased";
    case ShapeClass::kTailBiased: return "tail_biased";
    case ShapeClass::kTailCollapse: return "tail_collapse";
    case ShapeClass::kMixed: return "mixed";
  }
  return "mixed";
}

double histogram_mass(std::span<const double> heights, double lo, double hi) {
  const double kd = static_cast<double>(heights.size());
  CompensatedSum s;
  for (std::size_t j = 0; j < heights.size(); ++j) {
    const double blo = static_cast<double>(j) / kd;
    const double bhi = static_cast<double>(j + 1) / kd;
    const double overlap = std::min(hi, bhi) - std::max(lo, blo);
    if (overlap > 0.0) s += heights[j] * overlap;
  }
  return s.value();
}

ShapeSummary shape_summary(std::span<const double> heights, const ShapeThresholds& t) {
  if (heights.empty()) throw ParameterError("shape summary needs at least one bin");
  // Comparisons tolerate perturbations far below any meaningful difference.
  constexpr double slack = 1e-9;

  ShapeSummary s;
  s.head_mass = std::clamp(histogram_mass(heights, 0.0, 0.25), 0.0, 1.0);
  s.tail_mass = std::clamp(histogram_mass(heights, 0.75, 1.0), 0.0, 1.0);
  s.last_slice_ratio = histogram_mass(heights, 0.95, 1.0) / 0.05;
  const double shoulder = histogram_mass(heights, 0.75, 0.95) / 0.20;

  const double head = s.head_mass / 0.25;
  const double tail = s.tail_mass / 0.25;
  const bool flat = std::all_of(heights.begin(), heights.end(), [&](double h) {
    return h >= t.uniform_lo - slack && h <= t.uniform_hi + slack;
  });

  if (flat) {
    s.classification = ShapeClass::kUniform;
  } else if (head >= t.bias_high - slack && tail <= t.bias_low + slack) {
    s.classification = ShapeClass::kHeadBiased;
  } else if (tail >= t.bias_high - slack && head <= t.bias_low + slack) {
    s.classification = ShapeClass::kTailBiased;
  } else if (s.last_slice_ratio <= t.collapse_ratio + slack &&
             shoulder >= t.bias_low - slack) {
    s.classification = ShapeClass::kTailCollapse;
  } else {
    s.classification = ShapeClass::kMixed;
  }
  return s;
}

UniformityReport uniformity_report(std::span<const double> xs, std::size_t impossible_tokens,
                                   std::optional<std::size_t> bins) {
  if (xs.empty()) throw EmptyInputError("no usable DMAP samples to test");
  UniformityReport r;
  r.T = xs.size();
  r.k = bins.value_or(terrell_scott_bins(r.T));
  if (r.k < 2) throw ParameterError("the chi-square test needs at least 2 bins");
  r.df = r.k - 1;
  r.frequencies = frequencies(xs, r.k);
  r.chi2 = chi_square_stat(r.frequencies, r.T);
  r.impossible_tokens = impossible_tokens;
  if (impossible_tokens > 0) {
    r.p_value = 0.0;
    r.log10_p = -std::numeric_limits<double>::infinity();
  } else {
    const PValue pv = chi_square_pvalue(r.chi2, r.df);
    r.p_value = pv.p;
    r.log10_p = pv.log10_p;
  }
  r.small_sample_warning = r.T < 10 * r.k;

  std::vector<double> heights(r.frequencies);
  for (double& h : heights) h *= static_cast<double>(r.k);
  r.shape = shape_summary(heights);
  return r;
}

UniformityReport validate_generation(std::span<const TextRecordStream> streams,
                                     const DecodingSpec& claimed, const EngineConfig& cfg,
                                     std::optional<std::size_t> bins) {
  const MapResult m = map_texts(streams, claimed, cfg);
  std::vector<double> xs;
  xs.reserve(m.samples.size());
  for (const DmapSample& s : m.samples) xs.push_back(s.x);
  UniformityReport r = uniformity_report(xs, m.impossible_tokens, bins);
  r.tied_positions = m.tied_positions;
  return r;
}

}  // namespace dmap
