#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library's arithmetic; they recompute everything from the
// defining formulas, in long double where that helps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dmap::oracle {

// Canonical order by repeated selection of the most likely remaining token
// (lowest index on ties).
inline std::vector<std::size_t> selection_order(std::span<const double> p) {
  std::vector<bool> used(p.size(), false);
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < p.size(); ++r) {
    std::size_t best = p.size();
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (used[j]) continue;
      if (best == p.size() || p[j] > p[best]) best = j;
    }
    used[best] = true;
    order.push_back(best);
  }
  return order;
}

inline long double mass_above(std::span<const double> p, std::size_t obs) {
  long double s = 0.0L;
  for (std::size_t idx : selection_order(p)) {
    if (idx == obs) break;
    s += p[idx];
  }
  return s;
}

inline long double entropy(std::span<const double> p) {
  long double h = 0.0L;
  for (double v : p) {
    if (v > 0.0) h -= static_cast<long double>(v) * std::log(static_cast<long double>(v));
  }
  return h;
}

inline std::vector<long double> temperature(std::span<const long double> p, long double tau) {
  std::vector<long double> q(p.size());
  long double z = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    q[i] = p[i] > 0.0L ? std::pow(p[i], 1.0L / tau) : 0.0L;
    z += q[i];
  }
  for (auto& v : q) v /= z;
  return q;
}

inline std::vector<std::size_t> selection_order_ld(std::span<const long double> p) {
  std::vector<bool> used(p.size(), false);
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < p.size(); ++r) {
    std::size_t best = p.size();
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (used[j]) continue;
      if (best == p.size() || p[j] > p[best]) best = j;
    }
    used[best] = true;
    order.push_back(best);
  }
  return order;
}

inline std::vector<long double> keep_first(std::span<const long double> p,
                                           const std::vector<std::size_t>& order,
                                           std::size_t m) {
  std::vector<long double> q(p.size(), 0.0L);
  long double z = 0.0L;
  for (std::size_t r = 0; r < m; ++r) z += p[order[r]];
  for (std::size_t r = 0; r < m; ++r) q[order[r]] = p[order[r]] / z;
  return q;
}

inline std::vector<long double> top_k(std::span<const long double> p, std::size_t k) {
  return keep_first(p, selection_order_ld(p), std::min(k, p.size()));
}

inline std::vector<long double> top_p(std::span<const long double> p, long double pi) {
  const auto order = selection_order_ld(p);
  if (pi >= 1.0L) return {p.begin(), p.end()};
  long double cum = 0.0L;
  std::size_t m = p.size();
  for (std::size_t r = 0; r < order.size(); ++r) {
    cum += p[order[r]];
    if (cum > pi) {
      m = r + 1;
      break;
    }
  }
  return keep_first(p, order, m);
}

// Applies a spec written in its text form ("temp=0.7+topk=3") with the
// long-double transforms above. Values are parsed in long double too.
inline std::vector<long double> apply_spec_text(const std::vector<double>& p,
                                                const std::string& text) {
  std::vector<long double> q(p.begin(), p.end());
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('+', start);
    if (end == std::string::npos) end = text.size();
    const std::string step = text.substr(start, end - start);
    const std::string key = step.substr(0, step.find('='));
    const long double value = std::stold(step.substr(step.find('=') + 1));
    if (key == "temp") q = temperature(q, value);
    if (key == "topk") q = top_k(q, static_cast<std::size_t>(value));
    if (key == "topp") q = top_p(q, value);
    start = end + 1;
  }
  return q;
}

// Bin heights of the weighted density straight from its defining sum:
// height_j = k * sum_i w_i |I_i cap bin_j| / |I_i| / sum_i w_i.
inline std::vector<long double> binned_density(
    const std::vector<std::pair<double, double>>& intervals,
    const std::vector<double>& weights, std::size_t k) {
  std::vector<long double> h(k, 0.0L);
  long double z = 0.0L;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const long double a = intervals[i].first;
    const long double b = intervals[i].second;
    if (!(b > a)) continue;
    z += weights[i];
    for (std::size_t j = 0; j < k; ++j) {
      const long double lo = static_cast<long double>(j) / k;
      const long double hi = static_cast<long double>(j + 1) / k;
      const long double ov = std::min(b, hi) - std::max(a, lo);
      if (ov > 0) h[j] += weights[i] * ov / (b - a);
    }
  }
  for (auto& v : h) v = v * k / z;
  return h;
}

// Adaptive Simpson quadrature.
inline long double simpson(const std::function<long double(long double)>& f, long double a,
                           long double b, long double fa, long double fm, long double fb,
                           long double whole, long double tol, int depth) {
  const long double m = (a + b) / 2;
  const long double lm = (a + m) / 2;
  const long double rm = (m + b) / 2;
  const long double flm = f(lm);
  const long double frm = f(rm);
  const long double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const long double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15 * tol) {
    return left + right + (left + right - whole) / 15;
  }
  return simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

inline long double integrate(const std::function<long double(long double)>& f, long double a,
                             long double b, long double tol = 1e-14L) {
  const long double fa = f(a);
  const long double fb = f(b);
  const long double fm = f((a + b) / 2);
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, 60);
}

// Upper tail of chi-square(df) by quadrature of the density. The lower tail
// is integrated after substituting x = u^2, which removes the x^(df/2 - 1)
// singularity at 0 for df = 1; the upper tail is 1 minus that, or a direct
// integral over [stat, stat + 400 + 40 df] when the tail itself is small.
inline long double chi_square_upper_tail(long double stat, int df) {
  const long double a = df / 2.0L;
  const long double log_norm = -a * std::log(2.0L) - std::lgamma(a);
  auto pdf = [&](long double x) -> long double {
    if (x <= 0) return df == 2 ? std::exp(log_norm) : 0.0L;
    return std::exp(log_norm + (a - 1) * std::log(x) - x / 2);
  };
  if (stat <= 0) return 1.0L;
  if (stat > df + 10.0L * std::sqrt(2.0L * df)) {
    const long double hi = stat + 400.0L + 40.0L * df;
    long double total = 0.0L;
    const int pieces = 64;
    for (int i = 0; i < pieces; ++i) {
      const long double l = stat + (hi - stat) * i / pieces;
      const long double r = stat + (hi - stat) * (i + 1) / pieces;
      total += integrate(pdf, l, r, 1e-22L);
    }
    return total;
  }
  auto lower = [&](long double u) -> long double {
    if (u <= 0) return df == 1 ? 2 * std::exp(log_norm) : 0.0L;
    return 2 * u * pdf(u * u);
  };
  const long double root = std::sqrt(stat);
  long double p = 0.0L;
  const int pieces = 32;
  for (int i = 0; i < pieces; ++i) {
    p += integrate(lower, root * i / pieces, root * (i + 1) / pieces, 1e-18L);
  }
  return 1.0L - p;
}

// One-sample Kolmogorov-Smirnov test against U(0, 1). Returns the p-value
// from the asymptotic Kolmogorov distribution with Stephens' small-sample
// correction.
inline double ks_uniform_pvalue(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = std::clamp(xs[i], 0.0, 1.0);
    d = std::max({d, (i + 1) / n - x, x - i / n});
  }
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

// Every vector of `parts` non-negative multiples of 1/denominator summing to
// 1, passed to `visit`.
inline void for_each_grid_distribution(std::size_t parts, int denominator,
                                       const std::function<void(const std::vector<double>&)>& visit) {
  std::vector<int> counts(parts, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i + 1 == parts) {
      counts[i] = left;
      std::vector<double> p(parts);
      for (std::size_t j = 0; j < parts; ++j) {
        p[j] = static_cast<double>(counts[j]) / denominator;
      }
      visit(p);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[i] = c;
      rec(i + 1, left - c);
    }
  };
  rec(0, denominator);
}

}  // namespace dmap::oracle
