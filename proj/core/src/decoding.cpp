#include "dmap/decoding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "dmap/error.hpp"
#include "dmap/numeric.hpp"
#include "dmap/records.hpp"

namespace dmap {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ParameterError("temperature must be positive, got " + std::to_string(tau));
  }
}

void check_k(std::size_t k) {
  if (k == 0) throw ParameterError("top-k requires k >= 1");
}

void check_pi(double pi) {
  if (!(pi > 0.0 && pi <= 1.0)) {
    throw ParameterError("top-p requires pi in (0, 1], got " + std::to_string(pi));
  }
}

// Keeps the first `m` tokens of `order`, zeroes the rest, renormalizes.
std::vector<double> keep_prefix(std::span<const double> probs,
                                const std::vector<std::size_t>& order,
                                std::size_t m) {
  std::vector<double> out(probs.size(), 0.0);
  CompensatedSum kept;
  for (std::size_t r = 0; r < m; ++r) kept += probs[order[r]];
  const double z = kept.value();
  for (std::size_t r = 0; r < m; ++r) out[order[r]] = probs[order[r]] / z;
  return out;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParameterError("invalid " + std::string(what) + " value \"" +
                         std::string(s) + "\"");
  }
  return v;
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

double entropy(std::span<const double> probs) {
  CompensatedSum h;
  for (double p : probs) {
    if (p > 0.0) h += -p * std::log(p);
  }
  return std::max(0.0, h.value());
}

std::vector<double> apply_temperature(std::span<const double> probs, double tau) {
  check_tau(tau);
  // Softmax of ln(p) / tau, shifted by the max logit.
  const double inv = 1.0 / tau;
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double p : probs) {
    if (p > 0.0) max_logit = std::max(max_logit, std::log(p) * inv);
  }
  std::vector<double> out(probs.size(), 0.0);
  if (!std::isfinite(max_logit)) return out;
  CompensatedSum z;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) {
      out[i] = std::exp(std::log(probs[i]) * inv - max_logit);
      z += out[i];
    }
  }
  const double total = z.value();
  for (double& q : out) q /= total;
  return out;
}

std::vector<double> apply_top_k(std::span<const double> probs, std::size_t k) {
  check_k(k);
  if (k >= probs.size()) return {probs.begin(), probs.end()};
  return keep_prefix(probs, canonical_order(probs), k);
}

std::vector<double> apply_top_p(std::span<const double> probs, double pi) {
  check_pi(pi);
  if (pi >= 1.0) return {probs.begin(), probs.end()};
  const auto order = canonical_order(probs);
  CompensatedSum cumulative;
  std::size_t m = order.size();
  for (std::size_t r = 0; r < order.size(); ++r) {
    cumulative += probs[order[r]];
    if (cumulative.value() > pi) {
      m = r + 1;
      break;
    }
  }
  return keep_prefix(probs, order, m);
}

std::vector<double> apply_spec(std::span<const double> probs, const DecodingSpec& spec) {
  std::vector<double> q(probs.begin(), probs.end());
  for (const DecodingStep& step : spec.steps) {
    q = std::visit(overloaded{
                       [&](const Temperature& t) { return apply_temperature(q, t.tau); },
                       [&](const TopK& t) { return apply_top_k(q, t.k); },
                       [&](const TopP& t) { return apply_top_p(q, t.pi); },
                   },
                   step);
  }
  return q;
}

void DecodingSpec::validate() const {
  for (const DecodingStep& step : steps) {
    std::visit(overloaded{
                   [](const Temperature& t) { check_tau(t.tau); },
                   [](const TopK& t) { check_k(t.k); },
                   [](const TopP& t) { check_pi(t.pi); },
               },
               step);
  }
}

DecodingSpec DecodingSpec::parse(std::string_view text) {
  DecodingSpec spec;
  if (text == "pure") return spec;
  if (text.empty()) throw ParameterError("empty decoding spec");

  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('+', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view token = text.substr(start, end - start);
    const std::size_t eq = token.find('=');
    if (eq == std::string_view::npos) {
      throw ParameterError("malformed decoding step \"" + std::string(token) + "\"");
    }
    const std::string_view key = token.substr(0, eq);
    const std::string_view value = token.substr(eq + 1);
    if (key == "temp") {
      spec.steps.emplace_back(Temperature{parse_number<double>(value, "temp")});
    } else if (key == "topk") {
      spec.steps.emplace_back(TopK{parse_number<std::size_t>(value, "topk")});
    } else if (key == "topp") {
      spec.steps.emplace_back(TopP{parse_number<double>(value, "topp")});
    } else {
      throw ParameterError("unknown decoding step \"" + std::string(key) + "\"");
    }
    start = end + 1;
  }
  spec.validate();
  return spec;
}

std::string DecodingSpec::to_string() const {
  if (steps.empty()) return "pure";
  std::string out;
  for (const DecodingStep& step : steps) {
    if (!out.empty()) out += '+';
    out += std::visit(overloaded{
                          [](const Temperature& t) { return "temp=" + format_number(t.tau); },
                          [](const TopK& t) { return "topk=" + std::to_string(t.k); },
                          [](const TopP& t) { return "topp=" + format_number(t.pi); },
                      },
                      step);
  }
  return out;
}

}  // namespace dmap
