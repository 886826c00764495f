#pragma once

// Decoding-strategy transforms. Each turns a base next-token distribution p
// into the distribution q actually sampled from; the same transforms are
// applied on the evaluation side to check a claimed generation strategy.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dmap {

struct Temperature {
  double tau = 1.0;
  friend bool operator==(const Temperature&, const Temperature&) = default;
};

struct TopK {
  std::size_t k = 1;
  friend bool operator==(const TopK&, const TopK&) = default;
};

struct TopP {
  double pi = 1.0;
  friend bool operator==(const TopP&, const TopP&) = default;
};

using DecodingStep = std::variant<Temperature, TopK, TopP>;

// Ordered list of transforms; empty means pure sampling.
struct DecodingSpec {
  std::vector<DecodingStep> steps;

  bool is_pure() const noexcept { return steps.empty(); }

  // Throws ParameterError on tau <= 0, k == 0 or pi outside (0, 1].
  void validate() const;

  // Textual form: "pure", "temp=0.7", "topk=50", "topp=0.8", joined by '+'
  // in application order, e.g. "temp=0.7+topp=0.9".
  static DecodingSpec parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const DecodingSpec&, const DecodingSpec&) = default;
};

// -sum p ln p with 0 ln 0 = 0, in nats.
double entropy(std::span<const double> probs);

std::vector<double> apply_temperature(std::span<const double> probs, double tau);
std::vector<double> apply_top_k(std::span<const double> probs, std::size_t k);
std::vector<double> apply_top_p(std::span<const double> probs, double pi);
std::vector<double> apply_spec(std::span<const double> probs, const DecodingSpec& spec);

}  // namespace dmap
