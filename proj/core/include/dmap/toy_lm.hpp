#pragma once

// Order-1 Markov categorical language model. Small enough that every
// quantity DMAP touches can be checked exhaustively, yet it exercises the
// same per-position arithmetic as a real model.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmap/decoding.hpp"
#include "dmap/records.hpp"

namespace dmap {

struct CategoricalLM {
  std::size_t vocab_size = 0;
  std::vector<double> initial;                  // distribution of the first token
  std::vector<std::vector<double>> transition;  // [previous][next]

  // Throws ParameterError when shapes or row sums are off.
  void validate() const;

  // Conditional distribution given the previous token (none at position 0).
  std::span<const double> row(std::optional<std::size_t> previous) const;
};

// Rows are drawn from a symmetric Dirichlet(concentration). Small
// concentrations give spiky, low-entropy rows.
CategoricalLM random_model(std::uint64_t seed, std::size_t vocab_size,
                           double concentration);

struct GenerationRun {
  CategoricalLM model;
  DecodingSpec spec;
  std::uint64_t seed = 0;
  std::string text_id;
  std::size_t prompt_len = 0;
  std::vector<std::size_t> tokens;
  // Base-model rows, so evaluation has to re-apply the spec itself.
  std::vector<FullDistributionRecord> records;
};

// Samples T tokens, token i from apply_spec(row(token i-1), spec). The first
// `prompt_len` positions are flagged as prompt.
GenerationRun generate(const CategoricalLM& model, const DecodingSpec& spec, std::size_t T,
                       std::uint64_t seed, std::string text_id = "toy-0",
                       std::size_t prompt_len = 0);

// Scores the run's tokens with `evaluator` (full records plus summaries).
TextRecordStream evaluate(const GenerationRun& run, const CategoricalLM& evaluator);

struct NullMoments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  std::size_t trials = 0;
};

// Chi-square moments over `trials` independent uniform sample sets of size T
// binned into k bins.
NullMoments monte_carlo_null(std::size_t k, std::size_t T, std::size_t trials,
                             std::uint64_t seed);

}  // namespace dmap
