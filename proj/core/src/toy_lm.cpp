#include "dmap/toy_lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dmap/error.hpp"
#include "dmap/numeric.hpp"
#include "dmap/rng.hpp"
#include "dmap/stats.hpp"

namespace dmap {

namespace {

void check_row(std::span<const double> row, std::size_t vocab) {
  if (row.size() != vocab) throw ParameterError("model row has wrong length");
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ParameterError("negative model probability");
  }
  if (std::fabs(compensated_total(row) - 1.0) > 1e-12) {
    throw ParameterError("model row does not sum to 1");
  }
}

// Symmetric Dirichlet row. Gamma(alpha) variates are drawn in log space as
// ln G(alpha + 1) + ln(U) / alpha so tiny concentrations do not underflow.
std::vector<double> dirichlet_row(SplitMix64& rng, std::size_t vocab, double alpha) {
  std::gamma_distribution<double> gamma(alpha + 1.0, 1.0);
  std::vector<double> logs(vocab);
  for (double& l : logs) {
    double u;
    do {
      u = rng.uniform();
    } while (u == 0.0);
    l = std::log(gamma(rng)) + std::log(u) / alpha;
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> row(vocab);
  CompensatedSum z;
  for (std::size_t i = 0; i < vocab; ++i) {
    row[i] = std::exp(logs[i] - top);
    z += row[i];
  }
  const double total = z.value();
  for (double& p : row) p /= total;
  return row;
}

// Inverse-CDF draw; never returns a zero-probability index.
std::size_t draw(std::span<const double> q, double u) {
  CompensatedSum cum;
  std::size_t last = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] <= 0.0) continue;
    last = i;
    cum += q[i];
    if (u < cum.value()) return i;
  }
  return last;
}

}  // namespace

void CategoricalLM::validate() const {
  if (vocab_size < 1) throw ParameterError("model needs a non-empty vocabulary");
  check_row(initial, vocab_size);
  if (transition.size() != vocab_size) throw ParameterError("transition matrix is not square");
  for (const auto& r : transition) check_row(r, vocab_size);
}

std::span<const double> CategoricalLM::row(std::optional<std::size_t> previous) const {
  if (!previous) return initial;
  return transition.at(*previous);
}

CategoricalLM random_model(std::uint64_t seed, std::size_t vocab_size, double concentration) {
  if (vocab_size < 2) throw ParameterError("random_model needs vocab_size >= 2");
  if (!(concentration > 0.0)) throw ParameterError("concentration must be positive");
  CategoricalLM m;
  m.vocab_size = vocab_size;
  auto rng = SplitMix64::keyed(seed, StreamTag::kModel);
  m.initial = dirichlet_row(rng, vocab_size, concentration);
  m.transition.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    m.transition.push_back(dirichlet_row(rng, vocab_size, concentration));
  }
  return m;
}

GenerationRun generate(const CategoricalLM& model, const DecodingSpec& spec, std::size_t T,
                       std::uint64_t seed, std::string text_id, std::size_t prompt_len) {
  model.validate();
  spec.validate();

  // The adapted distribution depends only on the previous token.
  std::vector<double> adapted_initial = apply_spec(model.initial, spec);
  std::vector<std::vector<double>> adapted;
  adapted.reserve(model.vocab_size);
  for (const auto& r : model.transition) adapted.push_back(apply_spec(r, spec));

  GenerationRun run;
  run.model = model;
  run.spec = spec;
  run.seed = seed;
  run.text_id = std::move(text_id);
  run.prompt_len = prompt_len;
  run.tokens.reserve(T);
  run.records.reserve(T);

  auto rng = SplitMix64::keyed(seed, run.text_id, 0, StreamTag::kGeneration);
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < T; ++i) {
    std::span<const double> q = prev ? std::span<const double>(adapted[*prev])
                                     : std::span<const double>(adapted_initial);
    const std::size_t tok = draw(q, rng.uniform());
    FullDistributionRecord rec;
    rec.text_id = run.text_id;
    rec.pos = i;
    rec.obs_index = tok;
    auto base = model.row(prev);
    rec.probs.assign(base.begin(), base.end());
    rec.is_prompt = i < prompt_len;
    run.tokens.push_back(tok);
    run.records.push_back(std::move(rec));
    prev = tok;
  }
  return run;
}

TextRecordStream evaluate(const GenerationRun& run, const CategoricalLM& evaluator) {
  evaluator.validate();
  if (evaluator.vocab_size != run.model.vocab_size) {
    throw ParameterError("evaluator vocabulary size " + std::to_string(evaluator.vocab_size) +
                         " does not match generator's " +
                         std::to_string(run.model.vocab_size));
  }
  TextRecordStream s;
  s.text_id = run.text_id;
  s.prompt_len = std::min(run.prompt_len, run.tokens.size());
  s.records.reserve(run.tokens.size());
  s.full.reserve(run.tokens.size());
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < run.tokens.size(); ++i) {
    FullDistributionRecord rec;
    rec.text_id = run.text_id;
    rec.pos = i;
    rec.obs_index = run.tokens[i];
    auto row = evaluator.row(prev);
    rec.probs.assign(row.begin(), row.end());
    rec.is_prompt = i < run.prompt_len;
    s.records.push_back(compact_from_full(rec));
    s.full.push_back(std::move(rec));
    prev = run.tokens[i];
  }
  return s;
}

NullMoments monte_carlo_null(std::size_t k, std::size_t T, std::size_t trials,
                             std::uint64_t seed) {
  if (trials < 100) throw ParameterError("monte_carlo_null needs at least 100 trials");
  if (k < 2 || T == 0) throw ParameterError("monte_carlo_null needs k >= 2 and T >= 1");
  std::vector<double> xs(T);
  CompensatedSum sum;
  CompensatedSum sum_sq;
  std::vector<double> stats;
  stats.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    auto rng = SplitMix64::keyed(seed, StreamTag::kNull, t);
    for (double& x : xs) x = rng.uniform();
    const double c = chi_square_stat(frequencies(xs, k), T);
    stats.push_back(c);
    sum += c;
  }
  NullMoments m;
  m.trials = trials;
  m.mean = sum.value() / static_cast<double>(trials);
  for (double c : stats) sum_sq += (c - m.mean) * (c - m.mean);
  m.variance = sum_sq.value() / static_cast<double>(trials - 1);
  return m;
}

}  // namespace dmap
