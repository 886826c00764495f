#pragma once

// The DMAP engine.
//
// Each evaluated position i gets an interval I_i = [a_i, b_i] of [0, 1], where
// a_i is the evaluation mass of tokens ranked above the observed token and
// b_i - a_i its own probability. A DMAP sample draws x_i ~ U(I_i); the
// entropy-weighted density averages the normalized indicators of the I_i
// with clipped-entropy weights, which removes the sampling noise.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmap/decoding.hpp"
#include "dmap/records.hpp"
#include "dmap/rng.hpp"

namespace dmap {

struct DmapInterval {
  double a = 0.0;
  double b = 0.0;

  double length() const noexcept { return b - a; }
  friend bool operator==(const DmapInterval&, const DmapInterval&) = default;
};

struct DmapSample {
  std::string text_id;
  std::size_t pos = 0;
  double x = 0.0;
  double weight = 0.0;
  double entropy = 0.0;
};

// Piecewise-constant density on [0, 1]: heights[j] applies on
// [breakpoints[j], breakpoints[j + 1]).
struct StepDensity {
  std::vector<double> breakpoints;
  std::vector<double> heights;

  double integral() const;
  double mass(double lo, double hi) const;
  double operator()(double x) const;
};

enum class ClipMode { kCap, kFloor };
enum class OrderMode { kDynamic, kRandomPit };

struct EntropyRange {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double h) const noexcept { return h >= lo && h < hi; }
};

struct EngineConfig {
  std::uint64_t seed = 0;
  double lambda = 2.0;
  ClipMode clip_mode = ClipMode::kCap;
  bool include_prompt = false;
  std::size_t initial_cutoff = 0;
  OrderMode order_mode = OrderMode::kDynamic;
  std::optional<EntropyRange> entropy_range;

  void validate() const;
};

// a = mass_above, b = min(mass_above + p_obs, 1). Throws ImpossibleToken
// when p_obs == 0.
DmapInterval interval_for(const TokenDistributionSummary& rec);

// Uniform point on [a, b]; returns a for a degenerate interval.
double sample_point(const DmapInterval& iv, SplitMix64& stream);

// cap -> min(h, lambda), floor -> max(h, lambda).
double clip_weight(double entropy, double lambda, ClipMode mode);

// One position that survived exclusion, under the evaluation distribution.
struct EvaluatedPosition {
  std::size_t pos = 0;
  DmapInterval interval;
  double entropy = 0.0;
  double weight = 0.0;
};

struct TextEvaluation {
  std::vector<EvaluatedPosition> positions;
  std::size_t impossible_tokens = 0;
  // Positions where the observed token tied with another candidate (full
  // records only), so the tie rule fixed its interval.
  std::size_t tied_positions = 0;
};

// Applies prompt exclusion, the initial cutoff, the decoding spec, the
// ordering mode and the entropy slice. Requires full records when the spec
// is not pure or the order mode is random_pit.
TextEvaluation evaluate_text(const TextRecordStream& stream, const DecodingSpec& spec,
                             const EngineConfig& cfg);

struct MapResult {
  std::vector<DmapSample> samples;
  std::size_t impossible_tokens = 0;
  std::size_t tied_positions = 0;

  void append(MapResult&& other);
};

// The point draw for (seed, text_id, pos) is independent of every other
// position, so results do not depend on processing order.
MapResult map_text(const TextRecordStream& stream, const DecodingSpec& spec,
                   const EngineConfig& cfg);

MapResult map_texts(std::span<const TextRecordStream> streams, const DecodingSpec& spec,
                    const EngineConfig& cfg);

// Order-independent accumulator for the weighted density. Merging two
// accumulators and finishing gives the same result as adding all intervals
// to one.
class DensityAccumulator {
 public:
  void add(const DmapInterval& iv, double weight);
  void merge(const DensityAccumulator& other);

  double total_weight() const noexcept;
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }

  // Throws EmptyInputError when nothing with positive width and weight was
  // added.
  StepDensity finish() const;

 private:
  struct Item {
    double a, b, w;
  };
  std::vector<Item> items_;
};

StepDensity weighted_density(std::span<const TextRecordStream> streams,
                             const DecodingSpec& spec, const EngineConfig& cfg);

// height_j = k * integral of d over [j/k, (j+1)/k].
std::vector<double> bin_density(const StepDensity& d, std::size_t k);

// Keeps samples with entropy in [lo, hi).
std::vector<DmapSample> filter_by_entropy(std::span<const DmapSample> samples,
                                          double lo, double hi);

}  // namespace dmap
