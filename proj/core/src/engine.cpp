#include "dmap/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmap/error.hpp"
#include "dmap/numeric.hpp"

namespace dmap {

namespace {

// Summary of the observed token under an explicit ordering of the vocabulary.
struct Placement {
  double p_obs;
  double mass_above;
};

Placement place_dynamic(std::span<const double> q, std::size_t obs) {
  const double pobs = q[obs];
  CompensatedSum above;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (q[j] > pobs || (q[j] == pobs && j < obs)) above += q[j];
  }
  return {pobs, std::clamp(above.value(), 0.0, 1.0)};
}

Placement place_random(std::span<const double> q, std::size_t obs, SplitMix64& rng) {
  std::vector<std::size_t> perm(q.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  CompensatedSum above;
  for (std::size_t idx : perm) {
    if (idx == obs) break;
    above += q[idx];
  }
  return {q[obs], std::clamp(above.value(), 0.0, 1.0)};
}

}  // namespace

// ---------------------------------------------------------------------------
// StepDensity

double StepDensity::integral() const {
  CompensatedSum s;
  for (std::size_t j = 0; j < heights.size(); ++j) {
    s += heights[j] * (breakpoints[j + 1] - breakpoints[j]);
  }
  return s.value();
}

double StepDensity::mass(double lo, double hi) const {
  CompensatedSum s;
  for (std::size_t j = 0; j < heights.size(); ++j) {
    const double l = std::max(lo, breakpoints[j]);
    const double r = std::min(hi, breakpoints[j + 1]);
    if (r > l) s += heights[j] * (r - l);
  }
  return s.value();
}

double StepDensity::operator()(double x) const {
  if (heights.empty() || x < breakpoints.front() || x > breakpoints.back()) return 0.0;
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), x);
  std::size_t j = static_cast<std::size_t>(it - breakpoints.begin());
  j = j == 0 ? 0 : j - 1;
  return heights[std::min(j, heights.size() - 1)];
}

// ---------------------------------------------------------------------------

void EngineConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("lambda must be positive");
  }
  if (entropy_range && !(entropy_range->lo < entropy_range->hi)) {
    throw ParameterError("entropy slice requires lo < hi");
  }
}

DmapInterval interval_for(const TokenDistributionSummary& rec) {
  if (!(rec.p_obs > 0.0)) {
    throw ImpossibleToken("observed token at pos " + std::to_string(rec.pos) + " of \"" +
                          rec.text_id + "\" has zero probability");
  }
  return {rec.mass_above, std::min(rec.mass_above + rec.p_obs, 1.0)};
}

double sample_point(const DmapInterval& iv, SplitMix64& stream) {
  if (!(iv.b > iv.a)) return iv.a;
  const double x = iv.a + (iv.b - iv.a) * stream.uniform();
  return std::clamp(x, iv.a, iv.b);
}

double clip_weight(double entropy, double lambda, ClipMode mode) {
  return mode == ClipMode::kCap ? std::min(entropy, lambda) : std::max(entropy, lambda);
}

TextEvaluation evaluate_text(const TextRecordStream& stream, const DecodingSpec& spec,
                             const EngineConfig& cfg) {
  cfg.validate();
  spec.validate();
  const bool needs_full = !spec.is_pure() || cfg.order_mode == OrderMode::kRandomPit;
  if (needs_full && !stream.has_full()) {
    throw ParameterError(
        "text \"" + stream.text_id +
        "\": decoding-adapted or random-order evaluation needs full-distribution records");
  }

  TextEvaluation out;
  out.positions.reserve(stream.size());
  std::vector<double> q;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const TokenDistributionSummary& rec = stream.records[i];
    if (rec.is_prompt && !cfg.include_prompt) continue;
    if (rec.pos < cfg.initial_cutoff) continue;

    TokenDistributionSummary eval = rec;
    if (needs_full) {
      const FullDistributionRecord& full = stream.full[i];
      std::span<const double> dist = full.probs;
      if (!spec.is_pure()) {
        q = apply_spec(full.probs, spec);
        dist = q;
      }
      Placement pl;
      if (cfg.order_mode == OrderMode::kRandomPit) {
        auto rng = SplitMix64::keyed(cfg.seed, stream.text_id, rec.pos,
                                     StreamTag::kPermutation);
        pl = place_random(dist, full.obs_index, rng);
      } else {
        pl = place_dynamic(dist, full.obs_index);
        if (has_tie_with_observed(dist, full.obs_index) && pl.p_obs > 0.0) {
          ++out.tied_positions;
        }
      }
      eval.p_obs = pl.p_obs;
      eval.mass_above = pl.mass_above;
      eval.entropy = spec.is_pure() ? rec.entropy : entropy(dist);
    } else if (stream.has_full() &&
               has_tie_with_observed(stream.full[i].probs, stream.full[i].obs_index) &&
               rec.p_obs > 0.0) {
      ++out.tied_positions;
    }

    if (!(eval.p_obs > 0.0)) {
      ++out.impossible_tokens;
      continue;
    }
    if (cfg.entropy_range && !cfg.entropy_range->contains(eval.entropy)) continue;

    EvaluatedPosition ep;
    ep.pos = rec.pos;
    ep.interval = interval_for(eval);
    ep.entropy = eval.entropy;
    ep.weight = clip_weight(eval.entropy, cfg.lambda, cfg.clip_mode);
    out.positions.push_back(ep);
  }
  return out;
}

void MapResult::append(MapResult&& other) {
  samples.insert(samples.end(), std::make_move_iterator(other.samples.begin()),
                 std::make_move_iterator(other.samples.end()));
  impossible_tokens += other.impossible_tokens;
  tied_positions += other.tied_positions;
}

MapResult map_text(const TextRecordStream& stream, const DecodingSpec& spec,
                   const EngineConfig& cfg) {
  TextEvaluation ev = evaluate_text(stream, spec, cfg);
  MapResult out;
  out.impossible_tokens = ev.impossible_tokens;
  out.tied_positions = ev.tied_positions;
  out.samples.reserve(ev.positions.size());
  for (const EvaluatedPosition& p : ev.positions) {
    auto rng = SplitMix64::keyed(cfg.seed, stream.text_id, p.pos, StreamTag::kSamplePoint);
    DmapSample s;
    s.text_id = stream.text_id;
    s.pos = p.pos;
    s.x = sample_point(p.interval, rng);
    s.weight = p.weight;
    s.entropy = p.entropy;
    out.samples.push_back(std::move(s));
  }
  return out;
}

MapResult map_texts(std::span<const TextRecordStream> streams, const DecodingSpec& spec,
                    const EngineConfig& cfg) {
  MapResult out;
  for (const TextRecordStream& s : streams) out.append(map_text(s, spec, cfg));
  return out;
}

// ---------------------------------------------------------------------------
// DensityAccumulator

void DensityAccumulator::add(const DmapInterval& iv, double weight) {
  items_.push_back({iv.a, iv.b, weight});
}

void DensityAccumulator::merge(const DensityAccumulator& other) {
  items_.insert(items_.end(), other.items_.begin(), other.items_.end());
}

double DensityAccumulator::total_weight() const noexcept {
  CompensatedSum s;
  for (const Item& it : items_) {
    if (it.b > it.a && it.w > 0.0) s += it.w;
  }
  return s.value();
}

StepDensity DensityAccumulator::finish() const {
  // Each interval contributes +w/|I| at its left end and -w/|I| at its right
  // end; sorting the events fixes the summation order, so the result does
  // not depend on insertion or merge order.
  struct Event {
    double at;
    double delta;
  };
  std::vector<Event> events;
  events.reserve(2 * items_.size());
  CompensatedSum total;
  for (const Item& it : items_) {
    if (!(it.b > it.a) || !(it.w > 0.0)) continue;
    const double h = it.w / (it.b - it.a);
    events.push_back({it.a, h});
    events.push_back({it.b, -h});
    total += it.w;
  }
  if (events.empty()) throw EmptyInputError("no usable positions for the density");
  std::sort(events.begin(), events.end(), [](const Event& l, const Event& r) {
    return l.at < r.at || (l.at == r.at && l.delta < r.delta);
  });

  const double z = total.value();
  StepDensity d;
  d.breakpoints.push_back(0.0);
  CompensatedSum running;
  std::size_t e = 0;
  // Segment [0, first event) has height 0.
  while (e < events.size()) {
    const double at = events[e].at;
    if (at > d.breakpoints.back()) {
      d.heights.push_back(std::max(0.0, running.value()) / z);
      d.breakpoints.push_back(at);
    }
    while (e < events.size() && events[e].at == at) running += events[e++].delta;
  }
  if (d.breakpoints.back() < 1.0) {
    d.heights.push_back(0.0);
    d.breakpoints.push_back(1.0);
  }
  return d;
}

StepDensity weighted_density(std::span<const TextRecordStream> streams,
                             const DecodingSpec& spec, const EngineConfig& cfg) {
  DensityAccumulator acc;
  for (const TextRecordStream& s : streams) {
    for (const EvaluatedPosition& p : evaluate_text(s, spec, cfg).positions) {
      acc.add(p.interval, p.weight);
    }
  }
  return acc.finish();
}

std::vector<double> bin_density(const StepDensity& d, std::size_t k) {
  if (k == 0) throw ParameterError("bin count must be positive");
  std::vector<CompensatedSum> acc(k);
  const double kd = static_cast<double>(k);
  for (std::size_t j = 0; j < d.heights.size(); ++j) {
    const double lo = d.breakpoints[j];
    const double hi = d.breakpoints[j + 1];
    const double h = d.heights[j];
    if (!(hi > lo) || h == 0.0) continue;
    auto first = static_cast<std::size_t>(std::floor(lo * kd));
    first = std::min(first, k - 1);
    for (std::size_t b = first; b < k; ++b) {
      const double blo = static_cast<double>(b) / kd;
      const double bhi = static_cast<double>(b + 1) / kd;
      if (blo >= hi) break;
      const double overlap = std::min(hi, bhi) - std::max(lo, blo);
      if (overlap > 0.0) acc[b] += h * overlap;
    }
  }
  std::vector<double> out(k);
  for (std::size_t b = 0; b < k; ++b) out[b] = kd * acc[b].value();
  return out;
}

std::vector<DmapSample> filter_by_entropy(std::span<const DmapSample> samples,
                                          double lo, double hi) {
  if (!(lo < hi)) throw ParameterError("entropy slice requires lo < hi");
  std::vector<DmapSample> out;
  for (const DmapSample& s : samples) {
    if (s.entropy >= lo && s.entropy < hi) out.push_back(s);
  }
  return out;
}

}  // namespace dmap
