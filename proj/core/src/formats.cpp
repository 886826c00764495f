#include "dmap/formats.hpp"

#include <cmath>
#include <ostream>

#include <json.hpp>

#include "dmap/error.hpp"

namespace dmap {

namespace {

using nlohmann::ordered_json;

void write_line(std::ostream& out, const ordered_json& j) { out << j.dump() << '\n'; }

std::size_t leading_prompt_records(const TextRecordStream& s) {
  std::size_t n = 0;
  while (n < s.records.size() && s.records[n].is_prompt) ++n;
  return n;
}

ordered_json shape_object(const ShapeSummary& s) {
  ordered_json j;
  j["head_mass"] = s.head_mass;
  j["tail_mass"] = s.tail_mass;
  j["last_slice_ratio"] = s.last_slice_ratio;
  j["classification"] = std::string(to_string(s.classification));
  return j;
}

}  // namespace

void write_compact_stream(std::ostream& out, std::span<const TextRecordStream> streams) {
  for (const TextRecordStream& s : streams) {
    if (s.prompt_len != leading_prompt_records(s)) {
      ordered_json meta;
      meta["text_id"] = s.text_id;
      meta["prompt_len"] = s.prompt_len;
      write_line(out, meta);
    }
    for (const TokenDistributionSummary& r : s.records) {
      ordered_json j;
      j["text_id"] = r.text_id;
      j["pos"] = r.pos;
      j["p_obs"] = r.p_obs;
      j["mass_above"] = r.mass_above;
      j["entropy"] = r.entropy;
      j["is_prompt"] = r.is_prompt;
      write_line(out, j);
    }
  }
}

void write_full_stream(std::ostream& out, std::span<const TextRecordStream> streams) {
  for (const TextRecordStream& s : streams) {
    if (!s.has_full() && !s.records.empty()) {
      throw FormatError("text \"" + s.text_id + "\" has no full-distribution records");
    }
    if (s.prompt_len > 0) {
      ordered_json meta;
      meta["text_id"] = s.text_id;
      meta["prompt_len"] = s.prompt_len;
      write_line(out, meta);
    }
    for (const FullDistributionRecord& r : s.full) {
      ordered_json j;
      j["text_id"] = r.text_id;
      j["pos"] = r.pos;
      j["obs_index"] = r.obs_index;
      j["probs"] = r.probs;
      write_line(out, j);
    }
  }
}

void write_samples(std::ostream& out, std::span<const DmapSample> samples) {
  for (const DmapSample& s : samples) {
    ordered_json j;
    j["text_id"] = s.text_id;
    j["pos"] = s.pos;
    j["x"] = s.x;
    j["weight"] = s.weight;
    j["entropy"] = s.entropy;
    write_line(out, j);
  }
}

std::string density_to_json(const StepDensity& d) {
  ordered_json j;
  j["breakpoints"] = d.breakpoints;
  j["heights"] = d.heights;
  return j.dump();
}

std::string shape_to_json(const ShapeSummary& s) { return shape_object(s).dump(); }

std::string report_to_json(const UniformityReport& r, std::string_view claimed_spec) {
  ordered_json j;
  j["claimed"] = std::string(claimed_spec);
  j["T"] = r.T;
  j["k"] = r.k;
  j["chi2"] = r.chi2;
  j["df"] = r.df;
  j["p_value"] = r.p_value;
  if (std::isfinite(r.log10_p)) {
    j["log10_p"] = r.log10_p;
  } else {
    j["log10_p"] = nullptr;
  }
  j["impossible_tokens"] = r.impossible_tokens;
  j["small_sample_warning"] = r.small_sample_warning;
  if (r.tied_positions > 0) j["tied_positions"] = r.tied_positions;
  j["shape"] = shape_object(r.shape);
  return j.dump();
}

std::string model_to_json(const CategoricalLM& m) {
  ordered_json j;
  j["vocab_size"] = m.vocab_size;
  j["initial"] = m.initial;
  j["transition"] = m.transition;
  return j.dump();
}

CategoricalLM model_from_json(std::string_view text) {
  CategoricalLM m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.initial = j.at("initial").get<std::vector<double>>();
    m.transition = j.at("transition").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid model file: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace dmap
