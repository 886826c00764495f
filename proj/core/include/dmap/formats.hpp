#pragma once

// Wire formats: newline-delimited record streams, sample dumps, density
// dumps, validation reports and model files. Doubles are written in their
// shortest round-trip form, so equal values always produce equal bytes.

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "dmap/engine.hpp"
#include "dmap/records.hpp"
#include "dmap/stats.hpp"
#include "dmap/toy_lm.hpp"

namespace dmap {

// {"text_id","pos","p_obs","mass_above","entropy","is_prompt"} per line. A
// {"text_id","prompt_len"} line is written first only when the prompt flags
// alone would not reproduce prompt_len.
void write_compact_stream(std::ostream& out, std::span<const TextRecordStream> streams);

// {"text_id","pos","obs_index","probs"} per line, preceded by a metadata line
// when prompt_len > 0. Requires full records.
void write_full_stream(std::ostream& out, std::span<const TextRecordStream> streams);

// {"text_id","pos","x","weight","entropy"} per line.
void write_samples(std::ostream& out, std::span<const DmapSample> samples);

// {"breakpoints": [...], "heights": [...]}
std::string density_to_json(const StepDensity& d);

std::string shape_to_json(const ShapeSummary& s);

// {"T","k","chi2","df","p_value","log10_p","impossible_tokens",
//  "small_sample_warning","shape":{...}} plus the claimed spec and, when
// set, the tie count. log10_p is null when p_value is exactly zero.
std::string report_to_json(const UniformityReport& r, std::string_view claimed_spec);

// {"vocab_size","initial":[...],"transition":[[...],...]}
std::string model_to_json(const CategoricalLM& m);
CategoricalLM model_from_json(std::string_view text);

}  // namespace dmap
