#include "dmap/records.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <string>

#include <json.hpp>

#include "dmap/decoding.hpp"
#include "dmap/error.hpp"
#include "dmap/numeric.hpp"

namespace dmap {

namespace {

using nlohmann::json;

// Does token j come strictly before token obs in the canonical order?
inline bool precedes(double pj, std::size_t j, double pobs, std::size_t obs) {
  return pj > pobs || (pj == pobs && j < obs);
}

std::size_t get_index(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw FormatError(std::string("missing field \"") + key + "\"", line);
  }
  if (it->is_number_unsigned()) return it->get<std::size_t>();
  if (it->is_number_integer()) {
    auto v = it->get<long long>();
    if (v >= 0) return static_cast<std::size_t>(v);
  }
  throw FormatError(std::string("field \"") + key +
                        "\" must be a non-negative integer",
                    line);
}

double get_real(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw FormatError(std::string("missing field \"") + key + "\"", line);
  }
  if (!it->is_number()) {
    throw FormatError(std::string("field \"") + key + "\" must be a number",
                      line);
  }
  return it->get<double>();
}

std::string get_text_id(const json& obj, std::size_t line) {
  auto it = obj.find("text_id");
  if (it == obj.end()) throw FormatError("missing field \"text_id\"", line);
  if (!it->is_string()) throw FormatError("\"text_id\" must be a string", line);
  return it->get<std::string>();
}

struct PendingText {
  TextRecordStream stream;
  bool has_metadata = false;
};

}  // namespace

std::vector<std::size_t> canonical_order(std::span<const double> probs) {
  if (probs.empty()) throw FormatError("empty probability vector");
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return probs[i] > probs[j];
  });
  return order;
}

bool has_tie_with_observed(std::span<const double> probs, std::size_t obs_index) {
  const double pobs = probs[obs_index];
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (j != obs_index && probs[j] == pobs) return true;
  }
  return false;
}

void check_probabilities(std::span<const double> probs) {
  if (probs.empty()) throw FormatError("empty probability vector");
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw FormatError("probability outside [0, 1]");
    }
  }
  const double total = compensated_total(probs);
  if (std::fabs(total - 1.0) > kSilentSumTolerance) {
    throw FormatError("probabilities sum to " + std::to_string(total));
  }
}

TokenDistributionSummary compact_from_full(const FullDistributionRecord& rec) {
  check_probabilities(rec.probs);
  if (rec.obs_index >= rec.probs.size()) {
    throw FormatError("obs_index " + std::to_string(rec.obs_index) +
                      " out of range for vocabulary of " +
                      std::to_string(rec.probs.size()));
  }

  const double pobs = rec.probs[rec.obs_index];
  CompensatedSum above;
  for (std::size_t j = 0; j < rec.probs.size(); ++j) {
    if (precedes(rec.probs[j], j, pobs, rec.obs_index)) above += rec.probs[j];
  }

  TokenDistributionSummary s;
  s.text_id = rec.text_id;
  s.pos = rec.pos;
  s.p_obs = pobs;
  s.mass_above = std::clamp(above.value(), 0.0, 1.0);
  s.entropy = entropy(rec.probs);
  s.is_prompt = rec.is_prompt;
  return s;
}

void check_summary(const TokenDistributionSummary& s, std::size_t vocab_size) {
  auto bad = [](double v) { return !std::isfinite(v); };
  if (bad(s.p_obs) || s.p_obs < 0.0 || s.p_obs > 1.0) {
    throw FormatError("p_obs outside [0, 1]");
  }
  if (bad(s.mass_above) || s.mass_above < 0.0 || s.mass_above > 1.0) {
    throw FormatError("mass_above outside [0, 1]");
  }
  if (s.mass_above + s.p_obs > 1.0 + kMassSlack) {
    throw FormatError("mass_above + p_obs exceeds 1");
  }
  if (bad(s.entropy) || s.entropy < 0.0) {
    throw FormatError("entropy must be finite and non-negative");
  }
  if (vocab_size > 0 && s.entropy > std::log(static_cast<double>(vocab_size)) + 1e-9) {
    throw FormatError("entropy exceeds ln(vocabulary size)");
  }
}

ParseResult parse_stream(std::istream& in, Schema schema) {
  ParseResult result;
  std::vector<PendingText> texts;
  std::map<std::string, std::size_t, std::less<>> index_of;

  auto text_for = [&](const std::string& id) -> PendingText& {
    auto [it, inserted] = index_of.try_emplace(id, texts.size());
    if (inserted) {
      texts.emplace_back();
      texts.back().stream.text_id = id;
    }
    return texts[it->second];
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!obj.is_object()) throw FormatError("record is not a JSON object", lineno);

    const std::string id = get_text_id(obj, lineno);
    PendingText& text = text_for(id);

    // Stream metadata: {"text_id", "prompt_len"}.
    if (!obj.contains("pos") && obj.contains("prompt_len")) {
      if (text.has_metadata || !text.stream.records.empty()) {
        throw FormatError("metadata for \"" + id + "\" must precede its records",
                          lineno);
      }
      text.stream.prompt_len = get_index(obj, "prompt_len", lineno);
      text.has_metadata = true;
      continue;
    }

    const std::size_t pos = get_index(obj, "pos", lineno);
    if (pos != text.stream.records.size()) {
      throw FormatError("non-monotone pos " + std::to_string(pos) + " for \"" + id +
                            "\" (expected " +
                            std::to_string(text.stream.records.size()) + ")",
                        lineno);
    }

    try {
      if (schema == Schema::kCompact) {
        TokenDistributionSummary s;
        s.text_id = id;
        s.pos = pos;
        s.p_obs = get_real(obj, "p_obs", lineno);
        s.mass_above = get_real(obj, "mass_above", lineno);
        s.entropy = get_real(obj, "entropy", lineno);
        auto it = obj.find("is_prompt");
        if (it == obj.end()) throw FormatError("missing field \"is_prompt\"", lineno);
        if (!it->is_boolean()) throw FormatError("\"is_prompt\" must be a boolean", lineno);
        s.is_prompt = it->get<bool>();
        check_summary(s);
        text.stream.records.push_back(std::move(s));
      } else {
        FullDistributionRecord rec;
        rec.text_id = id;
        rec.pos = pos;
        rec.obs_index = get_index(obj, "obs_index", lineno);
        auto it = obj.find("probs");
        if (it == obj.end()) throw FormatError("missing field \"probs\"", lineno);
        if (!it->is_array() || it->empty()) {
          throw FormatError("\"probs\" must be a non-empty array", lineno);
        }
        rec.probs.reserve(it->size());
        for (const auto& v : *it) {
          if (!v.is_number()) throw FormatError("\"probs\" entries must be numbers", lineno);
          rec.probs.push_back(v.get<double>());
        }
        for (double p : rec.probs) {
          if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
            throw FormatError("probability outside [0, 1]", lineno);
          }
        }
        const double total = compensated_total(rec.probs);
        const double dev = std::fabs(total - 1.0);
        if (dev > kRenormalizeSumTolerance) {
          throw FormatError("probabilities sum to " + std::to_string(total), lineno);
        }
        if (dev > kSilentSumTolerance) {
          for (double& p : rec.probs) p /= total;
          result.warnings.push_back(
              {lineno, "probabilities summed to " + std::to_string(total) +
                           "; renormalized"});
        }
        text.stream.records.push_back(compact_from_full(rec));
        text.stream.full.push_back(std::move(rec));
      }
    } catch (const FormatError& e) {
      if (e.line() != 0) throw;
      throw FormatError(e.what(), lineno);
    }
  }

  result.streams.reserve(texts.size());
  for (PendingText& t : texts) {
    TextRecordStream& s = t.stream;
    if (t.has_metadata) {
      for (std::size_t i = 0; i < s.records.size(); ++i) {
        const bool prompt = i < s.prompt_len;
        s.records[i].is_prompt = prompt;
        if (s.has_full()) s.full[i].is_prompt = prompt;
      }
    } else if (schema == Schema::kCompact) {
      // Prompt flags must form a prefix.
      std::size_t n = 0;
      while (n < s.records.size() && s.records[n].is_prompt) ++n;
      for (std::size_t i = n; i < s.records.size(); ++i) {
        if (s.records[i].is_prompt) {
          throw FormatError("prompt records of \"" + s.text_id +
                            "\" are not a prefix of the text");
        }
      }
      s.prompt_len = n;
    }
    result.streams.push_back(std::move(s));
  }
  return result;
}

}  // namespace dmap
