#pragma once

// Per-position next-token distribution records and their ingestion.
//
// A text is a sequence of positions; each position carries either the full
// next-token distribution (FullDistributionRecord) or the compact summary
// that every downstream computation needs (TokenDistributionSummary).
//
// Candidate tokens are ranked by the canonical order: probability descending,
// vocabulary index ascending on ties. mass_above is the mass strictly before
// the observed token in that order, so the intervals
// [mass_above, mass_above + p_obs] of all tokens tile [0, 1) exactly even
// when probabilities tie.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dmap {

struct FullDistributionRecord {
  std::string text_id;
  std::size_t pos = 0;
  std::size_t obs_index = 0;
  std::vector<double> probs;
  bool is_prompt = false;
};

struct TokenDistributionSummary {
  std::string text_id;
  std::size_t pos = 0;
  double p_obs = 0.0;
  double mass_above = 0.0;
  double entropy = 0.0;  // nats
  bool is_prompt = false;

  friend bool operator==(const TokenDistributionSummary&,
                         const TokenDistributionSummary&) = default;
};

// All records of one text, ordered by pos (0, 1, 2, ...). `full` is either
// empty (compact input) or parallel to `records`.
struct TextRecordStream {
  std::string text_id;
  std::size_t prompt_len = 0;
  std::vector<TokenDistributionSummary> records;
  std::vector<FullDistributionRecord> full;

  bool has_full() const noexcept { return !full.empty(); }
  std::size_t size() const noexcept { return records.size(); }
};

enum class Schema { kFull, kCompact };

// Tolerances on |sum(probs) - 1| applied at ingestion.
inline constexpr double kSilentSumTolerance = 1e-6;
inline constexpr double kRenormalizeSumTolerance = 1e-3;
// Slack on mass_above + p_obs <= 1.
inline constexpr double kMassSlack = 1e-9;

// Indices sorted by probability descending, ties by ascending index.
std::vector<std::size_t> canonical_order(std::span<const double> probs);

// True when some other token has exactly the observed token's probability,
// i.e. the tie rule decided mass_above.
bool has_tie_with_observed(std::span<const double> probs, std::size_t obs_index);

// Throws FormatError unless probs is non-empty, finite, within [0, 1] and
// sums to 1 within kSilentSumTolerance.
void check_probabilities(std::span<const double> probs);

TokenDistributionSummary compact_from_full(const FullDistributionRecord& rec);

// Throws FormatError when a summary violates its invariants.
// `vocab_size` of 0 means unknown (entropy upper bound not checked).
void check_summary(const TokenDistributionSummary& s, std::size_t vocab_size = 0);

struct IngestWarning {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<TextRecordStream> streams;  // in order of first appearance
  std::vector<IngestWarning> warnings;
};

// Reads newline-delimited JSON records. Blank lines are skipped. Any
// violation throws FormatError carrying the 1-based line number.
ParseResult parse_stream(std::istream& in, Schema schema);

}  // namespace dmap
