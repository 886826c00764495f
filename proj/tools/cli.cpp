#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "dmap/decoding.hpp"
#include "dmap/engine.hpp"
#include "dmap/error.hpp"
#include "dmap/formats.hpp"
#include "dmap/records.hpp"
#include "dmap/stats.hpp"
#include "dmap/toy_lm.hpp"
#include "svg_plot.hpp"

namespace dmap::tools {

namespace {

constexpr std::size_t kPlotBins = 40;

struct Options {
  std::string schema = "auto";
  std::string spec = "pure";
  std::uint64_t seed = 0;
  double lambda = 2.0;
  std::string clip_mode = "cap";
  bool include_prompt = false;
  std::size_t initial_cutoff = 0;
  std::string bins = "auto";
  std::string entropy_slice;
  std::string order = "dynamic";
  double alpha = 0.001;
  std::string out = "-";
  std::string format;
  std::vector<std::string> inputs;

  // hist / shape
  bool plain = false;
  std::string svg_out;
  ShapeThresholds thresholds;
  std::string uniform_band;

  // simulate
  std::size_t vocab = 16;
  double concentration = 0.5;
  std::size_t tokens = 1000;
  std::size_t texts = 1;
  std::uint64_t model_seed = 1;
  std::optional<std::uint64_t> evaluator_seed;
  std::string model_file;
  std::string evaluator_file;
  std::string save_model;
  std::size_t prompt_len = 0;
  std::string text_prefix = "toy";
};

std::string number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_bound(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParameterError("invalid bound \"" + s + "\"");
  }
  return v;
}

std::pair<double, double> parse_range(const std::string& text, const char* what) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ParameterError(std::string(what) + " must look like LO:HI");
  }
  return {parse_bound(text.substr(0, colon)), parse_bound(text.substr(colon + 1))};
}

EngineConfig engine_config(const Options& o) {
  EngineConfig cfg;
  cfg.seed = o.seed;
  cfg.lambda = o.lambda;
  cfg.clip_mode = o.clip_mode == "floor" ? ClipMode::kFloor : ClipMode::kCap;
  cfg.include_prompt = o.include_prompt;
  cfg.initial_cutoff = o.initial_cutoff;
  cfg.order_mode = o.order == "random-pit" ? OrderMode::kRandomPit : OrderMode::kDynamic;
  if (!o.entropy_slice.empty()) {
    auto [lo, hi] = parse_range(o.entropy_slice, "--entropy-slice");
    cfg.entropy_range = EntropyRange{lo, hi};
  }
  cfg.validate();
  return cfg;
}

std::optional<std::size_t> bin_override(const Options& o) {
  if (o.bins == "auto") return std::nullopt;
  std::size_t k = 0;
  auto res = std::from_chars(o.bins.data(), o.bins.data() + o.bins.size(), k);
  if (res.ec != std::errc{} || res.ptr != o.bins.data() + o.bins.size() || k == 0) {
    throw ParameterError("--bins must be \"auto\" or a positive integer");
  }
  return k;
}

Schema detect_schema(const std::string& content) {
  std::istringstream lines(content);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find("\"pos\"") == std::string::npos) continue;
    return line.find("\"probs\"") != std::string::npos ? Schema::kFull : Schema::kCompact;
  }
  return Schema::kCompact;
}

struct LoadedInput {
  std::string name;
  ParseResult parsed;
};

LoadedInput load_one(const std::string& name, const std::string& content,
                     const std::string& schema) {
  Schema s = schema == "full"      ? Schema::kFull
             : schema == "compact" ? Schema::kCompact
                                   : detect_schema(content);
  std::istringstream in(content);
  try {
    return {name, parse_stream(in, s)};
  } catch (const FormatError& e) {
    throw FormatError(name + ": " + e.what());
  }
}

std::string slurp(const std::string& path, std::istream& stdin_stream) {
  if (path == "-") {
    std::ostringstream ss;
    ss << stdin_stream.rdbuf();
    return ss.str();
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Parses every input (files concurrently), reports warnings, and merges the
// texts. A single input keeps its own order; several inputs are merged by
// text_id.
std::vector<TextRecordStream> load_streams(const Options& o, std::istream& in,
                                           std::ostream& err) {
  std::vector<std::string> paths = o.inputs.empty() ? std::vector<std::string>{"-"} : o.inputs;
  std::vector<std::string> contents;
  contents.reserve(paths.size());
  for (const auto& p : paths) contents.push_back(slurp(p, in));

  std::vector<std::future<LoadedInput>> jobs;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    jobs.push_back(std::async(std::launch::async, load_one, std::cref(paths[i]),
                              std::cref(contents[i]), std::cref(o.schema)));
  }
  std::vector<TextRecordStream> streams;
  std::map<std::string, std::string> owner;
  for (auto& job : jobs) {
    LoadedInput loaded = job.get();
    for (const auto& w : loaded.parsed.warnings) {
      err << "warning: " << loaded.name << ": line " << w.line << ": " << w.message << '\n';
    }
    for (auto& s : loaded.parsed.streams) {
      auto [it, inserted] = owner.emplace(s.text_id, loaded.name);
      if (!inserted) {
        throw FormatError("text \"" + s.text_id + "\" appears in both " + it->second +
                          " and " + loaded.name);
      }
      streams.push_back(std::move(s));
    }
  }
  if (paths.size() > 1) {
    std::stable_sort(streams.begin(), streams.end(),
                     [](const TextRecordStream& a, const TextRecordStream& b) {
                       return a.text_id < b.text_id;
                     });
  }
  return streams;
}

// Writes to --out, or to `out` when it is "-".
void emit(const Options& o, const std::string& path, const std::string& data,
          std::ostream& out) {
  if (path.empty() || path == "-") {
    out << data;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path);
  f << data;
  (void)o;
}

std::string csv_histogram(std::span<const double> heights) {
  std::string s = "bin_lo,bin_hi,height\n";
  const double k = static_cast<double>(heights.size());
  for (std::size_t j = 0; j < heights.size(); ++j) {
    s += number(static_cast<double>(j) / k) + "," + number(static_cast<double>(j + 1) / k) +
         "," + number(heights[j]) + "\n";
  }
  return s;
}

// Bin heights: exact binned weighted density, or with --plain the unweighted
// histogram of DMAP samples.
std::vector<double> histogram_heights(const Options& o,
                                      std::span<const TextRecordStream> streams,
                                      std::size_t k, std::size_t& positions) {
  const auto spec = DecodingSpec::parse(o.spec);
  const auto cfg = engine_config(o);
  if (o.plain) {
    const MapResult m = map_texts(streams, spec, cfg);
    std::vector<double> xs;
    for (const auto& s : m.samples) xs.push_back(s.x);
    auto f = frequencies(xs, k);
    for (double& h : f) h *= static_cast<double>(k);
    positions = xs.size();
    return f;
  }
  DensityAccumulator acc;
  for (const auto& s : streams) {
    for (const auto& p : evaluate_text(s, spec, cfg).positions) acc.add(p.interval, p.weight);
  }
  positions = acc.size();
  return bin_density(acc.finish(), k);
}

int cmd_map(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
  const auto streams = load_streams(o, in, err);
  const MapResult m = map_texts(streams, DecodingSpec::parse(o.spec), engine_config(o));
  if (m.impossible_tokens > 0) {
    err << "note: " << m.impossible_tokens
        << " position(s) have zero probability under the evaluation spec and were skipped\n";
  }
  std::ostringstream ss;
  write_samples(ss, m.samples);
  emit(o, o.out, ss.str(), out);
  return kExitOk;
}

int cmd_hist(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
  const auto streams = load_streams(o, in, err);
  const std::size_t k = bin_override(o).value_or(kPlotBins);
  std::size_t positions = 0;
  const auto heights = histogram_heights(o, streams, k, positions);

  HistogramPlot plot;
  plot.title = std::string(o.plain ? "DMAP histogram" : "Entropy-weighted DMAP") + " (" +
               std::to_string(positions) + " positions, " + std::to_string(k) + " bins, " +
               o.spec + ")";
  const std::string format = o.format.empty() ? "csv" : o.format;
  std::string data;
  if (format == "csv") {
    data = csv_histogram(heights);
  } else if (format == "svg") {
    data = histogram_svg(heights, plot);
  } else {
    std::ostringstream ss;
    ss << "{\"bins\":" << k << ",\"positions\":" << positions
       << ",\"weighted\":" << (o.plain ? "false" : "true") << ",\"heights\":[";
    for (std::size_t j = 0; j < heights.size(); ++j) ss << (j ? "," : "") << number(heights[j]);
    ss << "]}\n";
    data = ss.str();
  }
  emit(o, o.out, data, out);
  if (!o.svg_out.empty()) emit(o, o.svg_out, histogram_svg(heights, plot), out);
  return kExitOk;
}

int cmd_validate(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
  const auto streams = load_streams(o, in, err);
  const auto claimed = DecodingSpec::parse(o.spec);
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw ParameterError("--alpha must be in (0, 1)");
  const UniformityReport r = validate_generation(streams, claimed, engine_config(o), bin_override(o));
  emit(o, o.out, report_to_json(r, claimed.to_string()) + "\n", out);

  const bool rejected = r.p_value < o.alpha;
  err << "log10 p = " << (std::isfinite(r.log10_p) ? number(r.log10_p) : std::string("-inf"))
      << " (T=" << r.T << ", k=" << r.k << ", chi2=" << number(r.chi2) << "): "
      << (rejected ? "rejected" : "consistent") << " at alpha=" << number(o.alpha) << '\n';
  if (r.impossible_tokens > 0) {
    err << r.impossible_tokens << " observed token(s) are impossible under " << claimed.to_string()
        << '\n';
  }
  if (r.small_sample_warning) {
    err << "warning: T < 10k; the chi-square p-value is only approximate\n";
  }
  return rejected ? kExitRejected : kExitOk;
}

int cmd_shape(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
  const auto streams = load_streams(o, in, err);
  const std::size_t k = bin_override(o).value_or(kPlotBins);
  std::size_t positions = 0;
  const auto heights = histogram_heights(o, streams, k, positions);
  ShapeThresholds t = o.thresholds;
  if (!o.uniform_band.empty()) {
    auto [lo, hi] = parse_range(o.uniform_band, "--uniform-band");
    t.uniform_lo = lo;
    t.uniform_hi = hi;
  }
  const ShapeSummary s = shape_summary(heights, t);
  std::ostringstream ss;
  ss << "{\"bins\":" << k << ",\"positions\":" << positions << ",\"shape\":" << shape_to_json(s)
     << ",\"heights\":[";
  for (std::size_t j = 0; j < heights.size(); ++j) ss << (j ? "," : "") << number(heights[j]);
  ss << "]}\n";
  emit(o, o.out, ss.str(), out);
  return kExitOk;
}

int cmd_compact(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
  const auto streams = load_streams(o, in, err);
  std::ostringstream ss;
  write_compact_stream(ss, streams);
  emit(o, o.out, ss.str(), out);
  return kExitOk;
}

CategoricalLM load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open model " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return model_from_json(ss.str());
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const CategoricalLM generator = o.model_file.empty()
                                      ? random_model(o.model_seed, o.vocab, o.concentration)
                                      : load_model(o.model_file);
  CategoricalLM evaluator = generator;
  if (!o.evaluator_file.empty()) {
    evaluator = load_model(o.evaluator_file);
  } else if (o.evaluator_seed) {
    evaluator = random_model(*o.evaluator_seed, generator.vocab_size, o.concentration);
  }
  if (!o.save_model.empty()) emit(o, o.save_model, model_to_json(generator) + "\n", out);

  const auto spec = DecodingSpec::parse(o.spec);
  std::vector<TextRecordStream> streams;
  for (std::size_t i = 0; i < o.texts; ++i) {
    const std::string id = o.texts == 1 ? o.text_prefix : o.text_prefix + "-" + std::to_string(i);
    streams.push_back(evaluate(generate(generator, spec, o.tokens, o.seed, id, o.prompt_len), evaluator));
  }
  std::ostringstream ss;
  if (o.schema == "compact") {
    write_compact_stream(ss, streams);
  } else {
    write_full_stream(ss, streams);
  }
  emit(o, o.out, ss.str(), out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  Options o;
  CLI::App app{"dmap: next-token distribution maps and decoding-strategy validation", "dmap"};
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--schema", o.schema, "Input schema")
      ->check(CLI::IsMember({"auto", "full", "compact"}));
  app.add_option("--spec", o.spec, "Decoding spec, e.g. pure, temp=0.7+topp=0.9");
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--lambda", o.lambda, "Entropy clipping level");
  app.add_option("--clip-mode", o.clip_mode, "Entropy clipping direction")
      ->check(CLI::IsMember({"cap", "floor"}));
  app.add_flag("--include-prompt", o.include_prompt, "Keep prompt positions");
  app.add_option("--initial-cutoff", o.initial_cutoff, "Drop positions before N");
  app.add_option("--bins", o.bins, "Bin count or \"auto\"");
  app.add_option("--entropy-slice", o.entropy_slice, "Keep positions with entropy in [LO, HI)");
  app.add_option("--order", o.order, "Candidate ordering")
      ->check(CLI::IsMember({"dynamic", "random-pit"}));
  app.add_option("--alpha", o.alpha, "Significance level for validate");
  app.add_option("--out", o.out, "Output path (- for stdout)");
  app.add_option("--format", o.format, "Output format")
      ->check(CLI::IsMember({"csv", "svg", "json"}));

  auto* map = app.add_subcommand("map", "Write one DMAP sample per evaluated position");
  auto* hist = app.add_subcommand("hist", "Binned DMAP histogram as CSV, SVG or JSON");
  auto* validate = app.add_subcommand("validate", "Chi-square test of a claimed decoding spec");
  auto* shape = app.add_subcommand("shape", "Head/tail bias summary of the DMAP histogram");
  auto* compact = app.add_subcommand("compact", "Convert full-distribution records to compact");
  auto* simulate = app.add_subcommand("simulate", "Generate toy-model text as a record stream");

  for (auto* sub : {map, hist, validate, shape, compact}) {
    sub->add_option("inputs", o.inputs, "Record files (- for stdin)");
  }
  for (auto* sub : {hist, shape}) {
    sub->add_flag("--plain", o.plain, "Unweighted histogram of sampled points");
  }
  hist->add_option("--svg", o.svg_out, "Also write the SVG chart to this path");
  shape->add_option("--bias-high", o.thresholds.bias_high);
  shape->add_option("--bias-low", o.thresholds.bias_low);
  shape->add_option("--collapse-ratio", o.thresholds.collapse_ratio);
  shape->add_option("--uniform-band", o.uniform_band, "LO:HI band for a flat histogram");

  simulate->add_option("--vocab", o.vocab, "Vocabulary size");
  simulate->add_option("--concentration", o.concentration, "Dirichlet concentration of rows");
  simulate->add_option("--tokens", o.tokens, "Tokens per text");
  simulate->add_option("--texts", o.texts, "Number of texts");
  simulate->add_option("--model-seed", o.model_seed, "Seed of the generating model");
  simulate->add_option("--evaluator-seed", o.evaluator_seed,
                       "Score with an independent random model (black-box setting)");
  simulate->add_option("--model", o.model_file, "Generating model JSON");
  simulate->add_option("--evaluator-model", o.evaluator_file, "Evaluator model JSON");
  simulate->add_option("--save-model", o.save_model, "Write the generating model JSON");
  simulate->add_option("--prompt-len", o.prompt_len, "Flag the first N positions as prompt");
  simulate->add_option("--text-id", o.text_prefix, "Text id (prefix when --texts > 1)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }

  try {
    if (*map) return cmd_map(o, in, out, err);
    if (*hist) return cmd_hist(o, in, out, err);
    if (*validate) return cmd_validate(o, in, out, err);
    if (*shape) return cmd_shape(o, in, out, err);
    if (*compact) return cmd_compact(o, in, out, err);
    if (*simulate) return cmd_simulate(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace dmap::tools
