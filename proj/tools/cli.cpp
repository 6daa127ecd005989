// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <fmt/format.h>
#include <sys/resource.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "vidmerge/assembly.hpp"
#include "vidmerge/feature_io.hpp"
#include "vidmerge/pipeline.hpp"
#include "vidmerge/rng.hpp"
#include "vidmerge/segmentation.hpp"
#include "vidmerge/token_merging.hpp"

namespace vidmerge::cli {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, sep)) parts.push_back(part);
  return parts;
}

std::uint64_t parse_u64(const std::string& text, std::string_view what) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("{}: '{}' is not a non-negative integer", what, text));
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("{}: '{}' is out of range", what, text));
  }
}

SyntheticSpec parse_synthetic(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 5 && parts.size() != 6) {
    throw Error(ErrorCode::InvalidArgument,
                "--synthetic expects T,N,d,L_enc,seed[,events]");
  }
  SyntheticSpec spec;
  spec.shape.num_frames = parse_u64(parts[0], "--synthetic T");
  spec.shape.num_patches = parse_u64(parts[1], "--synthetic N");
  spec.shape.dim = parse_u64(parts[2], "--synthetic d");
  spec.shape.num_encoder_layers = parse_u64(parts[3], "--synthetic L_enc");
  spec.seed = parse_u64(parts[4], "--synthetic seed");
  if (parts.size() == 6) {
    spec.kind = PiecewiseEvents{parse_u64(parts[5], "--synthetic events")};
  }
  return spec;
}

PartitionRule parse_partition(const std::string& text) {
  if (text == "alternating") return AlternatingPartition{};
  if (text.rfind("random:", 0) == 0) {
    return SeededRandomPartition{parse_u64(text.substr(7), "--partition seed")};
  }
  throw Error(ErrorCode::InvalidArgument,
              fmt::format("--partition '{}': expected alternating|random:<seed>", text));
}

ScheduleRule parse_schedule(const std::string& text) {
  if (text == "halving") return HalvingSchedule{};
  if (text.rfind("fixed:", 0) == 0) {
    return FixedStepSchedule{parse_u64(text.substr(6), "--schedule step")};
  }
  throw Error(ErrorCode::InvalidArgument,
              fmt::format("--schedule '{}': expected halving|fixed:<r>", text));
}

/// Flags shared by compress, inspect and bench.
struct PipelineFlags {
  std::string input;
  std::string synthetic;
  std::size_t segments = 10;
  std::size_t tokens_per_segment = 30;
  std::size_t global_layers = 5;
  std::size_t heads = 16;
  std::string partition = "alternating";
  std::string schedule = "halving";
  std::string order = "gl";
  std::string weighting = "size";
  bool truncate = false;
  std::size_t threads = 0;

  void add_to(CLI::App& app) {
    auto* in = app.add_option("--input", input, "LVFT feature file");
    auto* syn = app.add_option("--synthetic", synthetic,
                               "Synthetic video T,N,d,L_enc,seed[,events]");
    in->excludes(syn);
    app.add_option("--segments", segments, "Number of segments S");
    app.add_option("--tokens-per-segment", tokens_per_segment, "Tokens M per segment");
    app.add_option("--global-layers", global_layers, "Global [CLS] layers E");
    app.add_option("--heads", heads, "Similarity heads C");
    app.add_option("--partition", partition, "alternating|random:<seed>");
    app.add_option("--schedule", schedule, "halving|fixed:<r>");
    app.add_option("--order", order, "gl|lg");
    app.add_option("--weighting", weighting, "size|plain");
    app.add_flag("--truncate", truncate, "Drop trailing T mod S frames");
    app.add_option("--threads", threads, "Worker threads (0 = hardware)");
  }

  MergeConfig config() const {
    MergeConfig config;
    config.num_segments = segments;
    config.tokens_per_segment = tokens_per_segment;
    config.num_global_layers = global_layers;
    config.similarity_heads = heads;
    config.partition_rule = parse_partition(partition);
    config.schedule_rule = parse_schedule(schedule);
    if (order == "gl") {
      config.assembly_order = AssemblyOrder::GlobalFirst;
    } else if (order == "lg") {
      config.assembly_order = AssemblyOrder::LocalFirst;
    } else {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("--order '{}': expected gl|lg", order));
    }
    if (weighting == "size") {
      config.merge_weighting = MergeWeighting::SizeWeighted;
    } else if (weighting == "plain") {
      config.merge_weighting = MergeWeighting::PlainAverage;
    } else {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("--weighting '{}': expected size|plain", weighting));
    }
    config.truncate_trailing_frames = truncate;
    return config;
  }

  VideoFeatures load() const {
    if (!input.empty()) return read_features_file(input);
    if (!synthetic.empty()) return generate_synthetic(parse_synthetic(synthetic));
    throw Error(ErrorCode::InvalidArgument, "one of --input or --synthetic is required");
  }
};

// ---------------------------------------------------------------------------

struct CompressFlags {
  PipelineFlags pipeline;
  std::string project = "identity";
  std::string out_path;
};

int cmd_compress(const CompressFlags& flags, std::ostream& out) {
  const auto start = Clock::now();
  const VideoFeatures features = flags.pipeline.load();
  const MergeConfig config = flags.pipeline.config();
  Projection projection;
  if (flags.project != "identity") {
    projection.weights = read_projection_file(flags.project);
  }
  PipelineOptions options;
  options.threads = flags.pipeline.threads;
  const CompressionResult result = compress_video(features, config, options);
  const FloatMatrix rows = project(result.representation, projection);
  if (!flags.out_path.empty()) write_compressed_file(rows, flags.out_path);
  const CompressionMetrics metrics =
      compression_metrics(features, result.representation);
  const double max_residual =
      metrics.conservation_residuals.empty()
          ? 0.0
          : *std::max_element(metrics.conservation_residuals.begin(),
                              metrics.conservation_residuals.end());
  out << fmt::format(
      "input_tokens={} output_tokens={} ratio={:.6f} coverage={:.6f} "
      "max_conservation_residual={:.3e} wall_ms={:.1f}\n",
      metrics.input_tokens, metrics.output_tokens, metrics.compression_ratio,
      metrics.coverage, max_residual, elapsed_ms(start));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InspectFlags {
  PipelineFlags pipeline;
  std::size_t segment = 0;
  bool dump_plan = false;
};

int cmd_inspect(const InspectFlags& flags, std::ostream& out) {
  const VideoFeatures features = flags.pipeline.load();
  const MergeConfig config = validate_config(flags.pipeline.config(), features.shape());
  if (flags.segment >= config.num_segments) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("--segment {} out of range [0, {})", flags.segment,
                            config.num_segments));
  }
  const auto views = segment_video(features, config);
  MergeOptions options;
  options.track_provenance = false;
  const auto merged = merge_segment(views[flags.segment], config, options);
  const std::string dump = format_plan(merged.plan, flags.segment);
  if (flags.dump_plan) {
    out << dump;
  } else {
    out << dump.substr(0, dump.find('\n') + 1);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct OracleFlags {
  std::size_t trials = 100;
  std::size_t max_tokens = 256;
  std::uint64_t seed = 0;
  bool inject_tiebreak_bug = false;
};

struct OracleTrial {
  VideoFeatures features;
  MergeConfig config;
};

OracleTrial make_trial(std::uint64_t seed, std::size_t trial, std::size_t max_tokens) {
  Rng rng(seed ^ (0xd1b54a32d192ed03ULL * (trial + 1)));
  constexpr std::size_t kDims[] = {8, 32, 64};
  constexpr std::size_t kHeads[] = {1, 2, 4};
  const std::size_t tokens = 8 + rng.below(max_tokens - 8 + 1);
  const std::size_t dim = kDims[rng.below(3)];
  const std::size_t heads = kHeads[rng.below(3)];
  const std::size_t target = 1 + rng.below(tokens);
  const bool quantized = trial % 2 == 1;

  std::vector<float> patches(tokens * dim);
  for (float& v : patches) {
    v = quantized ? static_cast<float>(static_cast<int>(rng.below(3)) - 1)
                  : static_cast<float>(rng.normal());
  }
  std::vector<float> cls(dim, 0.0f);

  OracleTrial result{VideoFeatures(VideoShape{1, tokens, dim, 1}, std::move(patches),
                                   std::move(cls)),
                     MergeConfig{}};
  MergeConfig& config = result.config;
  config.num_segments = 1;
  config.tokens_per_segment = target;
  config.num_global_layers = 1;
  config.similarity_heads = heads;
  if (rng.below(2) == 0) {
    config.partition_rule = AlternatingPartition{};
  } else {
    config.partition_rule = SeededRandomPartition{rng()};
  }
  if (rng.below(2) == 0) {
    config.schedule_rule = HalvingSchedule{};
  } else {
    config.schedule_rule = FixedStepSchedule{1 + rng.below(tokens)};
  }
  config.merge_weighting =
      rng.below(2) == 0 ? MergeWeighting::SizeWeighted : MergeWeighting::PlainAverage;
  return result;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

/// Index of the first diverging step, or nullopt when both runs agree.
std::optional<std::size_t> first_divergence(const SegmentMergeResult& fast,
                                            const SegmentMergeResult& oracle) {
  const auto& a = fast.plan.steps;
  const auto& b = oracle.plan.steps;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (!(a[i] == b[i])) return i;
  }
  if (a.size() != b.size()) return std::min(a.size(), b.size());
  const auto& x = fast.feature.tokens;
  const auto& y = oracle.feature.tokens;
  bool equal = x.size() == y.size();
  for (std::size_t i = 0; equal && i < x.size(); ++i) {
    equal = same_bits(x[i].vector, y[i].vector) && x[i].weight == y[i].weight &&
            x[i].provenance == y[i].provenance;
  }
  if (!equal) return a.empty() ? 0 : a.size() - 1;
  return std::nullopt;
}

int cmd_oracle_check(const OracleFlags& flags, std::ostream& out) {
  if (flags.max_tokens > kOracleTokenLimit) {
    throw Error(ErrorCode::InputTooLargeForOracle,
                fmt::format("--max-tokens {} exceeds oracle limit {}",
                            flags.max_tokens, kOracleTokenLimit));
  }
  if (flags.max_tokens < 8) {
    throw Error(ErrorCode::InvalidArgument, "--max-tokens must be >= 8");
  }
  if (flags.trials == 0) {
    throw Error(ErrorCode::InvalidArgument, "--trials must be >= 1");
  }
  MergeOptions options;
  options.track_provenance = true;
  options.inject_tiebreak_bug = flags.inject_tiebreak_bug;
  std::size_t passed = 0;
  for (std::size_t trial = 0; trial < flags.trials; ++trial) {
    const OracleTrial instance = make_trial(flags.seed, trial, flags.max_tokens);
    const auto view = segment_video(instance.features, instance.config).front();
    const auto fast = merge_segment(view, instance.config, options);
    const auto oracle = oracle_merge_segment(view, instance.config);
    const auto divergence = first_divergence(fast, oracle);
    if (divergence) {
      out << fmt::format("trial {} FAIL step={} R={} M={}\n", trial, *divergence,
                         view.num_tokens(), instance.config.tokens_per_segment);
    } else {
      ++passed;
      out << fmt::format("trial {} PASS R={} M={}\n", trial, view.num_tokens(),
                         instance.config.tokens_per_segment);
    }
  }
  out << fmt::format("oracle-check {}/{} {}\n", passed, flags.trials,
                     passed == flags.trials ? "PASS" : "FAIL");
  return passed == flags.trials ? kExitOk : kExitOracleMismatch;
}

// ---------------------------------------------------------------------------

struct BenchFlags {
  PipelineFlags pipeline;
  std::size_t repeat = 5;
  bool json = false;
};

double percentile(std::vector<double> values, double fraction) {
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

long peak_rss_kib() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss;
}

int cmd_bench(const BenchFlags& flags, std::ostream& out) {
  if (flags.repeat == 0) {
    throw Error(ErrorCode::InvalidArgument, "--repeat must be >= 1");
  }
  const VideoFeatures features = flags.pipeline.load();
  const MergeConfig config = validate_config(flags.pipeline.config(), features.shape());
  const VideoFeatures used = frames_used(config) == features.num_frames()
                                 ? features
                                 : truncate_frames(features, frames_used(config));
  const auto views = segment_video(used, config);
  const std::size_t threads = resolve_thread_count(flags.pipeline.threads);
  MergeOptions options;
  options.track_provenance = false;

  std::vector<double> segment_ms;
  std::vector<double> total_ms;
  std::uint64_t evaluations = 0;
  for (std::size_t rep = 0; rep < flags.repeat; ++rep) {
    std::vector<double> times(views.size());
    std::vector<std::uint64_t> counts(views.size());
    const auto start = Clock::now();
    parallel_for(views.size(), threads, [&](std::size_t s) {
      const auto segment_start = Clock::now();
      counts[s] = merge_segment(views[s], config, options).plan.similarity_evaluations;
      times[s] = elapsed_ms(segment_start);
    });
    total_ms.push_back(elapsed_ms(start));
    segment_ms.insert(segment_ms.end(), times.begin(), times.end());
    evaluations = 0;
    for (auto c : counts) evaluations += c;
  }

  const std::size_t merged_tokens = used.num_frames() * used.num_patches();
  const double total_median = percentile(total_ms, 0.5);
  nlohmann::ordered_json report;
  report["repeat"] = flags.repeat;
  report["threads"] = threads;
  report["segments"] = views.size();
  report["input_tokens"] = merged_tokens;
  report["segment_median_ms"] = percentile(segment_ms, 0.5);
  report["segment_p95_ms"] = percentile(segment_ms, 0.95);
  report["total_median_ms"] = total_median;
  report["total_p95_ms"] = percentile(total_ms, 0.95);
  report["tokens_per_second"] =
      total_median > 0.0 ? static_cast<double>(merged_tokens) / (total_median / 1e3) : 0.0;
  report["similarity_evaluations"] = evaluations;
  report["peak_rss_kib"] = peak_rss_kib();

  if (flags.json) {
    out << report.dump() << '\n';
    return kExitOk;
  }
  for (const auto& [key, value] : report.items()) {
    out << key << ": " << value.dump() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-video token compression: segment, merge, assemble"};
  app.require_subcommand(1);

  CompressFlags compress;
  auto* compress_cmd = app.add_subcommand("compress", "Compress a video into E + M*S tokens");
  compress.pipeline.add_to(*compress_cmd);
  compress_cmd->add_option("--project", compress.project, "LVPW weights path or identity");
  compress_cmd->add_option("--out", compress.out_path, "Output LVCR path");

  InspectFlags inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "Show the merge plan of one segment");
  inspect.pipeline.add_to(*inspect_cmd);
  inspect_cmd->add_option("--segment", inspect.segment, "Segment index");
  inspect_cmd->add_flag("--dump-plan", inspect.dump_plan, "Print every step and edge");

  OracleFlags oracle;
  auto* oracle_cmd = app.add_subcommand("oracle-check",
                                        "Compare the merger with the brute-force oracle");
  oracle_cmd->add_option("--trials", oracle.trials, "Number of random instances");
  oracle_cmd->add_option("--max-tokens", oracle.max_tokens, "Largest K*N drawn");
  oracle_cmd->add_option("--seed", oracle.seed, "Instance seed");
  oracle_cmd->add_flag("--inject-tiebreak-bug", oracle.inject_tiebreak_bug,
                       "Negative control: break tie handling in the merger");

  BenchFlags bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time segment merging");
  bench.pipeline.add_to(*bench_cmd);
  bench_cmd->add_option("--repeat", bench.repeat, "Repetitions");
  bench_cmd->add_flag("--json", bench.json, "Emit one JSON object");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::string detail = e.what();
    std::replace(detail.begin(), detail.end(), '\n', ' ');
    err << "ERROR " << to_string(ErrorCode::InvalidArgument) << ": " << detail << '\n';
    return kExitError;
  }

  try {
    if (compress_cmd->parsed()) return cmd_compress(compress, out);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect, out);
    if (oracle_cmd->parsed()) return cmd_oracle_check(oracle, out);
    return cmd_bench(bench, out);
  } catch (const Error& e) {
    std::string detail = e.what();
    std::replace(detail.begin(), detail.end(), '\n', ' ');
    err << "ERROR " << to_string(e.code()) << ": " << detail << '\n';
  } catch (const std::exception& e) {
    err << "ERROR " << to_string(ErrorCode::IoError) << ": " << e.what() << '\n';
  }
  return kExitError;
}

}  // namespace vidmerge::cli
