// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "vidmerge/token_merging.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <numeric>

#include "vidmerge/rng.hpp"
#include "vidmerge/similarity.hpp"

namespace vidmerge {

// ---------------------------------------------------------------------------
// TokenSet

TokenSet::TokenSet(std::size_t dim, bool track_provenance)
    : dim_(dim), track_provenance_(track_provenance) {
  if (dim_ == 0) throw Error(ErrorCode::InvalidShape, "token dim must be > 0");
}

TokenSet TokenSet::from_view(const SegmentView& view, bool track_provenance) {
  TokenSet set(view.dim(), track_provenance);
  set.values_.assign(view.block().begin(), view.block().end());
  set.weights_.assign(view.num_tokens(), 1);
  if (track_provenance) {
    set.provenance_.reserve(view.num_tokens());
    for (std::size_t i = 0; i < view.num_tokens(); ++i) {
      set.provenance_.push_back({view.provenance(i)});
    }
  }
  return set;
}

TokenSet TokenSet::from_tokens(std::span<const Token> tokens) {
  if (tokens.empty()) {
    throw Error(ErrorCode::InvalidArgument, "token list must not be empty");
  }
  const bool tracked = std::all_of(tokens.begin(), tokens.end(), [](const Token& t) {
    return t.provenance.has_value();
  });
  TokenSet set(tokens.front().vector.size(), tracked);
  set.reserve(tokens.size());
  for (const Token& token : tokens) {
    if (token.vector.size() != set.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "tokens differ in dimension");
    }
    if (token.weight == 0) {
      throw Error(ErrorCode::InvalidArgument, "token weight must be >= 1");
    }
    set.push_back(token.vector, token.weight,
                  tracked ? *token.provenance : std::vector<PatchRef>{});
  }
  return set;
}

void TokenSet::reserve(std::size_t count) {
  values_.reserve(count * dim_);
  weights_.reserve(count);
  if (track_provenance_) provenance_.reserve(count);
}

void TokenSet::push_back(std::span<const float> vector, std::uint64_t weight,
                         std::vector<PatchRef> provenance) {
  values_.insert(values_.end(), vector.begin(), vector.end());
  weights_.push_back(weight);
  if (track_provenance_) provenance_.push_back(std::move(provenance));
}

std::vector<Token> TokenSet::to_tokens() const {
  std::vector<Token> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto v = vector(i);
    Token token{std::vector<float>(v.begin(), v.end()), weights_[i], std::nullopt};
    if (track_provenance_) token.provenance = provenance_[i];
    out.push_back(std::move(token));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partition and schedule

std::size_t source_set_size(std::size_t num_tokens, std::size_t r) {
  return std::max(r, (num_tokens + 1) / 2);
}

Bipartition bipartition(std::size_t num_tokens, std::size_t source_count,
                        const PartitionRule& rule, std::size_t step) {
  if (source_count == 0 || source_count >= num_tokens) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("source set size {} must lie in [1, {})",
                            source_count, num_tokens));
  }
  std::vector<bool> is_source(num_tokens, false);
  if (const auto* random = std::get_if<SeededRandomPartition>(&rule)) {
    Rng rng(random->seed + static_cast<std::uint64_t>(step) * 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(num_tokens);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < source_count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(num_tokens - i));
      std::swap(order[i], order[j]);
      is_source[order[i]] = true;
    }
  } else {
    std::size_t taken = 0;
    for (std::size_t pos = 0; pos < num_tokens && taken < source_count; pos += 2) {
      is_source[pos] = true;
      ++taken;
    }
    for (std::size_t pos = 1; pos < num_tokens && taken < source_count; pos += 2) {
      is_source[pos] = true;
      ++taken;
    }
  }
  Bipartition result;
  result.sources.reserve(source_count);
  result.destinations.reserve(num_tokens - source_count);
  for (std::size_t pos = 0; pos < num_tokens; ++pos) {
    (is_source[pos] ? result.sources : result.destinations).push_back(pos);
  }
  return result;
}

std::vector<std::size_t> merge_schedule(std::size_t initial_tokens,
                                        std::size_t target,
                                        const ScheduleRule& rule) {
  if (target == 0 || initial_tokens < target) {
    throw Error(ErrorCode::MTooLarge,
                fmt::format("cannot merge {} tokens down to {}", initial_tokens,
                            target));
  }
  std::size_t fixed = 0;
  if (const auto* step = std::get_if<FixedStepSchedule>(&rule)) {
    if (step->step == 0) {
      throw Error(ErrorCode::InvalidConfig, "fixed merge step must be >= 1");
    }
    fixed = step->step;
  }
  std::vector<std::size_t> schedule;
  std::size_t remaining = initial_tokens;
  while (remaining > target) {
    std::size_t r = remaining - target;
    if (fixed != 0) {
      r = std::min(fixed, r);
    } else if ((remaining + 1) / 2 >= 2 * target) {
      r = remaining / 2;
    }
    schedule.push_back(r);
    remaining -= r;
  }
  return schedule;
}

// ---------------------------------------------------------------------------
// Merge step

namespace {

struct StepOutput {
  TokenSet tokens;
  std::vector<double> norms;
  MergeStepRecord record;
  std::uint64_t evaluations = 0;
};

std::vector<double> compute_norms(const TokenSet& tokens, std::size_t heads) {
  std::vector<double> norms(tokens.size() * heads);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    head_squared_norms(tokens.vector(i), heads,
                       std::span(norms).subspan(i * heads, heads));
  }
  return norms;
}

void check_step_args(const TokenSet& tokens, std::size_t r, std::size_t heads) {
  if (r == 0 || r >= tokens.size()) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("merge step needs 1 <= r <= R-1 (r={}, R={})", r,
                            tokens.size()));
  }
  if (heads == 0 || tokens.dim() % heads != 0) {
    throw Error(ErrorCode::CNotDividingD,
                fmt::format("C={} does not divide d={}", heads, tokens.dim()));
  }
}

StepOutput run_step(const TokenSet& tokens, std::span<const double> norms,
                    const Bipartition& partition, std::size_t r,
                    std::size_t heads, MergeWeighting weighting,
                    const MergeOptions& options) {
  const std::size_t count = tokens.size();
  const std::size_t dim = tokens.dim();
  const auto& sources = partition.sources;
  const auto& destinations = partition.destinations;
  if (sources.size() < r || destinations.empty() ||
      sources.size() + destinations.size() != count) {
    throw Error(ErrorCode::InvalidArgument, "partition does not fit the step");
  }

  // Best destination per source. Sources are processed in blocks so each
  // destination vector is reused from cache across the block.
  constexpr std::size_t kBlock = 16;
  std::vector<MergeEdge> edges(sources.size());
  for (std::size_t a = 0; a < sources.size(); ++a) {
    edges[a] = MergeEdge{sources[a], destinations.front(),
                         -std::numeric_limits<double>::infinity()};
  }
  for (std::size_t block = 0; block < sources.size(); block += kBlock) {
    const std::size_t block_end = std::min(sources.size(), block + kBlock);
    for (const std::size_t q : destinations) {
      const auto q_vec = tokens.vector(q);
      const auto q_norms = norms.subspan(q * heads, heads);
      for (std::size_t a = block; a < block_end; ++a) {
        const std::size_t p = sources[a];
        const double score = head_similarity_from_norms(
            tokens.vector(p), q_vec, heads, norms.subspan(p * heads, heads),
            q_norms);
        MergeEdge& best = edges[a];
        if (score > best.score ||
            (options.inject_tiebreak_bug && score == best.score)) {
          best.score = score;
          best.destination = q;
        }
      }
    }
  }

  std::sort(edges.begin(), edges.end(), [](const MergeEdge& x, const MergeEdge& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.source != y.source) return x.source < y.source;
    return x.destination < y.destination;
  });
  edges.resize(r);

  StepOutput out{TokenSet(dim, tokens.tracks_provenance()), {}, {}, 0};
  out.evaluations = static_cast<std::uint64_t>(sources.size()) * destinations.size();
  out.record.tokens_before = count;
  out.record.merged = r;
  out.record.edges = edges;
  out.record.degenerate_edges = static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [](const MergeEdge& e) {
        return e.score == -std::numeric_limits<double>::infinity();
      }));

  // Sources absorbed by each destination, ascending.
  std::vector<std::size_t> destination_of(count, count);
  for (const MergeEdge& e : edges) destination_of[e.source] = e.destination;
  std::vector<std::vector<std::size_t>> absorbed(count);
  for (std::size_t pos = 0; pos < count; ++pos) {
    if (destination_of[pos] != count) absorbed[destination_of[pos]].push_back(pos);
  }

  out.tokens.reserve(count - r);
  out.norms.reserve((count - r) * heads);
  std::vector<double> acc(dim);
  std::vector<float> merged(dim);
  for (std::size_t pos = 0; pos < count; ++pos) {
    if (destination_of[pos] != count) continue;
    if (absorbed[pos].empty()) {
      out.tokens.push_back(tokens.vector(pos), tokens.weight(pos),
                           tokens.tracks_provenance() ? tokens.provenance(pos)
                                                      : std::vector<PatchRef>{});
      const auto n = norms.subspan(pos * heads, heads);
      out.norms.insert(out.norms.end(), n.begin(), n.end());
      continue;
    }
    const bool sized = weighting == MergeWeighting::SizeWeighted;
    std::uint64_t total_weight = tokens.weight(pos);
    double denominator = sized ? static_cast<double>(tokens.weight(pos)) : 1.0;
    {
      const auto v = tokens.vector(pos);
      const double w = denominator;
      for (std::size_t c = 0; c < dim; ++c) acc[c] = w * static_cast<double>(v[c]);
    }
    std::vector<PatchRef> provenance;
    if (tokens.tracks_provenance()) provenance = tokens.provenance(pos);
    for (const std::size_t p : absorbed[pos]) {
      const auto v = tokens.vector(p);
      const double w = sized ? static_cast<double>(tokens.weight(p)) : 1.0;
      for (std::size_t c = 0; c < dim; ++c) acc[c] += w * static_cast<double>(v[c]);
      denominator += w;
      total_weight += tokens.weight(p);
      if (tokens.tracks_provenance()) {
        const auto& extra = tokens.provenance(p);
        provenance.insert(provenance.end(), extra.begin(), extra.end());
      }
    }
    for (std::size_t c = 0; c < dim; ++c) {
      merged[c] = static_cast<float>(acc[c] / denominator);
    }
    out.tokens.push_back(merged, total_weight, std::move(provenance));
    const std::size_t at = out.norms.size();
    out.norms.resize(at + heads);
    head_squared_norms(merged, heads, std::span(out.norms).subspan(at, heads));
  }
  return out;
}

}  // namespace

StepResult merge_step(const TokenSet& tokens, const Bipartition& partition,
                      std::size_t r, std::size_t heads, MergeWeighting weighting,
                      const MergeOptions& options) {
  check_step_args(tokens, r, heads);
  const auto norms = compute_norms(tokens, heads);
  auto out = run_step(tokens, norms, partition, r, heads, weighting, options);
  return StepResult{std::move(out.tokens), std::move(out.record), out.evaluations};
}

StepResult merge_step(const TokenSet& tokens, std::size_t r,
                      const MergeConfig& config, std::size_t step,
                      const MergeOptions& options) {
  check_step_args(tokens, r, config.similarity_heads);
  const auto partition = bipartition(tokens.size(),
                                     source_set_size(tokens.size(), r),
                                     config.partition_rule, step);
  return merge_step(tokens, partition, r, config.similarity_heads,
                    config.merge_weighting, options);
}

SegmentMergeResult merge_segment(const SegmentView& view,
                                 const MergeConfig& config,
                                 const MergeOptions& options) {
  const std::size_t heads = config.similarity_heads;
  const std::size_t target = config.tokens_per_segment;
  if (heads == 0 || view.dim() % heads != 0) {
    throw Error(ErrorCode::CNotDividingD,
                fmt::format("C={} does not divide d={}", heads, view.dim()));
  }
  if (target == 0 || target > view.num_tokens()) {
    throw Error(ErrorCode::MTooLarge,
                fmt::format("M={} must lie in [1, K*N={}]", target,
                            view.num_tokens()));
  }

  const auto schedule = merge_schedule(view.num_tokens(), target,
                                       config.schedule_rule);
  TokenSet tokens = TokenSet::from_view(view, options.track_provenance);
  std::vector<double> norms = compute_norms(tokens, heads);

  SegmentMergeResult result;
  result.plan.initial_tokens = view.num_tokens();
  result.plan.steps.reserve(schedule.size());
  for (std::size_t step = 0; step < schedule.size(); ++step) {
    const std::size_t r = schedule[step];
    const auto partition = bipartition(tokens.size(),
                                       source_set_size(tokens.size(), r),
                                       config.partition_rule, step);
    auto out = run_step(tokens, norms, partition, r, heads,
                        config.merge_weighting, options);
    tokens = std::move(out.tokens);
    norms = std::move(out.norms);
    result.plan.similarity_evaluations += out.evaluations;
    result.plan.steps.push_back(std::move(out.record));
  }
  result.plan.final_tokens = tokens.size();
  result.feature.segment_index = view.segment_index();
  result.feature.tokens = tokens.to_tokens();
  return result;
}

std::string format_plan(const MergePlan& plan, std::size_t segment_index) {
  std::string out = fmt::format("plan segment={} initial={} final={} steps={} evaluations={}\n",
                                segment_index, plan.initial_tokens,
                                plan.final_tokens, plan.steps.size(),
                                plan.similarity_evaluations);
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const MergeStepRecord& step = plan.steps[i];
    out += fmt::format("step {} R={} r={} degenerate={}\n", i, step.tokens_before,
                       step.merged, step.degenerate_edges);
    for (const MergeEdge& edge : step.edges) {
      out += fmt::format("  edge {} -> {} score={:.6f}\n", edge.source,
                         edge.destination, edge.score);
    }
  }
  return out;
}

}  // namespace vidmerge
