// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

// Hierarchical bipartite soft matching within one segment.
//
// One merge step over R tokens removing r of them:
//   1. Split positions into a source set P of max(r, ceil(R/2)) tokens and a
//      destination set Q holding the rest (see bipartition()).
//   2. Each p in P keeps its single best destination by head-averaged cosine
//      similarity; ties go to the lower Q position.
//   3. The |P| edges are ranked by score, descending, ties by lower p and then
//      lower q, and the top r are merged.
//   4. A destination q absorbing sources p1 < p2 < ... becomes
//      (w_q v_q + w_p1 v_p1 + ...) / (w_q + w_p1 + ...), accumulated in double
//      in exactly that order (unit weights for PlainAverage). Weights add up.
//   5. Survivors keep their relative order; merged tokens stay at q.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vidmerge/core_types.hpp"
#include "vidmerge/segmentation.hpp"

namespace vidmerge {

/// Contiguous working set of tokens: R x dim floats, weights and optional
/// provenance lists.
class TokenSet {
 public:
  TokenSet(std::size_t dim, bool track_provenance);

  static TokenSet from_view(const SegmentView& view, bool track_provenance);
  /// Provenance is tracked iff every token carries it.
  static TokenSet from_tokens(std::span<const Token> tokens);

  std::size_t size() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  bool tracks_provenance() const noexcept { return track_provenance_; }

  std::span<const float> vector(std::size_t index) const {
    return std::span<const float>(values_).subspan(index * dim_, dim_);
  }
  std::uint64_t weight(std::size_t index) const { return weights_[index]; }
  const std::vector<PatchRef>& provenance(std::size_t index) const {
    return provenance_[index];
  }
  std::span<const float> values() const noexcept { return values_; }
  std::span<const std::uint64_t> weights() const noexcept { return weights_; }

  void reserve(std::size_t count);
  void push_back(std::span<const float> vector, std::uint64_t weight,
                 std::vector<PatchRef> provenance = {});

  std::vector<Token> to_tokens() const;

 private:
  std::size_t dim_;
  bool track_provenance_;
  std::vector<float> values_;
  std::vector<std::uint64_t> weights_;
  std::vector<std::vector<PatchRef>> provenance_;
};

struct Bipartition {
  std::vector<std::size_t> sources;       // ascending positions
  std::vector<std::size_t> destinations;  // ascending positions
};

/// Splits positions [0, num_tokens) into `source_count` sources and the rest.
/// Alternating takes positions 0, 2, 4, ... and, if more are needed, the odd
/// positions in ascending order. SeededRandom draws a uniform subset with a
/// partial Fisher-Yates shuffle from Rng(seed + step * 0x9e3779b97f4a7c15).
/// Requires 1 <= source_count < num_tokens.
Bipartition bipartition(std::size_t num_tokens, std::size_t source_count,
                        const PartitionRule& rule, std::size_t step = 0);

/// Source set size used by a step removing `r` of `num_tokens` tokens.
std::size_t source_set_size(std::size_t num_tokens, std::size_t r);

/// Per-step reduction counts taking `initial_tokens` down to `target`.
/// Halving removes floor(R/2) while ceil(R/2) >= 2*target and otherwise
/// jumps straight to the target; FixedStep(r) removes min(r, R - target).
std::vector<std::size_t> merge_schedule(std::size_t initial_tokens,
                                        std::size_t target,
                                        const ScheduleRule& rule);

struct MergeEdge {
  std::size_t source = 0;       // position in the step's input
  std::size_t destination = 0;  // position in the step's input
  double score = 0.0;

  friend bool operator==(const MergeEdge&, const MergeEdge&) = default;
};

struct MergeStepRecord {
  std::size_t tokens_before = 0;
  std::size_t merged = 0;
  /// Selected edges in rank order.
  std::vector<MergeEdge> edges;
  /// Selected edges whose score was -inf (zero-norm head slice).
  std::size_t degenerate_edges = 0;

  std::size_t tokens_after() const noexcept { return tokens_before - merged; }
  friend bool operator==(const MergeStepRecord&, const MergeStepRecord&) = default;
};

struct MergePlan {
  std::size_t initial_tokens = 0;
  std::size_t final_tokens = 0;
  std::vector<MergeStepRecord> steps;
  /// Pairwise head_similarity evaluations performed.
  std::uint64_t similarity_evaluations = 0;
};

struct MergeOptions {
  bool track_provenance = true;
  /// Test-only fault: ties in the best-destination search go to the higher q.
  bool inject_tiebreak_bug = false;
};

struct StepResult {
  TokenSet tokens;
  MergeStepRecord record;
  std::uint64_t similarity_evaluations = 0;
};

/// One merge step with an explicit partition.
StepResult merge_step(const TokenSet& tokens, const Bipartition& partition,
                      std::size_t r, std::size_t heads, MergeWeighting weighting,
                      const MergeOptions& options = {});

/// One merge step; the partition is drawn from config.partition_rule for
/// `step`. Requires 1 <= r <= R - 1.
StepResult merge_step(const TokenSet& tokens, std::size_t r,
                      const MergeConfig& config, std::size_t step = 0,
                      const MergeOptions& options = {});

struct SegmentMergeResult {
  SegmentFeature feature;
  MergePlan plan;
};

/// Reduces the view's K*N tokens to exactly M.
SegmentMergeResult merge_segment(const SegmentView& view,
                                 const MergeConfig& config,
                                 const MergeOptions& options = {});

/// Largest K*N the brute-force oracle accepts.
inline constexpr std::size_t kOracleTokenLimit = 4096;

/// Unoptimized reference for merge_segment: recomputes every similarity per
/// step, sorts explicitly and rebuilds the token list from scratch. Throws
/// InputTooLargeForOracle above kOracleTokenLimit tokens.
SegmentMergeResult oracle_merge_segment(const SegmentView& view,
                                        const MergeConfig& config);

/// Text dump of a plan, one line per step and per selected edge.
std::string format_plan(const MergePlan& plan, std::size_t segment_index);

}  // namespace vidmerge
