// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference for merge_segment. Shares only the scoring primitive,
// the partition rule and the schedule with the optimized path; everything else
// (edge enumeration, ranking, reconstruction) is recomputed naively per step.

#include <fmt/format.h>

#include <algorithm>
#include <limits>

#include "vidmerge/similarity.hpp"
#include "vidmerge/token_merging.hpp"

namespace vidmerge {

namespace {

struct Candidate {
  std::size_t source;
  std::size_t destination;
  double score;
};

}  // namespace

SegmentMergeResult oracle_merge_segment(const SegmentView& view,
                                        const MergeConfig& config) {
  if (view.num_tokens() > kOracleTokenLimit) {
    throw Error(ErrorCode::InputTooLargeForOracle,
                fmt::format("K*N={} exceeds oracle limit {}", view.num_tokens(),
                            kOracleTokenLimit));
  }
  const std::size_t heads = config.similarity_heads;
  const std::size_t target = config.tokens_per_segment;
  if (heads == 0 || view.dim() % heads != 0) {
    throw Error(ErrorCode::CNotDividingD, "C does not divide d");
  }
  if (target == 0 || target > view.num_tokens()) {
    throw Error(ErrorCode::MTooLarge, "M must lie in [1, K*N]");
  }

  std::vector<Token> current = view.tokens();
  const auto schedule = merge_schedule(current.size(), target, config.schedule_rule);

  SegmentMergeResult result;
  result.plan.initial_tokens = current.size();
  for (std::size_t step = 0; step < schedule.size(); ++step) {
    const std::size_t count = current.size();
    const std::size_t r = schedule[step];
    const std::size_t source_count = std::max(r, count - count / 2);
    const Bipartition split =
        bipartition(count, source_count, config.partition_rule, step);

    // Full |P| x |Q| score table.
    std::vector<std::vector<double>> table(split.sources.size());
    for (std::size_t a = 0; a < split.sources.size(); ++a) {
      for (std::size_t b = 0; b < split.destinations.size(); ++b) {
        table[a].push_back(head_similarity_or_neg_inf(
            current[split.sources[a]].vector,
            current[split.destinations[b]].vector, heads));
        ++result.plan.similarity_evaluations;
      }
    }

    std::vector<Candidate> best_edges;
    for (std::size_t a = 0; a < split.sources.size(); ++a) {
      std::vector<Candidate> row;
      for (std::size_t b = 0; b < split.destinations.size(); ++b) {
        row.push_back({split.sources[a], split.destinations[b], table[a][b]});
      }
      std::stable_sort(row.begin(), row.end(),
                       [](const Candidate& x, const Candidate& y) {
                         return x.score > y.score;
                       });
      best_edges.push_back(row.front());
    }
    std::stable_sort(best_edges.begin(), best_edges.end(),
                     [](const Candidate& x, const Candidate& y) {
                       if (x.score != y.score) return x.score > y.score;
                       if (x.source != y.source) return x.source < y.source;
                       return x.destination < y.destination;
                     });
    best_edges.resize(r);

    MergeStepRecord record;
    record.tokens_before = count;
    record.merged = r;
    for (const Candidate& c : best_edges) {
      record.edges.push_back({c.source, c.destination, c.score});
      if (c.score == -std::numeric_limits<double>::infinity()) {
        ++record.degenerate_edges;
      }
    }

    std::vector<Token> next;
    for (std::size_t pos = 0; pos < count; ++pos) {
      const bool is_merged_source =
          std::any_of(best_edges.begin(), best_edges.end(),
                      [&](const Candidate& c) { return c.source == pos; });
      if (is_merged_source) continue;

      std::vector<std::size_t> group{pos};
      for (std::size_t other = 0; other < count; ++other) {
        for (const Candidate& c : best_edges) {
          if (c.source == other && c.destination == pos) group.push_back(other);
        }
      }
      if (group.size() == 1) {
        next.push_back(current[pos]);
        continue;
      }

      const bool sized = config.merge_weighting == MergeWeighting::SizeWeighted;
      Token merged;
      merged.weight = 0;
      merged.provenance = std::vector<PatchRef>{};
      std::vector<double> sum(view.dim(), 0.0);
      double denominator = 0.0;
      for (std::size_t i = 0; i < group.size(); ++i) {
        const Token& member = current[group[i]];
        const double w = sized ? static_cast<double>(member.weight) : 1.0;
        for (std::size_t c = 0; c < view.dim(); ++c) {
          const double term = w * static_cast<double>(member.vector[c]);
          sum[c] = i == 0 ? term : sum[c] + term;
        }
        denominator += w;
        merged.weight += member.weight;
        merged.provenance->insert(merged.provenance->end(),
                                  member.provenance->begin(),
                                  member.provenance->end());
      }
      for (std::size_t c = 0; c < view.dim(); ++c) {
        merged.vector.push_back(static_cast<float>(sum[c] / denominator));
      }
      next.push_back(std::move(merged));
    }
    current = std::move(next);
    result.plan.steps.push_back(std::move(record));
  }

  result.plan.final_tokens = current.size();
  result.feature.segment_index = view.segment_index();
  result.feature.tokens = std::move(current);
  return result;
}

}  // namespace vidmerge
