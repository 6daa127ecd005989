// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "vidmerge/core_types.hpp"
#include "vidmerge/token_merging.hpp"

namespace vidmerge {

struct PipelineOptions {
  /// Worker threads for segment merging; 0 picks hardware concurrency.
  std::size_t threads = 1;
  bool track_provenance = false;
};

struct CompressionResult {
  MergeConfig config;  // validated
  VideoRepresentation representation;
  std::vector<MergePlan> plans;  // one per segment, in segment order
};

/// Full compression: validate, segment, merge every segment (in parallel when
/// threads > 1), average the global tokens and assemble. The result does not
/// depend on the thread count.
CompressionResult compress_video(const VideoFeatures& features,
                                 const MergeConfig& config,
                                 const PipelineOptions& options = {});

/// Drops trailing frames so that only the first `frames` remain.
VideoFeatures truncate_frames(const VideoFeatures& features, std::size_t frames);

/// Runs `task(i)` for i in [0, count) on up to `threads` workers and rethrows
/// the first failure.
template <typename Task>
void parallel_for(std::size_t count, std::size_t threads, Task&& task);

std::size_t resolve_thread_count(std::size_t requested);

}  // namespace vidmerge

#include "vidmerge/pipeline_inl.hpp"
