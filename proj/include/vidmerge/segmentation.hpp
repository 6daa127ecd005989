// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vidmerge/core_types.hpp"

namespace vidmerge {

/// Read-only projection of one segment's patch tokens. Frames
/// [first_frame, first_frame + K) are contiguous in storage, so the view is a
/// single K*N x d block; token i comes from (first_frame + i / N, i % N).
class SegmentView {
 public:
  SegmentView(std::size_t segment_index, std::size_t first_frame,
              std::size_t num_frames, std::size_t num_patches, std::size_t dim,
              std::span<const float> block);

  std::size_t segment_index() const noexcept { return segment_index_; }
  std::size_t first_frame() const noexcept { return first_frame_; }
  std::size_t end_frame() const noexcept { return first_frame_ + num_frames_; }
  std::size_t num_patches() const noexcept { return num_patches_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_tokens() const noexcept { return num_frames_ * num_patches_; }

  std::span<const float> block() const noexcept { return block_; }
  std::span<const float> vector(std::size_t index) const {
    return block_.subspan(index * dim_, dim_);
  }
  PatchRef provenance(std::size_t index) const;

  /// Materializes the view as weight-1 tokens with provenance.
  std::vector<Token> tokens() const;

 private:
  std::size_t segment_index_;
  std::size_t first_frame_;
  std::size_t num_frames_;
  std::size_t num_patches_;
  std::size_t dim_;
  std::span<const float> block_;
};

/// Splits frames [0, S*K) into S contiguous, non-overlapping views of K frames
/// in ascending segment order. `config` must come from validate_config.
std::vector<SegmentView> segment_video(const VideoFeatures& features,
                                       const MergeConfig& config);

}  // namespace vidmerge
