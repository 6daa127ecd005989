// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "vidmerge/segmentation.hpp"

namespace vidmerge {

SegmentView::SegmentView(std::size_t segment_index, std::size_t first_frame,
                         std::size_t num_frames, std::size_t num_patches,
                         std::size_t dim, std::span<const float> block)
    : segment_index_(segment_index),
      first_frame_(first_frame),
      num_frames_(num_frames),
      num_patches_(num_patches),
      dim_(dim),
      block_(block) {
  if (block_.size() != num_frames_ * num_patches_ * dim_) {
    throw Error(ErrorCode::InvalidShape, "segment block size mismatch");
  }
}

PatchRef SegmentView::provenance(std::size_t index) const {
  return PatchRef{static_cast<std::uint32_t>(first_frame_ + index / num_patches_),
                  static_cast<std::uint32_t>(index % num_patches_)};
}

std::vector<Token> SegmentView::tokens() const {
  std::vector<Token> out;
  out.reserve(num_tokens());
  for (std::size_t i = 0; i < num_tokens(); ++i) {
    const auto v = vector(i);
    out.push_back(Token{std::vector<float>(v.begin(), v.end()), 1,
                        std::vector<PatchRef>{provenance(i)}});
  }
  return out;
}

std::vector<SegmentView> segment_video(const VideoFeatures& features,
                                       const MergeConfig& config) {
  const MergeConfig validated = validate_config(config, features.shape());
  const std::size_t k = validated.frames_per_segment;
  const std::size_t n = features.num_patches();
  const std::size_t d = features.dim();
  std::vector<SegmentView> views;
  views.reserve(validated.num_segments);
  for (std::size_t s = 0; s < validated.num_segments; ++s) {
    const auto block = features.patch_tokens().subspan(s * k * n * d, k * n * d);
    views.emplace_back(s, s * k, k, n, d, block);
  }
  return views;
}

}  // namespace vidmerge
