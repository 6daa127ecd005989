// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "vidmerge/pipeline.hpp"

#include "vidmerge/assembly.hpp"
#include "vidmerge/global_semantics.hpp"
#include "vidmerge/segmentation.hpp"

namespace vidmerge {

std::size_t resolve_thread_count(std::size_t requested) {
  if (requested != 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

VideoFeatures truncate_frames(const VideoFeatures& features, std::size_t frames) {
  VideoShape shape = features.shape();
  if (frames == 0 || frames > shape.num_frames) {
    throw Error(ErrorCode::InvalidArgument, "truncation must keep 1..T frames");
  }
  const std::size_t patch_floats = frames * shape.num_patches * shape.dim;
  const std::size_t cls_floats = frames * shape.num_encoder_layers * shape.dim;
  std::vector<float> patches(features.patch_tokens().begin(),
                             features.patch_tokens().begin() + patch_floats);
  std::vector<float> cls(features.cls_tokens().begin(),
                         features.cls_tokens().begin() + cls_floats);
  shape.num_frames = frames;
  return VideoFeatures(shape, std::move(patches), std::move(cls));
}

CompressionResult compress_video(const VideoFeatures& features,
                                 const MergeConfig& config,
                                 const PipelineOptions& options) {
  const MergeConfig validated = validate_config(config, features.shape());
  const std::size_t used = frames_used(validated);
  if (used != features.num_frames()) {
    return compress_video(truncate_frames(features, used), validated, options);
  }

  const auto views = segment_video(features, validated);
  std::vector<SegmentMergeResult> merged(views.size());
  MergeOptions merge_options;
  merge_options.track_provenance = options.track_provenance;
  parallel_for(views.size(), resolve_thread_count(options.threads),
               [&](std::size_t s) {
                 merged[s] = merge_segment(views[s], validated, merge_options);
               });

  CompressionResult result;
  result.config = validated;
  std::vector<SegmentFeature> locals;
  locals.reserve(merged.size());
  for (auto& segment : merged) {
    locals.push_back(std::move(segment.feature));
    result.plans.push_back(std::move(segment.plan));
  }
  result.representation =
      assemble(aggregate_global(features, validated.num_global_layers),
               std::move(locals), validated.assembly_order);
  return result;
}

}  // namespace vidmerge
