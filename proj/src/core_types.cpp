// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "vidmerge/core_types.hpp"

#include <fmt/format.h>

namespace vidmerge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SNotDividingT: return "SNotDividingT";
    case ErrorCode::CNotDividingD: return "CNotDividingD";
    case ErrorCode::MTooLarge: return "MTooLarge";
    case ErrorCode::ETooLarge: return "ETooLarge";
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::ReservedFlags: return "ReservedFlags";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ZeroNormHead: return "ZeroNormHead";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InputTooLargeForOracle: return "InputTooLargeForOracle";
    case ErrorCode::SegmentMismatch: return "SegmentMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  }
  return "Unknown";
}

VideoFeatures::VideoFeatures(VideoShape shape, std::vector<float> patch_tokens,
                             std::vector<float> cls_tokens)
    : shape_(shape),
      patch_tokens_(std::move(patch_tokens)),
      cls_tokens_(std::move(cls_tokens)) {
  if (shape_.num_frames == 0 || shape_.num_patches == 0 || shape_.dim == 0 ||
      shape_.num_encoder_layers == 0) {
    throw Error(ErrorCode::InvalidShape, "all extents must be positive");
  }
  const std::size_t patch_count =
      shape_.num_frames * shape_.num_patches * shape_.dim;
  const std::size_t cls_count =
      shape_.num_frames * shape_.num_encoder_layers * shape_.dim;
  if (patch_tokens_.size() != patch_count || cls_tokens_.size() != cls_count) {
    throw Error(ErrorCode::InvalidShape,
                fmt::format("array extents do not match shape: patch {} vs {}, "
                            "cls {} vs {}",
                            patch_tokens_.size(), patch_count,
                            cls_tokens_.size(), cls_count));
  }
}

std::span<const float> VideoFeatures::patch(std::size_t frame,
                                            std::size_t patch) const {
  const std::size_t offset = (frame * shape_.num_patches + patch) * shape_.dim;
  return std::span<const float>(patch_tokens_).subspan(offset, shape_.dim);
}

std::span<const float> VideoFeatures::cls(std::size_t frame,
                                          std::size_t layer) const {
  const std::size_t offset =
      (frame * shape_.num_encoder_layers + layer) * shape_.dim;
  return std::span<const float>(cls_tokens_).subspan(offset, shape_.dim);
}

MergeConfig validate_config(const MergeConfig& config, const VideoShape& shape) {
  if (shape.num_frames == 0 || shape.num_patches == 0 || shape.dim == 0 ||
      shape.num_encoder_layers == 0) {
    throw Error(ErrorCode::InvalidShape, "all video extents must be positive");
  }
  if (config.num_segments == 0 || config.tokens_per_segment == 0 ||
      config.num_global_layers == 0 || config.similarity_heads == 0) {
    throw Error(ErrorCode::InvalidConfig,
                "S, M, E and C must all be positive integers");
  }
  if (const auto* fixed = std::get_if<FixedStepSchedule>(&config.schedule_rule);
      fixed != nullptr && fixed->step == 0) {
    throw Error(ErrorCode::InvalidConfig, "fixed merge step must be >= 1");
  }

  const std::size_t s = config.num_segments;
  const std::size_t t = shape.num_frames;
  if (t < s) {
    throw Error(ErrorCode::SNotDividingT,
                fmt::format("T={} frames cannot form S={} segments", t, s));
  }
  if (t % s != 0 && !config.truncate_trailing_frames) {
    throw Error(ErrorCode::SNotDividingT,
                fmt::format("T={} is not divisible by S={}", t, s));
  }
  const std::size_t k = t / s;
  if (config.frames_per_segment != 0 && config.frames_per_segment != k) {
    throw Error(ErrorCode::InvalidConfig,
                fmt::format("frames_per_segment={} but T/S={}",
                            config.frames_per_segment, k));
  }
  if (shape.dim % config.similarity_heads != 0) {
    throw Error(ErrorCode::CNotDividingD,
                fmt::format("C={} does not divide d={}",
                            config.similarity_heads, shape.dim));
  }
  if (config.tokens_per_segment > k * shape.num_patches) {
    throw Error(ErrorCode::MTooLarge,
                fmt::format("M={} exceeds K*N={}", config.tokens_per_segment,
                            k * shape.num_patches));
  }
  if (config.num_global_layers > shape.num_encoder_layers) {
    throw Error(ErrorCode::ETooLarge,
                fmt::format("E={} exceeds stored layers L_enc={}",
                            config.num_global_layers,
                            shape.num_encoder_layers));
  }

  MergeConfig validated = config;
  validated.frames_per_segment = k;
  return validated;
}

std::size_t frames_used(const MergeConfig& validated) {
  return validated.num_segments * validated.frames_per_segment;
}

}  // namespace vidmerge
