// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vidmerge {

enum class ErrorCode {
  InvalidConfig,
  SNotDividingT,
  CNotDividingD,
  MTooLarge,
  ETooLarge,
  InvalidShape,
  BadMagic,
  UnsupportedVersion,
  UnsupportedDtype,
  ReservedFlags,
  TruncatedPayload,
  NonFiniteValue,
  IoError,
  ZeroNormHead,
  InvalidArgument,
  InputTooLargeForOracle,
  SegmentMismatch,
  DimensionMismatch,
};

std::string_view to_string(ErrorCode code);

/// Error raised by every fallible pipeline operation. `code()` is stable and
/// is what the CLI prints after `ERROR`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct AlternatingPartition {};
struct SeededRandomPartition {
  std::uint64_t seed = 0;
};
using PartitionRule = std::variant<AlternatingPartition, SeededRandomPartition>;

struct HalvingSchedule {};
struct FixedStepSchedule {
  std::size_t step = 1;
};
using ScheduleRule = std::variant<HalvingSchedule, FixedStepSchedule>;

enum class AssemblyOrder { GlobalFirst, LocalFirst };
enum class MergeWeighting { SizeWeighted, PlainAverage };

/// All pipeline hyperparameters. Defaults are the reference setting:
/// 10 segments of 30 tokens plus 5 global tokens, 16 similarity heads.
struct MergeConfig {
  std::size_t num_segments = 10;
  /// Bound by validate_config to T / S; 0 means "not yet bound".
  std::size_t frames_per_segment = 0;
  std::size_t tokens_per_segment = 30;
  std::size_t num_global_layers = 5;
  std::size_t similarity_heads = 16;
  PartitionRule partition_rule = AlternatingPartition{};
  ScheduleRule schedule_rule = HalvingSchedule{};
  AssemblyOrder assembly_order = AssemblyOrder::GlobalFirst;
  MergeWeighting merge_weighting = MergeWeighting::SizeWeighted;
  /// Drop the trailing T mod S frames instead of rejecting the video.
  bool truncate_trailing_frames = false;
};

struct VideoShape {
  std::size_t num_frames = 0;
  std::size_t num_patches = 0;
  std::size_t dim = 0;
  std::size_t num_encoder_layers = 0;

  friend bool operator==(const VideoShape&, const VideoShape&) = default;
};

/// Per-frame patch tokens (T x N x d) and per-layer [CLS] tokens
/// (T x L_enc x d), both row-major. Layer 0 is the shallowest stored layer.
class VideoFeatures {
 public:
  VideoFeatures() = default;
  VideoFeatures(VideoShape shape, std::vector<float> patch_tokens,
                std::vector<float> cls_tokens);

  const VideoShape& shape() const noexcept { return shape_; }
  std::size_t num_frames() const noexcept { return shape_.num_frames; }
  std::size_t num_patches() const noexcept { return shape_.num_patches; }
  std::size_t dim() const noexcept { return shape_.dim; }
  std::size_t num_encoder_layers() const noexcept {
    return shape_.num_encoder_layers;
  }

  std::span<const float> patch_tokens() const noexcept { return patch_tokens_; }
  std::span<const float> cls_tokens() const noexcept { return cls_tokens_; }

  std::span<const float> patch(std::size_t frame, std::size_t patch) const;
  std::span<const float> cls(std::size_t frame, std::size_t layer) const;

  friend bool operator==(const VideoFeatures&, const VideoFeatures&) = default;

 private:
  VideoShape shape_;
  std::vector<float> patch_tokens_;
  std::vector<float> cls_tokens_;
};

struct PatchRef {
  std::uint32_t frame = 0;
  std::uint32_t patch = 0;

  friend auto operator<=>(const PatchRef&, const PatchRef&) = default;
};

struct Token {
  std::vector<float> vector;
  std::uint64_t weight = 1;
  std::optional<std::vector<PatchRef>> provenance;

  friend bool operator==(const Token&, const Token&) = default;
};

struct SegmentFeature {
  std::size_t segment_index = 0;
  std::vector<Token> tokens;
};

/// E time-averaged [CLS] tokens, shallowest selected layer first.
struct GlobalFeature {
  std::vector<std::vector<float>> tokens;
};

struct VideoRepresentation {
  GlobalFeature global;
  std::vector<SegmentFeature> locals;
  AssemblyOrder order = AssemblyOrder::GlobalFirst;
  std::size_t dim = 0;
  /// (E + M*S) x dim, row-major, in `order`.
  std::vector<float> flattened;

  std::size_t num_rows() const noexcept {
    return dim == 0 ? 0 : flattened.size() / dim;
  }
  std::span<const float> row(std::size_t index) const {
    return std::span<const float>(flattened).subspan(index * dim, dim);
  }
};

/// Checks `config` against a video of `shape` and returns a copy with
/// frames_per_segment bound to T / S. Never corrects silently, except for
/// dropping trailing frames when truncate_trailing_frames is set.
MergeConfig validate_config(const MergeConfig& config, const VideoShape& shape);

/// Number of frames the pipeline consumes, S * K.
std::size_t frames_used(const MergeConfig& validated);

}  // namespace vidmerge
