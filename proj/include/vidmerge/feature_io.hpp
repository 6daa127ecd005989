// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

// Binary containers and the synthetic feature generator.
//
// All containers are little-endian with packed headers:
//
//   LVFT (video features), 27 bytes of header:
//     char[4] "LVFT" | u16 version=1 | u8 dtype=0 (float32)
//     | u32 T | u32 N | u32 d | u32 L_enc | u32 flags=0
//     then T*N*d patch floats in (t, n, c) order,
//     then T*L_enc*d [CLS] floats in (t, layer, c) order.
//
//   LVPW (projection weights) and LVCR (compressed output), 19 bytes:
//     char[4] magic | u16 version=1 | u8 dtype=0 | u32 rows | u32 cols
//     | u32 flags=0
//   LVPW: rows = d_out, cols = d; then the d_out x d matrix, then d_out bias.
//   LVCR: rows = E + M*S, cols = d_out; then the rows.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "vidmerge/core_types.hpp"

namespace vidmerge {

inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kFeatureHeaderSize = 27;
inline constexpr std::size_t kMatrixHeaderSize = 19;

struct LvftHeader {
  std::uint16_t version = kContainerVersion;
  std::uint8_t dtype_code = 0;
  std::uint32_t num_frames = 0;
  std::uint32_t num_patches = 0;
  std::uint32_t dim = 0;
  std::uint32_t num_encoder_layers = 0;
  std::uint32_t flags = 0;
};

/// Row-major float matrix; the payload of LVPW and LVCR containers.
struct FloatMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  friend bool operator==(const FloatMatrix&, const FloatMatrix&) = default;
};

/// Payload bytes an LVFT container of this shape carries, or nullopt when the
/// count does not fit in 64 bits.
std::optional<std::uint64_t> feature_payload_bytes(const VideoShape& shape);

VideoFeatures read_features(std::istream& in);
/// Returns the number of bytes written (header included).
std::uint64_t write_features(const VideoFeatures& features, std::ostream& out);

VideoFeatures read_features_file(const std::filesystem::path& path);
void write_features_file(const VideoFeatures& features,
                         const std::filesystem::path& path);

struct ProjectionWeights {
  FloatMatrix matrix;  // d_out x d
  std::vector<float> bias;

  std::size_t d_out() const noexcept { return matrix.rows; }
  std::size_t d_in() const noexcept { return matrix.cols; }
};

ProjectionWeights read_projection(std::istream& in);
std::uint64_t write_projection(const ProjectionWeights& weights,
                               std::ostream& out);
ProjectionWeights read_projection_file(const std::filesystem::path& path);

FloatMatrix read_compressed(std::istream& in);
std::uint64_t write_compressed(const FloatMatrix& rows, std::ostream& out);
FloatMatrix read_compressed_file(const std::filesystem::path& path);

/// Writes `path` through a sibling temporary that is renamed into place only
/// after the whole payload was flushed, so failures never leave a partial file.
void write_compressed_file(const FloatMatrix& rows,
                           const std::filesystem::path& path);

struct GaussianIID {};
struct PiecewiseEvents {
  std::size_t num_events = 1;
};
using GeneratorKind = std::variant<GaussianIID, PiecewiseEvents>;

struct SyntheticSpec {
  VideoShape shape;
  std::uint64_t seed = 0;
  GeneratorKind kind = GaussianIID{};
};

/// Deterministic synthetic features. Draw order is fixed: GaussianIID fills
/// patch tokens then [CLS] tokens in storage order. PiecewiseEvents splits
/// [0, T) into blocks at floor(b*T/num_events); it first draws one N(0,1)
/// mean per (event, patch, channel), then fills patch tokens in storage order
/// as mean + 0.1 * N(0,1), then does the same for [CLS] tokens with one mean
/// per (event, layer).
VideoFeatures generate_synthetic(const SyntheticSpec& spec);

}  // namespace vidmerge
