// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vidmerge/core_types.hpp"
#include "vidmerge/feature_io.hpp"

namespace vidmerge {

/// Concatenates the global block and the segment blocks. GlobalFirst yields
/// [G; Z^0; ...; Z^{S-1}], LocalFirst yields [Z^0; ...; Z^{S-1}; G].
/// `locals` must be in ascending segment order and equally sized.
VideoRepresentation assemble(GlobalFeature global,
                             std::vector<SegmentFeature> locals,
                             AssemblyOrder order);

/// Affine map applied to every row. An empty optional means identity.
struct Projection {
  std::optional<ProjectionWeights> weights;

  static Projection identity() { return {}; }
  bool is_identity() const noexcept { return !weights.has_value(); }
};

/// Row-wise W x + b; identity copies the flattened rows bit-exactly.
FloatMatrix project(const VideoRepresentation& repr, const Projection& projection);

struct CompressionMetrics {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  double compression_ratio = 0.0;
  /// Mean over the merged patch tokens of the best full-vector cosine to any
  /// output local token. Cosines involving a zero vector count as 0.
  double coverage = 0.0;
  /// Per segment: |sum_out w*v - sum_in v| / |sum_in v| (absolute when the
  /// input sum is zero).
  std::vector<double> conservation_residuals;
};

CompressionMetrics compression_metrics(const VideoFeatures& original,
                                       const VideoRepresentation& repr);

}  // namespace vidmerge
