// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "vidmerge/core_types.hpp"

namespace vidmerge {

/// Temporal mean of the [CLS] tokens of the last `num_layers` stored encoder
/// layers. Token e averages layer L_enc - num_layers + e over all frames, so
/// the shallowest selected layer comes first. Sums are kept in double.
GlobalFeature aggregate_global(const VideoFeatures& features,
                               std::size_t num_layers);

}  // namespace vidmerge
