// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "vidmerge/global_semantics.hpp"

#include <fmt/format.h>

#include <vector>

namespace vidmerge {

GlobalFeature aggregate_global(const VideoFeatures& features,
                               std::size_t num_layers) {
  const std::size_t stored = features.num_encoder_layers();
  if (num_layers == 0 || num_layers > stored) {
    throw Error(ErrorCode::ETooLarge,
                fmt::format("E={} must lie in [1, L_enc={}]", num_layers, stored));
  }
  const std::size_t frames = features.num_frames();
  const std::size_t d = features.dim();
  GlobalFeature global;
  global.tokens.reserve(num_layers);
  std::vector<double> sum(d);
  for (std::size_t e = 0; e < num_layers; ++e) {
    const std::size_t layer = stored - num_layers + e;
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
      const auto cls = features.cls(t, layer);
      for (std::size_t c = 0; c < d; ++c) sum[c] += cls[c];
    }
    std::vector<float> mean(d);
    for (std::size_t c = 0; c < d; ++c) {
      mean[c] = static_cast<float>(sum[c] / static_cast<double>(frames));
    }
    global.tokens.push_back(std::move(mean));
  }
  return global;
}

}  // namespace vidmerge
