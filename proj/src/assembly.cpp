// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "vidmerge/assembly.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace vidmerge {

namespace {

void append_rows(std::vector<float>& out, const GlobalFeature& global) {
  for (const auto& token : global.tokens) {
    out.insert(out.end(), token.begin(), token.end());
  }
}

void append_rows(std::vector<float>& out, const std::vector<SegmentFeature>& locals) {
  for (const auto& segment : locals) {
    for (const auto& token : segment.tokens) {
      out.insert(out.end(), token.vector.begin(), token.vector.end());
    }
  }
}

float dot16(const float* a, const float* b, std::size_t n) {
  float acc[16] = {};
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    for (std::size_t j = 0; j < 16; ++j) acc[j] += a[i + j] * b[i + j];
  }
  for (std::size_t j = 0; i < n; ++i, ++j) acc[j] += a[i] * b[i];
  float sum = 0.0f;
  for (float v : acc) sum += v;
  return sum;
}

/// Unit-normalized copy; zero vectors stay zero.
std::vector<float> normalized(std::span<const float> v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  std::vector<float> out(v.size(), 0.0f);
  if (norm > 0.0) {
    for (std::size_t c = 0; c < v.size(); ++c) {
      out[c] = static_cast<float>(v[c] / norm);
    }
  }
  return out;
}

}  // namespace

VideoRepresentation assemble(GlobalFeature global,
                             std::vector<SegmentFeature> locals,
                             AssemblyOrder order) {
  if (global.tokens.empty() || locals.empty()) {
    throw Error(ErrorCode::SegmentMismatch,
                "need at least one global token and one segment");
  }
  const std::size_t dim = global.tokens.front().size();
  const std::size_t per_segment = locals.front().tokens.size();
  for (const auto& token : global.tokens) {
    if (token.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "global tokens differ in dim");
    }
  }
  for (std::size_t s = 0; s < locals.size(); ++s) {
    if (locals[s].segment_index != s) {
      throw Error(ErrorCode::SegmentMismatch,
                  fmt::format("segment at position {} has index {}", s,
                              locals[s].segment_index));
    }
    if (locals[s].tokens.size() != per_segment || per_segment == 0) {
      throw Error(ErrorCode::SegmentMismatch,
                  fmt::format("segment {} has {} tokens, expected {}", s,
                              locals[s].tokens.size(), per_segment));
    }
    for (const auto& token : locals[s].tokens) {
      if (token.vector.size() != dim) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("segment {} token dim {} != {}", s,
                                token.vector.size(), dim));
      }
    }
  }

  VideoRepresentation repr;
  repr.order = order;
  repr.dim = dim;
  repr.flattened.reserve((global.tokens.size() + per_segment * locals.size()) * dim);
  if (order == AssemblyOrder::GlobalFirst) {
    append_rows(repr.flattened, global);
    append_rows(repr.flattened, locals);
  } else {
    append_rows(repr.flattened, locals);
    append_rows(repr.flattened, global);
  }
  repr.global = std::move(global);
  repr.locals = std::move(locals);
  return repr;
}

FloatMatrix project(const VideoRepresentation& repr, const Projection& projection) {
  FloatMatrix out;
  out.rows = repr.num_rows();
  if (projection.is_identity()) {
    out.cols = repr.dim;
    out.values = repr.flattened;
    return out;
  }
  const ProjectionWeights& w = *projection.weights;
  if (w.d_in() != repr.dim || w.matrix.values.size() != w.d_out() * w.d_in() ||
      w.bias.size() != w.d_out()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("projection expects d={} but representation has d={}",
                            w.d_in(), repr.dim));
  }
  out.cols = w.d_out();
  out.values.resize(out.rows * out.cols);
  for (std::size_t row = 0; row < out.rows; ++row) {
    const float* x = repr.flattened.data() + row * repr.dim;
    for (std::size_t o = 0; o < out.cols; ++o) {
      const float* weights = w.matrix.values.data() + o * w.d_in();
      double acc = w.bias[o];
      for (std::size_t c = 0; c < repr.dim; ++c) {
        acc += static_cast<double>(weights[c]) * x[c];
      }
      out.values[row * out.cols + o] = static_cast<float>(acc);
    }
  }
  return out;
}

CompressionMetrics compression_metrics(const VideoFeatures& original,
                                       const VideoRepresentation& repr) {
  CompressionMetrics metrics;
  const std::size_t n = original.num_patches();
  const std::size_t d = original.dim();
  metrics.input_tokens = original.num_frames() * n;
  metrics.output_tokens = repr.num_rows();
  metrics.compression_ratio = metrics.output_tokens == 0
                                  ? 0.0
                                  : static_cast<double>(metrics.input_tokens) /
                                        static_cast<double>(metrics.output_tokens);
  if (repr.locals.empty() || repr.dim != d) return metrics;

  std::vector<float> unit_outputs;
  std::size_t output_count = 0;
  for (const auto& segment : repr.locals) {
    for (const auto& token : segment.tokens) {
      const auto unit = normalized(token.vector);
      unit_outputs.insert(unit_outputs.end(), unit.begin(), unit.end());
      ++output_count;
    }
  }
  double coverage_sum = 0.0;
  for (std::size_t i = 0; i < metrics.input_tokens; ++i) {
    const auto unit = normalized(original.patch_tokens().subspan(i * d, d));
    float best = -1.0f;
    for (std::size_t j = 0; j < output_count; ++j) {
      best = std::max(best, dot16(unit.data(), unit_outputs.data() + j * d, d));
    }
    coverage_sum += std::clamp(best, -1.0f, 1.0f);
  }
  metrics.coverage = coverage_sum / static_cast<double>(metrics.input_tokens);

  const std::size_t segments = repr.locals.size();
  const std::size_t frames_per_segment = original.num_frames() / segments;
  std::vector<double> in_sum(d);
  std::vector<double> out_sum(d);
  for (std::size_t s = 0; s < segments; ++s) {
    std::fill(in_sum.begin(), in_sum.end(), 0.0);
    std::fill(out_sum.begin(), out_sum.end(), 0.0);
    const auto block = original.patch_tokens().subspan(
        s * frames_per_segment * n * d, frames_per_segment * n * d);
    for (std::size_t i = 0; i < block.size(); ++i) in_sum[i % d] += block[i];
    for (const auto& token : repr.locals[s].tokens) {
      const double w = static_cast<double>(token.weight);
      for (std::size_t c = 0; c < d; ++c) out_sum[c] += w * token.vector[c];
    }
    double diff = 0.0;
    double reference = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      diff += (out_sum[c] - in_sum[c]) * (out_sum[c] - in_sum[c]);
      reference += in_sum[c] * in_sum[c];
    }
    metrics.conservation_residuals.push_back(
        reference > 0.0 ? std::sqrt(diff / reference) : std::sqrt(diff));
  }
  return metrics;
}

}  // namespace vidmerge
