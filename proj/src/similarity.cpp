// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include "vidmerge/similarity.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "vidmerge/core_types.hpp"

namespace vidmerge {

namespace {

constexpr std::size_t kMaxStackHeads = 64;

void check_shapes(std::span<const float> p, std::span<const float> q,
                  std::size_t heads) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("token dims differ: {} vs {}", p.size(), q.size()));
  }
  if (heads == 0 || p.size() % heads != 0) {
    throw Error(ErrorCode::CNotDividingD,
                fmt::format("C={} does not divide d={}", heads, p.size()));
  }
}

}  // namespace

double lane_dot(const float* a, const float* b, std::size_t n) noexcept {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) {
      acc[j] += static_cast<double>(a[i + j]) * static_cast<double>(b[i + j]);
    }
  }
  for (std::size_t j = 0; i < n; ++i, ++j) {
    acc[j] += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) +
         ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

void head_squared_norms(std::span<const float> v, std::size_t heads,
                        std::span<double> out) {
  const std::size_t width = v.size() / heads;
  for (std::size_t c = 0; c < heads; ++c) {
    const float* slice = v.data() + c * width;
    out[c] = lane_dot(slice, slice, width);
  }
}

double head_similarity_from_norms(std::span<const float> p,
                                  std::span<const float> q, std::size_t heads,
                                  std::span<const double> p_norms,
                                  std::span<const double> q_norms) noexcept {
  const std::size_t width = p.size() / heads;
  double sum = 0.0;
  for (std::size_t c = 0; c < heads; ++c) {
    const double norm_product = p_norms[c] * q_norms[c];
    if (norm_product == 0.0) return -std::numeric_limits<double>::infinity();
    const double dot = lane_dot(p.data() + c * width, q.data() + c * width, width);
    sum += std::clamp(dot / std::sqrt(norm_product), -1.0, 1.0);
  }
  return sum / static_cast<double>(heads);
}

double head_similarity_or_neg_inf(std::span<const float> p,
                                  std::span<const float> q, std::size_t heads) {
  check_shapes(p, q, heads);
  if (heads <= kMaxStackHeads) {
    double p_norms[kMaxStackHeads];
    double q_norms[kMaxStackHeads];
    head_squared_norms(p, heads, std::span(p_norms, heads));
    head_squared_norms(q, heads, std::span(q_norms, heads));
    return head_similarity_from_norms(p, q, heads, std::span(p_norms, heads),
                                      std::span(q_norms, heads));
  }
  std::vector<double> p_norms(heads);
  std::vector<double> q_norms(heads);
  head_squared_norms(p, heads, p_norms);
  head_squared_norms(q, heads, q_norms);
  return head_similarity_from_norms(p, q, heads, p_norms, q_norms);
}

double head_similarity(std::span<const float> p, std::span<const float> q,
                       std::size_t heads) {
  const double score = head_similarity_or_neg_inf(p, q, heads);
  if (std::isinf(score)) {
    throw Error(ErrorCode::ZeroNormHead,
                "a head slice has zero norm; cosine is undefined");
  }
  return score;
}

}  // namespace vidmerge
