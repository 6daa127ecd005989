// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

namespace vidmerge {

/// Dot product of two float arrays accumulated in double over 8 interleaved
/// lanes that are combined in a fixed order. Every score in the library goes
/// through this, which keeps results identical across call sites and hosts.
double lane_dot(const float* a, const float* b, std::size_t n) noexcept;

/// Squared norm of each of the `heads` contiguous channel groups of `v`.
void head_squared_norms(std::span<const float> v, std::size_t heads,
                        std::span<double> out);

/// Head-averaged cosine similarity with precomputed per-head squared norms.
/// Returns -inf if any head slice of either vector has zero norm.
double head_similarity_from_norms(std::span<const float> p,
                                  std::span<const float> q, std::size_t heads,
                                  std::span<const double> p_norms,
                                  std::span<const double> q_norms) noexcept;

/// Mean over the C channel groups of the per-group cosine similarity,
/// mapping zero-norm groups to -inf.
double head_similarity_or_neg_inf(std::span<const float> p,
                                  std::span<const float> q, std::size_t heads);

/// Same score, but a zero-norm head slice raises ErrorCode::ZeroNormHead.
double head_similarity(std::span<const float> p, std::span<const float> q,
                       std::size_t heads);

}  // namespace vidmerge
