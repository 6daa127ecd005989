// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_support.hpp"
#include "vidmerge/global_semantics.hpp"

namespace vidmerge {
namespace {

using testing::make_features;

// Naive mean over frames of layer L - E + e, e = 0..E-1.
std::vector<std::vector<float>> reference_global(const VideoFeatures& features, std::size_t e) {
  const auto& shape = features.shape();
  std::vector<std::vector<float>> out;
  for (std::size_t k = 0; k < e; ++k) {
    const std::size_t layer = shape.num_encoder_layers - e + k;
    std::vector<float> token(shape.dim);
    for (std::size_t c = 0; c < shape.dim; ++c) {
      double sum = 0.0;
      for (std::size_t t = 0; t < shape.num_frames; ++t) sum += features.cls(t, layer)[c];
      token[c] = static_cast<float>(sum / shape.num_frames);
    }
    out.push_back(token);
  }
  return out;
}

TEST(AggregateGlobal, SingleFrameIsCopiedExactly) {
  const auto features = testing::random_features(VideoShape{1, 2, 6, 3}, 5);
  const auto global = aggregate_global(features, 3);
  ASSERT_EQ(global.tokens.size(), 3u);
  for (std::size_t l = 0; l < 3; ++l) {
    const auto cls = features.cls(0, l);
    EXPECT_EQ(global.tokens[l], std::vector<float>(cls.begin(), cls.end()));
  }
}

TEST(AggregateGlobal, UsesDeepestLayersShallowestFirst) {
  // Layer l holds the constant l, so the output names the layers it used.
  const auto features = make_features(
      VideoShape{3, 1, 2, 24}, [](auto, auto, auto) { return 0.0f; },
      [](std::size_t, std::size_t l, std::size_t) { return float(l); });
  const auto global = aggregate_global(features, 5);
  ASSERT_EQ(global.tokens.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(global.tokens[k], (std::vector<float>{float(19 + k), float(19 + k)}));
  }
}

TEST(AggregateGlobal, AveragesOverFrames) {
  const auto features = make_features(
      VideoShape{4, 1, 3, 2}, [](auto, auto, auto) { return 0.0f; },
      [](std::size_t t, std::size_t, std::size_t) { return float(t); });
  const auto global = aggregate_global(features, 2);
  for (const auto& token : global.tokens) {
    EXPECT_EQ(token, (std::vector<float>{1.5f, 1.5f, 1.5f}));
  }
}

TEST(AggregateGlobal, MatchesNaiveMean) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const VideoShape shape{1 + rng.below(30), 1, 1 + rng.below(16), 1 + rng.below(8)};
    const auto features = testing::random_features(shape, rng());
    const std::size_t e = 1 + rng.below(shape.num_encoder_layers);
    const auto global = aggregate_global(features, e);
    const auto expected = reference_global(features, e);
    ASSERT_EQ(global.tokens.size(), e);
    for (std::size_t k = 0; k < e; ++k)
      for (std::size_t c = 0; c < shape.dim; ++c)
        ASSERT_NEAR(global.tokens[k][c], expected[k][c], 1e-6);
  }
}

TEST(AggregateGlobal, InvariantToFrameOrder) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const VideoShape shape{2 + rng.below(20), 1, 8, 4};
    const auto features = testing::random_features(shape, rng());
    std::vector<std::size_t> order(shape.num_frames);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto shuffled = make_features(
        shape, [](auto, auto, auto) { return 0.0f; },
        [&](std::size_t t, std::size_t l, std::size_t c) { return features.cls(order[t], l)[c]; });
    const auto a = aggregate_global(features, 4);
    const auto b = aggregate_global(shuffled, 4);
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t c = 0; c < 8; ++c) ASSERT_NEAR(a.tokens[k][c], b.tokens[k][c], 1e-6);
  }
}

TEST(AggregateGlobal, IsLinear) {
  Rng rng(15);
  const VideoShape shape{7, 1, 5, 3};
  const auto x = testing::random_features(shape, rng());
  const auto y = testing::random_features(shape, rng());
  const float alpha = 0.75f;
  const float beta = -2.0f;
  const auto mix = make_features(
      shape, [](auto, auto, auto) { return 0.0f; },
      [&](std::size_t t, std::size_t l, std::size_t c) {
        return alpha * x.cls(t, l)[c] + beta * y.cls(t, l)[c];
      });
  const auto gx = aggregate_global(x, 2);
  const auto gy = aggregate_global(y, 2);
  const auto gm = aggregate_global(mix, 2);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t c = 0; c < 5; ++c)
      EXPECT_NEAR(gm.tokens[k][c], alpha * gx.tokens[k][c] + beta * gy.tokens[k][c], 1e-5);
}

TEST(AggregateGlobal, RejectsLayerCountOutOfRange) {
  const auto features = testing::random_features(VideoShape{2, 1, 4, 3}, 1);
  for (std::size_t e : {0u, 4u}) {
    try {
      aggregate_global(features, e);
      FAIL() << "E=" << e;
    } catch (const Error& err) {
      EXPECT_EQ(err.code(), ErrorCode::ETooLarge);
    }
  }
}

}  // namespace
}  // namespace vidmerge
