// Copyright 2026 The vidmerge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>

#include "test_support.hpp"
#include "vidmerge/feature_io.hpp"
#include "vidmerge/global_semantics.hpp"
#include "vidmerge/pipeline.hpp"
#include "vidmerge/segmentation.hpp"

namespace vidmerge {
namespace {

using testing::same_bits;

MergeConfig config_for(std::size_t s, std::size_t m, std::size_t e, std::size_t c) {
  MergeConfig config;
  config.num_segments = s;
  config.tokens_per_segment = m;
  config.num_global_layers = e;
  config.similarity_heads = c;
  return config;
}

TEST(CompressVideo, ThreadCountDoesNotChangeOutput) {
  const auto features = generate_synthetic({VideoShape{16, 40, 32, 3}, 77, PiecewiseEvents{4}});
  MergeConfig config = config_for(8, 9, 2, 4);
  config.partition_rule = SeededRandomPartition{5};
  const auto one = compress_video(features, config, {1, false});
  const auto eight = compress_video(features, config, {8, false});
  EXPECT_TRUE(same_bits(one.representation.flattened, eight.representation.flattened));
  ASSERT_EQ(one.plans.size(), eight.plans.size());
  for (std::size_t s = 0; s < one.plans.size(); ++s) {
    EXPECT_EQ(one.plans[s].steps, eight.plans[s].steps);
  }
}

TEST(CompressVideo, MatchesSegmentBySegmentComposition) {
  const auto features = testing::random_features(VideoShape{6, 10, 8, 3}, 3);
  const MergeConfig config = config_for(3, 4, 2, 2);
  const auto result = compress_video(features, config);
  const auto views = segment_video(features, config);
  for (std::size_t s = 0; s < views.size(); ++s) {
    const auto merged = merge_segment(views[s], config);
    ASSERT_EQ(result.representation.locals[s].tokens.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_TRUE(same_bits(result.representation.locals[s].tokens[i].vector,
                            merged.feature.tokens[i].vector));
    }
  }
  EXPECT_EQ(result.representation.global.tokens, aggregate_global(features, 2).tokens);
}

TEST(CompressVideo, ProvenanceIsOptional) {
  const auto features = testing::random_features(VideoShape{2, 6, 4, 1}, 4);
  const auto without = compress_video(features, config_for(1, 3, 1, 1));
  EXPECT_FALSE(without.representation.locals[0].tokens[0].provenance.has_value());
  const auto with = compress_video(features, config_for(1, 3, 1, 1), {1, true});
  std::size_t covered = 0;
  for (const auto& token : with.representation.locals[0].tokens) covered += token.provenance->size();
  EXPECT_EQ(covered, 12u);
}

TEST(CompressVideo, TruncationDropsTrailingFrames) {
  const auto features = testing::random_features(VideoShape{7, 3, 4, 1}, 5);
  MergeConfig config = config_for(2, 2, 1, 1);
  EXPECT_THROW(compress_video(features, config), Error);
  config.truncate_trailing_frames = true;
  const auto result = compress_video(features, config);
  EXPECT_EQ(result.config.frames_per_segment, 3u);
  const auto head = truncate_frames(features, 6);
  EXPECT_EQ(head.shape().num_frames, 6u);
  const auto expected = compress_video(head, config_for(2, 2, 1, 1));
  EXPECT_TRUE(same_bits(result.representation.flattened, expected.representation.flattened));
}

TEST(CompressVideo, OutputSizeIsGlobalPlusLocals) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t s = 1 + rng.below(4);
    const std::size_t k = 1 + rng.below(3);
    const std::size_t n = 1 + rng.below(12);
    const std::size_t heads = 1 + rng.below(3);
    const VideoShape shape{s * k, n, heads * (1 + rng.below(4)), 1 + rng.below(4)};
    const auto features = testing::random_features(shape, rng());
    MergeConfig config = config_for(s, 1 + rng.below(k * n), 1 + rng.below(shape.num_encoder_layers), heads);
    if (rng.below(2)) config.assembly_order = AssemblyOrder::LocalFirst;
    const auto result = compress_video(features, config);
    ASSERT_EQ(result.representation.num_rows(),
              config.num_global_layers + config.tokens_per_segment * s);
    ASSERT_EQ(result.representation.flattened.size(),
              result.representation.num_rows() * shape.dim);
  }
}

TEST(ParallelFor, VisitsEveryIndexOnceAndRethrows) {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(50, 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  EXPECT_GE(resolve_thread_count(0), 1u);
  EXPECT_EQ(resolve_thread_count(3), 3u);
}

}  // namespace
}  // namespace vidmerge
