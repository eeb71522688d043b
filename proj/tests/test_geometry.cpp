#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "agrotrack/geometry.hpp"
#include "agrotrack/mobility.hpp"
#include "agrotrack/rng.hpp"

using namespace agrotrack;
using geom::Polygon;
using geom::Vec2;

namespace {

Polygon unit_square(double half = 1.0) {
  return Polygon({{-half, -half}, {half, -half}, {half, half}, {-half, half}});
}

}  // namespace

TEST(Rng, SubstreamsAreDistinctAndReproducible) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t n = 0; n < 500; ++n) {
    for (auto tag : {rng::Stream::kPhase, rng::Stream::kTxOffset, rng::Stream::kShadowing}) {
      seeds.insert(rng::stream_seed(9001, n, tag));
    }
  }
  EXPECT_EQ(seeds.size(), 1500u);
  auto a = rng::substream(9001, 3, rng::Stream::kDecode);
  auto b = rng::substream(9001, 3, rng::Stream::kDecode);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, FirstDrawsAcrossNodesDoNotCluster) {
  // Regression guard: weakly mixed substream seeds once correlated the first
  // draws of neighbouring node ids, which bunched transmission offsets and
  // more than doubled the simulated collision rate. The sum of two fresh
  // streams' first draws, folded into one interval, must look uniform.
  const double interval = 798.0;
  std::vector<double> first_tx;
  for (std::uint64_t n = 0; n < 200; ++n) {
    auto phase = rng::substream(1234, n, rng::Stream::kPhase);
    auto txoff = rng::substream(1234, n, rng::Stream::kTxOffset);
    first_tx.push_back(
        std::fmod(phase.uniform(0.0, interval) + txoff.uniform(0.0, interval), interval));
  }
  std::sort(first_tx.begin(), first_tx.end());
  int near_pairs = 0;
  for (std::size_t i = 1; i < first_tx.size(); ++i) {
    if (first_tx[i] - first_tx[i - 1] < 0.06) ++near_pairs;
  }
  // ~1.5 expected for 200 uniform points; the broken mixer produced 61.
  EXPECT_LT(near_pairs, 12);
}

TEST(Rng, UniformIntStaysInRangeAndCoversIt) {
  auto gen = rng::Xoshiro256(7);
  std::array<int, 8> counts{};
  for (int i = 0; i < 8000; ++i) {
    const std::uint64_t v = gen.uniform_int(8);
    ASSERT_LT(v, 8u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_GT(c, 800);
}

TEST(Polygon, AreaAndCentroid) {
  const Polygon sq = unit_square(2.0);
  EXPECT_DOUBLE_EQ(sq.area(), 16.0);
  const Vec2 c = sq.centroid();
  EXPECT_NEAR(c.x, 0.0, 1e-12);
  EXPECT_NEAR(c.y, 0.0, 1e-12);
}

TEST(Polygon, ContainsInteriorAndBoundary) {
  const Polygon sq = unit_square();
  EXPECT_TRUE(sq.contains({0.0, 0.0}));
  EXPECT_TRUE(sq.contains({1.0, 0.0}));   // edge counts as inside
  EXPECT_TRUE(sq.contains({1.0, 1.0}));   // vertex counts as inside
  EXPECT_FALSE(sq.contains({1.0001, 0.0}));
  EXPECT_FALSE(sq.contains({-2.0, 0.5}));
}

TEST(Polygon, ConvexityCheck) {
  EXPECT_TRUE(unit_square().is_convex());
  const Polygon dent({{0, 0}, {4, 0}, {4, 4}, {2, 1}, {0, 4}});
  EXPECT_FALSE(dent.is_convex());
}

TEST(Polygon, UniformSamplingStaysInside) {
  const Polygon tri({{0, 0}, {10, 0}, {0, 10}});
  auto gen = rng::Xoshiro256(12);
  for (int i = 0; i < 2000; ++i) {
    EXPECT_TRUE(tri.contains(tri.sample_uniform(gen)));
  }
}

TEST(Segments, ProperAndTouchingIntersections) {
  EXPECT_TRUE(geom::segments_intersect({0, 0}, {2, 2}, {0, 2}, {2, 0}));
  EXPECT_TRUE(geom::segments_intersect({0, 0}, {2, 0}, {1, 0}, {1, 5}));  // touch
  EXPECT_FALSE(geom::segments_intersect({0, 0}, {1, 0}, {0, 1}, {1, 1}));
}

TEST(Segments, BlockedBySquare) {
  const Polygon rock = unit_square();
  EXPECT_TRUE(geom::segment_blocked_by(rock, {-3, 0}, {3, 0}));   // straight through
  EXPECT_TRUE(geom::segment_blocked_by(rock, {0, 0}, {5, 5}));    // endpoint inside
  EXPECT_FALSE(geom::segment_blocked_by(rock, {-3, 2}, {3, 2}));  // passes above
}

TEST(RandomWaypoint, ZeroSpeedNeverMoves) {
  const Polygon field = unit_square(100.0);
  sim::MobilitySpec spec;
  spec.speed_min_mps = 0.0;
  spec.speed_max_mps = 0.0;
  sim::RandomWaypoint walker(&field, spec, {5.0, 5.0}, rng::Xoshiro256(1));
  for (double t = 100.0; t < 5000.0; t += 100.0) {
    const Vec2 p = walker.advance_to(t);
    EXPECT_DOUBLE_EQ(p.x, 5.0);
    EXPECT_DOUBLE_EQ(p.y, 5.0);
  }
}

TEST(RandomWaypoint, PausesOnArrival) {
  const Polygon field = unit_square(10.0);
  sim::MobilitySpec spec;
  spec.speed_min_mps = 1.0;
  spec.speed_max_mps = 1.0;
  spec.pause_min_s = 1000.0;
  spec.pause_max_s = 1000.0;
  sim::RandomWaypoint walker(&field, spec, {0.0, 0.0}, rng::Xoshiro256(2));
  // Travel at most the diagonal (~28 m) then pause 1000 s: by t=40 the walker
  // is either en route or parked; sample densely and require a long still gap.
  Vec2 prev = walker.advance_to(0.0);
  int still = 0, longest_still = 0;
  for (double t = 1.0; t < 2000.0; t += 1.0) {
    const Vec2 p = walker.advance_to(t);
    if (geom::distance(p, prev) < 1e-12) {
      ++still;
      longest_still = std::max(longest_still, still);
    } else {
      still = 0;
    }
    prev = p;
  }
  EXPECT_GE(longest_still, 900);
}

TEST(RandomWaypoint, TenThousandStepsStayInsideField) {
  // Point-in-polygon oracle over a long trace.
  const Polygon field({{-150, -100}, {150, -100}, {200, 60}, {0, 160}, {-200, 60}});
  ASSERT_TRUE(field.is_convex());
  sim::MobilitySpec spec;
  spec.speed_min_mps = 0.3;
  spec.speed_max_mps = 1.5;
  spec.pause_min_s = 5.0;
  spec.pause_max_s = 30.0;
  sim::RandomWaypoint walker(&field, spec, {0.0, 0.0}, rng::Xoshiro256(77));
  for (int step = 1; step <= 10000; ++step) {
    const Vec2 p = walker.advance_to(step * 7.0);
    ASSERT_TRUE(field.contains(p)) << "step " << step << " at (" << p.x << ", " << p.y << ")";
  }
}

TEST(RandomWaypoint, DeterministicGivenStream) {
  const Polygon field = unit_square(300.0);
  sim::MobilitySpec spec;
  sim::RandomWaypoint a(&field, spec, {1.0, 2.0}, rng::Xoshiro256(99));
  sim::RandomWaypoint b(&field, spec, {1.0, 2.0}, rng::Xoshiro256(99));
  for (double t = 50.0; t < 20000.0; t += 50.0) {
    const Vec2 pa = a.advance_to(t);
    const Vec2 pb = b.advance_to(t);
    EXPECT_DOUBLE_EQ(pa.x, pb.x);
    EXPECT_DOUBLE_EQ(pa.y, pb.y);
  }
}

TEST(RandomWaypoint, RejectsTimeReversal) {
  const Polygon field = unit_square(10.0);
  sim::MobilitySpec spec;
  sim::RandomWaypoint walker(&field, spec, {0.0, 0.0}, rng::Xoshiro256(5));
  walker.advance_to(100.0);
  EXPECT_THROW(walker.advance_to(50.0), std::logic_error);
}
