#include "rgpipe/augmentation.hpp"

#include <gtest/gtest.h>

#include "rgpipe/synthetic.hpp"
#include "test_util.hpp"

using namespace rgpipe;
using rgtest::TempDir;

namespace {

Manifest synth_manifest(const TempDir& dir, int games = 1, int actions = 2,
                        std::uint64_t seed = 19, double duration = 300.0) {
  SynthConfig cfg;
  cfg.n_games = games;
  cfg.actions_per_half = actions;
  cfg.dim = 4;
  cfg.duration_s = duration;
  cfg.noise_sigma = 0.2;
  cfg.seed = seed;
  return generate_synthetic(cfg, dir.path());
}

// Single half, one replay at rs with gt, two small noise streams.
Manifest tiny_manifest(const TempDir& dir, double duration, double rs, double gt) {
  Rng rng(307);
  Manifest m;
  m.base_dir = dir.path();
  GameEntry game;
  game.id = "g0";
  HalfEntry half;
  half.half = 1;
  half.duration_s = duration;
  const auto t = static_cast<std::size_t>(duration * 4.0);
  for (const char* name : {"a", "b"}) {
    FeatureTrack track;
    track.fps = 4.0;
    track.frames = Matrix(t, 2);
    for (auto& v : track.frames.data()) v = rng.gaussian();
    const std::string file = std::string("g0_h1_") + name + ".rgf1";
    write_feature_track(track, dir / file);
    half.streams.push_back({name, file});
  }
  ReplayEvent r;
  r.replay_id = "g0_h1_r00";
  r.game_id = "g0";
  r.half = 1;
  r.replay_start_s = rs;
  r.replay_end_s = rs + 3.0;
  r.gt_time_s = gt;
  r.label = "action";
  half.replays.push_back(r);
  game.halves.push_back(half);
  m.games.push_back(game);
  return m;
}

}  // namespace

TEST(Harvest, TwelveFramesAtFourFps) {
  TempDir dir;
  const Manifest m = synth_manifest(dir);
  const auto harvested = harvest_segment_features(m, {});
  ASSERT_EQ(harvested.size(), m.replay_count());
  for (const auto& h : harvested) {
    EXPECT_EQ(h.frames.rows(), 12u);  // 3 s * 4 fps
    EXPECT_EQ(h.frames.cols(), 8u);   // two 4-channel streams
  }
}

TEST(Harvest, FramesEqualTrackRowsAtLabel) {
  TempDir dir;
  const Manifest m = tiny_manifest(dir, 300.0, 200.0, 150.0);
  const auto harvested = harvest_segment_features(m, {});
  ASSERT_EQ(harvested.size(), 1u);
  const auto tracks = load_half_tracks(m, m.games[0], m.games[0].halves[0]);
  for (std::size_t i = 0; i < 12u; ++i) {
    for (std::size_t c = 0; c < 2u; ++c) {
      EXPECT_EQ(harvested[0].frames(i, c), tracks[0].frames(600 + i, c));
      EXPECT_EQ(harvested[0].frames(i, 2 + c), tracks[1].frames(600 + i, c));
    }
  }
}

TEST(Harvest, EmptyManifestGivesEmptyList) {
  Manifest m;
  EXPECT_TRUE(harvest_segment_features(m, {}).empty());
}

TEST(SampleBackground, ExcludesWindowsTouchingLabels) {
  TempDir dir;
  // gt at 100 -> label [100, 103]; train context of the replay at 200 is
  // [80, 200) with windows at 80, 88, 96, ...
  const Manifest m = tiny_manifest(dir, 300.0, 200.0, 100.0);
  const BackgroundIndex index = BackgroundIndex::build(m, {});
  ASSERT_FALSE(index.empty());
  Rng rng(1);
  std::vector<double> starts;
  for (int i = 0; i < 200; ++i) starts.push_back(index.sample(rng).window_start_s);
  for (double s : starts) {
    EXPECT_EQ(overlap_len(s, s + 16.0, 100.0, 103.0), 0.0);
    EXPECT_NE(s, 88.0);
    EXPECT_NE(s, 96.0);
  }
  // the window right of the label qualifies and is reachable
  EXPECT_NE(std::find(starts.begin(), starts.end(), 104.0), starts.end());
  EXPECT_NE(std::find(starts.begin(), starts.end(), 80.0), starts.end());
}

TEST(SampleBackground, FailsWhenLabelsTileEverything) {
  TempDir dir;
  // context [0, 10) is a single window [0, 10] which overlaps the label
  const Manifest m = tiny_manifest(dir, 13.0, 10.0, 5.0);
  Rng rng(2);
  EXPECT_THROW(sample_background(m, {}, rng), DataError);
}

TEST(SampleBackground, DeterministicUnderSeed) {
  TempDir dir;
  const Manifest m = synth_manifest(dir);
  Rng a(42), b(42);
  const BackgroundWindow wa = sample_background(m, {}, a);
  const BackgroundWindow wb = sample_background(m, {}, b);
  EXPECT_EQ(wa.replay_id, wb.replay_id);
  EXPECT_EQ(wa.window_start_s, wb.window_start_s);
  EXPECT_EQ(wa.frames, wb.frames);
}

TEST(SynthesizePositive, SplicesSegmentAtDrawnOffset) {
  const Matrix background(8, 2, 0.0);
  const Matrix segment(3, 2, 1.0);
  Rng rng(3);
  const auto [frames, span] = synthesize_positive(background, segment, rng);
  const auto u = static_cast<std::size_t>(span.start_f);
  ASSERT_EQ(span.end_f - span.start_f, 3.0);
  ASSERT_LE(span.end_f, 8.0);
  for (std::size_t r = 0; r < 8u; ++r)
    for (std::size_t c = 0; c < 2u; ++c)
      EXPECT_EQ(frames(r, c), (r >= u && r < u + 3) ? 1.0 : 0.0);
}

TEST(SynthesizePositive, RowsOutsideSpanBitIdenticalToBackground) {
  Rng data_rng(5);
  Matrix background(20, 3);
  Matrix segment(7, 3);
  for (auto& v : background.data()) v = data_rng.gaussian();
  for (auto& v : segment.data()) v = data_rng.gaussian();
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng = Rng::substream(11, static_cast<std::uint64_t>(trial));
    const auto [frames, span] = synthesize_positive(background, segment, rng);
    const auto u = static_cast<std::size_t>(span.start_f);
    for (std::size_t r = 0; r < background.rows(); ++r) {
      for (std::size_t c = 0; c < 3u; ++c) {
        if (r >= u && r < u + 7)
          EXPECT_EQ(frames(r, c), segment(r - u, c));
        else
          EXPECT_EQ(frames(r, c), background(r, c));
      }
    }
  }
}

TEST(SynthesizePositive, RejectsSegmentLongerThanBackground) {
  Rng rng(7);
  EXPECT_THROW(synthesize_positive(Matrix(3, 2), Matrix(4, 2), rng), DataError);
}

TEST(SynthesizePositive, BothBoundaryOffsetsReachable) {
  const Matrix background(8, 1, 0.0);
  const Matrix segment(3, 1, 1.0);
  std::vector<int> hits(6, 0);
  for (int k = 0; k < 10000; ++k) {
    Rng rng = Rng::substream(13, static_cast<std::uint64_t>(k));
    const auto [frames, span] = synthesize_positive(background, segment, rng);
    hits[static_cast<std::size_t>(span.start_f)]++;
  }
  EXPECT_GE(hits[0], 1);
  EXPECT_GE(hits[5], 1);
}

TEST(SynthesizePositive, OffsetsUniformByChiSquare) {
  const Matrix background(8, 1, 0.0);
  const Matrix segment(3, 1, 1.0);
  const int n = 10000;
  std::vector<int> hits(6, 0);
  for (int k = 0; k < n; ++k) {
    Rng rng = Rng::substream(17, static_cast<std::uint64_t>(k));
    const auto [frames, span] = synthesize_positive(background, segment, rng);
    hits[static_cast<std::size_t>(span.start_f)]++;
  }
  const double expected = static_cast<double>(n) / 6.0;
  double chi2 = 0.0;
  for (int h : hits) {
    const double d = static_cast<double>(h) - expected;
    chi2 += d * d / expected;
  }
  // chi-square critical value, 5 degrees of freedom, significance 0.001
  EXPECT_LT(chi2, 20.515);
}

TEST(AugmentDataset, OneToOneRatioDoublesTheSet) {
  TempDir dir;
  const Manifest m = synth_manifest(dir, 2, 3, 23, 600.0);
  auto samples = build_samples(m, {}, Mode::train);
  const std::size_t n_real = samples.size();
  ASSERT_GT(n_real, 0u);
  const auto augmented = augment_dataset(samples, m, {}, {1.0, 99});
  EXPECT_EQ(augmented.size(), 2 * n_real);
  std::size_t n_synth = 0;
  for (const auto& s : augmented)
    if (s.is_synthetic) ++n_synth;
  EXPECT_EQ(n_synth, n_real);
}

TEST(AugmentDataset, FlooredFractionalRatio) {
  TempDir dir;
  const Manifest m = synth_manifest(dir, 1, 2, 29);
  auto samples = build_samples(m, {}, Mode::train);
  const std::size_t n_real = samples.size();
  const auto augmented = augment_dataset(samples, m, {}, {0.4, 99});
  EXPECT_EQ(augmented.size(),
            n_real + static_cast<std::size_t>(std::floor(0.4 * static_cast<double>(n_real))));
}

TEST(AugmentDataset, ZeroRatioIsIdentity) {
  TempDir dir;
  const Manifest m = synth_manifest(dir, 1, 2, 31);
  auto samples = build_samples(m, {}, Mode::train);
  const std::size_t n_real = samples.size();
  const auto augmented = augment_dataset(samples, m, {}, {0.0, 99});
  EXPECT_EQ(augmented.size(), n_real);
}

TEST(AugmentDataset, DeterministicUnderSeed) {
  TempDir dir;
  const Manifest m = synth_manifest(dir, 1, 2, 37);
  const auto samples = build_samples(m, {}, Mode::train);
  const auto a = augment_dataset(samples, m, {}, {1.0, 7});
  const auto b = augment_dataset(samples, m, {}, {1.0, 7});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].replay_id, b[i].replay_id);
    EXPECT_EQ(a[i].window_start_s, b[i].window_start_s);
    EXPECT_EQ(a[i].features, b[i].features);
    EXPECT_EQ(a[i].is_synthetic, b[i].is_synthetic);
  }
}

TEST(AugmentDataset, SyntheticSamplesCarryExactlyOneLabel) {
  TempDir dir;
  const Manifest m = synth_manifest(dir, 1, 3, 41);
  const auto samples = build_samples(m, {}, Mode::train);
  const auto augmented = augment_dataset(samples, m, {}, {1.0, 3});
  for (const auto& s : augmented) {
    if (!s.is_synthetic) continue;
    ASSERT_EQ(s.labels.size(), 1u);
    // 12 native frames in a 64-frame window span 18.75 resized frames
    EXPECT_NEAR(s.labels[0].end_f - s.labels[0].start_f, 18.75, 1e-9);
    EXPECT_EQ(s.features.rows(), 100u);
    EXPECT_EQ(s.features.cols(), 16u);
  }
}
