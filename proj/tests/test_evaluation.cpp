#include "rgpipe/evaluation.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.hpp"

using namespace rgpipe;
using rgtest::TempDir;

namespace {

SpotPrediction pred(const std::string& id, double time, double conf, int rank = 1,
                    double len = 3.0) {
  return {id, "g0", 1, rank, time, time + len, conf};
}

// Brute-force AP oracle: re-sorts, then recomputes the confusion counts from
// scratch for every prediction prefix and sums precision wherever recall
// increases.
double ap_oracle(const std::vector<SpotGt>& gts, std::vector<SpotPrediction> preds,
                 double delta) {
  if (gts.empty()) return 0.0;
  std::sort(preds.begin(), preds.end(),
            [](const SpotPrediction& a, const SpotPrediction& b) {
              if (a.confidence != b.confidence) return a.confidence > b.confidence;
              if (a.time_s != b.time_s) return a.time_s < b.time_s;
              if (a.replay_id != b.replay_id) return a.replay_id < b.replay_id;
              return a.end_s < b.end_s;
            });
  const auto tp_in_prefix = [&](std::size_t k) {
    int tp = 0;
    std::vector<bool> used(gts.size(), false);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (used[g] || gts[g].replay_id != preds[i].replay_id) continue;
        if (std::abs(preds[i].time_s - gts[g].time_s) <= delta) {
          used[g] = true;
          ++tp;
        }
        break;  // one gt per replay id
      }
    }
    return tp;
  };
  double ap = 0.0;
  int prev_tp = 0;
  for (std::size_t r = 1; r <= preds.size(); ++r) {
    const int tp = tp_in_prefix(r);
    if (tp > prev_tp)
      ap += static_cast<double>(tp) / static_cast<double>(r);
    prev_tp = tp;
  }
  return ap / static_cast<double>(gts.size());
}

GlobalProposal seg_prop(double start, double end, double score,
                        const std::string& id = "r0") {
  return {id, "g0", 1, start, end, score};
}

}  // namespace

TEST(SpottingAp, TruePositiveThenFalsePositive) {
  const std::vector<SpotGt> gts{{"r0", 100.0}};
  const double ap = spotting_ap(gts, {pred("r0", 101.0, 0.9), pred("r0", 150.0, 0.8)}, 3.0);
  EXPECT_DOUBLE_EQ(ap, 1.0);
}

TEST(SpottingAp, NoMatchesWithinTightTolerance) {
  const std::vector<SpotGt> gts{{"r0", 100.0}};
  const double ap =
      spotting_ap(gts, {pred("r0", 101.0, 0.9), pred("r0", 150.0, 0.8)}, 0.5);
  EXPECT_DOUBLE_EQ(ap, 0.0);
}

TEST(SpottingAp, FalsePositiveFirstHalvesPrecision) {
  const std::vector<SpotGt> gts{{"r0", 100.0}};
  const double ap =
      spotting_ap(gts, {pred("r0", 150.0, 0.9), pred("r0", 101.0, 0.8)}, 3.0);
  EXPECT_DOUBLE_EQ(ap, 0.5);
}

TEST(SpottingAp, DuplicateGtReplayIdsRejected) {
  const std::vector<SpotGt> gts{{"r0", 100.0}, {"r0", 200.0}};
  EXPECT_THROW(spotting_ap(gts, {}, 3.0), DataError);
}

TEST(SpottingAp, MatchesBruteForceOracleExactly) {
  Rng rng(211);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_gts = static_cast<int>(rng.uniform_int(1, 3));
    std::vector<SpotGt> gts;
    for (int g = 0; g < n_gts; ++g)
      gts.push_back({"r" + std::to_string(g), rng.uniform(0.0, 200.0)});
    const int n_preds = static_cast<int>(rng.uniform_int(0, 6));
    std::vector<SpotPrediction> preds;
    for (int p = 0; p < n_preds; ++p)
      preds.push_back(pred("r" + std::to_string(rng.uniform_int(0, n_gts - 1)),
                           rng.uniform(0.0, 200.0), rng.uniform()));
    const double delta = rng.uniform(0.5, 30.0);
    EXPECT_EQ(spotting_ap(gts, preds, delta), ap_oracle(gts, preds, delta));
  }
}

TEST(SpottingAp, MonotoneInTolerance) {
  Rng rng(223);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SpotGt> gts{{"r0", rng.uniform(0.0, 100.0)},
                            {"r1", rng.uniform(0.0, 100.0)}};
    std::vector<SpotPrediction> preds;
    for (int p = 0; p < 4; ++p)
      preds.push_back(
          pred("r" + std::to_string(rng.uniform_int(0, 1)), rng.uniform(0.0, 100.0),
               rng.uniform()));
    double prev = 0.0;
    for (double delta : {0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 200.0}) {
      const double ap = spotting_ap(gts, preds, delta);
      EXPECT_GE(ap, prev - 1e-12);
      prev = ap;
    }
  }
}

TEST(AverageMap, MidTolerancePrediction) {
  const std::vector<SpotGt> gts{{"r0", 100.0}};
  const double v = average_map(gts, {pred("r0", 102.5, 0.9)}, {1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(v, 60.0);  // misses deltas 1,2; hits 3,4,5
}

TEST(AverageMap, PerfectPredictions) {
  const std::vector<SpotGt> gts{{"r0", 100.0}, {"r1", 50.0}};
  const double v =
      average_map(gts, {pred("r0", 100.0, 0.9), pred("r1", 50.0, 0.8)}, {1, 2, 3});
  EXPECT_DOUBLE_EQ(v, 100.0);
}

TEST(AverageMap, NoPredictionsScoreZero) {
  const std::vector<SpotGt> gts{{"r0", 100.0}};
  EXPECT_DOUBLE_EQ(average_map(gts, {}, {1, 2, 3}), 0.0);
}

TEST(ArAtK, PartialOverlapCountsLowThresholdsOnly) {
  const std::vector<Segment> gts{{100.0, 103.0, "a"}};
  const std::vector<std::vector<GlobalProposal>> props{
      {seg_prop(100.5, 103.5, 0.9)}};
  // tIoU = 2.5/3.5 ~ 0.714: passes 0.5..0.7, five of ten thresholds
  EXPECT_DOUBLE_EQ(ar_at_k(gts, props, 1, MetricConfig{}.tiou_thresholds), 50.0);
}

TEST(ArAtK, ExactMatchesScoreFull) {
  const std::vector<Segment> gts{{100.0, 103.0, "a"}, {50.0, 53.0, "a"}};
  const std::vector<std::vector<GlobalProposal>> props{
      {seg_prop(100.0, 103.0, 0.9)}, {seg_prop(50.0, 53.0, 0.9, "r1")}};
  EXPECT_DOUBLE_EQ(ar_at_k(gts, props, 1, MetricConfig{}.tiou_thresholds), 100.0);
}

TEST(ArAtK, EmptyProposalListsScoreZero) {
  const std::vector<Segment> gts{{100.0, 103.0, "a"}};
  const std::vector<std::vector<GlobalProposal>> props{{}};
  EXPECT_DOUBLE_EQ(ar_at_k(gts, props, 5, MetricConfig{}.tiou_thresholds), 0.0);
}

TEST(ArAtK, MonotoneInK) {
  Rng rng(227);
  const std::vector<Segment> gts{{40.0, 43.0, "a"}, {80.0, 83.0, "a"}};
  std::vector<std::vector<GlobalProposal>> props(2);
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < 8; ++i) {
      const double s = rng.uniform(30.0, 90.0);
      props[static_cast<std::size_t>(r)].push_back(
          seg_prop(s, s + rng.uniform(1.0, 5.0), 0.0, "r" + std::to_string(r)));
    }
  double prev = 0.0;
  for (int k = 1; k <= 8; ++k) {
    const double ar = ar_at_k(gts, props, k, MetricConfig{}.tiou_thresholds);
    EXPECT_GE(ar, prev - 1e-12);
    prev = ar;
  }
}

TEST(AucArAn, ConstantRecallHalf) {
  const std::vector<Segment> gts{{100.0, 103.0, "a"}, {50.0, 53.0, "a"}};
  const std::vector<std::vector<GlobalProposal>> props{
      {seg_prop(100.0, 103.0, 0.9)}, {}};
  EXPECT_DOUBLE_EQ(auc_ar_an(gts, props, {}), 50.0);
}

TEST(AucArAn, PerfectTopOne) {
  const std::vector<Segment> gts{{100.0, 103.0, "a"}};
  const std::vector<std::vector<GlobalProposal>> props{{seg_prop(100.0, 103.0, 0.9)}};
  EXPECT_DOUBLE_EQ(auc_ar_an(gts, props, {}), 100.0);
}

TEST(AucArAn, MatchesBruteForceRecomputation) {
  Rng rng(229);
  const MetricConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 5));
    std::vector<Segment> gts;
    std::vector<std::vector<GlobalProposal>> props(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
      const double t = rng.uniform(0.0, 200.0);
      gts.push_back({t, t + 3.0, "a"});
      const int m = static_cast<int>(rng.uniform_int(0, 10));
      for (int i = 0; i < m; ++i) {
        const double s = rng.uniform(std::max(0.0, t - 6.0), t + 6.0);
        props[static_cast<std::size_t>(r)].push_back(
            seg_prop(s, s + rng.uniform(1.0, 6.0), 0.0, "r" + std::to_string(r)));
      }
    }
    // independent recomputation: loop AN, thresholds, replays from scratch
    double auc_sum = 0.0;
    for (int an = 1; an <= cfg.an_max; ++an) {
      double ar_sum = 0.0;
      for (double tau : cfg.tiou_thresholds) {
        int hits = 0;
        for (int r = 0; r < n; ++r) {
          bool hit = false;
          const auto& list = props[static_cast<std::size_t>(r)];
          for (std::size_t i = 0; i < std::min<std::size_t>(list.size(),
                                                            static_cast<std::size_t>(an));
               ++i) {
            if (temporal_iou(gts[static_cast<std::size_t>(r)].start_s,
                             gts[static_cast<std::size_t>(r)].end_s, list[i].start_s,
                             list[i].end_s) >= tau) {
              hit = true;
              break;
            }
          }
          if (hit) ++hits;
        }
        ar_sum += static_cast<double>(hits) / static_cast<double>(n);
      }
      auc_sum += 100.0 * ar_sum / static_cast<double>(cfg.tiou_thresholds.size());
    }
    const double expect = auc_sum / static_cast<double>(cfg.an_max);
    EXPECT_NEAR(auc_ar_an(gts, props, cfg), expect, 1e-9);

    // AR@AN monotone in AN
    double prev = 0.0;
    for (int an = 1; an <= 10; ++an) {
      const double ar = ar_at_k(gts, props, an, cfg.tiou_thresholds);
      EXPECT_GE(ar, prev - 1e-12);
      prev = ar;
    }
  }
}

TEST(Metrics, PermutationAndScaleInvariance) {
  Rng rng(233);
  std::vector<SpotGt> gts{{"r0", 40.0}, {"r1", 80.0}, {"r2", 120.0}};
  std::vector<SpotPrediction> preds;
  for (int i = 0; i < 9; ++i)
    preds.push_back(pred("r" + std::to_string(i % 3), rng.uniform(30.0, 130.0),
                         rng.uniform(), i / 3 + 1));
  const double base = average_map(gts, preds, {1, 2, 3, 4, 5});

  auto shuffled = preds;
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1],
              shuffled[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  EXPECT_DOUBLE_EQ(average_map(gts, shuffled, {1, 2, 3, 4, 5}), base);

  auto scaled = preds;
  for (auto& p : scaled) p.confidence *= 7.5;
  EXPECT_DOUBLE_EQ(average_map(gts, scaled, {1, 2, 3, 4, 5}), base);
}

// --- evaluate -------------------------------------------------------------

namespace {

Manifest two_replay_manifest() {
  Manifest m;
  GameEntry game;
  game.id = "g0";
  HalfEntry half;
  half.half = 1;
  half.duration_s = 600.0;
  ReplayEvent r0;
  r0.replay_id = "r0";
  r0.game_id = "g0";
  r0.half = 1;
  r0.replay_start_s = 200.0;
  r0.replay_end_s = 203.0;
  r0.gt_time_s = 150.0;
  r0.label = "action";
  ReplayEvent r1 = r0;
  r1.replay_id = "r1";
  r1.replay_start_s = 400.0;
  r1.replay_end_s = 403.0;
  r1.gt_time_s = 370.0;
  half.replays = {r0, r1};
  game.halves.push_back(half);
  m.games.push_back(game);
  return m;
}

}  // namespace

TEST(Evaluate, OraclePredictionsScoreEverywhereFull) {
  TempDir dir;
  const Manifest m = two_replay_manifest();
  write_predictions({{"r0", "g0", 1, 1, 150.0, 153.0, 0.9},
                     {"r1", "g0", 1, 1, 370.0, 373.0, 0.9}},
                    dir / "preds.jsonl");
  const MetricsReport rep = evaluate(m, dir / "preds.jsonl", {});
  EXPECT_DOUBLE_EQ(rep.tight_avg_map, 100.0);
  EXPECT_DOUBLE_EQ(rep.loose_avg_map, 100.0);
  EXPECT_DOUBLE_EQ(rep.ar_at_1, 100.0);
  EXPECT_DOUBLE_EQ(rep.ar_at_5, 100.0);
  EXPECT_DOUBLE_EQ(rep.auc, 100.0);
  EXPECT_EQ(rep.n_replays, 2);
  for (const auto& [delta, v] : rep.per_delta_map) EXPECT_DOUBLE_EQ(v, 100.0);
}

TEST(Evaluate, EmptyPredictionsGiveZeros) {
  TempDir dir;
  const Manifest m = two_replay_manifest();
  {
    std::ofstream out(dir / "empty.jsonl");
  }
  const MetricsReport rep = evaluate(m, dir / "empty.jsonl", {});
  EXPECT_DOUBLE_EQ(rep.tight_avg_map, 0.0);
  EXPECT_DOUBLE_EQ(rep.loose_avg_map, 0.0);
  EXPECT_DOUBLE_EQ(rep.ar_at_1, 0.0);
  EXPECT_DOUBLE_EQ(rep.auc, 0.0);
  EXPECT_EQ(rep.n_replays, 2);
}

TEST(Evaluate, UnknownReplayIdFails) {
  TempDir dir;
  const Manifest m = two_replay_manifest();
  write_predictions({{"nope", "g0", 1, 1, 150.0, 153.0, 0.9}}, dir / "preds.jsonl");
  EXPECT_THROW(evaluate(m, dir / "preds.jsonl", {}), DataError);
}

TEST(Evaluate, MissingGtFails) {
  TempDir dir;
  Manifest m = two_replay_manifest();
  m.games[0].halves[0].replays[0].gt_time_s.reset();
  write_predictions({{"r1", "g0", 1, 1, 370.0, 373.0, 0.9}}, dir / "preds.jsonl");
  EXPECT_THROW(evaluate(m, dir / "preds.jsonl", {}), DataError);
}

TEST(Report, JsonHasAllFields) {
  MetricsReport r;
  r.tight_avg_map = 12.5;
  r.loose_avg_map = 50.0;
  r.per_delta_map[1.0] = 10.0;
  r.per_delta_map[5.0] = 15.0;
  r.ar_at_1 = 20.0;
  r.ar_at_5 = 40.0;
  r.auc = 30.0;
  r.n_replays = 4;
  const ordered_json j = report_to_json(r);
  EXPECT_DOUBLE_EQ(j.at("tight_avg_map").get<double>(), 12.5);
  EXPECT_DOUBLE_EQ(j.at("per_delta_map").at("5").get<double>(), 15.0);
  EXPECT_EQ(j.at("n_replays").get<int>(), 4);
  const std::string table = render_report_table(r);
  EXPECT_NE(table.find("tight avg-mAP"), std::string::npos);
  EXPECT_NE(table.find("AUC"), std::string::npos);
}
