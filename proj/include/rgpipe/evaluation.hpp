#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rgpipe/labeling.hpp"
#include "rgpipe/postprocess.hpp"

namespace rgpipe {

struct MetricConfig {
  std::vector<double> tight_deltas_s{1, 2, 3, 4, 5};
  std::vector<double> loose_deltas_s{5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60};
  std::vector<double> tiou_thresholds{0.50, 0.55, 0.60, 0.65, 0.70,
                                      0.75, 0.80, 0.85, 0.90, 0.95};
  int an_max = 100;  // AR-AN curve evaluated at AN = 1..an_max

  void validate() const {
    const auto ascending_positive = [](const std::vector<double>& v, const char* name) {
      if (v.empty()) fail_config(name, " must be non-empty");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) fail_config(name, " entries must be positive");
        if (i > 0 && v[i] <= v[i - 1]) fail_config(name, " must be sorted ascending");
      }
    };
    ascending_positive(tight_deltas_s, "tight_deltas_s");
    ascending_positive(loose_deltas_s, "loose_deltas_s");
    ascending_positive(tiou_thresholds, "tiou_thresholds");
    if (an_max < 1) fail_config("an_max must be >= 1");
  }
};

struct SpotGt {
  std::string replay_id;
  double time_s = 0.0;
};

namespace detail {

// Total order on predictions: confidence descending, then time, replay id
// and end to break ties, so metrics never depend on input order.
inline void sort_by_confidence(std::vector<SpotPrediction>& preds) {
  std::sort(preds.begin(), preds.end(),
            [](const SpotPrediction& a, const SpotPrediction& b) {
              if (a.confidence != b.confidence) return a.confidence > b.confidence;
              if (a.time_s != b.time_s) return a.time_s < b.time_s;
              if (a.replay_id != b.replay_id) return a.replay_id < b.replay_id;
              return a.end_s < b.end_s;
            });
}

}  // namespace detail

// Tolerance-window spotting AP. Predictions are swept in confidence order;
// one greedy match per ground truth within +/- delta_s. All-points
// interpolation: AP = sum over true-positive ranks of precision-at-rank,
// divided by the number of ground truths.
inline double spotting_ap(const std::vector<SpotGt>& gts,
                          std::vector<SpotPrediction> preds, double delta_s) {
  std::unordered_map<std::string, double> gt_time;
  for (const auto& g : gts)
    if (!gt_time.emplace(g.replay_id, g.time_s).second)
      fail_data("duplicate replay id among ground truths: ", g.replay_id);
  if (gts.empty()) return 0.0;

  detail::sort_by_confidence(preds);
  std::unordered_map<std::string, bool> matched;
  double ap_sum = 0.0;
  int tp = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto it = gt_time.find(preds[i].replay_id);
    if (it != gt_time.end() && !matched[preds[i].replay_id] &&
        std::abs(preds[i].time_s - it->second) <= delta_s) {
      matched[preds[i].replay_id] = true;
      ++tp;
      ap_sum += static_cast<double>(tp) / static_cast<double>(i + 1);
    }
  }
  return ap_sum / static_cast<double>(gts.size());
}

// 100 * mean spotting AP over the tolerance grid.
inline double average_map(const std::vector<SpotGt>& gts,
                          const std::vector<SpotPrediction>& preds,
                          const std::vector<double>& deltas_s) {
  if (deltas_s.empty()) fail_config("average_map: empty tolerance grid");
  double sum = 0.0;
  for (double d : deltas_s) sum += spotting_ap(gts, preds, d);
  return 100.0 * sum / static_cast<double>(deltas_s.size());
}

namespace detail {

// Best tIoU against gt among the first k proposals of each replay.
inline std::vector<double> best_iou_at_k(const std::vector<Segment>& gt_segments,
                                         const std::vector<std::vector<GlobalProposal>>& props,
                                         std::size_t k) {
  std::vector<double> best(gt_segments.size(), 0.0);
  for (std::size_t r = 0; r < gt_segments.size(); ++r) {
    const std::size_t n = std::min(k, props[r].size());
    for (std::size_t i = 0; i < n; ++i)
      best[r] = std::max(best[r], temporal_iou(gt_segments[r].start_s, gt_segments[r].end_s,
                                               props[r][i].start_s, props[r][i].end_s));
  }
  return best;
}

inline double mean_recall(const std::vector<double>& best_iou,
                          const std::vector<double>& thresholds) {
  if (best_iou.empty()) return 0.0;
  double sum = 0.0;
  for (double tau : thresholds) {
    std::size_t hit = 0;
    for (double iou : best_iou)
      if (iou >= tau) ++hit;
    sum += static_cast<double>(hit) / static_cast<double>(best_iou.size());
  }
  return sum / static_cast<double>(thresholds.size());
}

}  // namespace detail

// Average recall of the top-k proposals over the tIoU grid, as a percentage.
// gt_segments[r] pairs with the ranked list proposals_per_replay[r].
inline double ar_at_k(const std::vector<Segment>& gt_segments,
                      const std::vector<std::vector<GlobalProposal>>& proposals_per_replay,
                      int k, const std::vector<double>& tiou_thresholds) {
  if (gt_segments.size() != proposals_per_replay.size())
    fail_data("ar_at_k: ", gt_segments.size(), " ground truths vs ",
              proposals_per_replay.size(), " proposal lists");
  if (k < 1) fail_config("ar_at_k: k must be >= 1");
  const auto best = detail::best_iou_at_k(gt_segments, proposals_per_replay,
                                          static_cast<std::size_t>(k));
  return 100.0 * detail::mean_recall(best, tiou_thresholds);
}

// Mean of AR@AN over the proposal budgets AN = 1..an_max, as a percentage.
inline double auc_ar_an(const std::vector<Segment>& gt_segments,
                        const std::vector<std::vector<GlobalProposal>>& proposals_per_replay,
                        const MetricConfig& cfg) {
  cfg.validate();
  if (gt_segments.size() != proposals_per_replay.size())
    fail_data("auc_ar_an: ground truth / proposal list size mismatch");
  double sum = 0.0;
  for (int an = 1; an <= cfg.an_max; ++an)
    sum += ar_at_k(gt_segments, proposals_per_replay, an, cfg.tiou_thresholds);
  return sum / static_cast<double>(cfg.an_max);
}

struct MetricsReport {
  double tight_avg_map = 0.0;
  double loose_avg_map = 0.0;
  std::map<double, double> per_delta_map;
  double ar_at_1 = 0.0;
  double ar_at_5 = 0.0;
  double auc = 0.0;
  int n_replays = 0;
};

// Assemble ground truths from the manifest (spot time plus the 3 s segment),
// score a predictions file, and produce the full report.
inline MetricsReport evaluate(const Manifest& manifest,
                              const std::filesystem::path& predictions_path,
                              const MetricConfig& cfg) {
  cfg.validate();
  std::vector<SpotGt> gts;
  std::vector<Segment> gt_segments;
  std::unordered_map<std::string, std::size_t> replay_index;
  manifest.for_each_replay([&](const GameEntry&, const HalfEntry& half,
                               const ReplayEvent& r) {
    if (!r.gt_time_s)
      fail_data("replay ", r.replay_id, " lacks gt_time_s; cannot evaluate");
    replay_index.emplace(r.replay_id, gts.size());
    gts.push_back({r.replay_id, *r.gt_time_s});
    gt_segments.push_back(make_segment_label(*r.gt_time_s, half.duration_s, r.label));
  });

  std::vector<SpotPrediction> preds = read_predictions(predictions_path);
  // Rank order within each replay, independent of file order.
  std::vector<std::vector<SpotPrediction>> ranked(gts.size());
  for (const auto& p : preds) {
    const auto it = replay_index.find(p.replay_id);
    if (it == replay_index.end())
      fail_data(predictions_path.string(), ": unknown replay id \"", p.replay_id, "\"");
    ranked[it->second].push_back(p);
  }
  std::vector<std::vector<GlobalProposal>> props(gts.size());
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    std::sort(ranked[r].begin(), ranked[r].end(),
              [](const SpotPrediction& a, const SpotPrediction& b) {
                if (a.rank != b.rank) return a.rank < b.rank;
                if (a.confidence != b.confidence) return a.confidence > b.confidence;
                return a.time_s < b.time_s;
              });
    for (const auto& p : ranked[r])
      props[r].push_back({p.replay_id, p.game_id, p.half, p.time_s, p.end_s, p.confidence});
  }

  MetricsReport report;
  report.n_replays = static_cast<int>(gts.size());
  report.tight_avg_map = average_map(gts, preds, cfg.tight_deltas_s);
  report.loose_avg_map = average_map(gts, preds, cfg.loose_deltas_s);
  for (double d : cfg.tight_deltas_s)
    report.per_delta_map[d] = 100.0 * spotting_ap(gts, preds, d);
  for (double d : cfg.loose_deltas_s)
    report.per_delta_map[d] = 100.0 * spotting_ap(gts, preds, d);
  report.ar_at_1 = ar_at_k(gt_segments, props, 1, cfg.tiou_thresholds);
  report.ar_at_5 = ar_at_k(gt_segments, props, 5, cfg.tiou_thresholds);
  report.auc = auc_ar_an(gt_segments, props, cfg);
  return report;
}

namespace detail {

inline std::string delta_key(double d) {
  std::ostringstream oss;
  oss << d;
  return oss.str();
}

}  // namespace detail

inline ordered_json report_to_json(const MetricsReport& r) {
  ordered_json j;
  j["tight_avg_map"] = r.tight_avg_map;
  j["loose_avg_map"] = r.loose_avg_map;
  ordered_json per_delta = ordered_json::object();
  for (const auto& [d, v] : r.per_delta_map) per_delta[detail::delta_key(d)] = v;
  j["per_delta_map"] = std::move(per_delta);
  j["ar_at_1"] = r.ar_at_1;
  j["ar_at_5"] = r.ar_at_5;
  j["auc"] = r.auc;
  j["n_replays"] = r.n_replays;
  return j;
}

inline void write_report(const MetricsReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail_data("cannot open ", path.string(), " for writing");
  out << report_to_json(r).dump(2) << "\n";
  if (!out) fail_data("write failed: ", path.string());
}

// Aligned text table. AR@k and AUC follow the common convention (tIoU grid
// 0.5:0.05:0.95, budgets AN = 1..100) since those definitions are
// benchmark-specific; the header says so.
inline std::string render_report_table(const MetricsReport& r) {
  std::ostringstream oss;
  oss << std::fixed << std::setprecision(2);
  oss << "replay grounding metrics (" << r.n_replays << " replays; AR/AUC use the\n"
      << "ActivityNet-style convention: tIoU 0.5:0.05:0.95, AN 1..100)\n";
  oss << "  " << std::left << std::setw(16) << "tight avg-mAP" << std::right
      << std::setw(8) << r.tight_avg_map << "\n";
  oss << "  " << std::left << std::setw(16) << "loose avg-mAP" << std::right
      << std::setw(8) << r.loose_avg_map << "\n";
  oss << "  " << std::left << std::setw(16) << "AR@1" << std::right << std::setw(8)
      << r.ar_at_1 << "\n";
  oss << "  " << std::left << std::setw(16) << "AR@5" << std::right << std::setw(8)
      << r.ar_at_5 << "\n";
  oss << "  " << std::left << std::setw(16) << "AUC" << std::right << std::setw(8)
      << r.auc << "\n";
  oss << "  per-delta mAP:\n";
  for (const auto& [d, v] : r.per_delta_map)
    oss << "    " << std::left << std::setw(8) << (detail::delta_key(d) + " s")
        << std::right << std::setw(8) << v << "\n";
  return oss.str();
}

}  // namespace rgpipe
