#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgpipe/detection.hpp"

namespace rgpipe {

struct GlobalProposal {
  std::string replay_id;
  std::string game_id;
  int half = 1;
  double start_s = 0.0;
  double end_s = 0.0;
  double score = 0.0;
};

enum class NmsMethod { gaussian, linear, hard };

inline NmsMethod parse_nms_method(const std::string& s) {
  if (s == "gaussian") return NmsMethod::gaussian;
  if (s == "linear") return NmsMethod::linear;
  if (s == "hard") return NmsMethod::hard;
  fail_config("nms method must be gaussian|linear|hard, got \"", s, "\"");
}

inline const char* to_string(NmsMethod m) {
  switch (m) {
    case NmsMethod::gaussian: return "gaussian";
    case NmsMethod::linear: return "linear";
    default: return "hard";
  }
}

struct PostConfig {
  NmsMethod nms_method = NmsMethod::gaussian;
  double sigma = 0.5;
  double iou_threshold = 0.5;
  double score_floor = 1e-3;
  int top_m = 10;

  void validate() const {
    if (!(sigma > 0.0)) fail_config("sigma must be positive");
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
      fail_config("iou_threshold must be in (0, 1)");
    if (top_m < 1) fail_config("top_m must be >= 1");
  }
};

// Window-local frame coordinates to global seconds.
inline GlobalProposal to_global(const Proposal& p) {
  const double scale = p.origin.window_len_s / static_cast<double>(p.origin.n_frames);
  return {p.origin.replay_id,
          p.origin.game_id,
          p.origin.half,
          p.origin.window_start_s + p.start_f * scale,
          p.origin.window_start_s + p.end_f * scale,
          p.score};
}

inline double temporal_iou(double a_start, double a_end, double b_start, double b_end) {
  const double inter = std::max(0.0, std::min(a_end, b_end) - std::max(a_start, b_start));
  if (inter <= 0.0) return 0.0;
  const double uni = (a_end - a_start) + (b_end - b_start) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline double temporal_iou(const GlobalProposal& a, const GlobalProposal& b) {
  return temporal_iou(a.start_s, a.end_s, b.start_s, b.end_s);
}

// Soft-NMS over one replay's pooled proposals. Repeatedly selects the
// highest-scoring proposal (ties by start_s, then end_s) and decays the rest
// by their overlap with it:
//   gaussian: s *= exp(-iou^2 / sigma)
//   linear:   s *= (1 - iou) when iou > threshold
//   hard:     s *= 0 when iou > threshold
// Proposals falling below score_floor are dropped. Output in selection order.
inline std::vector<GlobalProposal> soft_nms(std::vector<GlobalProposal> props,
                                            const PostConfig& cfg) {
  cfg.validate();
  for (const auto& p : props) {
    if (p.replay_id != props.front().replay_id)
      fail_data("soft_nms: proposals mix replay ids ", props.front().replay_id, " and ",
                p.replay_id);
  }
  std::vector<GlobalProposal> out;
  out.reserve(props.size());
  while (!props.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < props.size(); ++i) {
      const auto& a = props[i];
      const auto& b = props[best];
      if (a.score > b.score ||
          (a.score == b.score &&
           (a.start_s < b.start_s || (a.start_s == b.start_s && a.end_s < b.end_s))))
        best = i;
    }
    if (props[best].score < cfg.score_floor) break;
    GlobalProposal selected = props[best];
    props.erase(props.begin() + static_cast<std::ptrdiff_t>(best));
    std::vector<GlobalProposal> kept;
    kept.reserve(props.size());
    for (auto& p : props) {
      const double iou = temporal_iou(selected, p);
      switch (cfg.nms_method) {
        case NmsMethod::gaussian:
          p.score *= std::exp(-(iou * iou) / cfg.sigma);
          break;
        case NmsMethod::linear:
          if (iou > cfg.iou_threshold) p.score *= 1.0 - iou;
          break;
        case NmsMethod::hard:
          if (iou > cfg.iou_threshold) p.score = 0.0;
          break;
      }
      if (p.score >= cfg.score_floor) kept.push_back(std::move(p));
    }
    props = std::move(kept);
    out.push_back(std::move(selected));
  }
  return out;
}

// A collapsed grounding answer: rank 1 carries the predicted timestamp.
struct SpotPrediction {
  std::string replay_id;
  std::string game_id;
  int half = 1;
  int rank = 1;
  double time_s = 0.0;
  double end_s = 0.0;
  double confidence = 0.0;
};

// Keep the top_m proposals (input is already in NMS selection order) and
// read each segment start as the spot timestamp.
inline std::vector<SpotPrediction> to_spots(const std::vector<GlobalProposal>& props,
                                            const PostConfig& cfg) {
  std::vector<SpotPrediction> spots;
  const std::size_t m = std::min<std::size_t>(props.size(),
                                              static_cast<std::size_t>(cfg.top_m));
  spots.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& p = props[i];
    spots.push_back({p.replay_id, p.game_id, p.half, static_cast<int>(i) + 1, p.start_s,
                     p.end_s, p.score});
  }
  return spots;
}

// ---------------------------------------------------------------------------
// Predictions file: JSON Lines, one record per kept proposal.
// ---------------------------------------------------------------------------

inline void write_predictions(const std::vector<SpotPrediction>& spots,
                              const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail_data("cannot open ", path.string(), " for writing");
  for (const auto& s : spots) {
    ordered_json j;
    j["replay_id"] = s.replay_id;
    j["game_id"] = s.game_id;
    j["half"] = s.half;
    j["rank"] = s.rank;
    j["time_s"] = s.time_s;
    j["end_s"] = s.end_s;
    j["confidence"] = s.confidence;
    out << j.dump() << "\n";
  }
  if (!out) fail_data("write failed: ", path.string());
}

inline std::vector<SpotPrediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_data("cannot open ", path.string());
  std::vector<SpotPrediction> spots;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail_data(path.string(), ":", line_no, ": invalid JSON: ", e.what());
    }
    const std::string ctx = path.string() + ":" + std::to_string(line_no);
    SpotPrediction s;
    s.replay_id = detail::require_field<std::string>(j, "replay_id", ctx);
    s.game_id = detail::require_field<std::string>(j, "game_id", ctx);
    s.half = detail::require_field<int>(j, "half", ctx);
    s.rank = detail::require_field<int>(j, "rank", ctx);
    s.time_s = detail::require_field<double>(j, "time_s", ctx);
    s.end_s = detail::require_field<double>(j, "end_s", ctx);
    s.confidence = detail::require_field<double>(j, "confidence", ctx);
    if (s.rank < 1) fail_data(ctx, ": rank must be >= 1");
    if (!(s.time_s < s.end_s)) fail_data(ctx, ": need time_s < end_s");
    spots.push_back(std::move(s));
  }
  return spots;
}

}  // namespace rgpipe
