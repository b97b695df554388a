#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "rgpipe/augmentation.hpp"
#include "rgpipe/detection.hpp"
#include "rgpipe/postprocess.hpp"
#include "rgpipe/synthetic.hpp"

namespace rgpipe {

// ---------------------------------------------------------------------------
// Prepared-sample persistence: one RGF1 file per sample plus a JSON Lines
// index. The RGF1 rate field stores resized frames per second of window.
// ---------------------------------------------------------------------------

inline constexpr const char* kSampleIndexName = "samples_index.jsonl";

inline void save_samples(const std::vector<Sample>& samples,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / kSampleIndexName, std::ios::trunc);
  if (!index) fail_data("cannot open ", (dir / kSampleIndexName).string(), " for writing");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const std::string file = "sample_" + synth_detail::zero_pad(static_cast<int>(i), 6) +
                             ".rgf1";
    FeatureTrack track;
    track.game_id = s.game_id;
    track.half = s.half;
    track.fps = static_cast<double>(s.features.rows()) / s.window_len_s;
    track.frames = s.features;
    write_feature_track(track, dir / file);

    ordered_json j;
    j["replay_id"] = s.replay_id;
    j["window_start_s"] = s.window_start_s;
    j["window_len_s"] = s.window_len_s;
    auto labels = ordered_json::array();
    for (const auto& span : s.labels)
      labels.push_back(ordered_json::array({span.start_f, span.end_f}));
    j["labels"] = std::move(labels);
    j["is_synthetic"] = s.is_synthetic;
    j["game_id"] = s.game_id;
    j["half"] = s.half;
    j["feature_file"] = file;
    j["replay_mean"] = s.replay_mean_raw;
    index << j.dump() << "\n";
  }
  if (!index) fail_data("write failed: ", (dir / kSampleIndexName).string());
}

inline std::vector<Sample> load_samples(const std::filesystem::path& dir) {
  const auto index_path = dir / kSampleIndexName;
  std::ifstream index(index_path);
  if (!index) fail_data("cannot open ", index_path.string());
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail_data(index_path.string(), ":", line_no, ": invalid JSON: ", e.what());
    }
    const std::string ctx = index_path.string() + ":" + std::to_string(line_no);
    Sample s;
    s.replay_id = detail::require_field<std::string>(j, "replay_id", ctx);
    s.window_start_s = detail::require_field<double>(j, "window_start_s", ctx);
    s.window_len_s = detail::require_field<double>(j, "window_len_s", ctx);
    s.is_synthetic = detail::require_field<bool>(j, "is_synthetic", ctx);
    s.game_id = detail::require_field<std::string>(j, "game_id", ctx);
    s.half = detail::require_field<int>(j, "half", ctx);
    s.replay_mean_raw = detail::require_field<std::vector<double>>(j, "replay_mean", ctx);
    for (const auto& span : detail::require_field<ordered_json>(j, "labels", ctx)) {
      if (!span.is_array() || span.size() != 2)
        fail_data(ctx, ": label spans must be [start_f, end_f] pairs");
      s.labels.push_back({span.at(0).get<double>(), span.at(1).get<double>(), "action"});
    }
    const auto file = detail::require_field<std::string>(j, "feature_file", ctx);
    s.features = read_feature_track(dir / file).frames;
    if (s.features.cols() != 2 * s.replay_mean_raw.size())
      fail_data(ctx, ": feature channels ", s.features.cols(),
                " do not match replay mean size ", s.replay_mean_raw.size());
    samples.push_back(std::move(s));
  }
  return samples;
}

// ---------------------------------------------------------------------------
// Detection: scorer -> anchors -> refinement -> global merge -> Soft-NMS ->
// top-M spots
// ---------------------------------------------------------------------------

enum class Scorer { similarity, actionness };

inline Scorer parse_scorer(const std::string& s) {
  if (s == "similarity") return Scorer::similarity;
  if (s == "actionness") return Scorer::actionness;
  fail_config("scorer must be similarity|actionness, got \"", s, "\"");
}

struct DetectConfig {
  Scorer scorer = Scorer::similarity;
  AnchorConfig anchors;
  PostConfig post;
  int refine_radius_f = 4;
};

// Window-local proposals for one sample, already refined.
inline std::vector<Proposal> propose_for_sample(const Sample& sample,
                                                const DetectConfig& cfg,
                                                const ActionnessModel* model) {
  const int n = static_cast<int>(sample.features.rows());
  const WindowRef ref = window_ref(sample);
  std::vector<double> scores;
  std::vector<Proposal> props;
  if (cfg.scorer == Scorer::similarity) {
    scores = per_frame_similarity(sample);
    props = generate_proposals(
        [&sample](int lo, int hi) {
          return similarity_score(sample, {static_cast<double>(lo),
                                           static_cast<double>(hi), ""});
        },
        n, cfg.anchors, ref);
  } else {
    if (!model) fail_config("actionness scorer requires a trained model");
    scores = actionness_forward(*model, sample);
    props = generate_proposals(scores, cfg.anchors, ref);
  }
  for (auto& p : props) p = refine_boundaries(p, scores, cfg.refine_radius_f);
  return props;
}

inline std::vector<SpotPrediction> run_detection(const std::vector<Sample>& samples,
                                                 const DetectConfig& cfg,
                                                 const ActionnessModel* model = nullptr) {
  cfg.post.validate();
  // Group windows per replay; std::map keeps replay order deterministic.
  std::map<std::string, std::vector<const Sample*>> by_replay;
  for (const auto& s : samples) by_replay[s.replay_id].push_back(&s);

  std::vector<SpotPrediction> all_spots;
  for (const auto& [replay_id, group] : by_replay) {
    std::vector<GlobalProposal> pooled;
    for (const Sample* sample : group)
      for (const Proposal& p : propose_for_sample(*sample, cfg, model))
        pooled.push_back(to_global(p));
    const std::vector<GlobalProposal> kept = soft_nms(std::move(pooled), cfg.post);
    for (const auto& spot : to_spots(kept, cfg.post)) all_spots.push_back(spot);
  }
  return all_spots;
}

}  // namespace rgpipe
