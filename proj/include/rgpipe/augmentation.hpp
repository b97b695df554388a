#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rgpipe/conditioning.hpp"
#include "rgpipe/rng.hpp"

namespace rgpipe {

struct AugmentConfig {
  double ratio = 1.0;  // synthetic samples per real sample
  std::uint64_t seed = 0;

  void validate() const {
    if (ratio < 0.0) fail_config("augment ratio must be >= 0");
  }
};

struct HarvestedSegment {
  std::string replay_id;
  Matrix frames;  // round(3*fps) raw concatenated-stream rows at native fps
};

// Raw track rows covering each replay's 3 s segment label, streams
// concatenated in manifest order. Normalization happens later, against the
// window the segment is pasted into.
inline std::vector<HarvestedSegment> harvest_segment_features(const Manifest& manifest,
                                                              const WindowConfig& cfg) {
  cfg.validate();
  std::vector<HarvestedSegment> out;
  for (const auto& game : manifest.games) {
    for (const auto& half : game.halves) {
      if (half.replays.empty()) continue;
      const std::vector<FeatureTrack> tracks = load_half_tracks(manifest, game, half);
      const double fps = tracks.front().fps;
      std::vector<Matrix> parts;
      for (const auto& t : tracks) parts.push_back(t.frames);
      const Matrix joined = concat_channels(parts);
      const auto seg_len = static_cast<std::size_t>(std::llround(kSegmentLabelLen * fps));
      for (const auto& replay : half.replays) {
        if (!replay.gt_time_s)
          fail_data("replay ", replay.replay_id, " lacks gt_time_s; cannot harvest");
        const auto first = static_cast<std::size_t>(
            std::floor(*replay.gt_time_s * fps + 1e-9));
        if (first + seg_len > joined.rows())
          fail_data("segment label of ", replay.replay_id, " extends past the track");
        out.push_back({replay.replay_id, joined.slice_rows(first, seg_len)});
      }
    }
  }
  return out;
}

struct BackgroundWindow {
  std::string replay_id;  // the replay whose context the window came from
  std::string game_id;
  int half = 1;
  double window_start_s = 0.0;  // global seconds
  double window_len_s = 0.0;
  double fps = 4.0;
  Matrix frames;  // raw concatenated-stream rows, native fps
};

// All (replay context, window) pairs whose window overlaps no segment label
// of its half. Built once, sampled uniformly.
class BackgroundIndex {
public:
  static BackgroundIndex build(const Manifest& manifest, const WindowConfig& cfg) {
    cfg.validate();
    BackgroundIndex index;
    for (const auto& game : manifest.games) {
      for (const auto& half : game.halves) {
        if (half.replays.empty()) continue;
        const std::vector<FeatureTrack> tracks = load_half_tracks(manifest, game, half);
        const double fps = tracks.front().fps;
        std::vector<Matrix> parts;
        for (const auto& t : tracks) parts.push_back(t.frames);
        const Matrix joined = concat_channels(parts);

        std::vector<Segment> labels;
        for (const auto& replay : half.replays)
          if (replay.gt_time_s)
            labels.push_back(make_segment_label(*replay.gt_time_s, half.duration_s));

        for (const auto& replay : half.replays) {
          if (replay.replay_start_s <= 0.0) continue;
          const double lo = std::max(0.0, replay.replay_start_s - cfg.train_context_s);
          const auto first = detail::frame_floor(lo, fps);
          const auto end = detail::frame_ceil(replay.replay_start_s, fps);
          if (end <= first) continue;
          const double slice_start = static_cast<double>(first) / fps;
          const double total = static_cast<double>(end - first) / fps;
          for (double ws : enumerate_windows(total, cfg)) {
            const double wlen = std::min(cfg.window_len_s, total);
            const double gws = slice_start + ws;
            bool clear = true;
            for (const auto& seg : labels) {
              if (overlap_len(seg.start_s, seg.end_s, gws, gws + wlen) > 0.0) {
                clear = false;
                break;
              }
            }
            if (!clear) continue;
            BackgroundWindow bw;
            bw.replay_id = replay.replay_id;
            bw.game_id = game.id;
            bw.half = half.half;
            bw.window_start_s = gws;
            bw.window_len_s = wlen;
            bw.fps = fps;
            bw.frames = detail::slice_seconds(joined, fps, gws, gws + wlen);
            index.windows_.push_back(std::move(bw));
          }
        }
      }
    }
    return index;
  }

  bool empty() const { return windows_.empty(); }
  std::size_t size() const { return windows_.size(); }

  const BackgroundWindow& sample(Rng& rng) const {
    if (windows_.empty()) fail_data("no label-free background window exists");
    return windows_[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(windows_.size()) - 1))];
  }

private:
  std::vector<BackgroundWindow> windows_;
};

inline BackgroundWindow sample_background(const Manifest& manifest, const WindowConfig& cfg,
                                          Rng& rng) {
  return BackgroundIndex::build(manifest, cfg).sample(rng);
}

// Paste the segment over the background at a uniform offset. Rows outside
// [u, u+L) are untouched; the returned span is in native frame coordinates.
inline std::pair<Matrix, FrameSpan> synthesize_positive(const Matrix& background,
                                                        const Matrix& segment, Rng& rng) {
  if (segment.cols() != background.cols())
    fail_data("synthesize_positive: channel mismatch ", segment.cols(), " vs ",
              background.cols());
  if (segment.rows() > background.rows())
    fail_data("synthesize_positive: segment (", segment.rows(),
              " frames) longer than background (", background.rows(), ")");
  const auto max_offset =
      static_cast<std::int64_t>(background.rows() - segment.rows());
  const auto u = static_cast<std::size_t>(rng.uniform_int(0, max_offset));
  Matrix out = background;
  for (std::size_t i = 0; i < segment.rows(); ++i)
    for (std::size_t c = 0; c < segment.cols(); ++c) out(u + i, c) = segment(i, c);
  FrameSpan span{static_cast<double>(u), static_cast<double>(u + segment.rows()),
                 "synthetic"};
  return {std::move(out), span};
}

// Appends floor(ratio * n_real) synthetic positives. Synthetic sample k
// draws from substream (seed, k): a background window, a donor replay whose
// segment is pasted and whose replay mean conditions the result.
inline std::vector<Sample> augment_dataset(std::vector<Sample> samples,
                                           const Manifest& manifest,
                                           const WindowConfig& wcfg,
                                           const AugmentConfig& acfg) {
  acfg.validate();
  std::size_t n_real = 0;
  for (const auto& s : samples)
    if (!s.is_synthetic) ++n_real;
  const auto n_synth =
      static_cast<std::size_t>(std::floor(acfg.ratio * static_cast<double>(n_real)));
  if (n_synth == 0) return samples;

  // Donor records: pasted segment, conditioning mean, provenance.
  struct Donor {
    std::string replay_id;
    std::string game_id;
    int half;
    std::string label;
    Matrix segment;
    std::vector<double> raw_mean;
  };
  std::vector<Donor> donors;
  for (const auto& game : manifest.games) {
    for (const auto& half : game.halves) {
      if (half.replays.empty()) continue;
      const std::vector<FeatureTrack> tracks = load_half_tracks(manifest, game, half);
      const double fps = tracks.front().fps;
      std::vector<Matrix> parts;
      for (const auto& t : tracks) parts.push_back(t.frames);
      const Matrix joined = concat_channels(parts);
      const auto seg_len = static_cast<std::size_t>(std::llround(kSegmentLabelLen * fps));
      for (const auto& replay : half.replays) {
        if (!replay.gt_time_s)
          fail_data("replay ", replay.replay_id, " lacks gt_time_s; augmentation needs labels");
        const auto first =
            static_cast<std::size_t>(std::floor(*replay.gt_time_s * fps + 1e-9));
        if (first + seg_len > joined.rows())
          fail_data("segment label of ", replay.replay_id, " extends past the track");
        const Matrix replay_frames = detail::slice_seconds(
            joined, fps, replay.replay_start_s, replay.replay_end_s);
        donors.push_back({replay.replay_id, game.id, half.half, replay.label,
                          joined.slice_rows(first, seg_len),
                          pool_replay_mean(replay_frames)});
      }
    }
  }
  if (donors.empty()) fail_data("augment_dataset: no donor replays");

  const BackgroundIndex backgrounds = BackgroundIndex::build(manifest, wcfg);

  for (std::size_t k = 0; k < n_synth; ++k) {
    Rng rng = Rng::substream(acfg.seed, k);
    const BackgroundWindow& bg = backgrounds.sample(rng);
    const Donor& donor = donors[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(donors.size()) - 1))];
    auto [frames, native_span] = synthesize_positive(bg.frames, donor.segment, rng);

    const ChannelStats stats = channel_stats(frames);
    const Matrix normed = apply_channel_stats(frames, stats);
    const std::vector<double> cond_mean = stats.transform(donor.raw_mean);
    Matrix features =
        resize_temporal(condition_window(normed, cond_mean), wcfg.resize_len);

    const Segment seg{bg.window_start_s + native_span.start_f / bg.fps,
                      bg.window_start_s + native_span.end_f / bg.fps, donor.label};
    Sample sample;
    sample.replay_id = donor.replay_id;
    sample.game_id = donor.game_id;
    sample.half = donor.half;
    sample.window_start_s = bg.window_start_s;
    sample.window_len_s = bg.window_len_s;
    sample.features = std::move(features);
    sample.labels = {to_frame_span(seg, bg.window_start_s, bg.window_len_s, wcfg.resize_len)};
    sample.is_synthetic = true;
    sample.replay_mean_raw = donor.raw_mean;
    samples.push_back(std::move(sample));
  }
  return samples;
}

}  // namespace rgpipe
