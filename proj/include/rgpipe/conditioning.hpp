#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rgpipe/dataset.hpp"
#include "rgpipe/labeling.hpp"
#include "rgpipe/matrix.hpp"

namespace rgpipe {

enum class Mode { train, test };

inline Mode parse_mode(const std::string& s) {
  if (s == "train") return Mode::train;
  if (s == "test") return Mode::test;
  fail_config("mode must be \"train\" or \"test\", got \"", s, "\"");
}

struct WindowConfig {
  double window_len_s = 16.0;
  double stride_s = 8.0;
  int resize_len = 100;
  double train_context_s = 120.0;
  double test_context_s = 60.0;

  double context_s(Mode mode) const {
    return mode == Mode::train ? train_context_s : test_context_s;
  }

  void validate() const {
    if (!(stride_s > 0.0 && stride_s <= window_len_s))
      fail_config("need 0 < stride_s <= window_len_s");
    if (resize_len < 2) fail_config("resize_len must be >= 2");
    if (!(train_context_s > 0.0 && test_context_s > 0.0))
      fail_config("context lengths must be positive");
  }
};

// A conditioned, resized window. The leading half of the channels is the
// window content, the trailing half is the replay mean broadcast to every
// row (both in the z-normalized context space). replay_mean_raw keeps the
// pre-normalization replay mean for similarity scoring.
struct Sample {
  std::string replay_id;
  std::string game_id;
  int half = 1;
  double window_start_s = 0.0;  // global seconds
  double window_len_s = 0.0;
  Matrix features;  // resize_len x (2 * D_total)
  std::vector<FrameSpan> labels;
  bool is_synthetic = false;
  std::vector<double> replay_mean_raw;

  std::size_t content_dim() const { return features.cols() / 2; }
};

namespace detail {

inline std::int64_t frame_floor(double t, double fps) {
  return static_cast<std::int64_t>(std::floor(t * fps + 1e-9));
}

inline std::int64_t frame_ceil(double t, double fps) {
  return static_cast<std::int64_t>(std::ceil(t * fps - 1e-9));
}

}  // namespace detail

struct ContextSlice {
  Matrix frames;
  double start_s = 0.0;  // global seconds of the first sliced frame
};

// Frames covering [max(0, replay_start - C), replay_start) where C is the
// train or test context length.
inline ContextSlice extract_context(const FeatureTrack& track, const ReplayEvent& replay,
                                    Mode mode, const WindowConfig& cfg) {
  if (!track.game_id.empty() &&
      (track.game_id != replay.game_id || track.half != replay.half))
    fail_data("replay ", replay.replay_id, " does not belong to track ", track.game_id,
              " half ", track.half);
  if (replay.replay_start_s <= 0.0)
    fail_data("replay ", replay.replay_id, " has no context before start ",
              replay.replay_start_s);
  const double lo = std::max(0.0, replay.replay_start_s - cfg.context_s(mode));
  const std::int64_t first =
      std::clamp<std::int64_t>(detail::frame_floor(lo, track.fps), 0,
                               static_cast<std::int64_t>(track.n_frames()));
  const std::int64_t end =
      std::clamp<std::int64_t>(detail::frame_ceil(replay.replay_start_s, track.fps), 0,
                               static_cast<std::int64_t>(track.n_frames()));
  if (end <= first)
    fail_data("replay ", replay.replay_id, " context is empty");
  ContextSlice slice;
  slice.frames = track.frames.slice_rows(static_cast<std::size_t>(first),
                                         static_cast<std::size_t>(end - first));
  slice.start_s = static_cast<double>(first) / track.fps;
  return slice;
}

// Window start offsets: multiples of the stride while a full window fits,
// plus a final flush window when the strided grid leaves a tail uncovered.
// A track shorter than one window yields the single window [0, total].
inline std::vector<double> enumerate_windows(double total_len_s, const WindowConfig& cfg) {
  if (!(total_len_s > 0.0)) fail_data("enumerate_windows: total length must be positive");
  if (total_len_s <= cfg.window_len_s + 1e-9) return {0.0};
  std::vector<double> starts;
  for (double s = 0.0; s + cfg.window_len_s <= total_len_s + 1e-9; s += cfg.stride_s)
    starts.push_back(s);
  if (starts.back() < total_len_s - cfg.window_len_s - 1e-9)
    starts.push_back(total_len_s - cfg.window_len_s);
  return starts;
}

// Mean over the time axis of the replay's frames.
inline std::vector<double> pool_replay_mean(const Matrix& replay_frames) {
  if (replay_frames.rows() == 0) fail_data("pool_replay_mean: empty replay span");
  return mean_rows(replay_frames);
}

// Per-frame channel-wise concatenation: row t becomes [window row t, mean].
inline Matrix condition_window(const Matrix& window_frames,
                               std::span<const double> replay_mean) {
  if (window_frames.cols() != replay_mean.size())
    fail_data("condition_window: channel count ", window_frames.cols(),
              " != replay mean size ", replay_mean.size());
  Matrix out(window_frames.rows(), 2 * window_frames.cols());
  for (std::size_t r = 0; r < window_frames.rows(); ++r) {
    for (std::size_t c = 0; c < window_frames.cols(); ++c) {
      out(r, c) = window_frames(r, c);
      out(r, window_frames.cols() + c) = replay_mean[c];
    }
  }
  return out;
}

// Endpoint-aligned piecewise-linear resize along time. Output row i samples
// the input at i*(T-1)/(n-1); first and last rows are copied exactly. A
// single input row is replicated.
inline Matrix resize_temporal(const Matrix& frames, int n) {
  if (frames.rows() < 1) fail_data("resize_temporal: empty input");
  if (n < 2) fail_data("resize_temporal: n must be >= 2");
  const std::size_t t = frames.rows();
  Matrix out(static_cast<std::size_t>(n), frames.cols());
  if (t == 1) {
    for (int i = 0; i < n; ++i)
      for (std::size_t c = 0; c < frames.cols(); ++c) out(i, c) = frames(0, c);
    return out;
  }
  for (int i = 0; i < n; ++i) {
    // Integer numerator keeps the endpoint positions exact.
    const double pos = static_cast<double>(static_cast<std::size_t>(i) * (t - 1)) /
                       static_cast<double>(n - 1);
    const std::size_t k = std::min(static_cast<std::size_t>(pos), t - 2);
    const double frac = pos - static_cast<double>(k);
    for (std::size_t c = 0; c < frames.cols(); ++c) {
      if (frac == 0.0)
        out(i, c) = frames(k, c);
      else if (frac == 1.0)
        out(i, c) = frames(k + 1, c);
      else
        out(i, c) = frames(k, c) + frac * (frames(k + 1, c) - frames(k, c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Channel normalization
// ---------------------------------------------------------------------------

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> scale;  // population std, or 1 for zero-variance channels

  double transform(double v, std::size_t c) const { return (v - mean[c]) / scale[c]; }

  std::vector<double> transform(std::span<const double> v) const {
    std::vector<double> out(v.size());
    for (std::size_t c = 0; c < v.size(); ++c) out[c] = transform(v[c], c);
    return out;
  }
};

inline ChannelStats channel_stats(const Matrix& m) {
  if (m.rows() == 0) fail_data("channel_stats: empty matrix");
  ChannelStats st;
  st.mean.resize(m.cols());
  st.scale.resize(m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double lo = m(0, c), hi = m(0, c), sum = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      lo = std::min(lo, m(r, c));
      hi = std::max(hi, m(r, c));
      sum += m(r, c);
    }
    if (lo == hi) {
      // Constant channel: subtract the value itself so the result is exactly 0.
      st.mean[c] = lo;
      st.scale[c] = 1.0;
      continue;
    }
    const double mean = sum / static_cast<double>(m.rows());
    double var = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double d = m(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(m.rows());
    st.mean[c] = mean;
    st.scale[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return st;
}

inline Matrix apply_channel_stats(const Matrix& m, const ChannelStats& st) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = st.transform(m(r, c), c);
  return out;
}

// Z-normalize each stream per channel over its frames, then concatenate
// along channels in the listed order.
inline Matrix fuse_streams(const std::vector<Matrix>& per_stream) {
  if (per_stream.empty()) fail_data("fuse_streams: no streams");
  const std::size_t rows = per_stream.front().rows();
  std::vector<Matrix> normed;
  normed.reserve(per_stream.size());
  for (const Matrix& s : per_stream) {
    if (s.rows() != rows) fail_data("fuse_streams: stream frame counts differ");
    normed.push_back(apply_channel_stats(s, channel_stats(s)));
  }
  return concat_channels(normed);
}

// ---------------------------------------------------------------------------
// Sample assembly
// ---------------------------------------------------------------------------

namespace detail {

inline Matrix slice_seconds(const Matrix& frames, double fps, double lo_s, double hi_s) {
  const auto first = std::clamp<std::int64_t>(frame_floor(lo_s, fps), 0,
                                              static_cast<std::int64_t>(frames.rows()));
  const auto end = std::clamp<std::int64_t>(frame_ceil(hi_s, fps), 0,
                                            static_cast<std::int64_t>(frames.rows()));
  if (end <= first) fail_data("empty frame slice [", lo_s, ", ", hi_s, ") s");
  return frames.slice_rows(static_cast<std::size_t>(first),
                           static_cast<std::size_t>(end - first));
}

}  // namespace detail

// For each replay: cut the context, z-normalize it, enumerate windows,
// condition every window with the replay mean, resize, and attach frame
// labels. Train mode keeps only windows that overlap the segment label.
// Output sorted by (replay_id, window_start_s).
inline std::vector<Sample> build_samples(const Manifest& manifest, const WindowConfig& cfg,
                                         Mode mode) {
  cfg.validate();
  std::vector<Sample> samples;

  for (const auto& game : manifest.games) {
    for (const auto& half : game.halves) {
      if (half.replays.empty()) continue;
      const std::vector<FeatureTrack> tracks = load_half_tracks(manifest, game, half);
      const double fps = tracks.front().fps;

      for (const auto& replay : half.replays) {
        if (mode == Mode::train && !replay.gt_time_s)
          fail_data("replay ", replay.replay_id, " lacks gt_time_s required in train mode");

        std::vector<Matrix> ctx_parts;
        double slice_start = 0.0;
        for (const auto& track : tracks) {
          ContextSlice s = extract_context(track, replay, mode, cfg);
          slice_start = s.start_s;
          ctx_parts.push_back(std::move(s.frames));
        }
        const Matrix raw_ctx = concat_channels(ctx_parts);
        const ChannelStats stats = channel_stats(raw_ctx);
        const Matrix fused_ctx = apply_channel_stats(raw_ctx, stats);

        std::vector<Matrix> replay_parts;
        for (const auto& track : tracks)
          replay_parts.push_back(detail::slice_seconds(track.frames, fps,
                                                       replay.replay_start_s,
                                                       replay.replay_end_s));
        const std::vector<double> raw_mean = pool_replay_mean(concat_channels(replay_parts));
        const std::vector<double> cond_mean = stats.transform(raw_mean);

        const double total = static_cast<double>(fused_ctx.rows()) / fps;
        for (double ws : enumerate_windows(total, cfg)) {
          const double wlen = std::min(cfg.window_len_s, total);
          const double global_ws = slice_start + ws;

          std::vector<FrameSpan> labels;
          if (replay.gt_time_s) {
            const Segment seg = make_segment_label(*replay.gt_time_s, half.duration_s,
                                                   replay.label);
            if (overlap_len(seg.start_s, seg.end_s, global_ws, global_ws + wlen) > 0.0)
              labels.push_back(to_frame_span(seg, global_ws, wlen, cfg.resize_len));
          }
          if (mode == Mode::train && labels.empty()) continue;

          const Matrix window = detail::slice_seconds(fused_ctx, fps, ws, ws + wlen);
          Sample sample;
          sample.replay_id = replay.replay_id;
          sample.game_id = game.id;
          sample.half = half.half;
          sample.window_start_s = global_ws;
          sample.window_len_s = wlen;
          sample.features =
              resize_temporal(condition_window(window, cond_mean), cfg.resize_len);
          sample.labels = std::move(labels);
          sample.replay_mean_raw = raw_mean;
          samples.push_back(std::move(sample));
        }
      }
    }
  }

  std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
    if (a.replay_id != b.replay_id) return a.replay_id < b.replay_id;
    return a.window_start_s < b.window_start_s;
  });
  return samples;
}

}  // namespace rgpipe
