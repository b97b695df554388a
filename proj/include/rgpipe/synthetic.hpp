#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "rgpipe/dataset.hpp"
#include "rgpipe/rng.hpp"

namespace rgpipe {

struct SynthConfig {
  int n_games = 2;
  int actions_per_half = 3;
  int distractors_per_half = 0;
  int dim = 16;
  double duration_s = 600.0;
  double noise_sigma = 0.0;
  double signature_len_s = 3.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_games < 1) fail_config("n_games must be >= 1");
    if (actions_per_half < 0 || distractors_per_half < 0)
      fail_config("event counts must be >= 0");
    if (dim < 1) fail_config("dim must be >= 1");
    if (!(duration_s > 0.0)) fail_config("duration_s must be positive");
    if (noise_sigma < 0.0) fail_config("noise_sigma must be >= 0");
    if (!(signature_len_s > 0.0)) fail_config("signature_len_s must be positive");
  }
};

namespace synth_detail {

inline constexpr double kFps = 4.0;
// Block rows replace the background outright, and cosine scoring is scale
// free on the pure interior, so the signature sits below the unit noise
// floor: rows that interpolation mixes with background then look like noise
// instead of smearing the block edge outward.
inline constexpr double kSignatureAmplitude = 0.5;
inline constexpr double kPatternWiggle = 0.1;
// Replays sit clear of the half start so both the 120 s and the 60 s context
// lengths are available unclipped for every event.
inline constexpr double kMinReplayStartS = 121.0;
// The action -> replay gap is drawn in 4 s steps from [12, 48]. Multiples of
// 4 s keep the segment label on the resized-frame grid of the default
// 16 s / 8 s / 100-frame windowing, and the 48 s cap keeps the action inside
// the 60 s test context.
inline constexpr double kMinGapS = 12.0;
inline constexpr int kGapSteps = 10;
inline constexpr double kGapStepS = 4.0;
inline constexpr double kPlacementPadS = 2.0;
inline constexpr int kMaxPlacementTries = 1000;
inline constexpr int kPatternControlPoints = 5;

inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline std::string zero_pad(int v, int width) {
  std::ostringstream oss;
  oss << std::setw(width) << std::setfill('0') << v;
  return oss.str();
}

// Piecewise-linear pattern through seeded control rows: a constant carrier
// direction plus a smaller per-point wiggle. The carrier keeps every frame of
// the block aligned with the block mean, the wiggle keeps patterns distinct.
inline Matrix smooth_pattern(Rng& rng, std::size_t len, std::size_t dim) {
  std::vector<double> carrier(dim);
  for (std::size_t c = 0; c < dim; ++c) carrier[c] = kSignatureAmplitude * rng.gaussian();
  Matrix control(kPatternControlPoints, dim);
  for (std::size_t r = 0; r < control.rows(); ++r)
    for (std::size_t c = 0; c < dim; ++c)
      control(r, c) = carrier[c] + kPatternWiggle * rng.gaussian();
  Matrix out(len, dim);
  for (std::size_t i = 0; i < len; ++i) {
    const double pos = len > 1
        ? static_cast<double>(i) * (kPatternControlPoints - 1) / static_cast<double>(len - 1)
        : 0.0;
    const std::size_t k = std::min(static_cast<std::size_t>(pos), control.rows() - 2);
    const double frac = pos - static_cast<double>(k);
    for (std::size_t c = 0; c < dim; ++c)
      out(i, c) = (1.0 - frac) * control(k, c) + frac * control(k + 1, c);
  }
  return out;
}

struct Placed {
  double lo;
  double hi;
};

inline bool clear_of(const std::vector<Placed>& occupied, double lo, double hi) {
  for (const auto& p : occupied)
    if (lo < p.hi + kPlacementPadS && p.lo < hi + kPlacementPadS) return false;
  return true;
}

}  // namespace synth_detail

// Writes a synthetic dataset under out_dir and returns its manifest. Each
// action is a distinctive signature block embedded in unit-variance noise;
// its replay span holds a copy of the block with additive noise of
// noise_sigma. Distractor signatures get no replay. Deterministic per seed:
// each (game, half) draws from its own substream.
inline Manifest generate_synthetic(const SynthConfig& cfg,
                                   const std::filesystem::path& out_dir) {
  using namespace synth_detail;
  cfg.validate();

  const double fps = kFps;
  const std::size_t total_frames = static_cast<std::size_t>(std::llround(cfg.duration_s * fps));
  const std::size_t sig_frames = static_cast<std::size_t>(std::llround(cfg.signature_len_s * fps));
  if (sig_frames < 1 || sig_frames > total_frames)
    fail_config("signature_len_s does not fit the half duration");
  const std::vector<std::string> stream_names{"stream_a", "stream_b"};

  std::filesystem::create_directories(out_dir);

  Manifest manifest;
  manifest.base_dir = out_dir;

  for (int g = 0; g < cfg.n_games; ++g) {
    GameEntry game;
    game.id = "game_" + zero_pad(g, 3);
    const std::uint64_t game_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(g));

    for (int half_no = 1; half_no <= 2; ++half_no) {
      Rng rng = Rng::substream(game_seed, static_cast<std::uint64_t>(half_no));
      HalfEntry half;
      half.half = half_no;
      half.duration_s = static_cast<double>(total_frames) / fps;

      // Event placement. Actions carry a replay span; distractors do not.
      struct Event {
        double time_s;
        std::size_t frame;
        bool has_replay;
        double replay_start_s = 0.0;
        std::size_t replay_frame = 0;
      };
      std::vector<Event> events;
      std::vector<Placed> occupied;

      const auto min_rs_frame = static_cast<std::int64_t>(std::llround(kMinReplayStartS * fps));
      const auto max_rs_frame =
          static_cast<std::int64_t>(total_frames) - static_cast<std::int64_t>(sig_frames);
      for (int a = 0; a < cfg.actions_per_half; ++a) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxPlacementTries && !placed; ++attempt) {
          if (min_rs_frame > max_rs_frame) break;
          const double gap_s =
              kMinGapS + kGapStepS * static_cast<double>(rng.uniform_int(0, kGapSteps - 1));
          const std::int64_t rs_frame = rng.uniform_int(min_rs_frame, max_rs_frame);
          const double rs = static_cast<double>(rs_frame) / fps;
          const double gt = rs - gap_s;
          const std::int64_t gt_frame = rs_frame - static_cast<std::int64_t>(std::llround(gap_s * fps));
          if (gt_frame < 0) continue;
          if (!clear_of(occupied, gt, gt + cfg.signature_len_s)) continue;
          if (!clear_of(occupied, rs, rs + cfg.signature_len_s)) continue;
          occupied.push_back({gt, gt + cfg.signature_len_s});
          occupied.push_back({rs, rs + cfg.signature_len_s});
          events.push_back({gt, static_cast<std::size_t>(gt_frame), true, rs,
                            static_cast<std::size_t>(rs_frame)});
          placed = true;
        }
        if (!placed)
          fail_data("placement infeasible: ", cfg.actions_per_half, " actions + ",
                    cfg.distractors_per_half, " distractors do not fit in ",
                    half.duration_s, " s (game ", game.id, " half ", half_no, ")");
      }
      for (int d = 0; d < cfg.distractors_per_half; ++d) {
        bool placed = false;
        const std::int64_t lo_frame = static_cast<std::int64_t>(std::llround(2.0 * fps));
        const std::int64_t hi_frame =
            static_cast<std::int64_t>(total_frames) - static_cast<std::int64_t>(sig_frames) -
            static_cast<std::int64_t>(std::llround(2.0 * fps));
        for (int attempt = 0; attempt < kMaxPlacementTries && !placed; ++attempt) {
          if (lo_frame > hi_frame) break;
          const std::int64_t t_frame = rng.uniform_int(lo_frame, hi_frame);
          const double t = static_cast<double>(t_frame) / fps;
          if (!clear_of(occupied, t, t + cfg.signature_len_s)) continue;
          occupied.push_back({t, t + cfg.signature_len_s});
          events.push_back({t, static_cast<std::size_t>(t_frame), false});
          placed = true;
        }
        if (!placed)
          fail_data("placement infeasible: distractor ", d, " does not fit (game ",
                    game.id, " half ", half_no, ")");
      }

      // Signatures: one pattern per (event, stream).
      const std::size_t dim = static_cast<std::size_t>(cfg.dim);
      std::vector<std::vector<Matrix>> signatures(events.size());
      for (std::size_t e = 0; e < events.size(); ++e)
        for (std::size_t s = 0; s < stream_names.size(); ++s)
          signatures[e].push_back(smooth_pattern(rng, sig_frames, dim));

      // Tracks: noise background, signature blocks, then replay copies.
      for (std::size_t s = 0; s < stream_names.size(); ++s) {
        FeatureTrack track;
        track.game_id = game.id;
        track.half = half_no;
        track.stream = stream_names[s];
        track.fps = fps;
        track.frames = Matrix(total_frames, dim);
        for (std::size_t i = 0; i < total_frames; ++i)
          for (std::size_t c = 0; c < dim; ++c)
            track.frames(i, c) = to_f32(rng.gaussian());
        for (std::size_t e = 0; e < events.size(); ++e)
          for (std::size_t i = 0; i < sig_frames; ++i)
            for (std::size_t c = 0; c < dim; ++c)
              track.frames(events[e].frame + i, c) = to_f32(signatures[e][s](i, c));
        for (std::size_t e = 0; e < events.size(); ++e) {
          if (!events[e].has_replay) continue;
          for (std::size_t i = 0; i < sig_frames; ++i)
            for (std::size_t c = 0; c < dim; ++c)
              track.frames(events[e].replay_frame + i, c) =
                  to_f32(signatures[e][s](i, c) + cfg.noise_sigma * rng.gaussian());
        }
        const std::string file =
            game.id + "_h" + std::to_string(half_no) + "_" + stream_names[s] + ".rgf1";
        write_feature_track(track, out_dir / file);
        half.streams.push_back({stream_names[s], file});
      }

      int replay_no = 0;
      for (std::size_t e = 0; e < events.size(); ++e) {
        if (!events[e].has_replay) continue;
        ReplayEvent r;
        r.replay_id = game.id + "_h" + std::to_string(half_no) + "_r" + zero_pad(replay_no, 2);
        r.game_id = game.id;
        r.half = half_no;
        r.replay_start_s = events[e].replay_start_s;
        r.replay_end_s = events[e].replay_start_s + cfg.signature_len_s;
        r.gt_time_s = events[e].time_s;
        r.label = "action";
        half.replays.push_back(std::move(r));
        ++replay_no;
      }
      game.halves.push_back(std::move(half));
    }
    manifest.games.push_back(std::move(game));
  }

  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace rgpipe
