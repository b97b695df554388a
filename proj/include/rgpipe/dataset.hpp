#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "rgpipe/error.hpp"
#include "rgpipe/matrix.hpp"

namespace rgpipe {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// One dense feature track: T frames of D channels at a fixed rate, for one
// game half and one named stream. Frame i covers [i/fps, (i+1)/fps) seconds.
struct FeatureTrack {
  std::string game_id;
  int half = 1;
  std::string stream;
  double fps = 4.0;
  Matrix frames;  // T x D

  std::size_t n_frames() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
  double duration_s() const { return static_cast<double>(frames.rows()) / fps; }

  void validate() const {
    if (frames.rows() < 1 || frames.cols() < 1)
      fail_data("feature track must have T >= 1 and D >= 1");
    if (!(fps > 0.0) || !std::isfinite(fps)) fail_data("feature track fps must be positive");
    if (!frames.all_finite()) fail_data("feature track contains non-finite values");
  }
};

// A replay shot and, when known, the live timestamp it shows.
struct ReplayEvent {
  std::string replay_id;
  std::string game_id;
  int half = 1;
  double replay_start_s = 0.0;
  double replay_end_s = 0.0;
  std::optional<double> gt_time_s;
  std::string label;
};

struct StreamRef {
  std::string name;
  std::string path;  // relative to the manifest directory
};

struct HalfEntry {
  int half = 1;
  double duration_s = 0.0;
  std::vector<StreamRef> streams;
  std::vector<ReplayEvent> replays;
};

struct GameEntry {
  std::string id;
  std::vector<HalfEntry> halves;
};

struct Manifest {
  int version = 1;
  std::vector<GameEntry> games;
  std::filesystem::path base_dir;  // set on load/generate; feature paths resolve against it

  std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }

  std::size_t replay_count() const {
    std::size_t n = 0;
    for (const auto& g : games)
      for (const auto& h : g.halves) n += h.replays.size();
    return n;
  }

  template <typename Fn>
  void for_each_replay(Fn&& fn) const {
    for (const auto& g : games)
      for (const auto& h : g.halves)
        for (const auto& r : h.replays) fn(g, h, r);
  }
};

// ---------------------------------------------------------------------------
// RGF1 feature files
//
// Little-endian layout: magic "RGF1", u32 version = 1, u32 T, u32 D, f32 fps,
// then T*D f32 values frame-major. Total size = 20 + 4*T*D bytes.
// ---------------------------------------------------------------------------

inline constexpr std::array<unsigned char, 4> kRgf1Magic{'R', 'G', 'F', '1'};
inline constexpr std::size_t kRgf1HeaderSize = 20;

namespace detail {

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float get_f32le(const unsigned char* p) {
  return std::bit_cast<float>(get_u32le(p));
}

inline void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

inline void put_f32le(std::vector<unsigned char>& out, float v) {
  put_u32le(out, std::bit_cast<std::uint32_t>(v));
}

inline std::vector<unsigned char> read_all_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open ", path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace detail

struct Rgf1Header {
  std::uint32_t version = 1;
  std::uint32_t n_frames = 0;
  std::uint32_t dim = 0;
  float fps = 4.0f;
};

inline Rgf1Header parse_rgf1_header(const std::vector<unsigned char>& bytes,
                                    const std::string& name) {
  if (bytes.size() < kRgf1HeaderSize)
    fail_data(name, ": truncated header, need ", kRgf1HeaderSize, " bytes, got ",
              bytes.size());
  for (std::size_t i = 0; i < 4; ++i) {
    if (bytes[i] != kRgf1Magic[i])
      fail_data(name, ": bad magic at byte ", i, " (0x", std::hex,
                static_cast<int>(bytes[i]), std::dec, ", expected 0x", std::hex,
                static_cast<int>(kRgf1Magic[i]), std::dec, ")");
  }
  Rgf1Header h;
  h.version = detail::get_u32le(bytes.data() + 4);
  if (h.version != 1) fail_data(name, ": unsupported version ", h.version);
  h.n_frames = detail::get_u32le(bytes.data() + 8);
  h.dim = detail::get_u32le(bytes.data() + 12);
  h.fps = detail::get_f32le(bytes.data() + 16);
  if (h.n_frames == 0) fail_data(name, ": zero frame count at byte 8");
  if (h.dim == 0) fail_data(name, ": zero channel count at byte 12");
  if (!(h.fps > 0.0f) || !std::isfinite(h.fps))
    fail_data(name, ": invalid fps at byte 16");
  return h;
}

inline Rgf1Header read_rgf1_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open ", path.string());
  std::vector<unsigned char> bytes(kRgf1HeaderSize);
  in.read(reinterpret_cast<char*>(bytes.data()), kRgf1HeaderSize);
  bytes.resize(static_cast<std::size_t>(std::max<std::streamsize>(in.gcount(), 0)));
  return parse_rgf1_header(bytes, path.string());
}

inline FeatureTrack read_feature_track(const std::filesystem::path& path) {
  const auto bytes = detail::read_all_bytes(path);
  const Rgf1Header h = parse_rgf1_header(bytes, path.string());
  const std::size_t expect =
      kRgf1HeaderSize + 4ull * h.n_frames * h.dim;
  if (bytes.size() != expect)
    fail_data(path.string(), ": payload size mismatch, expected ", expect,
              " bytes (20 + 4*", h.n_frames, "*", h.dim, "), got ", bytes.size());
  FeatureTrack track;
  track.fps = static_cast<double>(h.fps);
  track.frames = Matrix(h.n_frames, h.dim);
  const unsigned char* p = bytes.data() + kRgf1HeaderSize;
  for (std::size_t i = 0; i < static_cast<std::size_t>(h.n_frames) * h.dim; ++i) {
    const float v = detail::get_f32le(p + 4 * i);
    if (!std::isfinite(v))
      fail_data(path.string(), ": non-finite value at byte ", kRgf1HeaderSize + 4 * i,
                " (frame ", i / h.dim, ", channel ", i % h.dim, ")");
    track.frames.data()[i] = static_cast<double>(v);
  }
  return track;
}

inline void write_feature_track(const FeatureTrack& track,
                                const std::filesystem::path& path) {
  track.validate();
  std::vector<unsigned char> bytes;
  bytes.reserve(kRgf1HeaderSize + 4 * track.frames.data().size());
  bytes.insert(bytes.end(), kRgf1Magic.begin(), kRgf1Magic.end());
  detail::put_u32le(bytes, 1);
  detail::put_u32le(bytes, static_cast<std::uint32_t>(track.n_frames()));
  detail::put_u32le(bytes, static_cast<std::uint32_t>(track.dim()));
  detail::put_f32le(bytes, static_cast<float>(track.fps));
  for (double v : track.frames.data()) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f))
      fail_data("value ", v, " not representable as finite 32-bit float");
    detail::put_f32le(bytes, f);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_data("cannot open ", path.string(), " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail_data("write failed: ", path.string());
}

// ---------------------------------------------------------------------------
// Manifest JSON
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
T require_field(const ordered_json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) fail_data(ctx, ": missing field \"", key, "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail_data(ctx, ": field \"", key, "\" has the wrong type");
  }
}

}  // namespace detail

inline ordered_json manifest_to_json(const Manifest& m) {
  ordered_json root;
  root["version"] = m.version;
  root["games"] = ordered_json::array();
  for (const auto& g : m.games) {
    ordered_json jg;
    jg["id"] = g.id;
    jg["halves"] = ordered_json::array();
    for (const auto& h : g.halves) {
      ordered_json jh;
      jh["half"] = h.half;
      jh["duration_s"] = h.duration_s;
      ordered_json streams = ordered_json::object();
      for (const auto& s : h.streams) streams[s.name] = s.path;
      jh["streams"] = std::move(streams);
      jh["replays"] = ordered_json::array();
      for (const auto& r : h.replays) {
        ordered_json jr;
        jr["replay_id"] = r.replay_id;
        jr["game_id"] = r.game_id;
        jr["half"] = r.half;
        jr["replay_start_s"] = r.replay_start_s;
        jr["replay_end_s"] = r.replay_end_s;
        if (r.gt_time_s) jr["gt_time_s"] = *r.gt_time_s;
        jr["label"] = r.label;
        jh["replays"].push_back(std::move(jr));
      }
      jg["halves"].push_back(std::move(jh));
    }
    root["games"].push_back(std::move(jg));
  }
  return root;
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail_data("cannot open ", path.string(), " for writing");
  out << manifest_to_json(m).dump(2) << "\n";
  if (!out) fail_data("write failed: ", path.string());
}

// Loads and validates a manifest. Validation reads feature-file headers only:
// every referenced file must exist and all streams of a half must agree on
// frame count and rate.
inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_data("cannot open ", path.string());
  ordered_json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    fail_data(path.string(), ": invalid JSON: ", e.what());
  }

  Manifest m;
  m.base_dir = path.parent_path();
  m.version = detail::require_field<int>(root, "version", path.string());
  std::unordered_set<std::string> replay_ids;

  for (const auto& jg : detail::require_field<ordered_json>(root, "games", path.string())) {
    GameEntry game;
    game.id = detail::require_field<std::string>(jg, "id", "game entry");
    const std::string gctx = "game \"" + game.id + "\"";
    for (const auto& jh : detail::require_field<ordered_json>(jg, "halves", gctx)) {
      HalfEntry half;
      half.half = detail::require_field<int>(jh, "half", gctx);
      const std::string hctx = gctx + " half " + std::to_string(half.half);
      if (half.half != 1 && half.half != 2) fail_data(hctx, ": half must be 1 or 2");
      half.duration_s = detail::require_field<double>(jh, "duration_s", hctx);
      if (!(half.duration_s > 0.0)) fail_data(hctx, ": duration_s must be positive");

      const auto jstreams = detail::require_field<ordered_json>(jh, "streams", hctx);
      if (!jstreams.is_object() || jstreams.empty())
        fail_data(hctx, ": \"streams\" must be a non-empty object");
      std::optional<std::pair<std::uint32_t, float>> shape;  // (T, fps)
      std::string first_stream;
      for (const auto& [name, jpath] : jstreams.items()) {
        StreamRef ref{name, jpath.get<std::string>()};
        const auto full = m.resolve(ref.path);
        if (!std::filesystem::exists(full))
          fail_data(hctx, ": missing feature file ", full.string());
        const Rgf1Header hdr = read_rgf1_header(full);
        if (!shape) {
          shape = {hdr.n_frames, hdr.fps};
          first_stream = name;
        } else if (hdr.n_frames != shape->first || hdr.fps != shape->second) {
          fail_data(hctx, ": stream length mismatch, \"", first_stream, "\" has T=",
                    shape->first, " fps=", shape->second, " but \"", name, "\" has T=",
                    hdr.n_frames, " fps=", hdr.fps);
        }
        half.streams.push_back(std::move(ref));
      }

      if (jh.contains("replays")) {
        for (const auto& jr : jh.at("replays")) {
          ReplayEvent r;
          r.replay_id = detail::require_field<std::string>(jr, "replay_id", hctx);
          const std::string rctx = "replay \"" + r.replay_id + "\"";
          r.game_id = detail::require_field<std::string>(jr, "game_id", rctx);
          r.half = detail::require_field<int>(jr, "half", rctx);
          r.replay_start_s = detail::require_field<double>(jr, "replay_start_s", rctx);
          r.replay_end_s = detail::require_field<double>(jr, "replay_end_s", rctx);
          if (jr.contains("gt_time_s")) r.gt_time_s = jr.at("gt_time_s").get<double>();
          r.label = detail::require_field<std::string>(jr, "label", rctx);

          if (!replay_ids.insert(r.replay_id).second)
            fail_data("duplicate replay id \"", r.replay_id, "\"");
          if (!(r.replay_start_s >= 0.0 && r.replay_start_s < r.replay_end_s &&
                r.replay_end_s <= half.duration_s))
            fail_data(rctx, ": span [", r.replay_start_s, ", ", r.replay_end_s,
                      "] outside half duration ", half.duration_s);
          if (r.gt_time_s && !(*r.gt_time_s >= 0.0 && *r.gt_time_s < r.replay_start_s))
            fail_data(rctx, ": gt_time_s ", *r.gt_time_s,
                      " must precede replay_start_s ", r.replay_start_s);
          half.replays.push_back(std::move(r));
        }
      }
      game.halves.push_back(std::move(half));
    }
    m.games.push_back(std::move(game));
  }
  return m;
}

// Full-payload track loading for one half, in manifest stream order.
inline std::vector<FeatureTrack> load_half_tracks(const Manifest& m, const GameEntry& game,
                                                  const HalfEntry& half) {
  std::vector<FeatureTrack> tracks;
  tracks.reserve(half.streams.size());
  for (const auto& s : half.streams) {
    FeatureTrack t = read_feature_track(m.resolve(s.path));
    t.game_id = game.id;
    t.half = half.half;
    t.stream = s.name;
    tracks.push_back(std::move(t));
  }
  return tracks;
}

}  // namespace rgpipe
