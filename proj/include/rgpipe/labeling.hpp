#pragma once

#include <algorithm>
#include <string>
#include <utility>

#include "rgpipe/error.hpp"

namespace rgpipe {

// Length of the detection target: a grounding timestamp t becomes the
// segment [t, t+3] whose starting second is the answer to recover.
inline constexpr double kSegmentLabelLen = 3.0;

struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string label;
};

// Span in resized-frame coordinates of one window: [0, n_frames].
struct FrameSpan {
  double start_f = 0.0;
  double end_f = 0.0;
  std::string label;
};

inline double overlap_len(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// [t, t+3] clipped to the half. The start is kept exactly at t so the
// segment start can be read back as the spot timestamp.
inline Segment make_segment_label(double gt_time_s, double half_duration_s,
                                  std::string label = "action") {
  if (!(gt_time_s >= 0.0 && gt_time_s < half_duration_s))
    fail_data("segment label time ", gt_time_s, " outside half [0, ",
              half_duration_s, ")");
  return {gt_time_s, std::min(gt_time_s + kSegmentLabelLen, half_duration_s),
          std::move(label)};
}

// Atomic label "6s": [t-2, t+4] clipped.
inline Segment atomic_6s(double t, double half_duration_s, std::string label = "action") {
  if (!(t >= 0.0 && t < half_duration_s))
    fail_data("atomic label time ", t, " outside half [0, ", half_duration_s, ")");
  return {std::max(t - 2.0, 0.0), std::min(t + 4.0, half_duration_s), std::move(label)};
}

// Atomic label "3s style 1": the pair ([t-3, t], [t, t+3]) clipped. Both
// sides must stay nonempty, so t strictly inside the half is required.
inline std::pair<Segment, Segment> atomic_3s_style1(double t, double half_duration_s,
                                                    std::string label = "action") {
  if (!(t > 0.0 && t < half_duration_s))
    fail_data("atomic 3s-style1 time ", t, " must be strictly inside (0, ",
              half_duration_s, ")");
  Segment before{std::max(t - 3.0, 0.0), t, label};
  Segment after{t, std::min(t + 3.0, half_duration_s), std::move(label)};
  return {std::move(before), std::move(after)};
}

// Map a segment in global seconds into the resized-frame coordinates of a
// window, clipping to [0, n_frames]. The segment must overlap the window.
inline FrameSpan to_frame_span(const Segment& seg, double window_start_s,
                               double window_len_s, int n_frames) {
  const double wend = window_start_s + window_len_s;
  if (overlap_len(seg.start_s, seg.end_s, window_start_s, wend) <= 0.0)
    fail_data("segment [", seg.start_s, ", ", seg.end_s, "] disjoint from window [",
              window_start_s, ", ", wend, ")");
  const double scale = static_cast<double>(n_frames) / window_len_s;
  const double lo = std::clamp((seg.start_s - window_start_s) * scale, 0.0,
                               static_cast<double>(n_frames));
  const double hi = std::clamp((seg.end_s - window_start_s) * scale, 0.0,
                               static_cast<double>(n_frames));
  return {lo, hi, seg.label};
}

inline Segment from_frame_span(const FrameSpan& span, double window_start_s,
                               double window_len_s, int n_frames) {
  const double scale = window_len_s / static_cast<double>(n_frames);
  return {window_start_s + span.start_f * scale, window_start_s + span.end_f * scale,
          span.label};
}

}  // namespace rgpipe
