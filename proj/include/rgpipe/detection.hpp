#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgpipe/conditioning.hpp"
#include "rgpipe/rng.hpp"

namespace rgpipe {

// Provenance of a window-local proposal, enough to map back to game time.
struct WindowRef {
  std::string replay_id;
  std::string game_id;
  int half = 1;
  double window_start_s = 0.0;
  double window_len_s = 0.0;
  int n_frames = 100;
};

inline WindowRef window_ref(const Sample& s) {
  return {s.replay_id, s.game_id, s.half, s.window_start_s, s.window_len_s,
          static_cast<int>(s.features.rows())};
}

struct Proposal {
  double start_f = 0.0;
  double end_f = 0.0;
  double score = 0.0;
  WindowRef origin;
};

struct AnchorConfig {
  std::vector<int> durations_f{12, 19, 25, 38};
  int start_stride_f = 2;
  int top_k = 120;

  void validate(int n_frames) const {
    if (durations_f.empty()) fail_config("anchor durations must be non-empty");
    for (std::size_t i = 0; i < durations_f.size(); ++i) {
      if (durations_f[i] < 1 || durations_f[i] >= n_frames)
        fail_config("anchor duration ", durations_f[i], " out of range [1, ", n_frames, ")");
      if (i > 0 && durations_f[i] <= durations_f[i - 1])
        fail_config("anchor durations must be sorted ascending");
    }
    if (start_stride_f < 1) fail_config("start_stride_f must be >= 1");
    if (top_k < 1) fail_config("top_k must be >= 1");
  }
};

// Integer row range [lo, hi) covered by a frame span.
inline std::pair<int, int> span_rows(const FrameSpan& span, int n_frames) {
  const int lo = std::max(0, static_cast<int>(std::ceil(span.start_f - 1e-9)));
  const int hi = std::min(n_frames, static_cast<int>(std::floor(span.end_f + 1e-9)));
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// Training-free similarity scorer
//
// The conditioning step makes the replay mean available per sample; a span is
// scored by the cosine between that (pre-normalization) mean and the mean of
// the window-content channels inside the span.
// ---------------------------------------------------------------------------

inline double similarity_score(const Sample& sample, const FrameSpan& span) {
  const int n = static_cast<int>(sample.features.rows());
  if (span.start_f < -1e-9 || span.end_f > n + 1e-9)
    fail_data("span [", span.start_f, ", ", span.end_f, "] outside [0, ", n, "]");
  const auto [lo, hi] = span_rows(span, n);
  if (lo >= hi)
    fail_data("span [", span.start_f, ", ", span.end_f, "] rounds to an empty frame range");
  const std::size_t d = sample.content_dim();
  std::vector<double> span_mean(d, 0.0);
  for (int r = lo; r < hi; ++r)
    for (std::size_t c = 0; c < d; ++c) span_mean[c] += sample.features(r, c);
  for (double& v : span_mean) v /= static_cast<double>(hi - lo);
  return cosine(sample.replay_mean_raw, span_mean);
}

// Per-frame variant of the same signal; drives boundary refinement.
inline std::vector<double> per_frame_similarity(const Sample& sample) {
  const std::size_t d = sample.content_dim();
  std::vector<double> out(sample.features.rows());
  for (std::size_t r = 0; r < sample.features.rows(); ++r)
    out[r] = cosine(sample.replay_mean_raw, sample.features.row(r).subspan(0, d));
  return out;
}

// ---------------------------------------------------------------------------
// Actionness head: sigmoid(w2 . relu(W1 x + b1) + b2) per frame
// ---------------------------------------------------------------------------

struct ActionnessModel {
  int input_dim = 0;   // c
  int hidden_dim = 0;  // h
  Matrix w1;           // h x c
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;

  static ActionnessModel init(int input_dim, int hidden_dim, std::uint64_t seed) {
    ActionnessModel m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.seed = seed;
    m.w1 = Matrix(hidden_dim, input_dim);
    m.b1.assign(hidden_dim, 0.0);
    m.w2.assign(hidden_dim, 0.0);
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (int h = 0; h < hidden_dim; ++h)
      for (int c = 0; c < input_dim; ++c) m.w1(h, c) = rng.uniform(-scale, scale);
    for (int h = 0; h < hidden_dim; ++h) m.b1[h] = rng.uniform(-scale, scale);
    for (int h = 0; h < hidden_dim; ++h) m.w2[h] = rng.uniform(-scale, scale);
    m.b2 = rng.uniform(-scale, scale);
    return m;
  }
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline std::vector<double> actionness_forward(const ActionnessModel& m, const Matrix& frames) {
  if (static_cast<int>(frames.cols()) != m.input_dim)
    fail_data("actionness input dim ", frames.cols(), " != model dim ", m.input_dim);
  std::vector<double> out(frames.rows());
  std::vector<double> hidden(m.hidden_dim);
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    for (int h = 0; h < m.hidden_dim; ++h) {
      double z = m.b1[h];
      for (int c = 0; c < m.input_dim; ++c) z += m.w1(h, c) * frames(r, c);
      hidden[h] = z > 0.0 ? z : 0.0;
    }
    double z2 = m.b2;
    for (int h = 0; h < m.hidden_dim; ++h) z2 += m.w2[h] * hidden[h];
    out[r] = sigmoid(z2);
  }
  return out;
}

inline std::vector<double> actionness_forward(const ActionnessModel& m, const Sample& s) {
  return actionness_forward(m, s.features);
}

// Per-frame supervision: frames whose row falls inside any label span are
// positive, all others negative.
inline std::vector<int> frame_labels(const Sample& s) {
  std::vector<int> y(s.features.rows(), 0);
  for (const auto& span : s.labels) {
    const auto [lo, hi] = span_rows(span, static_cast<int>(s.features.rows()));
    for (int i = lo; i < hi; ++i) y[static_cast<std::size_t>(i)] = 1;
  }
  return y;
}

struct ActionnessGradients {
  Matrix w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  explicit ActionnessGradients(const ActionnessModel& m)
      : w1(m.hidden_dim, m.input_dim), b1(m.hidden_dim, 0.0), w2(m.hidden_dim, 0.0) {}
};

// Mean binary cross-entropy over the given frames; analytic gradients are
// accumulated into *grads (pre-zeroed, scaled to the same mean) when non-null.
//
// Forward: z1 = W1 x + b1, a = relu(z1), z2 = w2 . a + b2, p = sigmoid(z2).
// Loss per frame: softplus(z2) - y * z2. Backward: dz2 = p - y, from which
// dw2 = dz2 * a, db2 = dz2, dz1 = dz2 * w2 * 1[z1 > 0], dW1 = dz1 x^T.
inline double actionness_loss_and_grad(const ActionnessModel& m, const Matrix& frames,
                                       const std::vector<int>& labels,
                                       ActionnessGradients* grads) {
  if (labels.size() != frames.rows()) fail_data("label count mismatch");
  if (static_cast<int>(frames.cols()) != m.input_dim)
    fail_data("actionness input dim ", frames.cols(), " != model dim ", m.input_dim);
  double loss = 0.0;
  std::vector<double> z1(m.hidden_dim);
  std::vector<double> act(m.hidden_dim);
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    for (int h = 0; h < m.hidden_dim; ++h) {
      double z = m.b1[h];
      for (int c = 0; c < m.input_dim; ++c) z += m.w1(h, c) * frames(r, c);
      z1[h] = z;
      act[h] = z > 0.0 ? z : 0.0;
    }
    double z2 = m.b2;
    for (int h = 0; h < m.hidden_dim; ++h) z2 += m.w2[h] * act[h];
    const double y = static_cast<double>(labels[r]);
    loss += std::max(z2, 0.0) + std::log1p(std::exp(-std::abs(z2))) - y * z2;
    if (grads) {
      const double dz2 = sigmoid(z2) - y;
      grads->b2 += dz2;
      for (int h = 0; h < m.hidden_dim; ++h) {
        grads->w2[h] += dz2 * act[h];
        if (z1[h] > 0.0) {
          const double dz1 = dz2 * m.w2[h];
          grads->b1[h] += dz1;
          for (int c = 0; c < m.input_dim; ++c) grads->w1(h, c) += dz1 * frames(r, c);
        }
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(frames.rows());
  if (grads) {
    for (auto& v : grads->w1.data()) v *= inv;
    for (auto& v : grads->b1) v *= inv;
    for (auto& v : grads->w2) v *= inv;
    grads->b2 *= inv;
  }
  return loss * inv;
}

struct TrainConfig {
  int epochs = 200;
  double lr = 0.5;
  std::uint64_t seed = 0;
  int hidden_dim = 32;
  int batch_size = 16;

  void validate() const {
    if (epochs < 0) fail_config("epochs must be >= 0");
    if (lr < 0.0) fail_config("lr must be >= 0");
    if (hidden_dim < 1) fail_config("hidden_dim must be >= 1");
    if (batch_size < 1) fail_config("batch_size must be >= 1");
  }
};

// Mini-batch gradient descent on mean per-frame BCE. Batch order reshuffles
// each epoch from the run seed; within a batch, per-sample contributions are
// summed in index order, so results do not depend on scheduling.
inline ActionnessModel actionness_train(const std::vector<Sample>& samples,
                                        const TrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) fail_data("actionness_train: no samples");
  const int input_dim = static_cast<int>(samples.front().features.cols());

  std::vector<std::vector<int>> labels;
  labels.reserve(samples.size());
  std::size_t n_pos = 0, n_total = 0;
  for (const auto& s : samples) {
    if (static_cast<int>(s.features.cols()) != input_dim)
      fail_data("actionness_train: inconsistent sample channel counts");
    labels.push_back(frame_labels(s));
    for (int y : labels.back()) n_pos += static_cast<std::size_t>(y);
    n_total += labels.back().size();
  }
  if (n_pos == 0 || n_pos == n_total)
    fail_data("actionness_train: degenerate data, ", n_pos, "/", n_total,
              " positive frames");

  ActionnessModel model = ActionnessModel::init(input_dim, cfg.hidden_dim, cfg.seed);
  Rng rng = Rng::substream(cfg.seed, 0x5ba7c4);  // batch-order stream
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t b_end = std::min(order.size(), b + cfg.batch_size);
      ActionnessGradients total(model);
      std::size_t frames_in_batch = 0;
      for (std::size_t i = b; i < b_end; ++i) {
        const Sample& s = samples[order[i]];
        ActionnessGradients g(model);
        actionness_loss_and_grad(model, s.features, labels[order[i]], &g);
        const auto w = static_cast<double>(s.features.rows());
        frames_in_batch += s.features.rows();
        for (std::size_t k = 0; k < g.w1.data().size(); ++k)
          total.w1.data()[k] += w * g.w1.data()[k];
        for (int h = 0; h < model.hidden_dim; ++h) {
          total.b1[h] += w * g.b1[h];
          total.w2[h] += w * g.w2[h];
        }
        total.b2 += w * g.b2;
      }
      const double step = cfg.lr / static_cast<double>(frames_in_batch);
      for (std::size_t k = 0; k < total.w1.data().size(); ++k)
        model.w1.data()[k] -= step * total.w1.data()[k];
      for (int h = 0; h < model.hidden_dim; ++h) {
        model.b1[h] -= step * total.b1[h];
        model.w2[h] -= step * total.w2[h];
      }
      model.b2 -= step * total.b2;
    }
  }

  double loss_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto n = static_cast<double>(samples[i].features.rows());
    loss_sum += n * actionness_loss_and_grad(model, samples[i].features, labels[i], nullptr);
  }
  model.final_loss = loss_sum / static_cast<double>(n_total);
  return model;
}

inline void save_model(const ActionnessModel& m, const std::filesystem::path& path) {
  ordered_json j;
  j["c"] = m.input_dim;
  j["h"] = m.hidden_dim;
  auto w1 = ordered_json::array();
  for (int h = 0; h < m.hidden_dim; ++h) {
    auto row = ordered_json::array();
    for (int c = 0; c < m.input_dim; ++c) row.push_back(m.w1(h, c));
    w1.push_back(std::move(row));
  }
  j["w1"] = std::move(w1);
  j["b1"] = m.b1;
  j["w2"] = m.w2;
  j["b2"] = m.b2;
  j["seed"] = m.seed;
  j["final_loss"] = m.final_loss;
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail_data("cannot open ", path.string(), " for writing");
  out << j.dump(2) << "\n";
  if (!out) fail_data("write failed: ", path.string());
}

inline ActionnessModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_data("cannot open ", path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail_data(path.string(), ": invalid JSON: ", e.what());
  }
  ActionnessModel m;
  m.input_dim = detail::require_field<int>(j, "c", path.string());
  m.hidden_dim = detail::require_field<int>(j, "h", path.string());
  if (m.input_dim < 1 || m.hidden_dim < 1)
    fail_data(path.string(), ": invalid model dims");
  m.w1 = Matrix(m.hidden_dim, m.input_dim);
  const auto& w1 = j.at("w1");
  if (static_cast<int>(w1.size()) != m.hidden_dim)
    fail_data(path.string(), ": w1 row count mismatch");
  for (int h = 0; h < m.hidden_dim; ++h) {
    if (static_cast<int>(w1.at(h).size()) != m.input_dim)
      fail_data(path.string(), ": w1 column count mismatch");
    for (int c = 0; c < m.input_dim; ++c) m.w1(h, c) = w1.at(h).at(c).get<double>();
  }
  m.b1 = detail::require_field<std::vector<double>>(j, "b1", path.string());
  m.w2 = detail::require_field<std::vector<double>>(j, "w2", path.string());
  if (static_cast<int>(m.b1.size()) != m.hidden_dim ||
      static_cast<int>(m.w2.size()) != m.hidden_dim)
    fail_data(path.string(), ": bias/output dims mismatch");
  m.b2 = detail::require_field<double>(j, "b2", path.string());
  m.seed = detail::require_field<std::uint64_t>(j, "seed", path.string());
  m.final_loss = detail::require_field<double>(j, "final_loss", path.string());
  if (!m.w1.all_finite()) fail_data(path.string(), ": non-finite weights");
  return m;
}

// ---------------------------------------------------------------------------
// Proposal generation and refinement
// ---------------------------------------------------------------------------

// Mean score inside [lo, hi) minus the mean over flanking margins of
// ceil(duration/4) frames each side, clipped at the window edges. Flank rows
// outside the window contribute nothing.
inline double span_contrast(const std::vector<double>& scores, int lo, int hi) {
  const int n = static_cast<int>(scores.size());
  const int margin = (hi - lo + 3) / 4;
  const int flank_lo = std::max(0, lo - margin);
  const int flank_hi = std::min(n, hi + margin);
  double vmin = scores[static_cast<std::size_t>(lo)];
  double vmax = vmin;
  for (int i = flank_lo; i < flank_hi; ++i) {
    vmin = std::min(vmin, scores[static_cast<std::size_t>(i)]);
    vmax = std::max(vmax, scores[static_cast<std::size_t>(i)]);
  }
  // A flat profile has zero contrast; skip the summation so the result is
  // exactly 0 and anchor ties resolve by position.
  if (vmin == vmax) return 0.0;
  double inside = 0.0;
  for (int i = lo; i < hi; ++i) inside += scores[static_cast<std::size_t>(i)];
  inside /= static_cast<double>(hi - lo);
  double flank = 0.0;
  int count = 0;
  for (int i = flank_lo; i < lo; ++i, ++count) flank += scores[static_cast<std::size_t>(i)];
  for (int i = hi; i < flank_hi; ++i, ++count) flank += scores[static_cast<std::size_t>(i)];
  return inside - (count > 0 ? flank / static_cast<double>(count) : 0.0);
}

namespace detail {

template <typename ScoreFn>
std::vector<Proposal> top_k_anchors(ScoreFn&& score_fn, int n_frames,
                                    const AnchorConfig& anchors, const WindowRef& origin) {
  anchors.validate(n_frames);
  std::vector<Proposal> all;
  for (int start = 0; start < n_frames; start += anchors.start_stride_f) {
    for (int dur : anchors.durations_f) {
      if (start + dur > n_frames) break;
      Proposal p;
      p.start_f = start;
      p.end_f = start + dur;
      p.score = score_fn(start, start + dur);
      p.origin = origin;
      all.push_back(std::move(p));
    }
  }
  std::sort(all.begin(), all.end(), [](const Proposal& a, const Proposal& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start_f != b.start_f) return a.start_f < b.start_f;
    return (a.end_f - a.start_f) < (b.end_f - b.start_f);
  });
  if (all.size() > static_cast<std::size_t>(anchors.top_k))
    all.resize(static_cast<std::size_t>(anchors.top_k));
  return all;
}

}  // namespace detail

// Anchor sweep scored by the contrast of a per-frame score track.
inline std::vector<Proposal> generate_proposals(const std::vector<double>& frame_scores,
                                                const AnchorConfig& anchors,
                                                const WindowRef& origin = {}) {
  return detail::top_k_anchors(
      [&](int lo, int hi) { return span_contrast(frame_scores, lo, hi); },
      static_cast<int>(frame_scores.size()), anchors, origin);
}

// Anchor sweep scored by an arbitrary span scorer (e.g. similarity_score).
inline std::vector<Proposal> generate_proposals(
    const std::function<double(int, int)>& span_scorer, int n_frames,
    const AnchorConfig& anchors, const WindowRef& origin = {}) {
  return detail::top_k_anchors(span_scorer, n_frames, anchors, origin);
}

// Move each boundary within +/- radius to the largest score step (rising at
// the start, falling at the end); ties keep the position closest to the
// original. The refined span is re-scored with the anchor contrast.
inline Proposal refine_boundaries(const Proposal& proposal,
                                  const std::vector<double>& scores, int radius_f = 4) {
  if (radius_f <= 0) return proposal;
  const int n = static_cast<int>(scores.size());
  const int s0 = std::clamp(static_cast<int>(std::llround(proposal.start_f)), 0, n - 1);
  const int e0 = std::clamp(static_cast<int>(std::llround(proposal.end_f)), 1, n);
  constexpr double kNoStep = -std::numeric_limits<double>::infinity();

  const auto pick = [](int lo, int hi, int origin, auto&& step_at) {
    int best = origin;
    double best_step = step_at(origin);
    for (int i = lo; i <= hi; ++i) {
      const double st = step_at(i);
      const bool better =
          st > best_step ||
          (st == best_step && std::abs(i - origin) < std::abs(best - origin)) ||
          (st == best_step && std::abs(i - origin) == std::abs(best - origin) && i < best);
      if (better) {
        best = i;
        best_step = st;
      }
    }
    return best;
  };

  const int new_start = pick(std::max(0, s0 - radius_f), std::min(n - 1, s0 + radius_f), s0,
                             [&](int i) {
                               if (i < 1) return kNoStep;
                               return scores[static_cast<std::size_t>(i)] -
                                      scores[static_cast<std::size_t>(i - 1)];
                             });
  const int new_end = pick(std::max(1, e0 - radius_f), std::min(n, e0 + radius_f), e0,
                           [&](int i) {
                             if (i > n - 1) return kNoStep;
                             return scores[static_cast<std::size_t>(i - 1)] -
                                    scores[static_cast<std::size_t>(i)];
                           });
  if (new_start >= new_end) return proposal;
  Proposal out = proposal;
  out.start_f = new_start;
  out.end_f = new_end;
  out.score = span_contrast(scores, new_start, new_end);
  return out;
}

}  // namespace rgpipe
