// Replay grounding pipeline CLI: synthetic data generation, sample
// preparation, scorer training, detection, evaluation, and RGF1 inspection.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgpipe/evaluation.hpp"
#include "rgpipe/pipeline.hpp"

namespace fs = std::filesystem;
using rgpipe::ordered_json;

namespace {

// --config FILE is applied to the command struct before CLI11 parses the
// flags, so explicit flags always win. Keys mirror flag names.
ordered_json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) rgpipe::fail_config("cannot open config file ", path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    rgpipe::fail_config(path, ": invalid JSON: ", e.what());
  }
  if (!j.is_object()) rgpipe::fail_config(path, ": config must be a JSON object");
  return j;
}

std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

template <typename T>
void from_key(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void print_and_store_config(const ordered_json& cfg, const fs::path& store_path) {
  std::cout << "config: " << cfg.dump() << "\n";
  std::ofstream out(store_path, std::ios::trunc);
  if (!out) rgpipe::fail_config("cannot write config copy to ", store_path.string());
  out << cfg.dump(2) << "\n";
}

// Pre-flight writability probe so failures leave nothing behind.
void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) rgpipe::fail_config("cannot create output directory ", dir.string(), ": ",
                              ec.message());
  const fs::path probe = dir / ".write_probe";
  std::ofstream out(probe);
  if (!out) rgpipe::fail_config("output directory ", dir.string(), " is not writable");
  out.close();
  fs::remove(probe, ec);
}

void ensure_writable_file(const fs::path& file) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    if (ec) rgpipe::fail_config("cannot create directory ", file.parent_path().string());
  }
  std::ofstream out(file, std::ios::app);
  if (!out) rgpipe::fail_config("cannot write to ", file.string());
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out;
  rgpipe::SynthConfig synth;
};

ordered_json gen_config_json(const GenArgs& a) {
  ordered_json j;
  j["out"] = a.out;
  j["games"] = a.synth.n_games;
  j["actions-per-half"] = a.synth.actions_per_half;
  j["distractors-per-half"] = a.synth.distractors_per_half;
  j["dim"] = a.synth.dim;
  j["duration"] = a.synth.duration_s;
  j["noise"] = a.synth.noise_sigma;
  j["signature-len"] = a.synth.signature_len_s;
  j["seed"] = a.synth.seed;
  return j;
}

void gen_apply_config(GenArgs& a, const ordered_json& j) {
  from_key(j, "out", a.out);
  from_key(j, "games", a.synth.n_games);
  from_key(j, "actions-per-half", a.synth.actions_per_half);
  from_key(j, "distractors-per-half", a.synth.distractors_per_half);
  from_key(j, "dim", a.synth.dim);
  from_key(j, "duration", a.synth.duration_s);
  from_key(j, "noise", a.synth.noise_sigma);
  from_key(j, "signature-len", a.synth.signature_len_s);
  from_key(j, "seed", a.synth.seed);
}

int run_gen(const GenArgs& args) {
  args.synth.validate();
  ensure_writable_dir(args.out);
  print_and_store_config(gen_config_json(args), fs::path(args.out) / "run_config.json");

  // Track what we create so a mid-generation failure leaves no partial tree.
  std::set<fs::path> pre_existing;
  for (const auto& e : fs::directory_iterator(args.out)) pre_existing.insert(e.path());
  try {
    const rgpipe::Manifest m = rgpipe::generate_synthetic(args.synth, args.out);
    std::size_t halves = 0;
    for (const auto& g : m.games) halves += g.halves.size();
    std::cout << "manifest: " << (fs::path(args.out) / "manifest.json").string() << "\n";
    std::cout << "games=" << m.games.size() << " halves=" << halves
              << " replays=" << m.replay_count() << "\n";
    return 0;
  } catch (...) {
    for (const auto& e : fs::directory_iterator(args.out)) {
      if (!pre_existing.count(e.path())) {
        std::error_code ec;
        fs::remove_all(e.path(), ec);
      }
    }
    throw;
  }
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string manifest;
  std::string out;
  std::string mode = "test";
  rgpipe::WindowConfig window;
  rgpipe::AugmentConfig augment{0.0, 0};
};

ordered_json prepare_config_json(const PrepareArgs& a) {
  ordered_json j;
  j["manifest"] = a.manifest;
  j["out"] = a.out;
  j["mode"] = a.mode;
  j["window-len"] = a.window.window_len_s;
  j["stride"] = a.window.stride_s;
  j["resize-len"] = a.window.resize_len;
  j["train-context"] = a.window.train_context_s;
  j["test-context"] = a.window.test_context_s;
  j["augment-ratio"] = a.augment.ratio;
  j["seed"] = a.augment.seed;
  return j;
}

void prepare_apply_config(PrepareArgs& a, const ordered_json& j) {
  from_key(j, "manifest", a.manifest);
  from_key(j, "out", a.out);
  from_key(j, "mode", a.mode);
  from_key(j, "window-len", a.window.window_len_s);
  from_key(j, "stride", a.window.stride_s);
  from_key(j, "resize-len", a.window.resize_len);
  from_key(j, "train-context", a.window.train_context_s);
  from_key(j, "test-context", a.window.test_context_s);
  from_key(j, "augment-ratio", a.augment.ratio);
  from_key(j, "seed", a.augment.seed);
}

int run_prepare(const PrepareArgs& args) {
  const rgpipe::Mode mode = rgpipe::parse_mode(args.mode);
  args.window.validate();
  args.augment.validate();
  if (args.augment.ratio > 0.0 && mode != rgpipe::Mode::train)
    rgpipe::fail_config("augmentation applies to train mode only");
  ensure_writable_dir(args.out);
  print_and_store_config(prepare_config_json(args),
                         fs::path(args.out) / "run_config.json");

  const rgpipe::Manifest manifest = rgpipe::load_manifest(args.manifest);
  std::vector<rgpipe::Sample> samples =
      rgpipe::build_samples(manifest, args.window, mode);
  if (mode == rgpipe::Mode::train && args.augment.ratio > 0.0)
    samples = rgpipe::augment_dataset(std::move(samples), manifest, args.window,
                                      args.augment);
  rgpipe::save_samples(samples, args.out);
  std::size_t synthetic = 0;
  for (const auto& s : samples)
    if (s.is_synthetic) ++synthetic;
  std::cout << "samples=" << samples.size() << " synthetic=" << synthetic << " dir="
            << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string samples;
  std::string out;
  rgpipe::TrainConfig train;
};

ordered_json train_config_json(const TrainArgs& a) {
  ordered_json j;
  j["samples"] = a.samples;
  j["out"] = a.out;
  j["epochs"] = a.train.epochs;
  j["lr"] = a.train.lr;
  j["hidden"] = a.train.hidden_dim;
  j["batch-size"] = a.train.batch_size;
  j["seed"] = a.train.seed;
  return j;
}

void train_apply_config(TrainArgs& a, const ordered_json& j) {
  from_key(j, "samples", a.samples);
  from_key(j, "out", a.out);
  from_key(j, "epochs", a.train.epochs);
  from_key(j, "lr", a.train.lr);
  from_key(j, "hidden", a.train.hidden_dim);
  from_key(j, "batch-size", a.train.batch_size);
  from_key(j, "seed", a.train.seed);
}

int run_train(const TrainArgs& args) {
  args.train.validate();
  ensure_writable_file(args.out);
  print_and_store_config(train_config_json(args), args.out + ".config.json");
  const std::vector<rgpipe::Sample> samples = rgpipe::load_samples(args.samples);
  const rgpipe::ActionnessModel model = rgpipe::actionness_train(samples, args.train);
  rgpipe::save_model(model, args.out);
  std::cout << "final_loss=" << model.final_loss << "\n";
  std::cout << "model: " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

struct DetectArgs {
  std::string samples;
  std::string out;
  std::string scorer = "similarity";
  std::string model_path;
  std::string nms_method = "gaussian";
  rgpipe::AnchorConfig anchors;
  rgpipe::PostConfig post;
  int refine_radius = 4;
};

ordered_json detect_config_json(const DetectArgs& a) {
  ordered_json j;
  j["samples"] = a.samples;
  j["out"] = a.out;
  j["scorer"] = a.scorer;
  j["model"] = a.model_path;
  j["durations-f"] = a.anchors.durations_f;
  j["start-stride-f"] = a.anchors.start_stride_f;
  j["topk"] = a.anchors.top_k;
  j["refine-radius"] = a.refine_radius;
  j["nms-method"] = a.nms_method;
  j["sigma"] = a.post.sigma;
  j["iou-threshold"] = a.post.iou_threshold;
  j["score-floor"] = a.post.score_floor;
  j["top-m"] = a.post.top_m;
  return j;
}

void detect_apply_config(DetectArgs& a, const ordered_json& j) {
  from_key(j, "samples", a.samples);
  from_key(j, "out", a.out);
  from_key(j, "scorer", a.scorer);
  from_key(j, "model", a.model_path);
  from_key(j, "durations-f", a.anchors.durations_f);
  from_key(j, "start-stride-f", a.anchors.start_stride_f);
  from_key(j, "topk", a.anchors.top_k);
  from_key(j, "refine-radius", a.refine_radius);
  from_key(j, "nms-method", a.nms_method);
  from_key(j, "sigma", a.post.sigma);
  from_key(j, "iou-threshold", a.post.iou_threshold);
  from_key(j, "score-floor", a.post.score_floor);
  from_key(j, "top-m", a.post.top_m);
}

int run_detect(const DetectArgs& args) {
  rgpipe::DetectConfig cfg;
  cfg.scorer = rgpipe::parse_scorer(args.scorer);
  cfg.anchors = args.anchors;
  cfg.post = args.post;
  cfg.post.nms_method = rgpipe::parse_nms_method(args.nms_method);
  cfg.post.validate();
  cfg.refine_radius_f = args.refine_radius;
  rgpipe::ActionnessModel model;
  const bool need_model = cfg.scorer == rgpipe::Scorer::actionness;
  if (need_model && args.model_path.empty())
    rgpipe::fail_config("--model is required with --scorer actionness");
  ensure_writable_file(args.out);
  print_and_store_config(detect_config_json(args), args.out + ".config.json");

  if (need_model) model = rgpipe::load_model(args.model_path);
  const std::vector<rgpipe::Sample> samples = rgpipe::load_samples(args.samples);
  const auto spots =
      rgpipe::run_detection(samples, cfg, need_model ? &model : nullptr);
  rgpipe::write_predictions(spots, args.out);
  std::set<std::string> replays;
  for (const auto& s : spots) replays.insert(s.replay_id);
  std::cout << "predictions=" << spots.size() << " replays=" << replays.size()
            << " file=" << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string manifest;
  std::string preds;
  std::string out;
  rgpipe::MetricConfig metrics;
};

ordered_json eval_config_json(const EvalArgs& a) {
  ordered_json j;
  j["manifest"] = a.manifest;
  j["preds"] = a.preds;
  j["out"] = a.out;
  j["tight-deltas"] = a.metrics.tight_deltas_s;
  j["loose-deltas"] = a.metrics.loose_deltas_s;
  j["tiou-thresholds"] = a.metrics.tiou_thresholds;
  j["an-max"] = a.metrics.an_max;
  return j;
}

void eval_apply_config(EvalArgs& a, const ordered_json& j) {
  from_key(j, "manifest", a.manifest);
  from_key(j, "preds", a.preds);
  from_key(j, "out", a.out);
  from_key(j, "tight-deltas", a.metrics.tight_deltas_s);
  from_key(j, "loose-deltas", a.metrics.loose_deltas_s);
  from_key(j, "tiou-thresholds", a.metrics.tiou_thresholds);
  from_key(j, "an-max", a.metrics.an_max);
}

int run_eval(const EvalArgs& args) {
  args.metrics.validate();
  ensure_writable_file(args.out);
  print_and_store_config(eval_config_json(args), args.out + ".config.json");
  const rgpipe::Manifest manifest = rgpipe::load_manifest(args.manifest);
  const rgpipe::MetricsReport report =
      rgpipe::evaluate(manifest, args.preds, args.metrics);
  rgpipe::write_report(report, args.out);
  std::cout << rgpipe::render_report_table(report);
  std::cout << "report: " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

int run_inspect(const std::vector<std::string>& paths) {
  bool any_bad = false;
  for (const auto& p : paths) {
    try {
      const rgpipe::Rgf1Header h = rgpipe::read_rgf1_header(p);
      const auto size = fs::file_size(p);
      std::cout << p << ": RGF1 v" << h.version << " T=" << h.n_frames
                << " D=" << h.dim << " fps=" << h.fps
                << " duration_s=" << (static_cast<double>(h.n_frames) / h.fps)
                << " bytes=" << size << "\n";
    } catch (const std::exception& e) {
      std::cout << p << ": " << e.what() << "\n";
      any_bad = true;
    }
  }
  return any_bad ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"replay grounding pipeline"};
  app.require_subcommand(1);

  GenArgs gen_args;
  PrepareArgs prepare_args;
  TrainArgs train_args;
  DetectArgs detect_args;
  EvalArgs eval_args;
  std::vector<std::string> inspect_paths;
  std::string config_path;

  // Apply --config before flag parsing so explicit flags override it.
  try {
    config_path = find_config_arg(argc, argv);
    if (!config_path.empty()) {
      const ordered_json j = load_config_file(config_path);
      gen_apply_config(gen_args, j);
      prepare_apply_config(prepare_args, j);
      train_apply_config(train_args, j);
      detect_apply_config(detect_args, j);
      eval_apply_config(eval_args, j);
    }
  } catch (const rgpipe::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--config", config_path, "JSON config file");
  gen->add_option("--out", gen_args.out, "output directory")->required();
  gen->add_option("--games", gen_args.synth.n_games, "number of games");
  gen->add_option("--actions-per-half", gen_args.synth.actions_per_half,
                  "replayed actions per half");
  gen->add_option("--distractors-per-half", gen_args.synth.distractors_per_half,
                  "unreplayed signature blocks per half");
  gen->add_option("--dim", gen_args.synth.dim, "channels per stream");
  gen->add_option("--duration", gen_args.synth.duration_s, "half duration in seconds");
  gen->add_option("--noise", gen_args.synth.noise_sigma, "replay copy noise sigma");
  gen->add_option("--signature-len", gen_args.synth.signature_len_s,
                  "signature block length in seconds");
  gen->add_option("--seed", gen_args.synth.seed, "run seed");

  auto* prepare = app.add_subcommand("prepare", "build conditioned samples");
  prepare->add_option("--config", config_path, "JSON config file");
  prepare->add_option("--manifest", prepare_args.manifest, "manifest path")->required();
  prepare->add_option("--out", prepare_args.out, "output directory")->required();
  prepare->add_option("--mode", prepare_args.mode, "train|test");
  prepare->add_option("--window-len", prepare_args.window.window_len_s,
                      "window length in seconds");
  prepare->add_option("--stride", prepare_args.window.stride_s, "window stride in seconds");
  prepare->add_option("--resize-len", prepare_args.window.resize_len,
                      "resized frame count");
  prepare->add_option("--train-context", prepare_args.window.train_context_s,
                      "train context seconds");
  prepare->add_option("--test-context", prepare_args.window.test_context_s,
                      "test context seconds");
  prepare->add_option("--augment-ratio", prepare_args.augment.ratio,
                      "synthetic positives per real sample (train mode)");
  prepare->add_option("--seed", prepare_args.augment.seed, "augmentation seed");

  auto* train = app.add_subcommand("train", "train the actionness scorer");
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--samples", train_args.samples, "prepared train samples dir")
      ->required();
  train->add_option("--out", train_args.out, "model JSON path")->required();
  train->add_option("--epochs", train_args.train.epochs, "training epochs");
  train->add_option("--lr", train_args.train.lr, "learning rate");
  train->add_option("--hidden", train_args.train.hidden_dim, "hidden units");
  train->add_option("--batch-size", train_args.train.batch_size, "samples per batch");
  train->add_option("--seed", train_args.train.seed, "run seed");

  auto* detect = app.add_subcommand("detect", "score windows and emit spot predictions");
  detect->add_option("--config", config_path, "JSON config file");
  detect->add_option("--samples", detect_args.samples, "prepared test samples dir")
      ->required();
  detect->add_option("--out", detect_args.out, "predictions JSONL path")->required();
  detect->add_option("--scorer", detect_args.scorer, "similarity|actionness");
  detect->add_option("--model", detect_args.model_path, "model JSON (actionness)");
  detect->add_option("--durations-f", detect_args.anchors.durations_f,
                     "anchor durations in resized frames")
      ->delimiter(',');
  detect->add_option("--start-stride-f", detect_args.anchors.start_stride_f,
                     "anchor start stride in frames");
  detect->add_option("--topk", detect_args.anchors.top_k, "coarse proposals per window");
  detect->add_option("--refine-radius", detect_args.refine_radius,
                     "boundary refinement radius in frames");
  detect->add_option("--nms-method", detect_args.nms_method, "gaussian|linear|hard");
  detect->add_option("--sigma", detect_args.post.sigma, "gaussian soft-nms sigma");
  detect->add_option("--iou-threshold", detect_args.post.iou_threshold,
                     "linear/hard nms threshold");
  detect->add_option("--score-floor", detect_args.post.score_floor,
                     "drop proposals below this score");
  detect->add_option("--top-m", detect_args.post.top_m, "kept predictions per replay");

  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  eval->add_option("--config", config_path, "JSON config file");
  eval->add_option("--manifest", eval_args.manifest, "manifest path")->required();
  eval->add_option("--preds", eval_args.preds, "predictions JSONL path")->required();
  eval->add_option("--out", eval_args.out, "report JSON path")->required();
  eval->add_option("--tight-deltas", eval_args.metrics.tight_deltas_s,
                   "tight tolerance grid in seconds")
      ->delimiter(',');
  eval->add_option("--loose-deltas", eval_args.metrics.loose_deltas_s,
                   "loose tolerance grid in seconds")
      ->delimiter(',');
  eval->add_option("--tiou-thresholds", eval_args.metrics.tiou_thresholds,
                   "tIoU grid for AR/AUC")
      ->delimiter(',');
  eval->add_option("--an-max", eval_args.metrics.an_max, "largest AR-AN budget");

  auto* inspect = app.add_subcommand("inspect", "print RGF1 headers");
  inspect->add_option("paths", inspect_paths, "RGF1 files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;  // 0 for --help, 1 for usage errors
  }

  try {
    if (gen->parsed()) return run_gen(gen_args);
    if (prepare->parsed()) return run_prepare(prepare_args);
    if (train->parsed()) return run_train(train_args);
    if (detect->parsed()) return run_detect(detect_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (inspect->parsed()) return run_inspect(inspect_paths);
  } catch (const rgpipe::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const rgpipe::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
