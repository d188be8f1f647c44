// cellguard: phone-use detection from frontal driver frames.
//
//   cellguard synth  --out DIR [--mode images|video]
//   cellguard train  --manifest M --model OUT [--report CSV] [--ga-log CSV]
//   cellguard tune   --manifest M --log CSV [--params OUT] [--model OUT]
//   cellguard eval   --manifest M [--model IN] [--report CSV] [--features CSV]
//   cellguard sweep  --manifest M --model IN --out CSV
//   cellguard stream --manifest M --model IN [--status OUT] [--verdicts CSV] [--alarms CSV]
//
// Exit codes: 0 success, 1 fatal input error, 2 convergence/infeasibility.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cellguard/cellguard.hpp"

namespace fs = std::filesystem;
using namespace cellguard;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitSolver = 2;

// Settings shared by the pipeline subcommands. Named flags are recorded as
// key=value overrides applied after the config file.
struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
  std::string manifest;
  std::string detector;

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& [key, value] : flags) cfg.set(key, value);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* cmd, Common& c, bool needs_manifest = true) {
  cmd->add_option("--config", c.config_file, "key=value run configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "override any config key (key=value), repeatable");
  auto* m = cmd->add_option("--manifest", c.manifest, "frame manifest CSV");
  if (needs_manifest) m->required()->check(CLI::ExistingFile);
  cmd->add_option("--detector", c.detector, "external face detector command (prints x y w h lines)");

  const std::vector<std::pair<std::string, std::string>> named = {
      {"kernel", "linear|polynomial|rbf|sigmoid|tune"},
      {"tune-kernel", "kernel searched by the GA in tune mode"},
      {"nu", "nu parameter in (0,1]"},
      {"gamma", "kernel gamma"},
      {"coef0", "kernel coef0"},
      {"degree", "polynomial degree (real)"},
      {"seg-fraction", "skin histogram bin threshold"},
      {"window", "period length in seconds"},
      {"threshold", "period vote threshold"},
      {"green-upper", "upper bound of the green status level"},
      {"red-lower", "lower bound of the red status level"},
      {"workers", "frame workers / concurrent fitness evaluations"},
      {"fps-cap", "stream admission rate cap"},
      {"fps", "frame rate assumed for manifests without timestamps"},
      {"folds", "cross-validation folds"},
      {"seed", "GA seed"},
      {"cv-seed", "fold assignment seed"},
      {"ga-population", "GA population size"},
      {"ga-generations", "GA generations"},
      {"ga-restarts", "independent GA runs"},
      {"thresholds", "comma-separated sweep thresholds"},
  };
  for (const auto& [flag, help] : named) {
    std::string key = flag;
    for (char& ch : key) {
      if (ch == '-') ch = '_';
    }
    cmd->add_option_function<std::string>(
        "--" + flag, [&c, key](const std::string& v) { c.flags[key] = v; }, help);
  }
}

template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  fn(out);
}

IngestResult load_dataset(const Common& common, const RunConfig& cfg) {
  IngestOptions opt;
  opt.seg_fraction = cfg.seg_fraction;
  opt.fps = cfg.fps;
  opt.detector_command = common.detector;
  IngestResult r = ingest(read_manifest_file(common.manifest), opt);
  std::cerr << "ingested " << r.records.size() << " frames: " << r.dataset.size() << " labeled usable, "
            << r.not_found << " face not found, " << r.errors << " errors, " << r.empty_masks << " empty masks\n";
  for (const auto& rec : r.records) {
    if (rec.status == FrameStatus::Error) std::cerr << "  " << rec.frame_id << ": " << rec.error << '\n';
  }
  return r;
}

void write_cv_report(std::ostream& out, const eval::CvReport& r) {
  out << "fold,accuracy,failed\n";
  for (std::size_t i = 0; i < r.fold_accuracy.size(); ++i) {
    out << i + 1 << ',' << text::format_double(r.fold_accuracy[i]) << ',' << (r.fold_failed[i] ? 1 : 0) << '\n';
  }
  out << "mean," << text::format_double(r.mean) << ",\n";
  out << "stddev," << text::format_double(r.stddev) << ",\n";
}

std::string describe(const svm::KernelSpec& k, double nu) {
  std::string s = std::string(svm::to_string(k.kind)) + " nu=" + text::format_fixed(nu, 2);
  if (k.uses_coef0()) s += " coef0=" + text::format_fixed(k.coef0, 2);
  if (k.uses_degree()) s += " degree=" + text::format_fixed(k.degree, 2);
  if (k.uses_gamma()) s += " gamma=" + text::format_fixed(k.gamma, 2);
  return s;
}

void print_cv(const svm::KernelSpec& k, double nu, const eval::CvReport& r) {
  std::cerr << describe(k, nu) << ": accuracy " << text::format_fixed(100.0 * r.mean, 2) << "% (sigma "
            << text::format_fixed(100.0 * r.stddev, 2) << ", " << r.failures() << " failed folds)\n";
}

struct Tuned {
  ga::Hyperparameters params;
  double fitness = 0.0;
};

Tuned run_tuning(const eval::LabeledDataset& data, const RunConfig& cfg, const std::string& log_path) {
  Tuned best;
  bool have = false;
  with_output(log_path, [&](std::ostream& log) {
    ga::write_log_header(log);
    for (int restart = 0; restart < cfg.ga_restarts; ++restart) {
      const ga::GaConfig gc = cfg.ga_config(static_cast<std::uint64_t>(restart));
      const ga::EvolutionResult r = ga::evolve(gc, data, cfg.tune_kernel);
      ga::write_log(log, r, cfg.tune_kernel, gc.ranges, restart);
      std::cerr << "GA run " << restart + 1 << "/" << cfg.ga_restarts << ": best fitness "
                << text::format_fixed(r.best_fitness, 4) << " after " << r.evaluations << " evaluations\n";
      if (!have || r.best_fitness > best.fitness) {
        best = {ga::decode(r.best, cfg.tune_kernel, gc.ranges), r.best_fitness};
        have = true;
      }
    }
  });
  return best;
}

void write_params(std::ostream& out, const ga::Hyperparameters& h) {
  const svm::KernelSpec k = h.kernel();
  out << "kernel = " << svm::to_string(k.kind) << '\n';
  out << "nu = " << text::format_double(h.nu) << '\n';
  out << "gamma = " << text::format_double(k.gamma) << '\n';
  out << "coef0 = " << text::format_double(k.coef0) << '\n';
  out << "degree = " << text::format_double(k.degree) << '\n';
}

svm::SvmModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model " + path);
  return svm::load_model(in);
}

void save_model_file(const std::string& path, const svm::SvmModel& m) {
  with_output(path, [&](std::ostream& out) { svm::save_model(out, m); });
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string mode = "images";
  int positives = 100;
  int negatives = 100;
  double seconds = 60.0;
  double fps = 15.0;
  int noise = 4;
  int width = 160;
  int height = 120;
  double missing = 0.03;
  std::uint64_t seed = 7;
  bool masks = false;
};

void cmd_synth(const SynthArgs& a) {
  std::vector<synth::SyntheticFrame> frames;
  if (a.mode == "images") {
    synth::DatasetOptions o;
    o.positives = a.positives;
    o.negatives = a.negatives;
    o.frame_w = a.width;
    o.frame_h = a.height;
    o.noise = a.noise;
    o.fps = a.fps;
    o.seed = a.seed;
    frames = synth::make_dataset(o);
  } else if (a.mode == "video") {
    synth::VideoOptions o;
    o.seconds = a.seconds;
    o.fps = a.fps;
    o.frame_w = a.width;
    o.frame_h = a.height;
    o.noise = a.noise;
    o.missing_face_rate = a.missing;
    o.seed = a.seed;
    frames = synth::make_video(o);
  } else {
    throw InvalidInput("synth mode must be 'images' or 'video'");
  }

  const fs::path root(a.out);
  fs::create_directories(root / "frames");
  if (a.masks) fs::create_directories(root / "masks");
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05zu", i);
    const fs::path rel = fs::path("frames") / (std::string(name) + ".ppm");
    write_ppm((root / rel).string(), frames[i].scene.frame);
    if (a.masks) write_pbm((root / "masks" / (std::string(name) + ".pbm")).string(), frames[i].scene.truth);
    entries.push_back({rel.string(), frames[i].reported_face, frames[i].scene.label, frames[i].timestamp});
  }
  with_output((root / "manifest.csv").string(), [&](std::ostream& out) { write_manifest(out, entries); });
  std::cerr << "wrote " << frames.size() << " frames to " << root.string() << '\n';
}

struct TrainArgs {
  Common common;
  std::string model;
  std::string report;
  std::string ga_log;
  std::string features;
};

void cmd_train(const TrainArgs& a) {
  const RunConfig cfg = a.common.resolve();
  const IngestResult data = load_dataset(a.common, cfg);
  if (!a.features.empty()) with_output(a.features, [&](std::ostream& out) { write_features_csv(out, data.records); });

  svm::KernelSpec kernel;
  double nu = cfg.nu;
  if (cfg.tuning()) {
    const Tuned t = run_tuning(data.dataset, cfg, a.ga_log.empty() ? (a.model + ".ga.csv") : a.ga_log);
    kernel = t.params.kernel();
    nu = t.params.nu;
  } else {
    kernel = cfg.kernel_spec();
  }
  const eval::CvReport cv =
      eval::cross_validate(data.dataset, kernel, nu, cfg.folds, cfg.cv_seed, cfg.train_options());
  print_cv(kernel, nu, cv);
  if (!a.report.empty()) with_output(a.report, [&](std::ostream& out) { write_cv_report(out, cv); });

  const svm::SvmModel model = svm::train(eval::training_set(data.dataset), kernel, nu, cfg.train_options());
  save_model_file(a.model, model);
  std::cerr << "model: " << model.support_vectors.size() << " support vectors, training accuracy "
            << text::format_fixed(100.0 * eval::accuracy(model, data.dataset), 2) << "%\n";
}

struct TuneArgs {
  Common common;
  std::string log;
  std::string params;
  std::string model;
};

void cmd_tune(const TuneArgs& a) {
  const RunConfig cfg = a.common.resolve();
  const IngestResult data = load_dataset(a.common, cfg);
  const Tuned t = run_tuning(data.dataset, cfg, a.log);
  std::cerr << "best: " << describe(t.params.kernel(), t.params.nu) << " fitness "
            << text::format_fixed(t.fitness, 4) << '\n';
  if (!a.params.empty()) with_output(a.params, [&](std::ostream& out) { write_params(out, t.params); });
  if (!a.model.empty()) {
    save_model_file(a.model, svm::train(eval::training_set(data.dataset), t.params.kernel(), t.params.nu,
                                        cfg.train_options()));
  }
}

struct EvalArgs {
  Common common;
  std::string model;
  std::string report;
  std::string features;
};

void cmd_eval(const EvalArgs& a) {
  const RunConfig cfg = a.common.resolve();
  const IngestResult data = load_dataset(a.common, cfg);
  if (!a.features.empty()) with_output(a.features, [&](std::ostream& out) { write_features_csv(out, data.records); });

  svm::KernelSpec kernel;
  double nu = cfg.nu;
  if (!a.model.empty()) {
    const svm::SvmModel model = load_model_file(a.model);
    kernel = model.kernel;
    nu = model.nu;
    std::cerr << "model accuracy on manifest: " << text::format_fixed(100.0 * eval::accuracy(model, data.dataset), 2)
              << "%\n";
  } else if (cfg.tuning()) {
    throw InvalidInput("eval needs fixed kernel parameters or --model");
  } else {
    kernel = cfg.kernel_spec();
  }
  const eval::CvReport cv =
      eval::cross_validate(data.dataset, kernel, nu, cfg.folds, cfg.cv_seed, cfg.train_options());
  print_cv(kernel, nu, cv);
  with_output(a.report, [&](std::ostream& out) { write_cv_report(out, cv); });
}

struct SweepArgs {
  Common common;
  std::string model;
  std::string out;
};

void cmd_sweep(const SweepArgs& a) {
  const RunConfig cfg = a.common.resolve();
  const svm::SvmModel model = load_model_file(a.model);
  const IngestResult data = load_dataset(a.common, cfg);
  std::vector<eval::FrameVerdict> predicted, truth;
  for (const auto& r : data.records) {
    if (r.status != FrameStatus::Ok || !r.label) continue;
    predicted.push_back({r.timestamp, model.predict(eval::as_vector(r.features))});
    truth.push_back({r.timestamp, *r.label});
  }
  if (predicted.empty()) throw InvalidInput("sweep needs labeled usable frames");
  const auto truth_periods = eval::ground_truth_periods(truth, cfg.window);
  const auto rows = eval::threshold_sweep(predicted, truth_periods, cfg.thresholds, cfg.window);
  auto opt = [](const std::optional<double>& v) { return v ? text::format_double(*v) : std::string("NA"); };
  with_output(a.out, [&](std::ostream& out) {
    out << "threshold,acc_with,acc_without,acc_general\n";
    for (const auto& r : rows) {
      out << text::format_double(r.threshold) << ',' << opt(r.acc_with) << ',' << opt(r.acc_without) << ','
          << text::format_double(r.acc_general) << '\n';
    }
  });
}

struct StreamArgs {
  Common common;
  std::string model;
  std::string status;
  std::string verdicts;
  std::string alarms;
  bool realtime = false;
};

void cmd_stream(const StreamArgs& a) {
  const RunConfig cfg = a.common.resolve();
  const svm::SvmModel model = load_model_file(a.model);
  const auto entries = read_manifest_file(a.common.manifest);
  stream::StreamOptions opt = stream::StreamOptions::from(cfg);
  opt.realtime = a.realtime;
  opt.detector_command = a.common.detector;

  std::unique_ptr<std::ofstream> status_file;
  std::ostream* status_out = &std::cout;
  if (!a.status.empty() && a.status != "-") {
    status_file = std::make_unique<std::ofstream>(a.status, std::ios::binary);
    if (!*status_file) throw IoError("cannot write " + a.status);
    status_out = status_file.get();
  }
  stream::StreamCallbacks cb;
  cb.on_status = [&](const stream::StatusLine& s) {
    stream::write_status_line(*status_out, s);
    if (a.realtime) status_out->flush();
  };
  const stream::StreamSummary summary = stream::run_stream(entries, model, opt, cb);

  if (!a.verdicts.empty()) {
    with_output(a.verdicts, [&](std::ostream& out) {
      stream::write_verdict_header(out);
      for (const auto& v : summary.periods) stream::write_verdict_row(out, v);
    });
  }
  if (!a.alarms.empty()) {
    with_output(a.alarms, [&](std::ostream& out) {
      out << "frame_id,timestamp,fraction\n";
      for (const auto& al : summary.alarms) {
        out << al.frame_id << ',' << text::format_double(al.timestamp) << ',' << text::format_double(al.fraction)
            << '\n';
      }
    });
  }
  std::cerr << "stream: " << summary.frames_admitted << " of " << summary.frames_total << " frames admitted ("
            << summary.frames_dropped << " throttled), " << summary.frames_not_found << " face not found, "
            << summary.periods.size() << " periods, " << summary.alarms.size() << " alarms\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cellguard - detect hand-held phone use in frontal driver frames"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic frame set and manifest");
  synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
  synth_cmd->add_option("--mode", synth_args.mode, "images (balanced stills) or video (timed sequence)");
  synth_cmd->add_option("--positives", synth_args.positives, "frames with phone (images mode)");
  synth_cmd->add_option("--negatives", synth_args.negatives, "frames without phone (images mode)");
  synth_cmd->add_option("--seconds", synth_args.seconds, "sequence length (video mode)");
  synth_cmd->add_option("--fps", synth_args.fps, "frame rate of the timestamps");
  synth_cmd->add_option("--noise", synth_args.noise, "per-channel pixel noise amplitude");
  synth_cmd->add_option("--width", synth_args.width, "frame width");
  synth_cmd->add_option("--height", synth_args.height, "frame height");
  synth_cmd->add_option("--missing-face-rate", synth_args.missing, "share of frames without a face box (video)");
  synth_cmd->add_option("--seed", synth_args.seed, "generator seed");
  synth_cmd->add_flag("--masks", synth_args.masks, "also write ground-truth PBM masks");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model (fixed parameters or --kernel tune)");
  add_common(train_cmd, train_args.common);
  train_cmd->add_option("--model", train_args.model, "model output file")->required();
  train_cmd->add_option("--report", train_args.report, "cross-validation report CSV");
  train_cmd->add_option("--ga-log", train_args.ga_log, "GA log CSV in tune mode");
  train_cmd->add_option("--features", train_args.features, "feature CSV output");

  TuneArgs tune_args;
  auto* tune_cmd = app.add_subcommand("tune", "search kernel parameters with the genetic algorithm");
  add_common(tune_cmd, tune_args.common);
  tune_cmd->add_option("--log", tune_args.log, "GA log CSV (default stdout)");
  tune_cmd->add_option("--params", tune_args.params, "best parameters as a config file");
  tune_cmd->add_option("--model", tune_args.model, "train and save a model with the best parameters");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "cross-validate parameters and/or score a model");
  add_common(eval_cmd, eval_args.common);
  eval_cmd->add_option("--model", eval_args.model, "model to score; its parameters drive the cross-validation");
  eval_cmd->add_option("--report", eval_args.report, "cross-validation report CSV (default stdout)");
  eval_cmd->add_option("--features", eval_args.features, "feature CSV output");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "period accuracy for a grid of vote thresholds");
  add_common(sweep_cmd, sweep_args.common);
  sweep_cmd->add_option("--model", sweep_args.model, "trained model")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep_args.out, "sweep CSV (default stdout)");

  StreamArgs stream_args;
  auto* stream_cmd = app.add_subcommand("stream", "throttled multi-worker classification with status levels");
  add_common(stream_cmd, stream_args.common);
  stream_cmd->add_option("--model", stream_args.model, "trained model")->required()->check(CLI::ExistingFile);
  stream_cmd->add_option("--status", stream_args.status, "per-frame status lines (default stdout)");
  stream_cmd->add_option("--verdicts", stream_args.verdicts, "period verdict CSV");
  stream_cmd->add_option("--alarms", stream_args.alarms, "alarm CSV");
  stream_cmd->add_flag("--realtime", stream_args.realtime, "admit frames at their timestamps in wall-clock time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*synth_cmd) cmd_synth(synth_args);
    if (*train_cmd) cmd_train(train_args);
    if (*tune_cmd) cmd_tune(tune_args);
    if (*eval_cmd) cmd_eval(eval_args);
    if (*sweep_cmd) cmd_sweep(sweep_args);
    if (*stream_cmd) cmd_stream(stream_args);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << " (KKT violation " << e.kkt_violation() << ")\n";
    return kExitSolver;
  } catch (const InfeasibleNu& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}
