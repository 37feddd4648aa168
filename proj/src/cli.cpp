#include "radpose/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "radpose/calib_metrics.hpp"
#include "radpose/config.hpp"
#include "radpose/latent_activity.hpp"

namespace radpose {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFileNotFound: return kExitMissingFile;
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kShapeMismatch: return kExitShape;
    default: return kExitFailure;
  }
}

namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const fs::path& file) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  require(!s.empty() && end == s.c_str() + s.size(), ErrorKind::kInvalidArgument,
          file.string() + ": bad number '" + s + "'");
  return v;
}

void require_file(const fs::path& path) {
  require(fs::exists(path), ErrorKind::kFileNotFound, "no such file: " + path.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  return out;
}

std::string recording_stem(const Recording& r) {
  return "rec_s" + std::to_string(r.subject) + "_a" + std::to_string(r.activity);
}

}  // namespace

void write_recordings(const fs::path& dir, const std::vector<Recording>& recordings) {
  fs::create_directories(dir);
  auto manifest = open_out(dir / "manifest.csv");
  manifest << "stem,subject,activity,frames\n";
  for (const auto& r : recordings) {
    const std::string stem = recording_stem(r);
    write_cube(r.cube, dir / (stem + ".rpc1"));
    write_pose_csv(dir / (stem + ".poses.csv"), r.poses);
    manifest << stem << ',' << r.subject << ',' << r.activity << ',' << r.poses.size() << '\n';
  }
}

std::vector<Recording> read_recordings(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.csv";
  require_file(manifest_path);
  std::ifstream in(manifest_path);
  std::string line;
  std::getline(in, line);
  require(line == "stem,subject,activity,frames", ErrorKind::kInvalidArgument,
          manifest_path.string() + ": unexpected header");
  std::vector<Recording> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == 4, ErrorKind::kInvalidArgument,
            manifest_path.string() + ": expected 4 columns in '" + line + "'");
    Recording r;
    r.subject = std::stoi(cells[1]);
    r.activity = std::stoi(cells[2]);
    const fs::path cube_path = dir / (cells[0] + ".rpc1");
    const fs::path pose_path = dir / (cells[0] + ".poses.csv");
    require_file(cube_path);
    require_file(pose_path);
    r.cube = read_cube(cube_path);
    r.poses = read_pose_csv(pose_path);
    require(r.poses.size() == r.cube.dims.frames && r.poses.size() == std::stoul(cells[3]),
            ErrorKind::kShapeMismatch,
            cells[0] + ": cube has " + std::to_string(r.cube.dims.frames) + " frames, poses " +
                std::to_string(r.poses.size()));
    out.push_back(std::move(r));
  }
  require(!out.empty(), ErrorKind::kInvalidArgument, manifest_path.string() + " lists no recordings");
  return out;
}

void write_predictions(const fs::path& path, const std::vector<PredictionRow>& rows) {
  auto out = open_out(path);
  out << "window_id,subject,activity,split,likelihood";
  for (const char* col : {"mean", "disp", "truth"})
    for (std::size_t d = 0; d < kPoseDims; ++d) out << ',' << col << '_' << d;
  out << '\n';
  for (const auto& row : rows) {
    const auto& r = row.record;
    out << r.window_id << ',' << r.subject << ',' << r.activity << ',' << row.split << ','
        << to_string(r.pred.likelihood);
    for (double v : r.pred.mean) out << ',' << g17(v);
    for (double v : r.pred.dispersion) out << ',' << g17(v);
    for (double v : r.truth.flat()) out << ',' << g17(v);
    out << '\n';
  }
}

std::vector<PredictionRow> read_predictions(const fs::path& path) {
  require_file(path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  require(split_csv_line(line).size() == 5 + 3 * kPoseDims, ErrorKind::kShapeMismatch,
          path.string() + ": header does not describe " + std::to_string(kPoseDims) + "-dim poses");
  std::vector<PredictionRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == 5 + 3 * kPoseDims, ErrorKind::kShapeMismatch,
            path.string() + ": row has " + std::to_string(cells.size()) + " columns");
    PredictionRow row;
    row.split = cells[3];
    auto& r = row.record;
    r.window_id = cells[0];
    r.subject = std::stoi(cells[1]);
    r.activity = std::stoi(cells[2]);
    r.pred.likelihood = parse_likelihood(cells[4]);
    std::vector<double> truth(kPoseDims);
    r.pred.mean.resize(kPoseDims);
    r.pred.dispersion.resize(kPoseDims);
    for (std::size_t d = 0; d < kPoseDims; ++d) {
      r.pred.mean[d] = to_double(cells[5 + d], path);
      r.pred.dispersion[d] = to_double(cells[5 + kPoseDims + d], path);
      truth[d] = to_double(cells[5 + 2 * kPoseDims + d], path);
    }
    r.truth = Pose::from_flat(truth);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string split;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) {
    cfg = RunConfig::load(c.config);
  } else {
    cfg = RunConfig::parse("", "defaults");
  }
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  if (!c.split.empty()) cfg.set("split", c.split);
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const Common& c, const RunConfig& cfg) {
  const fs::path dir(c.out);
  fs::create_directories(dir);
  auto out = open_out(dir / "config.cfg");
  out << cfg.dump();
  return dir;
}

void check_dims(const RadarDims& expected, const RadarDims& got, const std::string& what) {
  const bool same = expected.frames == got.frames && expected.azimuth == got.azimuth &&
                    expected.elevation == got.elevation && expected.samples == got.samples &&
                    expected.chirps == got.chirps;
  require(same, ErrorKind::kShapeMismatch,
          what + " dims " + shape_string(got.cube_shape()) + " differ from configured " +
              shape_string(expected.cube_shape()));
}

Dataset load_dataset(const fs::path& dir, const RunConfig& cfg) {
  auto recordings = read_recordings(dir);
  for (const auto& r : recordings) {
    RadarDims got = r.cube.dims;
    got.frames = cfg.radar.dims.frames;
    check_dims(cfg.radar.dims, got, "recording " + recording_stem(r));
  }
  return Dataset::from_recordings(recordings, cfg.radar.dims);
}

// Split from the checkpoint metadata unless given on the command line.
SplitSpec resolve_split(const Common& c, const RunConfig& cfg, const std::string& meta) {
  if (c.split.empty()) {
    std::istringstream in(meta);
    std::string line;
    while (std::getline(in, line))
      if (line.rfind("split=", 0) == 0) return SplitSpec::parse(line.substr(6));
  }
  return SplitSpec::parse(cfg.split);
}

void cmd_simulate(const Common& c, std::ostream& out) {
  const RunConfig cfg = load_config(c);
  const fs::path dir = prepare_out(c, cfg);
  Rng rng(cfg.seed);
  const auto recordings = simulate_recordings(cfg.sim, cfg.radar, rng);
  write_recordings(dir, recordings);
  out << "simulated " << recordings.size() << " recordings into " << dir.string() << '\n';
}

void cmd_preprocess(const Common& c, const std::string& input, std::ostream& out) {
  const RunConfig cfg = load_config(c);
  require_file(input);
  RadarCube cube = read_cube(input);
  RadarDims dims = cfg.radar.dims;
  require(cube.dims.frames >= dims.frames, ErrorKind::kShapeMismatch,
          input + ": fewer frames than one window");
  RadarDims got = cube.dims;
  got.frames = dims.frames;
  check_dims(dims, got, input);
  dims.frames = cube.dims.frames;
  cube.dims = dims;
  const fs::path dir = prepare_out(c, cfg);
  std::vector<Tensor> frames;
  for (std::size_t t = 0; t < cube.dims.frames; ++t) frames.push_back(preprocess_frame(cube.frame(t), dims));
  std::vector<std::pair<std::string, Tensor>> entries;
  const std::size_t window = cfg.radar.dims.frames;
  for (std::size_t last = window - 1; last < frames.size(); ++last) {
    const std::span<const Tensor> span(frames.data() + last + 1 - window, window);
    entries.emplace_back("window" + std::to_string(last), assemble_window(span).data);
  }
  ad::write_tensor_file(dir / "processed.bin", entries, "source=" + fs::path(input).filename().string());
  out << "wrote " << entries.size() << " processed windows to " << (dir / "processed.bin").string() << '\n';
}

void cmd_train(const Common& c, const std::string& data_dir, bool refit, std::ostream& out) {
  RunConfig cfg = load_config(c);
  const Dataset data = load_dataset(data_dir, cfg);
  const fs::path dir = prepare_out(c, cfg);
  TrainConfig tc = cfg.train;
  tc.out_dir = dir;
  const SplitSpec split = SplitSpec::parse(cfg.split);
  TrainResult result = train(data, split, tc);
  if (result.aborted) fail(ErrorKind::kNumerical, "training aborted: " + result.abort_reason);
  out << "trained " << result.history.size() << " epochs, best epoch " << result.best_epoch << '\n';
  if (!refit || split.calib < 0) return;

  // Retrain from scratch on training plus calibration subjects for the epoch
  // count picked above. The checkpoint keeps the original split so evaluate
  // still predicts the calibration subject, which is now seen in training.
  fs::rename(dir / "history.csv", dir / "history_tuning.csv");
  SplitSpec all = split;
  all.train.push_back(split.calib);
  all.calib = -1;
  tc.epochs = std::max<std::size_t>(1, result.best_epoch);
  tc.out_dir.clear();
  result = train(data, all, tc);
  if (result.aborted) fail(ErrorKind::kNumerical, "refit aborted: " + result.abort_reason);
  result.model.save(dir / "checkpoint.bin", "split=" + split.to_string() + "\nrefit=1\n");
  write_history_csv(dir / "history.csv", result.history);
  out << "refit on " << all.train.size() << " subjects for " << tc.epochs << " epochs\n";
}

void cmd_evaluate(const Common& c, const std::string& data_dir, const std::string& checkpoint,
                  std::ostream& out) {
  const RunConfig cfg = load_config(c);
  require_file(checkpoint);
  std::string meta;
  const PoseModel model = PoseModel::load(checkpoint, &meta);
  check_dims(cfg.radar.dims, model.config().dims, "checkpoint");
  const Dataset data = load_dataset(data_dir, cfg);
  const SplitSpec split = resolve_split(c, cfg, meta);
  const fs::path dir = prepare_out(c, cfg);

  std::vector<PredictionRow> rows;
  auto run = [&](const std::vector<int>& subjects, const std::string& name, std::uint64_t stream) {
    if (subjects.empty()) return;
    const auto windows = data.windows(subjects, split.stride);
    for (auto& rec : evaluate(model, data, windows, mix_seed(cfg.eval_seed, stream)))
      rows.push_back({name, std::move(rec)});
  };
  if (split.calib >= 0) run({split.calib}, "calib", 1);
  run(split.test, "test", 2);
  require(!rows.empty(), ErrorKind::kInvalidArgument, "split selects no calibration or test windows");
  write_predictions(dir / "predictions.csv", rows);
  out << "wrote " << rows.size() << " predictions to " << (dir / "predictions.csv").string() << '\n';
}

std::vector<EvalRecord> rows_of(const std::vector<PredictionRow>& rows, const std::string& split) {
  std::vector<EvalRecord> out;
  for (const auto& r : rows)
    if (r.split == split) out.push_back(r.record);
  return out;
}

void cmd_calibrate(const Common& c, const std::string& eval_dir, std::ostream& out) {
  const RunConfig cfg = load_config(c);
  const fs::path dir = prepare_out(c, cfg);
  const fs::path map_path = dir / "calibration.csv";
  const auto rows = read_predictions(fs::path(eval_dir) / "predictions.csv");
  const auto calib = rows_of(rows, "calib");
  require(!calib.empty(), ErrorKind::kInvalidArgument, "predictions contain no calibration rows");
  std::vector<PredictiveDistribution> preds;
  std::vector<Pose> truths;
  for (const auto& r : calib) {
    preds.push_back(r.pred);
    truths.push_back(r.truth);
  }
  const auto pit = pit_values(preds, truths);
  const auto map = fit_isotonic(pit, quantile_levels(pit, cfg.calib_levels));
  map.write_csv(map_path);
  out << "fit calibration map on " << pit.size() << " values into " << map_path.string() << '\n';
}

void cmd_report(const Common& c, const std::string& eval_dir, const std::string& calib_path,
                std::ostream& out) {
  const RunConfig cfg = load_config(c);
  fs::path map_path(calib_path);
  if (fs::is_directory(map_path)) map_path /= "calibration.csv";
  require_file(map_path);
  const CalibrationMap map = CalibrationMap::read_csv(map_path);
  const auto rows = read_predictions(fs::path(eval_dir) / "predictions.csv");
  const auto test = rows_of(rows, "test");
  require(!test.empty(), ErrorKind::kInvalidArgument, "predictions contain no test rows");
  const fs::path dir = prepare_out(c, cfg);
  const MetricsReport report = compute_report(test, map, cfg.report);
  write_report(dir, report);
  out << "ece " << g17(report.ece_uncalibrated) << " -> " << g17(report.ece_calibrated) << ", mpjpe "
      << g17(report.mpjpe.overall * 100.0) << " cm\n";
}

nlohmann::ordered_json summary_json(const ClassificationReport& r) {
  nlohmann::ordered_json j;
  j["f1"] = r.f1;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["accuracy"] = r.accuracy;
  return j;
}

void cmd_augment_classify(const Common& c, const std::string& data_dir, const std::string& checkpoint,
                          std::ostream& out) {
  const RunConfig cfg = load_config(c);
  require_file(checkpoint);
  std::string meta;
  const PoseModel model = PoseModel::load(checkpoint, &meta);
  check_dims(cfg.radar.dims, model.config().dims, "checkpoint");
  const Dataset data = load_dataset(data_dir, cfg);
  const SplitSpec split = resolve_split(c, cfg, meta);
  const fs::path dir = prepare_out(c, cfg);

  // One latent sequence per recording, one frame per window.
  std::vector<LatentSequence> seqs(data.sequences().size());
  std::vector<int> all_subjects;
  for (const auto& s : data.sequences()) all_subjects.push_back(s.subject);
  for (const auto& w : data.windows(all_subjects, 1)) {
    auto& seq = seqs[w.sequence];
    seq.label = data.sequences()[w.sequence].activity;
    seq.frames.push_back(model.encode(data.input(w)));
  }
  write_latent_cache(dir / "latents.bin", seqs);

  auto in = [](const std::vector<int>& v, int s) { return std::find(v.begin(), v.end(), s) != v.end(); };
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i].frames.empty()) continue;
    const int subject = data.sequences()[i].subject;
    if (in(split.train, subject)) train_idx.push_back(i);
    if (in(split.test, subject)) test_idx.push_back(i);
  }
  require(!train_idx.empty() && !test_idx.empty(), ErrorKind::kInvalidArgument,
          "split leaves no training or test sequences");

  ClassifierConfig cc = cfg.classifier;
  cc.d_lat = model.config().d_lat;
  cc.n_classes = kNumActivities;

  // The mean-only set is repeated aug_samples times so both classifiers take
  // the same number of optimizer steps.
  std::vector<Tensor> mean_x;
  std::vector<int> mean_y;
  for (std::size_t i : train_idx)
    for (std::size_t r = 0; r < cfg.aug_samples; ++r) {
      mean_x.push_back(seqs[i].mean_matrix());
      mean_y.push_back(seqs[i].label);
    }
  Rng rng(mix_seed(cfg.seed, 0xa06));
  const double learned = seqs[train_idx.front()].frames.front().alpha;
  const double centre = cfg.aug_alpha > 0.0 ? cfg.aug_alpha : learned;
  const AugmentationPlan plan = AugmentationPlan::around(
      centre, std::min(cfg.aug_half_width, centre), cfg.aug_extra, cfg.aug_samples, rng);
  std::vector<Tensor> aug_x;
  std::vector<int> aug_y;
  for (std::size_t i : train_idx) {
    Rng seq_rng = rng.derive(i);
    for (auto& z : augment(seqs[i], plan, seq_rng)) {
      aug_x.push_back(std::move(z));
      aug_y.push_back(seqs[i].label);
    }
  }

  std::vector<int> labels;
  for (std::size_t i : test_idx) labels.push_back(seqs[i].label);
  auto score = [&](const std::vector<Tensor>& x, const std::vector<int>& y) {
    ActivityClassifier clf(cc, mix_seed(cfg.seed, 0xc1f));
    clf.fit(x, y);
    std::vector<int> preds;
    for (std::size_t i : test_idx) preds.push_back(clf.classify(seqs[i].mean_matrix()));
    return classification_report(preds, labels, cc.n_classes);
  };
  const auto mean_report = score(mean_x, mean_y);
  const auto aug_report = score(aug_x, aug_y);
  write_confusion_csv(dir / "confusion_mean.csv", mean_report);
  write_confusion_csv(dir / "confusion_augmented.csv", aug_report);

  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["train_sequences"] = train_idx.size();
  j["test_sequences"] = test_idx.size();
  j["alphas"] = plan.alphas;
  j["mean_only"] = summary_json(mean_report);
  j["augmented"] = summary_json(aug_report);
  auto f = open_out(dir / "classification.json");
  f << j.dump(2) << '\n';
  out << "macro F1 mean-only " << g17(mean_report.f1) << ", augmented " << g17(aug_report.f1) << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radar pose estimation with calibrated uncertainty", "radpose"};
  app.require_subcommand(1);
  Common common;
  std::string data_dir, input, checkpoint, calib;
  bool refit = false;

  auto add_common = [&](CLI::App* sub, bool needs_split) {
    sub->add_option("--config", common.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory")->required();
    sub->add_option("--seed", common.seed, "overrides the config seed");
    if (needs_split) sub->add_option("--split", common.split, "train=..;calib=..;test=..[;stride=..]");
  };
  auto* sim = app.add_subcommand("simulate", "synthesize radar recordings and poses");
  add_common(sim, false);
  auto* pre = app.add_subcommand("preprocess", "export processed windows of one recording");
  add_common(pre, false);
  pre->add_option("--in", input, "RPC1 cube")->required();
  auto* tr = app.add_subcommand("train", "train a pose model");
  add_common(tr, true);
  tr->add_option("--data", data_dir, "simulated data directory")->required();
  tr->add_flag("--refit", refit, "retrain on training plus calibration subjects for the best epoch count");
  auto* ev = app.add_subcommand("evaluate", "predict the calibration and test windows");
  add_common(ev, true);
  ev->add_option("--data", data_dir, "simulated data directory")->required();
  ev->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  auto* ca = app.add_subcommand("calibrate", "fit the isotonic recalibration map");
  add_common(ca, false);
  ca->add_option("--in", input, "evaluate output directory")->required();
  auto* re = app.add_subcommand("report", "accuracy, calibration and sharpness tables");
  add_common(re, false);
  re->add_option("--in", input, "evaluate output directory")->required();
  re->add_option("--calib", calib, "calibration.csv or its directory")->required();
  auto* ac = app.add_subcommand("augment-classify", "latent augmentation and activity classification");
  add_common(ac, true);
  ac->add_option("--data", data_dir, "simulated data directory")->required();
  ac->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();

  std::vector<std::string> argv = args;
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // A --config that does not exist is a missing input, not a usage error.
    const std::string what = e.what();
    err << "radpose: " << what << '\n';
    if (what.find("--config") != std::string::npos && what.find("not exist") != std::string::npos)
      return kExitMissingFile;
    return kExitFailure;
  }

  try {
    if (*sim) cmd_simulate(common, out);
    else if (*pre) cmd_preprocess(common, input, out);
    else if (*tr) cmd_train(common, data_dir, refit, out);
    else if (*ev) cmd_evaluate(common, data_dir, checkpoint, out);
    else if (*ca) cmd_calibrate(common, input, out);
    else if (*re) cmd_report(common, input, calib, out);
    else if (*ac) cmd_augment_classify(common, data_dir, checkpoint, out);
  } catch (const Error& e) {
    err << "radpose: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "radpose: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace radpose
