#include "radpose/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "radpose/error.hpp"

namespace radpose {

// ---------------------------------------------------------------------------
// SplitSpec.

void SplitSpec::validate() const {
  require(!train.empty(), ErrorKind::kConfig, "split needs at least one training subject");
  require(stride >= 1, ErrorKind::kConfig, "split stride must be >= 1");
  std::set<int> seen;
  auto claim = [&](int s) {
    require(s >= 0, ErrorKind::kConfig, "subject ids must be non-negative");
    require(seen.insert(s).second, ErrorKind::kConfig,
            "subject " + std::to_string(s) + " appears in more than one split");
  };
  for (int s : train) claim(s);
  if (calib >= 0) claim(calib);
  for (int s : test) claim(s);
}

namespace {

std::vector<int> parse_ids(const std::string& text) {
  std::vector<int> ids;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      ids.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      fail(ErrorKind::kConfig, "bad subject id '" + tok + "'");
    }
  }
  return ids;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? "," : "") + std::to_string(ids[i]);
  return out;
}

}  // namespace

SplitSpec SplitSpec::parse(const std::string& text) {
  SplitSpec spec;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig, "bad split field '" + part + "'");
    const std::string key = part.substr(0, eq), value = part.substr(eq + 1);
    if (key == "train") {
      spec.train = parse_ids(value);
    } else if (key == "test") {
      spec.test = parse_ids(value);
    } else if (key == "calib") {
      const auto ids = parse_ids(value);
      require(ids.size() == 1, ErrorKind::kConfig, "split needs exactly one calib subject");
      spec.calib = ids.front();
    } else if (key == "stride") {
      spec.stride = static_cast<std::size_t>(std::stoul(value));
    } else {
      fail(ErrorKind::kConfig, "unknown split field '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string SplitSpec::to_string() const {
  std::string out = "train=" + join_ids(train);
  if (calib >= 0) out += ";calib=" + std::to_string(calib);
  out += ";test=" + join_ids(test);
  if (stride != 1) out += ";stride=" + std::to_string(stride);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset.

Dataset Dataset::from_recordings(const std::vector<Recording>& recordings, const RadarDims& dims) {
  dims.validate();
  Dataset ds;
  ds.dims_ = dims;
  for (const auto& rec : recordings) {
    const RadarDims& rd = rec.cube.dims;
    require(rd.azimuth == dims.azimuth && rd.elevation == dims.elevation &&
                rd.samples == dims.samples && rd.chirps == dims.chirps,
            ErrorKind::kShapeMismatch,
            "recording cube " + shape_string(rd.cube_shape()) + " does not match configured dims");
    require(rec.poses.size() == rd.frames, ErrorKind::kShapeMismatch,
            "recording has " + std::to_string(rec.poses.size()) + " poses for " +
                std::to_string(rd.frames) + " frames");
    Sequence seq;
    seq.subject = rec.subject;
    seq.activity = rec.activity;
    seq.poses = rec.poses;
    seq.frames.reserve(rd.frames);
    for (std::size_t t = 0; t < rd.frames; ++t)
      seq.frames.push_back(preprocess_frame(rec.cube.frame(t), dims));
    ds.sequences_.push_back(std::move(seq));
  }
  return ds;
}

std::vector<Dataset::WindowRef> Dataset::windows(const std::vector<int>& subjects,
                                                 std::size_t stride) const {
  require(stride >= 1, ErrorKind::kInvalidArgument, "window stride must be >= 1");
  std::vector<WindowRef> out;
  for (std::size_t s = 0; s < sequences_.size(); ++s) {
    const auto& seq = sequences_[s];
    if (std::find(subjects.begin(), subjects.end(), seq.subject) == subjects.end()) continue;
    for (std::size_t last = dims_.frames - 1; last < seq.frames.size(); last += stride)
      out.push_back({s, last});
  }
  return out;
}

ProcessedTensor Dataset::input(const WindowRef& w) const {
  const auto& seq = sequences_.at(w.sequence);
  require(w.last_frame < seq.frames.size() && w.last_frame + 1 >= dims_.frames,
          ErrorKind::kInvalidArgument, "window out of range");
  const std::size_t first = w.last_frame + 1 - dims_.frames;
  return assemble_window(std::span<const Tensor>(seq.frames).subspan(first, dims_.frames));
}

const Pose& Dataset::label(const WindowRef& w) const {
  return sequences_.at(w.sequence).poses.at(w.last_frame);
}

std::string Dataset::window_id(const WindowRef& w) const {
  const auto& seq = sequences_.at(w.sequence);
  return "s" + std::to_string(seq.subject) + "_a" + std::to_string(seq.activity) + "_f" +
         std::to_string(w.last_frame);
}

// ---------------------------------------------------------------------------
// Training.

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorKind::kConfig, "epochs must be >= 1");
  require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  require(std::isfinite(lr) && lr >= 0.0, ErrorKind::kConfig, "lr must be finite and >= 0");
  require(patience >= 1, ErrorKind::kConfig, "patience must be >= 1");
  require(std::isfinite(grad_clip) && grad_clip >= 0.0, ErrorKind::kConfig,
          "grad_clip must be finite and >= 0");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, ErrorKind::kConfig,
          "weight_decay must be finite and >= 0");
  weights.validate();
  model.validate();
}

Pose mean_pose(const Dataset& data, const std::vector<Dataset::WindowRef>& windows) {
  require(!windows.empty(), ErrorKind::kInvalidArgument, "mean pose of no windows");
  std::vector<double> acc(kPoseDims, 0.0);
  for (const auto& w : windows) {
    const auto flat = data.label(w).flat();
    for (std::size_t d = 0; d < kPoseDims; ++d) acc[d] += flat[d];
  }
  for (double& v : acc) v /= static_cast<double>(windows.size());
  return Pose::from_flat(acc);
}

namespace {

double pose_error(std::span<const double> pred, const Pose& truth) {
  const auto t = truth.flat();
  double total = 0.0;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    double s = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      const double d = pred[3 * k + a] - t[3 * k + a];
      s += d * d;
    }
    total += std::sqrt(s);
  }
  return total / static_cast<double>(kNumKeypoints);
}

double input_rms(const Dataset& data, const std::vector<Dataset::WindowRef>& windows,
                 std::size_t max_windows) {
  const std::size_t n = max_windows == 0 ? windows.size() : std::min(max_windows, windows.size());
  double ss = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = windows[i * windows.size() / n];
    const ProcessedTensor x = data.input(w);
    ss += sum_squares(x.data);
    count += x.data.numel();
  }
  const double rms = std::sqrt(ss / static_cast<double>(count));
  return rms > 0.0 ? rms : 1.0;
}

struct ValStats {
  double nll = 0.0;
  double mpjpe = 0.0;
};

ValStats validate_model(const PoseModel& model, const Dataset& data,
                        const std::vector<Dataset::WindowRef>& windows, std::uint64_t seed,
                        const LossWeights& weights) {
  ValStats st;
  if (windows.empty()) return st;
  const auto records = evaluate(model, data, windows, seed);
  for (const auto& r : records) {
    const auto y = r.truth.flat();
    double nll = 0.0;
    switch (r.pred.likelihood) {
      case Likelihood::kGaussDiag: nll = nll_gauss_diag(y, r.pred.mean, r.pred.dispersion, weights.gamma); break;
      case Likelihood::kGaussCov: nll = nll_gauss_cov(y, r.pred.mean, r.pred.chol, weights.gamma); break;
      case Likelihood::kLaplace: nll = nll_laplace(y, r.pred.mean, r.pred.dispersion, weights.gamma); break;
    }
    st.nll += nll;
    st.mpjpe += pose_error(r.pred.mean, r.truth);
  }
  st.nll /= static_cast<double>(records.size());
  st.mpjpe /= static_cast<double>(records.size());
  return st;
}

}  // namespace

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  os << "epoch,train_loss,val_loss,val_mpjpe\n";
  char buf[128];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", h.epoch, h.train_loss, h.val_loss,
                  h.val_mpjpe);
    os << buf;
  }
}

TrainResult train(const Dataset& data, const SplitSpec& split, const TrainConfig& config) {
  config.validate();
  split.validate();
  require(data.dims().processed_shape() == config.model.dims.processed_shape() &&
              data.dims().frames == config.model.dims.frames,
          ErrorKind::kShapeMismatch, "dataset dims do not match the model config");
  const auto train_windows = data.windows(split.train, split.stride);
  require(!train_windows.empty(), ErrorKind::kInvalidArgument, "no training windows");
  // Test subjects never steer training; without a calibration subject the
  // last epoch is kept.
  const auto val_windows = split.calib >= 0 ? data.windows({split.calib}, split.stride)
                                            : std::vector<Dataset::WindowRef>{};

  ModelConfig mc = config.model;
  mc.input_scale = 1.0 / input_rms(data, train_windows, config.scale_windows);
  PoseModel model(mc, config.seed);
  const auto mean = mean_pose(data, train_windows).flat();
  model.set_output_bias(mean);

  ad::ParamStore best = model.params();
  TrainResult result{PoseModel(mc, best), {}, 0, false, {}};
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const ad::AdamConfig adam{config.lr, 0.9, 0.999, 1e-8, config.weight_decay};
  const Rng root(config.seed);
  const std::uint64_t val_seed = mix_seed(config.seed, 0x76616cULL);

  auto save_best = [&] {
    if (config.out_dir.empty()) return;
    std::filesystem::create_directories(config.out_dir);
    result.model.save(config.out_dir / "checkpoint.bin", "split=" + split.to_string() + "\n");
    write_history_csv(config.out_dir / "history.csv", result.history);
  };

  std::vector<std::size_t> order(train_windows.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng epoch_rng = root.derive(epoch);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[epoch_rng.below(i)]);
    const std::size_t n_used = config.windows_per_epoch == 0
                                   ? order.size()
                                   : std::min(config.windows_per_epoch, order.size());

    double loss_sum = 0.0;
    std::string failure;
    for (std::size_t start = 0; start < n_used && failure.empty(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, n_used);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      model.params().zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const auto& w = train_windows[order[i]];
        ad::Tape tape;
        LatentVars lat = model.encode(tape, data.input(w), true);
        const Tensor noise = draw_latent_noise(mc.latent_family, mc.n_samples, mc.d_lat, epoch_rng);
        ad::Var z = model.sample_latent(tape, lat, noise);
        PredictiveVars pred = model.moments(tape, model.decode(tape, z, true));
        const auto y = data.label(w).flat();
        auto loss = ad_loss::total_loss(pred, lat, Tensor::row(y), config.weights);
        const double v = loss.total.item();
        if (!std::isfinite(v)) {
          failure = "non-finite training loss at epoch " + std::to_string(epoch) + ", window " +
                    data.window_id(w);
          break;
        }
        loss_sum += v;
        tape.backward(ad::scale(loss.total, inv_b));
      }
      if (!failure.empty()) break;
      try {
        if (config.grad_clip > 0.0) model.params().clip_grad_norm(config.grad_clip);
        model.params().adam_step(adam);
      } catch (const Error& e) {
        failure = e.what();
      }
    }
    if (!failure.empty()) {
      result.aborted = true;
      result.abort_reason = failure;
      save_best();
      return result;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n_used);
    const ValStats vs = validate_model(model, data, val_windows, val_seed, config.weights);
    rec.val_loss = vs.nll;
    rec.val_mpjpe = vs.mpjpe;
    result.history.push_back(rec);
    if (config.verbose)
      std::fprintf(stderr, "epoch %zu train %.4f val_nll %.4f val_mpjpe %.4f\n", epoch,
                   rec.train_loss, rec.val_loss, rec.val_mpjpe);
    if (!std::isfinite(vs.nll)) {
      result.aborted = true;
      result.abort_reason = "non-finite validation loss at epoch " + std::to_string(epoch);
      save_best();
      return result;
    }
    if (vs.nll < best_val || val_windows.empty()) {
      best_val = vs.nll;
      since_best = 0;
      result.best_epoch = epoch;
      result.model.params().copy_values_from(model.params());
    } else if (++since_best >= config.patience) {
      break;
    }
    save_best();
  }
  save_best();
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation.

std::size_t thread_count_from_env() {
  const char* env = std::getenv("RADPOSE_THREADS");
  if (env == nullptr) return 1;
  const long v = std::strtol(env, nullptr, 10);
  return v >= 1 ? static_cast<std::size_t>(v) : 1;
}

std::vector<EvalRecord> evaluate(const PoseModel& model, const Dataset& data,
                                 const std::vector<Dataset::WindowRef>& windows,
                                 std::uint64_t eval_seed, bool keep_samples, std::size_t threads) {
  std::vector<EvalRecord> out(windows.size());
  if (windows.empty()) return out;
  require(data.dims().processed_shape() == model.config().dims.processed_shape(),
          ErrorKind::kShapeMismatch, "dataset dims do not match the checkpoint");
  if (threads == 0) threads = thread_count_from_env();
  threads = std::min(threads, windows.size());

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& w = windows[i];
      Rng rng(mix_seed(eval_seed, i));
      EvalRecord& r = out[i];
      r.window_id = data.window_id(w);
      r.subject = data.sequences()[w.sequence].subject;
      r.activity = data.sequences()[w.sequence].activity;
      r.pred = model.predict(data.input(w), rng, keep_samples);
      r.truth = data.label(w);
    }
  };
  if (threads <= 1) {
    work(0, windows.size());
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t b = t * windows.size() / threads, e = (t + 1) * windows.size() / threads;
    pool.emplace_back([&, t, b, e] {
      try {
        work(b, e);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace radpose
