#include "radpose/latent_activity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "radpose/error.hpp"

namespace radpose {

Tensor LatentSequence::mean_matrix() const {
  require(!frames.empty(), ErrorKind::kInvalidArgument, "latent sequence has no frames");
  const std::size_t d = frames.front().dim();
  Tensor out({frames.size(), d});
  for (std::size_t t = 0; t < frames.size(); ++t) {
    require(frames[t].dim() == d, ErrorKind::kShapeMismatch, "latent frames differ in width");
    std::copy(frames[t].mu.begin(), frames[t].mu.end(), out.data().begin() + t * d);
  }
  return out;
}

AugmentationPlan AugmentationPlan::around(double learned_alpha, double half_width,
                                          std::size_t extra, std::size_t samples_per_sequence,
                                          Rng& rng) {
  AugmentationPlan plan;
  plan.samples_per_sequence = samples_per_sequence;
  plan.alphas.push_back(learned_alpha);
  for (std::size_t i = 0; i < extra; ++i)
    plan.alphas.push_back(rng.uniform(learned_alpha - half_width, learned_alpha + half_width));
  plan.validate();
  return plan;
}

void AugmentationPlan::validate() const {
  require(samples_per_sequence > 0, ErrorKind::kInvalidArgument, "samples_per_sequence must be positive");
  require(!alphas.empty(), ErrorKind::kInvalidArgument, "augmentation needs at least one alpha");
  for (double a : alphas)
    require(std::isfinite(a) && a >= 0.0, ErrorKind::kInvalidArgument,
            "augmentation alpha must be finite and non-negative");
}

std::vector<Tensor> augment(const LatentSequence& seq, const AugmentationPlan& plan, Rng& rng) {
  plan.validate();
  require(!seq.frames.empty(), ErrorKind::kInvalidArgument, "latent sequence has no frames");
  for (const auto& f : seq.frames)
    require(f.family == LatentFamily::kGauss, ErrorKind::kUnsupported,
            "latent augmentation is defined for Gaussian latents only");
  const std::size_t len = seq.frames.size();
  const std::size_t d = seq.frames.front().dim();
  for (const auto& f : seq.frames)
    require(f.dim() == d && f.log_var.size() == d, ErrorKind::kShapeMismatch,
            "latent frames differ in width");

  std::vector<Tensor> out;
  out.reserve(plan.samples_per_sequence);
  for (std::size_t j = 0; j < plan.samples_per_sequence; ++j) {
    const double alpha = plan.alphas[j % plan.alphas.size()];
    Tensor z({len, d});
    for (std::size_t t = 0; t < len; ++t) {
      const auto& f = seq.frames[t];
      for (std::size_t i = 0; i < d; ++i)
        z.at(t, i) = f.mu[i] + alpha * rng.normal() * std::exp(0.5 * f.log_var[i]);
    }
    out.push_back(std::move(z));
  }
  return out;
}

void ClassifierConfig::validate() const {
  require(d_lat > 0, ErrorKind::kInvalidArgument, "classifier d_lat must be positive");
  require(n_classes >= 2, ErrorKind::kInvalidArgument, "classifier needs at least two classes");
  require(batch_size > 0, ErrorKind::kInvalidArgument, "classifier batch_size must be positive");
  require(lr > 0.0 && std::isfinite(lr), ErrorKind::kInvalidArgument, "classifier lr must be positive");
}

namespace {

Tensor gaussian_init(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Tensor w({rows, cols});
  for (double& v : w.data()) v = rng.normal() * stddev;
  return w;
}

// [L, 3d] rows (x_{t-1}, x_t, x_{t+1}) with zeros past either end.
Tensor unfold3(const Tensor& seq, std::size_t len) {
  const std::size_t d = seq.dim(1);
  Tensor out({len, 3 * d});
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t k = 0; k < 3; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - 1;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      for (std::size_t i = 0; i < d; ++i) out.at(t, k * d + i) = seq.at(src, i);
    }
  }
  return out;
}

ad::Var cross_entropy(const ad::Var& logits, int label) {
  const auto& v = logits.value().data();
  const double m = *std::max_element(v.begin(), v.end());
  ad::Var lse = ad::add_scalar(ad::log(ad::sum(ad::exp(ad::add_scalar(logits, -m)))), m);
  const auto y = static_cast<std::size_t>(label);
  ad::Var picked = ad::reshape(ad::slice(logits, 1, y, y + 1), {1});
  return ad::sub(lse, picked);
}

}  // namespace

ActivityClassifier::ActivityClassifier(ClassifierConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_lat;
  const std::size_t c = config_.conv_channels();
  params_.add("cls.conv.w", gaussian_init(3 * d, c, std::sqrt(2.0 / (3.0 * d)), rng));
  params_.add("cls.conv.b", Tensor::zeros({1, c}));
  params_.add("cls.out.w", gaussian_init(c, config_.n_classes, 1.0 / std::sqrt(double(c)), rng));
  params_.add("cls.out.b", Tensor::zeros({1, config_.n_classes}));
}

ad::Var ActivityClassifier::logits(ad::Tape& tape, const Tensor& seq, std::size_t valid,
                                   bool train) const {
  require(seq.rank() == 2 && seq.dim(1) == config_.d_lat, ErrorKind::kShapeMismatch,
          "classifier input must be [L, " + std::to_string(config_.d_lat) + "], got " +
              shape_string(seq.shape()));
  const std::size_t len = valid == 0 ? seq.dim(0) : valid;
  require(len >= 1 && len <= seq.dim(0), ErrorKind::kInvalidArgument,
          "valid frame count out of range");
  auto bind = [&](const std::string& name) {
    return train ? tape.param(params_.at(name)) : tape.param(std::as_const(params_).at(name));
  };
  ad::Var x = tape.constant(unfold3(seq, len));
  ad::Var h = ad::relu(ad::linear(x, bind("cls.conv.w"), bind("cls.conv.b")));
  ad::Var pooled = ad::scale(ad::sum_rows(h), 1.0 / static_cast<double>(len));
  return ad::linear(pooled, bind("cls.out.w"), bind("cls.out.b"));
}

std::vector<double> ActivityClassifier::logits(const Tensor& seq, std::size_t valid) const {
  ad::Tape tape(false);
  ad::Var out = logits(tape, seq, valid, false);
  const auto v = out.value().data();
  return {v.begin(), v.end()};
}

int ActivityClassifier::classify(const Tensor& seq, std::size_t valid) const {
  const auto l = logits(seq, valid);
  return static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
}

std::vector<double> ActivityClassifier::fit(const std::vector<Tensor>& seqs,
                                            const std::vector<int>& labels) {
  require(seqs.size() == labels.size(), ErrorKind::kShapeMismatch,
          "classifier inputs and labels differ in count");
  require(!seqs.empty(), ErrorKind::kInvalidArgument, "classifier needs training sequences");
  for (int y : labels)
    require(y >= 0 && static_cast<std::size_t>(y) < config_.n_classes, ErrorKind::kInvalidArgument,
            "class label out of range: " + std::to_string(y));

  Rng rng(mix_seed(config_.seed, 0xc1a55));
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  ad::AdamConfig adam;
  adam.lr = config_.lr;
  std::vector<double> losses;
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      params_.zero_grad();
      ad::Tape tape;
      ad::Var sum;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        ad::Var term = cross_entropy(logits(tape, seqs[idx], 0, true), labels[idx]);
        sum = sum.valid() ? ad::add(sum, term) : term;
      }
      ad::Var loss = ad::scale(sum, inv);
      total += loss.item() * static_cast<double>(end - start);
      tape.backward(loss);
      params_.adam_step(adam);
    }
    losses.push_back(total / static_cast<double>(order.size()));
  }
  return losses;
}

ClassificationReport classification_report(std::span<const int> preds, std::span<const int> labels,
                                           std::size_t n_classes) {
  require(preds.size() == labels.size(), ErrorKind::kShapeMismatch,
          "predictions and labels differ in count");
  require(!preds.empty(), ErrorKind::kInvalidArgument, "classification report needs samples");
  ClassificationReport r;
  r.counts.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (int v : {preds[i], labels[i]})
      require(v >= 0 && static_cast<std::size_t>(v) < n_classes, ErrorKind::kInvalidArgument,
              "class id out of range: " + std::to_string(v));
    ++r.counts[labels[i]][preds[i]];
    if (preds[i] == labels[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());

  r.class_precision.assign(n_classes, 0.0);
  r.class_recall.assign(n_classes, 0.0);
  r.class_f1.assign(n_classes, 0.0);
  r.confusion.assign(n_classes, std::vector<double>(n_classes, 0.0));
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      row += r.counts[c][k];
      col += r.counts[k][c];
    }
    const double tp = static_cast<double>(r.counts[c][c]);
    if (row > 0)
      for (std::size_t k = 0; k < n_classes; ++k)
        r.confusion[c][k] = static_cast<double>(r.counts[c][k]) / static_cast<double>(row);
    if (row == 0 && col == 0) continue;
    ++present;
    const double p = col > 0 ? tp / static_cast<double>(col) : 0.0;
    const double rc = row > 0 ? tp / static_cast<double>(row) : 0.0;
    r.class_precision[c] = p;
    r.class_recall[c] = rc;
    r.class_f1[c] = p + rc > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0;
    r.precision += p;
    r.recall += rc;
    r.f1 += r.class_f1[c];
  }
  r.precision /= static_cast<double>(present);
  r.recall /= static_cast<double>(present);
  r.f1 /= static_cast<double>(present);
  return r;
}

void write_confusion_csv(const std::filesystem::path& path, const ClassificationReport& report) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + path.string());
  const std::size_t n = report.confusion.size();
  out << "true";
  for (std::size_t k = 0; k < n; ++k) out << ",pred_" << k;
  out << '\n';
  char buf[32];
  for (std::size_t c = 0; c < n; ++c) {
    out << c;
    for (std::size_t k = 0; k < n; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", report.confusion[c][k]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void write_latent_cache(const std::filesystem::path& path, const std::vector<LatentSequence>& seqs) {
  std::vector<std::pair<std::string, Tensor>> entries;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const auto& seq = seqs[s];
    require(!seq.frames.empty(), ErrorKind::kInvalidArgument, "latent sequence has no frames");
    const std::size_t len = seq.frames.size();
    const std::size_t d = seq.frames.front().dim();
    const bool gauss = seq.frames.front().family == LatentFamily::kGauss;
    Tensor mu({len, d}), disp({len, d}), alpha({len});
    for (std::size_t t = 0; t < len; ++t) {
      const auto& f = seq.frames[t];
      require(f.dim() == d && f.family == seq.frames.front().family, ErrorKind::kShapeMismatch,
              "latent frames differ in width or family");
      const auto& dv = gauss ? f.log_var : f.b;
      require(dv.size() == d, ErrorKind::kShapeMismatch, "latent dispersion width mismatch");
      for (std::size_t i = 0; i < d; ++i) {
        mu.at(t, i) = f.mu[i];
        disp.at(t, i) = dv[i];
      }
      alpha[t] = f.alpha;
    }
    const std::string p = "seq" + std::to_string(s) + ".";
    entries.emplace_back(p + "mu", std::move(mu));
    entries.emplace_back(p + (gauss ? "log_var" : "b"), std::move(disp));
    entries.emplace_back(p + "alpha", std::move(alpha));
    entries.emplace_back(p + "label", Tensor::scalar(seq.label));
  }
  ad::write_tensor_file(path, entries, "latents=" + std::to_string(seqs.size()));
}

std::vector<LatentSequence> read_latent_cache(const std::filesystem::path& path) {
  const auto entries = ad::read_tensor_file(path);
  std::vector<LatentSequence> seqs;
  std::size_t i = 0;
  while (i < entries.size()) {
    require(i + 4 <= entries.size(), ErrorKind::kTruncatedPayload, "latent cache entry group truncated");
    const std::string p = "seq" + std::to_string(seqs.size()) + ".";
    const auto& [mu_name, mu] = entries[i];
    const auto& [disp_name, disp] = entries[i + 1];
    const auto& alpha = entries[i + 2].second;
    const auto& label = entries[i + 3].second;
    require(mu_name == p + "mu", ErrorKind::kInvalidArgument, "unexpected latent cache entry " + mu_name);
    const bool gauss = disp_name == p + "log_var";
    require(gauss || disp_name == p + "b", ErrorKind::kInvalidArgument,
            "unexpected latent cache entry " + disp_name);
    require(mu.rank() == 2 && disp.shape() == mu.shape() && alpha.numel() == mu.dim(0) &&
                label.numel() == 1,
            ErrorKind::kShapeMismatch, "latent cache shapes inconsistent for " + p);
    LatentSequence seq;
    seq.label = static_cast<int>(label[0]);
    const std::size_t len = mu.dim(0), d = mu.dim(1);
    for (std::size_t t = 0; t < len; ++t) {
      LatentDistribution f;
      f.family = gauss ? LatentFamily::kGauss : LatentFamily::kLaplace;
      f.mu.assign(mu.data().begin() + t * d, mu.data().begin() + (t + 1) * d);
      auto& dv = gauss ? f.log_var : f.b;
      dv.assign(disp.data().begin() + t * d, disp.data().begin() + (t + 1) * d);
      f.alpha = alpha[t];
      seq.frames.push_back(std::move(f));
    }
    seqs.push_back(std::move(seq));
    i += 4;
  }
  return seqs;
}

std::vector<LatentSequence> synthetic_latents(const SyntheticLatentSpec& spec, std::size_t per_class,
                                              Rng& rng, std::uint64_t prototype_seed) {
  require(spec.informative_dims <= spec.d_lat && spec.min_len >= 1 && spec.min_len <= spec.max_len,
          ErrorKind::kInvalidArgument, "inconsistent synthetic latent spec");
  // Prototypes come from their own stream so train and test sets share them.
  Rng proto_rng(prototype_seed);
  std::vector<std::vector<double>> protos(spec.n_classes, std::vector<double>(spec.informative_dims));
  for (auto& p : protos)
    for (double& v : p) v = proto_rng.normal() * spec.class_separation;

  const double info_lv = 2.0 * std::log(spec.informative_sigma);
  const double nuis_lv = 2.0 * std::log(spec.nuisance_sigma);
  std::vector<LatentSequence> out;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    for (std::size_t n = 0; n < per_class; ++n) {
      LatentSequence seq;
      seq.label = static_cast<int>(c);
      const std::size_t len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
      std::vector<double> centre(spec.d_lat);
      for (std::size_t i = 0; i < spec.d_lat; ++i)
        centre[i] = i < spec.informative_dims
                        ? protos[c][i] + rng.normal() * spec.informative_jitter
                        : rng.normal() * spec.nuisance_offset;
      for (std::size_t t = 0; t < len; ++t) {
        LatentDistribution f;
        f.family = LatentFamily::kGauss;
        f.alpha = spec.alpha;
        f.mu.resize(spec.d_lat);
        f.log_var.resize(spec.d_lat);
        for (std::size_t i = 0; i < spec.d_lat; ++i) {
          f.mu[i] = centre[i] + rng.normal() * spec.frame_noise;
          f.log_var[i] = i < spec.informative_dims ? info_lv : nuis_lv;
        }
        seq.frames.push_back(std::move(f));
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace radpose
