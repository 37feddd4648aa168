#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "radpose/autodiff.hpp"
#include "radpose/pose_model.hpp"
#include "radpose/rng.hpp"

namespace radpose {

struct LatentSequence {
  std::vector<LatentDistribution> frames;
  int label = -1;  // activity id in [0, 9)

  // [L, d_lat] matrix of the frame means.
  Tensor mean_matrix() const;
};

struct AugmentationPlan {
  std::size_t samples_per_sequence = 100;
  std::vector<double> alphas;  // cycled over the sampled sequences

  // learned_alpha plus `extra` draws uniform in learned_alpha +- half_width.
  static AugmentationPlan around(double learned_alpha, double half_width, std::size_t extra,
                                 std::size_t samples_per_sequence, Rng& rng);
  static AugmentationPlan defaults(Rng& rng) { return around(0.0129, 0.01, 10, 100, rng); }
  void validate() const;
};

// samples_per_sequence matrices [L, d_lat]; sequence j uses alpha
// alphas[j % alphas.size()] for every frame: z = mu + alpha * eps * sigma.
// Laplace latents are rejected.
std::vector<Tensor> augment(const LatentSequence& seq, const AugmentationPlan& plan, Rng& rng);

struct ClassifierConfig {
  std::size_t d_lat = 32;
  std::size_t channels = 0;  // 0 means d_lat / 4
  std::size_t n_classes = 9;
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  double lr = 3e-3;
  std::uint64_t seed = 0;

  std::size_t conv_channels() const { return channels == 0 ? std::max<std::size_t>(1, d_lat / 4) : channels; }
  void validate() const;
};

// Kernel-3 temporal convolution d_lat -> channels with relu, average pooling
// over valid frames, and a linear layer to class logits. Padding frames are
// all-zero rows excluded from the pool, so padding never changes the logits.
class ActivityClassifier {
 public:
  ActivityClassifier(ClassifierConfig config, std::uint64_t seed);

  const ClassifierConfig& config() const { return config_; }
  ad::ParamStore& params() { return params_; }

  // seq: [L, d_lat]; `valid` frames from the start count, the rest are padding
  // (valid == 0 means all).
  ad::Var logits(ad::Tape& tape, const Tensor& seq, std::size_t valid, bool train) const;
  std::vector<double> logits(const Tensor& seq, std::size_t valid = 0) const;
  int classify(const Tensor& seq, std::size_t valid = 0) const;

  // Cross-entropy training with Adam; returns the mean loss per epoch.
  std::vector<double> fit(const std::vector<Tensor>& seqs, const std::vector<int>& labels);

 private:
  ClassifierConfig config_;
  mutable ad::ParamStore params_;
};

struct ClassificationReport {
  double f1 = 0.0;  // macro over classes present in labels or predictions
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  std::vector<double> class_precision, class_recall, class_f1;
  std::vector<std::vector<std::size_t>> counts;   // [true][predicted]
  std::vector<std::vector<double>> confusion;     // rows normalized; empty rows stay 0
};

ClassificationReport classification_report(std::span<const int> preds, std::span<const int> labels,
                                           std::size_t n_classes = 9);
void write_confusion_csv(const std::filesystem::path& path, const ClassificationReport& report);

// Latent sequences in the tensor archive format.
void write_latent_cache(const std::filesystem::path& path, const std::vector<LatentSequence>& seqs);
std::vector<LatentSequence> read_latent_cache(const std::filesystem::path& path);

// Synthetic latent sequences for augmentation experiments: class information
// lives in low-variance dimensions, while high-variance dimensions carry
// per-sequence offsets unrelated to the class.
struct SyntheticLatentSpec {
  std::size_t d_lat = 32;
  std::size_t informative_dims = 8;
  std::size_t n_classes = 9;
  std::size_t min_len = 12;
  std::size_t max_len = 24;
  double class_separation = 1.0;  // prototype scale in informative dims
  double informative_jitter = 0.9;  // per-sequence mean noise in informative dims
  double informative_sigma = 0.05;
  double nuisance_offset = 1.0;   // per-sequence offset spread in nuisance dims
  double nuisance_sigma = 100.0;
  double frame_noise = 0.3;       // per-frame noise added to the means
  double alpha = 0.0129;
};

std::vector<LatentSequence> synthetic_latents(const SyntheticLatentSpec& spec,
                                              std::size_t per_class, Rng& rng,
                                              std::uint64_t prototype_seed);

}  // namespace radpose
