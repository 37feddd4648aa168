#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "radpose/autodiff.hpp"
#include "radpose/radar_frontend.hpp"
#include "radpose/rng.hpp"
#include "radpose/skeleton.hpp"

namespace radpose {

enum class LatentFamily { kGauss, kLaplace };
enum class Likelihood { kGaussDiag, kGaussCov, kLaplace };

LatentFamily parse_latent_family(const std::string& name);  // "gauss" | "laplace"
Likelihood parse_likelihood(const std::string& name);  // "gauss_diag" | "gauss_cov" | "laplace"
std::string to_string(LatentFamily family);
std::string to_string(Likelihood likelihood);

struct ModelConfig {
  RadarDims dims;
  std::size_t d_lat = 256;
  std::size_t n_samples = 500;
  LatentFamily latent_family = LatentFamily::kGauss;
  Likelihood likelihood = Likelihood::kGaussDiag;
  std::size_t reducer_hidden = 16;  // shared per-slice reducer width
  std::size_t feature_dim = 128;    // per-slice feature size entering attention
  std::size_t d_k = 32;             // query/key width
  std::size_t post_dim = 8;         // per-slice width after the post-attention linear
  std::size_t decoder_hidden = 64;
  bool decoder_relu = true;
  double alpha_init = 0.1;
  double var_floor = 1e-6;   // added to variances and Laplace scales
  double cov_ridge = 1e-4;   // added to the covariance diagonal
  double input_scale = 1.0;  // multiplies the processed tensor before the reducer

  void validate() const;
  // key=value lines, stored in checkpoint metadata.
  std::string serialize() const;
  static ModelConfig deserialize(const std::string& text);
};

// Per-window latent posterior. log_var is used by the Gaussian family, b (the
// softplus-transformed scale) by the Laplace family.
struct LatentDistribution {
  LatentFamily family = LatentFamily::kGauss;
  std::vector<double> mu;
  std::vector<double> log_var;
  std::vector<double> b;
  double alpha = 0.0;

  std::size_t dim() const { return mu.size(); }
};

// Monte-Carlo predictive distribution over the 78 pose coordinates.
struct PredictiveDistribution {
  Likelihood likelihood = Likelihood::kGaussDiag;
  std::vector<double> mean;
  // Per-dimension dispersion: variance (gauss_diag, and the diagonal of cov for
  // gauss_cov) or Laplace scale b.
  std::vector<double> dispersion;
  Tensor cov;   // [78, 78], gauss_cov only, ridge included
  Tensor chol;  // lower Cholesky factor of cov
  Tensor samples;  // [n, 78] when kept

  // Marginal variance of dimension d (2 b^2 for Laplace).
  double marginal_variance(std::size_t d) const;
  Pose mean_pose() const { return Pose::from_flat(mean); }
};

// Moments of decoder samples [n, 78], n >= 2: column mean, then unbiased
// variance + floor, covariance + ridge * I, or mean absolute deviation + floor.
PredictiveDistribution predictive_moments(const Tensor& samples, Likelihood likelihood,
                                          double var_floor = 1e-6, double cov_ridge = 1e-4);

// Reparameterization noise for n draws: standard normal (Gaussian family) or
// uniform on (0, 1) (Laplace family).
Tensor draw_latent_noise(LatentFamily family, std::size_t n, std::size_t d_lat, Rng& rng);

// z = mu + alpha * eps * sigma, or z = mu - b * sgn(u - 1/2) * ln(1 - 2|u - 1/2|).
Tensor sample_latent(const LatentDistribution& ld, const Tensor& noise);
Tensor sample_latent(const LatentDistribution& ld, std::size_t n, Rng& rng);

// Laplace inverse-CDF transform of a uniform draw, unit scale, zero location.
double laplace_from_uniform(double u);

// Tape-level handles produced by the model.
struct LatentVars {
  LatentFamily family = LatentFamily::kGauss;
  ad::Var mu;        // [1, d_lat]
  ad::Var log_var;   // Gaussian
  ad::Var sigma;     // Gaussian, exp(log_var / 2)
  ad::Var b;         // Laplace
  ad::Var alpha;     // [1]
};

struct PredictiveVars {
  Likelihood likelihood = Likelihood::kGaussDiag;
  ad::Var mean;        // [1, 78]
  ad::Var dispersion;  // [1, 78] variance or scale
  ad::Var cov;         // [78, 78], gauss_cov only
};

class PoseModel {
 public:
  // Fresh parameters drawn from `seed`.
  PoseModel(ModelConfig config, std::uint64_t seed);
  // Wraps existing parameters; names and shapes are checked.
  PoseModel(ModelConfig config, ad::ParamStore params);

  const ModelConfig& config() const { return config_; }
  ModelConfig& config() { return config_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  // Tape-level forward pieces. With `train` false the parameters are bound
  // read-only.
  LatentVars encode(ad::Tape& tape, const ProcessedTensor& x, bool train) const;
  ad::Var sample_latent(ad::Tape& tape, const LatentVars& latent, const Tensor& noise) const;
  ad::Var decode(ad::Tape& tape, const ad::Var& z, bool train) const;
  PredictiveVars moments(ad::Tape& tape, const ad::Var& samples) const;

  // Value-level inference.
  LatentDistribution encode(const ProcessedTensor& x) const;
  Tensor decode(const Tensor& z) const;
  PredictiveDistribution predict(const ProcessedTensor& x, Rng& rng,
                                 bool keep_samples = false) const;

  // Sets the decoder output bias, e.g. to the training mean pose.
  void set_output_bias(std::span<const double> bias);

  void save(const std::filesystem::path& path, const std::string& extra_meta = "") const;
  static PoseModel load(const std::filesystem::path& path, std::string* extra_meta = nullptr);

 private:
  ad::Var bind(ad::Tape& tape, const std::string& name, bool train) const;
  void check_params() const;

  ModelConfig config_;
  mutable ad::ParamStore params_;
};

}  // namespace radpose
