#include "radpose/pose_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "radpose/error.hpp"

namespace radpose {

LatentFamily parse_latent_family(const std::string& name) {
  if (name == "gauss") return LatentFamily::kGauss;
  if (name == "laplace") return LatentFamily::kLaplace;
  fail(ErrorKind::kConfig, "unknown latent family '" + name + "'");
}

Likelihood parse_likelihood(const std::string& name) {
  if (name == "gauss_diag") return Likelihood::kGaussDiag;
  if (name == "gauss_cov") return Likelihood::kGaussCov;
  if (name == "laplace") return Likelihood::kLaplace;
  fail(ErrorKind::kConfig, "unknown likelihood '" + name + "'");
}

std::string to_string(LatentFamily family) {
  return family == LatentFamily::kGauss ? "gauss" : "laplace";
}

std::string to_string(Likelihood likelihood) {
  switch (likelihood) {
    case Likelihood::kGaussDiag: return "gauss_diag";
    case Likelihood::kGaussCov: return "gauss_cov";
    case Likelihood::kLaplace: return "laplace";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ModelConfig.

void ModelConfig::validate() const {
  dims.validate();
  require(d_lat >= 1, ErrorKind::kConfig, "d_lat must be >= 1");
  require(n_samples >= 2, ErrorKind::kConfig, "n_samples must be >= 2");
  for (std::size_t v : {reducer_hidden, feature_dim, d_k, post_dim, decoder_hidden})
    require(v >= 1, ErrorKind::kConfig, "model widths must be positive");
  require(alpha_init > 0.0 && std::isfinite(alpha_init), ErrorKind::kConfig,
          "alpha_init must be positive");
  require(var_floor >= 0.0 && cov_ridge >= 0.0, ErrorKind::kConfig,
          "var_floor and cov_ridge must be non-negative");
  require(input_scale > 0.0 && std::isfinite(input_scale), ErrorKind::kConfig,
          "input_scale must be positive");
}

namespace {

using Fields = std::vector<std::pair<std::string, std::string>>;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Fields config_fields(const ModelConfig& c) {
  auto u = [](std::size_t v) { return std::to_string(v); };
  return {
      {"dims.frames", u(c.dims.frames)},
      {"dims.azimuth", u(c.dims.azimuth)},
      {"dims.elevation", u(c.dims.elevation)},
      {"dims.samples", u(c.dims.samples)},
      {"dims.chirps", u(c.dims.chirps)},
      {"dims.pad_samples", u(c.dims.pad_samples)},
      {"dims.pad_chirps", u(c.dims.pad_chirps)},
      {"dims.pad_azimuth", u(c.dims.pad_azimuth)},
      {"dims.pad_elevation", u(c.dims.pad_elevation)},
      {"d_lat", u(c.d_lat)},
      {"n_samples", u(c.n_samples)},
      {"latent_family", to_string(c.latent_family)},
      {"likelihood", to_string(c.likelihood)},
      {"reducer_hidden", u(c.reducer_hidden)},
      {"feature_dim", u(c.feature_dim)},
      {"d_k", u(c.d_k)},
      {"post_dim", u(c.post_dim)},
      {"decoder_hidden", u(c.decoder_hidden)},
      {"decoder_relu", c.decoder_relu ? "1" : "0"},
      {"alpha_init", fmt(c.alpha_init)},
      {"var_floor", fmt(c.var_floor)},
      {"cov_ridge", fmt(c.cov_ridge)},
      {"input_scale", fmt(c.input_scale)},
  };
}

}  // namespace

std::string ModelConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : config_fields(*this)) out += k + "=" + v + "\n";
  return out;
}

ModelConfig ModelConfig::deserialize(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig, "bad model config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    require(it != kv.end(), ErrorKind::kConfig, "model config lacks '" + key + "'");
    return it->second;
  };
  auto sz = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(take(key))); };
  auto dbl = [&](const std::string& key) { return std::stod(take(key)); };
  ModelConfig c;
  c.dims.frames = sz("dims.frames");
  c.dims.azimuth = sz("dims.azimuth");
  c.dims.elevation = sz("dims.elevation");
  c.dims.samples = sz("dims.samples");
  c.dims.chirps = sz("dims.chirps");
  c.dims.pad_samples = sz("dims.pad_samples");
  c.dims.pad_chirps = sz("dims.pad_chirps");
  c.dims.pad_azimuth = sz("dims.pad_azimuth");
  c.dims.pad_elevation = sz("dims.pad_elevation");
  c.d_lat = sz("d_lat");
  c.n_samples = sz("n_samples");
  c.latent_family = parse_latent_family(take("latent_family"));
  c.likelihood = parse_likelihood(take("likelihood"));
  c.reducer_hidden = sz("reducer_hidden");
  c.feature_dim = sz("feature_dim");
  c.d_k = sz("d_k");
  c.post_dim = sz("post_dim");
  c.decoder_hidden = sz("decoder_hidden");
  c.decoder_relu = take("decoder_relu") == "1";
  c.alpha_init = dbl("alpha_init");
  c.var_floor = dbl("var_floor");
  c.cov_ridge = dbl("cov_ridge");
  c.input_scale = dbl("input_scale");
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Distributions.

double PredictiveDistribution::marginal_variance(std::size_t d) const {
  const double v = dispersion.at(d);
  return likelihood == Likelihood::kLaplace ? 2.0 * v * v : v;
}

PredictiveDistribution predictive_moments(const Tensor& samples, Likelihood likelihood,
                                          double var_floor, double cov_ridge) {
  require(samples.rank() == 2 && !samples.is_complex(), ErrorKind::kShapeMismatch,
          "samples must be a real [n, d] matrix");
  const std::size_t n = samples.dim(0), d = samples.dim(1);
  require(n >= 2, ErrorKind::kInvalidArgument, "predictive moments need at least 2 samples");
  PredictiveDistribution out;
  out.likelihood = likelihood;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += samples.at(i, j);
  for (double& m : out.mean) m /= static_cast<double>(n);

  out.dispersion.assign(d, 0.0);
  if (likelihood == Likelihood::kLaplace) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) out.dispersion[j] += std::abs(samples.at(i, j) - out.mean[j]);
    for (double& b : out.dispersion) b = b / static_cast<double>(n) + var_floor;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = samples.at(i, j) - out.mean[j];
      out.dispersion[j] += c * c;
    }
  for (double& v : out.dispersion) v = v / static_cast<double>(n - 1) + var_floor;
  if (likelihood == Likelihood::kGaussDiag) return out;

  Eigen::MatrixXd centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = samples.at(i, j) - out.mean[j];
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  cov.diagonal().array() += cov_ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  require(llt.info() == Eigen::Success, ErrorKind::kNumerical,
          "covariance is not positive definite; increase cov_ridge");
  Eigen::MatrixXd l = llt.matrixL();
  out.cov = Tensor({d, d});
  out.chol = Tensor({d, d});
  for (std::size_t i = 0; i < d; ++i) {
    out.dispersion[i] = cov(i, i);
    for (std::size_t j = 0; j < d; ++j) {
      out.cov.at(i, j) = cov(i, j);
      out.chol.at(i, j) = l(i, j);
    }
  }
  return out;
}

double laplace_from_uniform(double u) {
  const double c = u - 0.5;
  const double s = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);
  return -s * std::log(1.0 - 2.0 * std::abs(c));
}

Tensor draw_latent_noise(LatentFamily family, std::size_t n, std::size_t d_lat, Rng& rng) {
  Tensor noise({n, d_lat});
  for (double& v : noise.data()) v = family == LatentFamily::kGauss ? rng.normal() : rng.uniform();
  return noise;
}

Tensor sample_latent(const LatentDistribution& ld, const Tensor& noise) {
  const std::size_t d = ld.dim();
  require(noise.rank() == 2 && noise.dim(1) == d, ErrorKind::kShapeMismatch,
          "latent noise must be [n, d_lat]");
  Tensor z(noise.shape());
  for (std::size_t i = 0; i < noise.dim(0); ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (ld.family == LatentFamily::kGauss)
        z.at(i, j) = ld.mu[j] + ld.alpha * noise.at(i, j) * std::exp(0.5 * ld.log_var[j]);
      else
        z.at(i, j) = ld.mu[j] + ld.b[j] * laplace_from_uniform(noise.at(i, j));
    }
  return z;
}

Tensor sample_latent(const LatentDistribution& ld, std::size_t n, Rng& rng) {
  require(n >= 1, ErrorKind::kInvalidArgument, "need at least one latent sample");
  return sample_latent(ld, draw_latent_noise(ld.family, n, ld.dim(), rng));
}

// ---------------------------------------------------------------------------
// PoseModel.

namespace {

Tensor gaussian_init(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = stddev * rng.normal();
  return t;
}

double inverse_softplus(double y) { return std::log(std::expm1(y)); }

struct ParamSpec {
  std::string name;
  Shape shape;
};

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  const std::size_t slices = 2 * c.dims.frames;
  const std::size_t flat = slices * c.post_dim;
  std::vector<ParamSpec> specs = {
      {"reducer.w1", {c.dims.slice_size(), c.reducer_hidden}},
      {"reducer.b1", {1, c.reducer_hidden}},
      {"reducer.w2", {c.reducer_hidden, c.feature_dim}},
      {"reducer.b2", {1, c.feature_dim}},
      {"attn.wq", {c.feature_dim, c.d_k}},
      {"attn.wk", {c.feature_dim, c.d_k}},
      {"attn.wv", {c.feature_dim, c.feature_dim}},
      {"attn.proj.w", {c.feature_dim, c.post_dim}},
      {"attn.proj.b", {1, c.post_dim}},
      {"head.mu.w", {flat, c.d_lat}},
      {"head.mu.b", {1, c.d_lat}},
      {"head.disp.w", {flat, c.d_lat}},
      {"head.disp.b", {1, c.d_lat}},
      {"dec.w1", {c.d_lat, c.decoder_hidden}},
      {"dec.b1", {1, c.decoder_hidden}},
      {"dec.w2", {c.decoder_hidden, kPoseDims}},
      {"dec.b2", {1, kPoseDims}},
  };
  if (c.latent_family == LatentFamily::kGauss) specs.push_back({"latent.alpha_raw", {1}});
  return specs;
}

}  // namespace

PoseModel::PoseModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(mix_seed(seed, 0x6d6f64656cULL));
  for (const auto& spec : param_specs(config_)) {
    const std::string& n = spec.name;
    Tensor init(spec.shape);
    const double fan_in = static_cast<double>(spec.shape[0]);
    if (n == "reducer.w1" || n == "dec.w1") {
      init = gaussian_init(spec.shape, std::sqrt(2.0 / fan_in), rng);
    } else if (n == "head.disp.w") {
      init = gaussian_init(spec.shape, 0.1 / std::sqrt(fan_in), rng);
    } else if (n.find(".w") != std::string::npos) {
      init = gaussian_init(spec.shape, 1.0 / std::sqrt(fan_in), rng);
    } else if (n == "head.disp.b" && config_.latent_family == LatentFamily::kLaplace) {
      init = Tensor::filled(spec.shape, inverse_softplus(1.0));
    } else if (n == "latent.alpha_raw") {
      init = Tensor::filled(spec.shape, inverse_softplus(config_.alpha_init));
    }
    params_.add(n, std::move(init));
  }
}

PoseModel::PoseModel(ModelConfig config, ad::ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  check_params();
}

void PoseModel::check_params() const {
  const auto specs = param_specs(config_);
  require(specs.size() == params_.size(), ErrorKind::kShapeMismatch,
          "checkpoint has " + std::to_string(params_.size()) + " parameters, model expects " +
              std::to_string(specs.size()));
  for (const auto& spec : specs) {
    require(params_.contains(spec.name), ErrorKind::kShapeMismatch,
            "checkpoint lacks parameter '" + spec.name + "'");
    require(params_.at(spec.name).value.shape() == spec.shape, ErrorKind::kShapeMismatch,
            "parameter '" + spec.name + "' has shape " +
                shape_string(params_.at(spec.name).value.shape()) + ", expected " +
                shape_string(spec.shape));
  }
}

ad::Var PoseModel::bind(ad::Tape& tape, const std::string& name, bool train) const {
  if (train) return tape.param(params_.at(name));
  return tape.param(std::as_const(params_).at(name));
}

LatentVars PoseModel::encode(ad::Tape& tape, const ProcessedTensor& x, bool train) const {
  const auto& c = config_;
  require(x.data.shape() == c.dims.processed_shape(), ErrorKind::kShapeMismatch,
          "processed tensor " + shape_string(x.data.shape()) + " does not match model input " +
              shape_string(c.dims.processed_shape()));
  auto p = [&](const char* name) { return bind(tape, name, train); };
  const std::size_t slices = 2 * c.dims.frames;

  ad::Var input = tape.constant(x.data.reshaped({slices, c.dims.slice_size()}) * c.input_scale);
  ad::Var h = ad::relu(ad::linear(input, p("reducer.w1"), p("reducer.b1")));
  ad::Var f = ad::linear(h, p("reducer.w2"), p("reducer.b2"));

  ad::Var q = ad::matmul(f, p("attn.wq"));
  ad::Var k = ad::matmul(f, p("attn.wk"));
  ad::Var v = ad::matmul(f, p("attn.wv"));
  ad::Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(c.d_k)));
  ad::Var attended = ad::add(f, ad::matmul(ad::softmax(scores), v));
  ad::Var post = ad::linear(attended, p("attn.proj.w"), p("attn.proj.b"));
  ad::Var flat = ad::reshape(post, {1, slices * c.post_dim});

  LatentVars out;
  out.family = c.latent_family;
  out.mu = ad::linear(flat, p("head.mu.w"), p("head.mu.b"));
  ad::Var disp = ad::linear(flat, p("head.disp.w"), p("head.disp.b"));
  if (c.latent_family == LatentFamily::kGauss) {
    out.log_var = disp;
    out.sigma = ad::exp(ad::scale(disp, 0.5));
    out.alpha = ad::softplus(p("latent.alpha_raw"));
  } else {
    out.b = ad::add_scalar(ad::softplus(disp), c.var_floor);
  }
  return out;
}

ad::Var PoseModel::sample_latent(ad::Tape& tape, const LatentVars& latent,
                                 const Tensor& noise) const {
  const std::size_t d = config_.d_lat;
  require(noise.rank() == 2 && noise.dim(1) == d, ErrorKind::kShapeMismatch,
          "latent noise must be [n, d_lat]");
  const std::size_t n = noise.dim(0);
  ad::Var mu = ad::broadcast_rows(latent.mu, n);
  if (latent.family == LatentFamily::kGauss) {
    ad::Var eps = tape.constant(noise);
    ad::Var spread = ad::mul(eps, ad::broadcast_rows(latent.sigma, n));
    return ad::add(mu, ad::scale_by(latent.alpha, spread));
  }
  Tensor l = noise;
  for (double& u : l.data()) u = laplace_from_uniform(u);
  return ad::add(mu, ad::mul(tape.constant(std::move(l)), ad::broadcast_rows(latent.b, n)));
}

ad::Var PoseModel::decode(ad::Tape& tape, const ad::Var& z, bool train) const {
  require(z.value().rank() == 2 && z.cols() == config_.d_lat, ErrorKind::kShapeMismatch,
          "decoder input must have d_lat columns");
  ad::Var h = ad::linear(z, bind(tape, "dec.w1", train), bind(tape, "dec.b1", train));
  if (config_.decoder_relu) h = ad::relu(h);
  return ad::linear(h, bind(tape, "dec.w2", train), bind(tape, "dec.b2", train));
}

PredictiveVars PoseModel::moments(ad::Tape& tape, const ad::Var& samples) const {
  const std::size_t n = samples.rows();
  require(n >= 2, ErrorKind::kInvalidArgument, "predictive moments need at least 2 samples");
  const double inv_n = 1.0 / static_cast<double>(n);
  PredictiveVars out;
  out.likelihood = config_.likelihood;
  out.mean = ad::scale(ad::sum_rows(samples), inv_n);
  ad::Var centered = ad::sub(samples, ad::broadcast_rows(out.mean, n));
  switch (config_.likelihood) {
    case Likelihood::kLaplace:
      out.dispersion =
          ad::add_scalar(ad::scale(ad::sum_rows(ad::abs(centered)), inv_n), config_.var_floor);
      break;
    case Likelihood::kGaussDiag:
      out.dispersion = ad::add_scalar(
          ad::scale(ad::sum_rows(ad::square(centered)), 1.0 / static_cast<double>(n - 1)),
          config_.var_floor);
      break;
    case Likelihood::kGaussCov: {
      const std::size_t d = samples.cols();
      Tensor ridge({d, d});
      for (std::size_t i = 0; i < d; ++i) ridge.at(i, i) = config_.cov_ridge;
      out.cov = ad::add(
          ad::scale(ad::matmul(ad::transpose(centered), centered), 1.0 / static_cast<double>(n - 1)),
          tape.constant(std::move(ridge)));
      break;
    }
  }
  return out;
}

LatentDistribution PoseModel::encode(const ProcessedTensor& x) const {
  ad::Tape tape(false);
  LatentVars v = encode(tape, x, false);
  LatentDistribution ld;
  ld.family = v.family;
  auto copy = [](const ad::Var& var) {
    auto d = var.value().data();
    return std::vector<double>(d.begin(), d.end());
  };
  ld.mu = copy(v.mu);
  if (v.family == LatentFamily::kGauss) {
    ld.log_var = copy(v.log_var);
    ld.alpha = v.alpha.item();
  } else {
    ld.b = copy(v.b);
  }
  return ld;
}

Tensor PoseModel::decode(const Tensor& z) const {
  ad::Tape tape(false);
  return decode(tape, tape.constant(z), false).value();
}

PredictiveDistribution PoseModel::predict(const ProcessedTensor& x, Rng& rng,
                                          bool keep_samples) const {
  const LatentDistribution ld = encode(x);
  Tensor z = radpose::sample_latent(
      ld, draw_latent_noise(ld.family, config_.n_samples, config_.d_lat, rng));
  Tensor samples = decode(z);
  PredictiveDistribution pd =
      predictive_moments(samples, config_.likelihood, config_.var_floor, config_.cov_ridge);
  if (keep_samples) pd.samples = std::move(samples);
  return pd;
}

void PoseModel::set_output_bias(std::span<const double> bias) {
  auto& b = params_.at("dec.b2").value;
  require(bias.size() == b.numel(), ErrorKind::kShapeMismatch, "output bias must have 78 values");
  std::copy(bias.begin(), bias.end(), b.data().begin());
}

void PoseModel::save(const std::filesystem::path& path, const std::string& extra_meta) const {
  params_.save(path, config_.serialize() + "---\n" + extra_meta);
}

PoseModel PoseModel::load(const std::filesystem::path& path, std::string* extra_meta) {
  std::string meta;
  ad::ParamStore store = ad::ParamStore::load(path, &meta);
  const auto split = meta.find("---\n");
  require(split != std::string::npos, ErrorKind::kConfig,
          path.string() + ": checkpoint metadata lacks a model config");
  if (extra_meta) *extra_meta = meta.substr(split + 4);
  return PoseModel(ModelConfig::deserialize(meta.substr(0, split)), std::move(store));
}

}  // namespace radpose
