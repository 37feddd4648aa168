#include "radpose/prob_losses.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <memory>

#include "radpose/error.hpp"

namespace radpose {

void LossWeights::validate() const {
  require(std::isfinite(beta) && beta >= 0.0, ErrorKind::kConfig, "beta must be finite and >= 0");
  require(std::isfinite(gamma) && gamma >= 0.0, ErrorKind::kConfig,
          "gamma must be finite and >= 0");
}

namespace {

void require_lengths(std::size_t a, std::size_t b, const char* op) {
  require(a == b, ErrorKind::kShapeMismatch,
          std::string(op) + ": length " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

double kl_gauss(std::span<const double> mu, std::span<const double> log_var) {
  require_lengths(mu.size(), log_var.size(), "kl_gauss");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    s += -0.5 * (1.0 + log_var[i] - mu[i] * mu[i] - std::exp(log_var[i]));
  return s;
}

double kl_laplace(std::span<const double> mu, std::span<const double> b) {
  require_lengths(mu.size(), b.size(), "kl_laplace");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    require(b[i] > 0.0, ErrorKind::kInvalidArgument, "kl_laplace needs positive scales");
    const double m = std::abs(mu[i]);
    s += -std::log(b[i]) + m + b[i] * std::exp(-m / b[i]) - 1.0;
  }
  return s;
}

double nll_gauss_diag(std::span<const double> y, std::span<const double> mu,
                      std::span<const double> var, double gamma) {
  require_lengths(y.size(), mu.size(), "nll_gauss_diag");
  require_lengths(y.size(), var.size(), "nll_gauss_diag");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - mu[i];
    s += r * r / var[i] + gamma * std::log(var[i]);
  }
  return s;
}

double nll_gauss_cov(std::span<const double> y, std::span<const double> mu, const Tensor& chol,
                     double gamma) {
  require_lengths(y.size(), mu.size(), "nll_gauss_cov");
  const std::size_t d = y.size();
  require(chol.rank() == 2 && chol.dim(0) == d && chol.dim(1) == d, ErrorKind::kShapeMismatch,
          "nll_gauss_cov: Cholesky factor must be [d, d]");
  Eigen::MatrixXd l(d, d);
  double logdet = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) l(i, j) = j <= i ? chol.at(i, j) : 0.0;
    require(std::isfinite(l(i, i)) && l(i, i) > 0.0, ErrorKind::kNumerical,
            "nll_gauss_cov: singular Cholesky factor");
    logdet += 2.0 * std::log(l(i, i));
  }
  Eigen::VectorXd r(d);
  for (std::size_t i = 0; i < d; ++i) r(i) = y[i] - mu[i];
  const Eigen::VectorXd z = l.triangularView<Eigen::Lower>().solve(r);
  return gamma * logdet + z.squaredNorm();
}

double nll_laplace(std::span<const double> y, std::span<const double> mu,
                   std::span<const double> b, double gamma) {
  require_lengths(y.size(), mu.size(), "nll_laplace");
  require_lengths(y.size(), b.size(), "nll_laplace");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    s += std::abs(y[i] - mu[i]) / b[i] + gamma * std::log(2.0 * b[i]);
  return s;
}

LossReport total_loss(const PredictiveDistribution& pred, const LatentDistribution& ld,
                      std::span<const double> y, const LossWeights& weights, Likelihood variant) {
  require(variant == pred.likelihood, ErrorKind::kInvalidArgument,
          "loss variant " + to_string(variant) + " does not match a " +
              to_string(pred.likelihood) + " prediction");
  require_lengths(y.size(), pred.mean.size(), "total_loss");
  LossReport rep;
  switch (variant) {
    case Likelihood::kGaussDiag:
      rep.nll = nll_gauss_diag(y, pred.mean, pred.dispersion, weights.gamma);
      break;
    case Likelihood::kGaussCov:
      rep.nll = nll_gauss_cov(y, pred.mean, pred.chol, weights.gamma);
      break;
    case Likelihood::kLaplace:
      rep.nll = nll_laplace(y, pred.mean, pred.dispersion, weights.gamma);
      break;
  }
  rep.kl = ld.family == LatentFamily::kGauss ? kl_gauss(ld.mu, ld.log_var) : kl_laplace(ld.mu, ld.b);
  rep.total = rep.nll + weights.beta * rep.kl;
  rep.residual.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) rep.residual[i] = y[i] - pred.mean[i];
  return rep;
}

namespace ad_loss {

using ad::Var;

namespace {

Var residual(const Tensor& y, const Var& mu) {
  require(y.numel() == mu.value().numel(), ErrorKind::kShapeMismatch,
          "target has " + std::to_string(y.numel()) + " values, prediction " +
              std::to_string(mu.value().numel()));
  return ad::sub(mu.tape().constant(y.reshaped(mu.shape())), mu);
}

}  // namespace

Var kl_gauss(const Var& mu, const Var& log_var) {
  // -1/2 sum(1 + lv - mu^2 - e^lv) = 1/2 sum(mu^2 + e^lv - lv) - d/2
  Var inner = ad::sub(ad::add(ad::square(mu), ad::exp(log_var)), log_var);
  return ad::add_scalar(ad::scale(ad::sum(inner), 0.5),
                        -0.5 * static_cast<double>(mu.value().numel()));
}

Var kl_laplace(const Var& mu, const Var& b) {
  for (double v : b.value().data())
    require(v > 0.0, ErrorKind::kInvalidArgument, "kl_laplace needs positive scales");
  Var m = ad::abs(mu);
  Var tail = ad::mul(b, ad::exp(ad::scale(ad::div(m, b), -1.0)));
  Var per_dim = ad::add(ad::sub(m, ad::log(b)), tail);
  return ad::add_scalar(ad::sum(per_dim), -static_cast<double>(mu.value().numel()));
}

Var nll_gauss_diag(const Tensor& y, const Var& mu, const Var& var, double gamma) {
  Var r = residual(y, mu);
  return ad::add(ad::sum(ad::div(ad::square(r), var)), ad::scale(ad::sum(ad::log(var)), gamma));
}

Var nll_laplace(const Tensor& y, const Var& mu, const Var& b, double gamma) {
  Var r = residual(y, mu);
  return ad::add(ad::sum(ad::div(ad::abs(r), b)),
                 ad::scale(ad::sum(ad::log(ad::scale(b, 2.0))), gamma));
}

Var nll_gauss_cov(const Tensor& y, const Var& mu, const Var& cov, double gamma) {
  const std::size_t d = mu.value().numel();
  require(y.numel() == d, ErrorKind::kShapeMismatch, "nll_gauss_cov: target length mismatch");
  require(cov.value().rank() == 2 && cov.rows() == d && cov.cols() == d,
          ErrorKind::kShapeMismatch, "nll_gauss_cov: covariance must be [d, d]");
  Eigen::MatrixXd s(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) s(i, j) = cov.value().at(i, j);
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  require(llt.info() == Eigen::Success, ErrorKind::kNumerical,
          "nll_gauss_cov: covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  double logdet = 0.0;
  for (std::size_t i = 0; i < d; ++i) logdet += 2.0 * std::log(l(i, i));
  Eigen::VectorXd r(d);
  for (std::size_t i = 0; i < d; ++i) r(i) = y[i] - mu.value()[i];
  auto alpha = std::make_shared<Eigen::VectorXd>(llt.solve(r));
  const double value = gamma * logdet + r.dot(*alpha);

  return mu.tape().record(
      Tensor::scalar(value), {mu, cov},
      [mu, cov, alpha, gamma, llt, d](ad::Tape& t, const Tensor& g) {
        const double go = g[0];
        if (Tensor* gm = t.grad_slot(mu))
          for (std::size_t i = 0; i < d; ++i) (*gm)[i] -= 2.0 * go * (*alpha)(static_cast<Eigen::Index>(i));
        if (Tensor* gc = t.grad_slot(cov)) {
          const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
              const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
              gc->at(i, j) += go * (gamma * inv(ii, jj) - (*alpha)(ii) * (*alpha)(jj));
            }
        }
      });
}

LossVars total_loss(const PredictiveVars& pred, const LatentVars& latent, const Tensor& y,
                    const LossWeights& weights) {
  LossVars out;
  switch (pred.likelihood) {
    case Likelihood::kGaussDiag:
      out.nll = nll_gauss_diag(y, pred.mean, pred.dispersion, weights.gamma);
      break;
    case Likelihood::kGaussCov:
      out.nll = nll_gauss_cov(y, pred.mean, pred.cov, weights.gamma);
      break;
    case Likelihood::kLaplace:
      out.nll = nll_laplace(y, pred.mean, pred.dispersion, weights.gamma);
      break;
  }
  out.kl = latent.family == LatentFamily::kGauss ? kl_gauss(latent.mu, latent.log_var)
                                                 : kl_laplace(latent.mu, latent.b);
  out.total = ad::add(out.nll, ad::scale(out.kl, weights.beta));
  return out;
}

}  // namespace ad_loss

}  // namespace radpose
