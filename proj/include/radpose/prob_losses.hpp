#pragma once

#include <span>
#include <vector>

#include "radpose/autodiff.hpp"
#include "radpose/pose_model.hpp"

namespace radpose {

struct LossWeights {
  double beta = 1e-3;  // KL weight
  double gamma = 1.0;  // dispersion regularizer weight

  void validate() const;
};

struct LossReport {
  double total = 0.0;
  double nll = 0.0;
  double kl = 0.0;
  std::vector<double> residual;  // y - mean per dimension
};

// Value-level forms. All sums run over dimensions.

// sum -1/2 (1 + log_var - mu^2 - exp(log_var)); KL to N(0, I).
double kl_gauss(std::span<const double> mu, std::span<const double> log_var);
// sum [-ln b + |mu| + b exp(-|mu| / b) - 1]; KL to Laplace(0, 1).
double kl_laplace(std::span<const double> mu, std::span<const double> b);
// sum r^2 / var + gamma * sum log var.
double nll_gauss_diag(std::span<const double> y, std::span<const double> mu,
                      std::span<const double> var, double gamma);
// gamma log|S| + r^T S^-1 r with S = L L^T, via triangular solves.
double nll_gauss_cov(std::span<const double> y, std::span<const double> mu, const Tensor& chol,
                     double gamma);
// sum |r| / b + gamma * sum log(2 b).
double nll_laplace(std::span<const double> y, std::span<const double> mu,
                   std::span<const double> b, double gamma);

// NLL of the variant + beta * KL of the latent family. `variant` must match
// pred.likelihood.
LossReport total_loss(const PredictiveDistribution& pred, const LatentDistribution& ld,
                      std::span<const double> y, const LossWeights& weights, Likelihood variant);

// Tape-level forms; rows are [1, d] matrices.
namespace ad_loss {

ad::Var kl_gauss(const ad::Var& mu, const ad::Var& log_var);
ad::Var kl_laplace(const ad::Var& mu, const ad::Var& b);
ad::Var nll_gauss_diag(const Tensor& y, const ad::Var& mu, const ad::Var& var, double gamma);
// Fused node: Cholesky in the forward pass, analytic gradient
// d/dS = gamma S^-1 - a a^T and d/dmu = -2 a with a = S^-1 r.
ad::Var nll_gauss_cov(const Tensor& y, const ad::Var& mu, const ad::Var& cov, double gamma);
ad::Var nll_laplace(const Tensor& y, const ad::Var& mu, const ad::Var& b, double gamma);

struct LossVars {
  ad::Var total;
  ad::Var nll;
  ad::Var kl;
};

LossVars total_loss(const PredictiveVars& pred, const LatentVars& latent, const Tensor& y,
                    const LossWeights& weights);

}  // namespace ad_loss

}  // namespace radpose
