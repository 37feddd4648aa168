#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "radpose/pose_model.hpp"
#include "radpose/skeleton.hpp"
#include "radpose/trainer.hpp"

namespace radpose {

// ---------------------------------------------------------------------------
// Pose accuracy.

struct JointErrors {
  std::array<double, kNumKeypoints> per_keypoint{};  // meters
  double overall = 0.0;
  std::size_t frames = 0;   // frames that entered the average
  std::size_t skipped = 0;  // degenerate frames left out (P-MPJPE only)
};

JointErrors mpjpe(std::span<const Pose> preds, std::span<const Pose> truths);
// Per-frame similarity alignment of the prediction onto the ground truth, then
// MPJPE. Frames whose cross-covariance has rank < 2 are skipped and counted.
JointErrors p_mpjpe(std::span<const Pose> preds, std::span<const Pose> truths);

// Least-squares similarity transform (rotation, scale, translation) of `pred`
// onto `truth`. Returns false for a degenerate frame.
bool procrustes_align(const Pose& pred, const Pose& truth, Pose& aligned);

// Per-keypoint error of one frame, meters.
std::array<double, kNumKeypoints> joint_distances(const Pose& pred, const Pose& truth);

// ---------------------------------------------------------------------------
// Predictive marginals.

// u_k: sum over x, y, z of the marginal variance (2 b^2 for Laplace), m^2.
std::array<double, kNumKeypoints> joint_uncertainty(const PredictiveDistribution& pred);

// Marginal CDF and quantile of dimension d (0..77). gauss_cov uses the
// covariance diagonal.
double predictive_cdf(const PredictiveDistribution& pred, std::size_t d, double y);
double predictive_quantile(const PredictiveDistribution& pred, std::size_t d, double p);

// CDF values F(y) for every dimension of every record, pooled in record-major
// order.
std::vector<double> pit_values(std::span<const PredictiveDistribution> preds,
                               std::span<const Pose> truths);

// ---------------------------------------------------------------------------
// Calibration.

struct CoverageCurve {
  std::vector<double> levels;
  std::vector<double> empirical;
};

// Levels j / c for j = 1..c.
std::vector<double> uniform_levels(std::size_t c);

// Empirical quantiles of `pit` at j / (c + 1), j = 1..c, deduplicated and
// restricted to (0, 1). As an isotonic fit grid this keeps the coverage error
// on the fitted data within about 1 / c.
std::vector<double> quantile_levels(std::span<const double> pit, std::size_t c);

// Fraction of values <= p for each level p.
CoverageCurve coverage(std::span<const double> pit, std::span<const double> levels);
CoverageCurve coverage(std::span<const PredictiveDistribution> preds, std::span<const Pose> truths,
                       std::span<const double> levels);

// (1/c) sum |empirical_j - p_j|.
double ece(const CoverageCurve& curve);

// Pool-adjacent-violators least-squares monotone fit; equal weights if
// `weights` is empty.
std::vector<double> pav(std::span<const double> values, std::span<const double> weights = {});

// Monotone piecewise-linear map R on [0, 1].
class CalibrationMap {
 public:
  CalibrationMap() = default;
  CalibrationMap(std::vector<double> breakpoints, std::vector<double> values);
  static CalibrationMap identity();

  double operator()(double p) const;
  // Generalized inverse inf{p : R(p) >= q}.
  double inverse(double q) const;

  const std::vector<double>& breakpoints() const { return x_; }
  const std::vector<double>& values() const { return y_; }

  void write_csv(const std::filesystem::path& path) const;
  static CalibrationMap read_csv(const std::filesystem::path& path);

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

// Fits R by PAV on (p_j, empirical coverage at p_j) over `levels`, with the
// end points (0, 0) and (1, 1) added. Needs at least 10 values.
CalibrationMap fit_isotonic(std::span<const double> pit, std::span<const double> levels);

// F^-1(R^-1(p)) for keypoint k, axis a (0..2). p must lie in (0, 1).
double recalibrated_quantile(const PredictiveDistribution& pred, const CalibrationMap& map,
                             std::size_t k, std::size_t axis, double p);

// Variance of the recalibrated marginal by the midpoint rule over M levels,
// for one dimension (m^2).
double calibrated_dim_variance(const PredictiveDistribution& pred, const CalibrationMap& map,
                               std::size_t d, std::size_t m_levels = 1000);

// Midpoint-rule moments of the recalibrated standard quantile, cached per map.
// For a location-scale family the variance of dimension d equals
// scale^2 * (second moment - first moment^2) of the standardized quantiles.
class CalibratedVarianceGrid {
 public:
  CalibratedVarianceGrid(const CalibrationMap& map, std::size_t m_levels = 1000);
  double dim_variance(const PredictiveDistribution& pred, std::size_t d) const;
  // Sum over the three axes of keypoint k, cm^2.
  double keypoint_variance_cm2(const PredictiveDistribution& pred, std::size_t k) const;

 private:
  double gauss_factor_ = 0.0;
  double laplace_factor_ = 0.0;
};

double sharpness(std::span<const double> variances);
double pearson(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Reports.

struct GroupRow {
  std::string name;
  double mpjpe_cm = 0.0;
  double p_mpjpe_cm = 0.0;
  double uncertainty_cm2 = 0.0;
  double calibrated_uncertainty_cm2 = 0.0;
};

struct MetricsReport {
  std::string likelihood;
  std::size_t windows = 0;
  JointErrors mpjpe;
  JointErrors p_mpjpe;
  std::array<double, kNumKeypoints> uncertainty_cm2{};             // mean u_k
  std::array<double, kNumKeypoints> calibrated_uncertainty_cm2{};  // mean recalibrated u_k
  CoverageCurve coverage_uncalibrated;
  CoverageCurve coverage_calibrated;
  double ece_uncalibrated = 0.0;
  double ece_calibrated = 0.0;
  double sharpness_uncalibrated_cm2 = 0.0;
  double sharpness_calibrated_cm2 = 0.0;
  double pearson_r = 0.0;  // per joint-frame error vs u_k
  std::vector<GroupRow> groups;
};

struct ReportOptions {
  std::size_t ece_levels = 20;
  std::size_t quantile_levels = 1000;
};

MetricsReport compute_report(const std::vector<EvalRecord>& records, const CalibrationMap& map,
                             const ReportOptions& options = {});

// report.json (schema 1), per_keypoint.csv, body_parts.csv,
// calibration_sharpness.csv and coverage.csv.
void write_report(const std::filesystem::path& dir, const MetricsReport& report);
std::string report_json(const MetricsReport& report);

}  // namespace radpose
