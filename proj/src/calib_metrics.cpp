#include "radpose/calib_metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "radpose/error.hpp"

namespace radpose {

namespace {

constexpr double kCm2PerM2 = 1e4;
constexpr double kCmPerM = 100.0;

void require_pairs(std::size_t a, std::size_t b) {
  require(a == b, ErrorKind::kShapeMismatch,
          "prediction count " + std::to_string(a) + " differs from truth count " + std::to_string(b));
  require(a > 0, ErrorKind::kInvalidArgument, "metrics need at least one frame");
}

Eigen::Matrix<double, kNumKeypoints, 3> to_matrix(const Pose& p) {
  Eigen::Matrix<double, kNumKeypoints, 3> m;
  for (std::size_t k = 0; k < kNumKeypoints; ++k)
    for (std::size_t a = 0; a < 3; ++a) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a)) = p[k][a];
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pose accuracy.

std::array<double, kNumKeypoints> joint_distances(const Pose& pred, const Pose& truth) {
  std::array<double, kNumKeypoints> out{};
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    double s = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      const double d = pred[k][a] - truth[k][a];
      s += d * d;
    }
    out[k] = std::sqrt(s);
  }
  return out;
}

namespace {

void finish(JointErrors& e) {
  if (e.frames == 0) return;
  double total = 0.0;
  for (double& v : e.per_keypoint) {
    v /= static_cast<double>(e.frames);
    total += v;
  }
  e.overall = total / static_cast<double>(kNumKeypoints);
}

}  // namespace

JointErrors mpjpe(std::span<const Pose> preds, std::span<const Pose> truths) {
  require_pairs(preds.size(), truths.size());
  JointErrors e;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto d = joint_distances(preds[i], truths[i]);
    for (std::size_t k = 0; k < kNumKeypoints; ++k) e.per_keypoint[k] += d[k];
    ++e.frames;
  }
  finish(e);
  return e;
}

bool procrustes_align(const Pose& pred, const Pose& truth, Pose& aligned) {
  const auto x = to_matrix(pred);
  const auto y = to_matrix(truth);
  const Eigen::RowVector3d mx = x.colwise().mean();
  const Eigen::RowVector3d my = y.colwise().mean();
  const Eigen::Matrix<double, kNumKeypoints, 3> xc = x.rowwise() - mx;
  const Eigen::Matrix<double, kNumKeypoints, 3> yc = y.rowwise() - my;
  const double norm_x = xc.squaredNorm();
  if (!(norm_x > 0.0)) return false;

  const Eigen::Matrix3d h = xc.transpose() * yc;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(1) > 1e-12 * std::max(sv(0), 1e-300))) return false;

  const Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = v * d * u.transpose();  // maps centered pred onto truth
  const double scale = (sv.asDiagonal() * d).trace() / norm_x;
  const Eigen::Matrix<double, kNumKeypoints, 3> out =
      (scale * (xc * r.transpose())).rowwise() + my;
  for (std::size_t k = 0; k < kNumKeypoints; ++k)
    for (std::size_t a = 0; a < 3; ++a)
      aligned[k][a] = out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a));
  return true;
}

JointErrors p_mpjpe(std::span<const Pose> preds, std::span<const Pose> truths) {
  require_pairs(preds.size(), truths.size());
  JointErrors e;
  Pose aligned;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!procrustes_align(preds[i], truths[i], aligned)) {
      ++e.skipped;
      continue;
    }
    const auto d = joint_distances(aligned, truths[i]);
    for (std::size_t k = 0; k < kNumKeypoints; ++k) e.per_keypoint[k] += d[k];
    ++e.frames;
  }
  finish(e);
  return e;
}

// ---------------------------------------------------------------------------
// Predictive marginals.

std::array<double, kNumKeypoints> joint_uncertainty(const PredictiveDistribution& pred) {
  require(pred.dispersion.size() == kPoseDims, ErrorKind::kShapeMismatch,
          "prediction must have 78 dispersion values");
  std::array<double, kNumKeypoints> u{};
  for (std::size_t k = 0; k < kNumKeypoints; ++k)
    for (std::size_t a = 0; a < 3; ++a) u[k] += pred.marginal_variance(3 * k + a);
  return u;
}

namespace {

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double std_normal_quantile(double p) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double std_laplace_cdf(double z) {
  return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

double std_laplace_quantile(double p) {
  return p < 0.5 ? std::log(2.0 * p) : -std::log(2.0 - 2.0 * p);
}

double scale_of(const PredictiveDistribution& pred, std::size_t d) {
  const double v = pred.dispersion.at(d);
  return pred.likelihood == Likelihood::kLaplace ? v : std::sqrt(v);
}

}  // namespace

double predictive_cdf(const PredictiveDistribution& pred, std::size_t d, double y) {
  const double s = scale_of(pred, d);
  const double mu = pred.mean.at(d);
  if (!(s > 0.0)) return y < mu ? 0.0 : 1.0;
  const double z = (y - mu) / s;
  return pred.likelihood == Likelihood::kLaplace ? std_laplace_cdf(z) : std_normal_cdf(z);
}

double predictive_quantile(const PredictiveDistribution& pred, std::size_t d, double p) {
  require(p > 0.0 && p < 1.0, ErrorKind::kInvalidArgument, "quantile level must lie in (0, 1)");
  const double z = pred.likelihood == Likelihood::kLaplace ? std_laplace_quantile(p)
                                                           : std_normal_quantile(p);
  return pred.mean.at(d) + scale_of(pred, d) * z;
}

std::vector<double> pit_values(std::span<const PredictiveDistribution> preds,
                               std::span<const Pose> truths) {
  require(preds.size() == truths.size(), ErrorKind::kShapeMismatch,
          "prediction and truth counts differ");
  std::vector<double> out;
  out.reserve(preds.size() * kPoseDims);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto y = truths[i].flat();
    for (std::size_t d = 0; d < kPoseDims; ++d) out.push_back(predictive_cdf(preds[i], d, y[d]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calibration.

std::vector<double> uniform_levels(std::size_t c) {
  require(c >= 1, ErrorKind::kInvalidArgument, "need at least one level");
  std::vector<double> out(c);
  for (std::size_t j = 1; j <= c; ++j) out[j - 1] = static_cast<double>(j) / static_cast<double>(c);
  return out;
}

std::vector<double> quantile_levels(std::span<const double> pit, std::size_t c) {
  require(c >= 1, ErrorKind::kInvalidArgument, "need at least one level");
  require(!pit.empty(), ErrorKind::kInvalidArgument, "quantile levels of no values");
  std::vector<double> sorted(pit.begin(), pit.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(c);
  const double n = static_cast<double>(sorted.size());
  for (std::size_t j = 1; j <= c; ++j) {
    const double r = static_cast<double>(j) / static_cast<double>(c + 1) * n;
    const auto i = std::min(sorted.size() - 1, static_cast<std::size_t>(r));
    const double v = sorted[i];
    if (v > 0.0 && v < 1.0 && (out.empty() || v > out.back())) out.push_back(v);
  }
  return out;
}

CoverageCurve coverage(std::span<const double> pit, std::span<const double> levels) {
  require(std::is_sorted(levels.begin(), levels.end()), ErrorKind::kInvalidArgument,
          "coverage levels must be sorted");
  for (double p : levels)
    require(p >= 0.0 && p <= 1.0, ErrorKind::kInvalidArgument, "coverage levels must lie in [0, 1]");
  std::vector<double> sorted(pit.begin(), pit.end());
  std::sort(sorted.begin(), sorted.end());
  CoverageCurve c;
  c.levels.assign(levels.begin(), levels.end());
  c.empirical.reserve(levels.size());
  for (double p : levels) {
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), p) - sorted.begin();
    c.empirical.push_back(sorted.empty() ? 0.0
                                         : static_cast<double>(n) / static_cast<double>(sorted.size()));
  }
  return c;
}

CoverageCurve coverage(std::span<const PredictiveDistribution> preds, std::span<const Pose> truths,
                       std::span<const double> levels) {
  const auto pit = pit_values(preds, truths);
  return coverage(pit, levels);
}

double ece(const CoverageCurve& curve) {
  require(!curve.levels.empty() && curve.levels.size() == curve.empirical.size(),
          ErrorKind::kInvalidArgument, "ece needs a non-empty curve");
  double s = 0.0;
  for (std::size_t j = 0; j < curve.levels.size(); ++j)
    s += std::abs(curve.empirical[j] - curve.levels[j]);
  return s / static_cast<double>(curve.levels.size());
}

std::vector<double> pav(std::span<const double> values, std::span<const double> weights) {
  require(weights.empty() || weights.size() == values.size(), ErrorKind::kShapeMismatch,
          "pav weights must match values");
  struct Block {
    double mean, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    require(w > 0.0, ErrorKind::kInvalidArgument, "pav weights must be positive");
    blocks.push_back({values[i], w, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      const double w_sum = a.weight + b.weight;
      a.mean = (a.mean * a.weight + b.mean * b.weight) / w_sum;
      a.weight = w_sum;
      a.count += b.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean);
  return out;
}

CalibrationMap::CalibrationMap(std::vector<double> breakpoints, std::vector<double> values)
    : x_(std::move(breakpoints)), y_(std::move(values)) {
  require(x_.size() >= 2 && x_.size() == y_.size(), ErrorKind::kInvalidArgument,
          "calibration map needs matching breakpoints and values");
  require(x_.front() == 0.0 && x_.back() == 1.0, ErrorKind::kInvalidArgument,
          "calibration map must span [0, 1]");
  for (std::size_t i = 1; i < x_.size(); ++i) {
    require(x_[i] > x_[i - 1], ErrorKind::kInvalidArgument, "breakpoints must increase");
    require(y_[i] >= y_[i - 1], ErrorKind::kInvalidArgument, "calibration map must be monotone");
  }
  for (double& v : y_) v = std::clamp(v, 0.0, 1.0);
}

CalibrationMap CalibrationMap::identity() { return CalibrationMap({0.0, 1.0}, {0.0, 1.0}); }

double CalibrationMap::operator()(double p) const {
  if (p <= 0.0) return y_.front();
  if (p >= 1.0) return y_.back();
  const auto it = std::upper_bound(x_.begin(), x_.end(), p);
  const std::size_t i = static_cast<std::size_t>(it - x_.begin());
  const double t = (p - x_[i - 1]) / (x_[i] - x_[i - 1]);
  return y_[i - 1] + t * (y_[i] - y_[i - 1]);
}

double CalibrationMap::inverse(double q) const {
  if (q <= y_.front()) return 0.0;
  if (q > y_.back()) return 1.0;
  // First segment whose right value reaches q.
  const auto it = std::lower_bound(y_.begin(), y_.end(), q);
  const std::size_t i = static_cast<std::size_t>(it - y_.begin());
  const double dy = y_[i] - y_[i - 1];
  if (dy <= 0.0) return x_[i];
  return x_[i - 1] + (q - y_[i - 1]) / dy * (x_[i] - x_[i - 1]);
}

void CalibrationMap::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  os << "level,calibrated\n";
  char buf[64];
  for (std::size_t i = 0; i < x_.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x_[i], y_[i]);
    os << buf;
  }
}

CalibrationMap CalibrationMap::read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::kFileNotFound, "cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<double> x, y;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorKind::kIo, path.string() + ": bad map row");
    x.push_back(std::strtod(line.substr(0, comma).c_str(), nullptr));
    y.push_back(std::strtod(line.substr(comma + 1).c_str(), nullptr));
  }
  return CalibrationMap(std::move(x), std::move(y));
}

CalibrationMap fit_isotonic(std::span<const double> pit, std::span<const double> levels) {
  require(pit.size() >= 10, ErrorKind::kInvalidArgument,
          "isotonic calibration needs at least 10 points, got " + std::to_string(pit.size()));
  const CoverageCurve curve = coverage(pit, levels);
  std::vector<double> x, y;
  for (std::size_t j = 0; j < curve.levels.size(); ++j) {
    const double p = curve.levels[j];
    if (p <= 0.0 || p >= 1.0) continue;
    x.push_back(p);
    y.push_back(curve.empirical[j]);
  }
  const auto fitted = pav(y);
  std::vector<double> bx = {0.0}, by = {0.0};
  bx.insert(bx.end(), x.begin(), x.end());
  by.insert(by.end(), fitted.begin(), fitted.end());
  bx.push_back(1.0);
  by.push_back(1.0);
  return CalibrationMap(std::move(bx), std::move(by));
}

double recalibrated_quantile(const PredictiveDistribution& pred, const CalibrationMap& map,
                             std::size_t k, std::size_t axis, double p) {
  require(p > 0.0 && p < 1.0, ErrorKind::kInvalidArgument, "quantile level must lie in (0, 1)");
  require(k < kNumKeypoints && axis < 3, ErrorKind::kInvalidArgument, "keypoint index out of range");
  const double q = std::clamp(map.inverse(p), 1e-15, 1.0 - 1e-15);
  return predictive_quantile(pred, 3 * k + axis, q);
}

namespace {

// Midpoint-rule variance of t -> f(R^-1(p_m)).
template <typename F>
double midpoint_variance(const CalibrationMap& map, std::size_t m_levels, F f) {
  require(m_levels >= 1, ErrorKind::kInvalidArgument, "need at least one quadrature level");
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t m = 0; m < m_levels; ++m) {
    const double p = (static_cast<double>(m) + 0.5) / static_cast<double>(m_levels);
    const double q = std::clamp(map.inverse(p), 1e-15, 1.0 - 1e-15);
    const double v = f(q);
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / static_cast<double>(m_levels);
  return std::max(0.0, s2 / static_cast<double>(m_levels) - mean * mean);
}

}  // namespace

double calibrated_dim_variance(const PredictiveDistribution& pred, const CalibrationMap& map,
                               std::size_t d, std::size_t m_levels) {
  // Q(p) - m is computed around the mean so the two-pass form stays accurate.
  const double mu = pred.mean.at(d);
  return midpoint_variance(map, m_levels,
                           [&](double q) { return predictive_quantile(pred, d, q) - mu; });
}

CalibratedVarianceGrid::CalibratedVarianceGrid(const CalibrationMap& map, std::size_t m_levels) {
  gauss_factor_ = midpoint_variance(map, m_levels, std_normal_quantile);
  laplace_factor_ = midpoint_variance(map, m_levels, std_laplace_quantile);
}

double CalibratedVarianceGrid::dim_variance(const PredictiveDistribution& pred,
                                            std::size_t d) const {
  const double s = scale_of(pred, d);
  return s * s * (pred.likelihood == Likelihood::kLaplace ? laplace_factor_ : gauss_factor_);
}

double CalibratedVarianceGrid::keypoint_variance_cm2(const PredictiveDistribution& pred,
                                                     std::size_t k) const {
  double s = 0.0;
  for (std::size_t a = 0; a < 3; ++a) s += dim_variance(pred, 3 * k + a);
  return s * kCm2PerM2;
}

double sharpness(std::span<const double> variances) {
  require(!variances.empty(), ErrorKind::kInvalidArgument, "sharpness of no values");
  double s = 0.0;
  for (double v : variances) s += v;
  return s / static_cast<double>(variances.size());
}

double pearson(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::kShapeMismatch, "pearson needs equal-length series");
  require(a.size() >= 3, ErrorKind::kInvalidArgument, "pearson needs at least 3 pairs");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  require(saa > 0.0 && sbb > 0.0, ErrorKind::kInvalidArgument,
          "pearson correlation of a constant series");
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------
// Reports.

MetricsReport compute_report(const std::vector<EvalRecord>& records, const CalibrationMap& map,
                             const ReportOptions& options) {
  require(!records.empty(), ErrorKind::kInvalidArgument, "report needs at least one window");
  MetricsReport rep;
  rep.likelihood = to_string(records.front().pred.likelihood);
  rep.windows = records.size();

  std::vector<Pose> preds, truths;
  std::vector<PredictiveDistribution> dists;
  for (const auto& r : records) {
    preds.push_back(r.pred.mean_pose());
    truths.push_back(r.truth);
    dists.push_back(r.pred);
  }
  rep.mpjpe = mpjpe(preds, truths);
  rep.p_mpjpe = p_mpjpe(preds, truths);

  const CalibratedVarianceGrid grid(map, options.quantile_levels);
  std::vector<double> errors, uncertainties, all_u, all_u_cal;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto u = joint_uncertainty(records[i].pred);
    const auto e = joint_distances(preds[i], truths[i]);
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      const double uc = grid.keypoint_variance_cm2(records[i].pred, k);
      rep.uncertainty_cm2[k] += u[k] * kCm2PerM2;
      rep.calibrated_uncertainty_cm2[k] += uc;
      errors.push_back(e[k]);
      uncertainties.push_back(u[k]);
      all_u.push_back(u[k] * kCm2PerM2);
      all_u_cal.push_back(uc);
    }
  }
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    rep.uncertainty_cm2[k] /= static_cast<double>(records.size());
    rep.calibrated_uncertainty_cm2[k] /= static_cast<double>(records.size());
  }
  rep.sharpness_uncalibrated_cm2 = sharpness(all_u);
  rep.sharpness_calibrated_cm2 = sharpness(all_u_cal);
  rep.pearson_r = pearson(errors, uncertainties);

  const auto levels = uniform_levels(options.ece_levels);
  auto pit = pit_values(dists, truths);
  rep.coverage_uncalibrated = coverage(pit, levels);
  for (double& u : pit) u = map(u);
  rep.coverage_calibrated = coverage(pit, levels);
  rep.ece_uncalibrated = ece(rep.coverage_uncalibrated);
  rep.ece_calibrated = ece(rep.coverage_calibrated);

  for (const auto& g : body_part_groups()) {
    GroupRow row;
    row.name = std::string(g.name);
    for (std::size_t k : g.keypoints) {
      row.mpjpe_cm += rep.mpjpe.per_keypoint[k] * kCmPerM;
      row.p_mpjpe_cm += rep.p_mpjpe.per_keypoint[k] * kCmPerM;
      row.uncertainty_cm2 += rep.uncertainty_cm2[k];
      row.calibrated_uncertainty_cm2 += rep.calibrated_uncertainty_cm2[k];
    }
    const double n = static_cast<double>(g.keypoints.size());
    row.mpjpe_cm /= n;
    row.p_mpjpe_cm /= n;
    row.uncertainty_cm2 /= n;
    row.calibrated_uncertainty_cm2 /= n;
    rep.groups.push_back(row);
  }
  return rep;
}

std::string report_json(const MetricsReport& rep) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema"] = 1;
  j["likelihood"] = rep.likelihood;
  j["windows"] = rep.windows;
  j["mpjpe_cm"] = rep.mpjpe.overall * kCmPerM;
  j["p_mpjpe_cm"] = rep.p_mpjpe.overall * kCmPerM;
  j["p_mpjpe_skipped_frames"] = rep.p_mpjpe.skipped;
  j["ece_uncalibrated"] = rep.ece_uncalibrated;
  j["ece_calibrated"] = rep.ece_calibrated;
  j["sharpness_uncalibrated_cm2"] = rep.sharpness_uncalibrated_cm2;
  j["sharpness_calibrated_cm2"] = rep.sharpness_calibrated_cm2;
  j["pearson_r"] = rep.pearson_r;
  ordered_json kps = ordered_json::array();
  for (std::size_t k = 0; k < kNumKeypoints; ++k)
    kps.push_back({{"keypoint", keypoint_name(k)},
                   {"mpjpe_cm", rep.mpjpe.per_keypoint[k] * kCmPerM},
                   {"p_mpjpe_cm", rep.p_mpjpe.per_keypoint[k] * kCmPerM},
                   {"uncertainty_cm2", rep.uncertainty_cm2[k]},
                   {"calibrated_uncertainty_cm2", rep.calibrated_uncertainty_cm2[k]}});
  j["keypoints"] = kps;
  ordered_json groups = ordered_json::array();
  for (const auto& g : rep.groups)
    groups.push_back({{"group", g.name},
                      {"mpjpe_cm", g.mpjpe_cm},
                      {"p_mpjpe_cm", g.p_mpjpe_cm},
                      {"uncertainty_cm2", g.uncertainty_cm2},
                      {"calibrated_uncertainty_cm2", g.calibrated_uncertainty_cm2}});
  j["body_parts"] = groups;
  return j.dump(2) + "\n";
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  return os;
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_report(const std::filesystem::path& dir, const MetricsReport& rep) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os = open_csv(dir / "report.json");
    os << report_json(rep);
  }
  {
    auto os = open_csv(dir / "per_keypoint.csv");
    os << "keypoint,name,mpjpe_cm,p_mpjpe_cm,uncertainty_cm2,calibrated_uncertainty_cm2\n";
    for (std::size_t k = 0; k < kNumKeypoints; ++k)
      os << k << ',' << keypoint_name(k) << ',' << g17(rep.mpjpe.per_keypoint[k] * kCmPerM) << ','
         << g17(rep.p_mpjpe.per_keypoint[k] * kCmPerM) << ',' << g17(rep.uncertainty_cm2[k]) << ','
         << g17(rep.calibrated_uncertainty_cm2[k]) << '\n';
    os << "overall,Overall Avg.," << g17(rep.mpjpe.overall * kCmPerM) << ','
       << g17(rep.p_mpjpe.overall * kCmPerM) << ",,\n";
  }
  {
    auto os = open_csv(dir / "body_parts.csv");
    os << "group,mpjpe_cm,p_mpjpe_cm,uncertainty_cm2,calibrated_uncertainty_cm2\n";
    for (const auto& g : rep.groups)
      os << g.name << ',' << g17(g.mpjpe_cm) << ',' << g17(g.p_mpjpe_cm) << ','
         << g17(g.uncertainty_cm2) << ',' << g17(g.calibrated_uncertainty_cm2) << '\n';
  }
  {
    auto os = open_csv(dir / "calibration_sharpness.csv");
    os << "model,ece_uncalibrated,ece_calibrated,sharpness_uncalibrated_cm2,"
          "sharpness_calibrated_cm2\n";
    os << rep.likelihood << ',' << g17(rep.ece_uncalibrated) << ',' << g17(rep.ece_calibrated)
       << ',' << g17(rep.sharpness_uncalibrated_cm2) << ',' << g17(rep.sharpness_calibrated_cm2)
       << '\n';
  }
  {
    auto os = open_csv(dir / "coverage.csv");
    os << "level,empirical_uncalibrated,empirical_calibrated\n";
    for (std::size_t j = 0; j < rep.coverage_uncalibrated.levels.size(); ++j)
      os << g17(rep.coverage_uncalibrated.levels[j]) << ','
         << g17(rep.coverage_uncalibrated.empirical[j]) << ','
         << g17(rep.coverage_calibrated.empirical[j]) << '\n';
  }
}

}  // namespace radpose
