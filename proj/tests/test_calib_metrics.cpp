#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "radpose/calib_metrics.hpp"
#include "test_support.hpp"

using namespace radpose;
using test::kind_of;

namespace {

Pose random_pose(Rng& rng, double scale = 0.5) {
  Pose p;
  for (auto& kp : p.keypoints)
    for (double& v : kp) v = scale * rng.normal();
  return p;
}

// Rotation about the axis (1, 2, 2) / 3 by `deg` degrees (Rodrigues).
std::array<std::array<double, 3>, 3> rotation(double deg) {
  const double t = deg * std::numbers::pi / 180.0;
  const double k[3] = {1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0};
  const double c = std::cos(t), s = std::sin(t);
  std::array<std::array<double, 3>, 3> r{};
  const double kx[3][3] = {{0, -k[2], k[1]}, {k[2], 0, -k[0]}, {-k[1], k[0], 0}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r[i][j] = (i == j ? c : 0.0) + s * kx[i][j] + (1.0 - c) * k[i] * k[j];
  return r;
}

Pose similarity(const Pose& p, double deg, double scale, Vec3 shift) {
  const auto r = rotation(deg);
  Pose out;
  for (std::size_t k = 0; k < kNumKeypoints; ++k)
    for (int i = 0; i < 3; ++i) {
      double v = 0.0;
      for (int j = 0; j < 3; ++j) v += r[i][j] * p[k][j];
      out[k][i] = scale * v + shift[i];
    }
  return out;
}

PredictiveDistribution make_pred(Likelihood lik, double mean, double dispersion) {
  PredictiveDistribution p;
  p.likelihood = lik;
  p.mean.assign(kPoseDims, mean);
  p.dispersion.assign(kPoseDims, dispersion);
  return p;
}

// Draws a truth from each prediction, with the true spread `true_scale` times
// the predicted one.
void self_consistent_set(Likelihood lik, std::size_t n, double true_scale, Rng& rng,
                         std::vector<PredictiveDistribution>& preds, std::vector<Pose>& truths) {
  preds.clear();
  truths.clear();
  for (std::size_t i = 0; i < n; ++i) {
    PredictiveDistribution p;
    p.likelihood = lik;
    std::vector<double> y(kPoseDims);
    for (std::size_t d = 0; d < kPoseDims; ++d) {
      const double mu = rng.normal();
      const double s = 0.05 + rng.uniform();
      p.mean.push_back(mu);
      if (lik == Likelihood::kLaplace) {
        p.dispersion.push_back(s);
        y[d] = mu + true_scale * s * laplace_from_uniform(rng.uniform());
      } else {
        p.dispersion.push_back(s * s);
        y[d] = mu + true_scale * s * rng.normal();
      }
    }
    preds.push_back(std::move(p));
    truths.push_back(Pose::from_flat(y));
  }
}

}  // namespace

TEST_CASE("mpjpe of identical poses is zero and a 3-4-5 offset gives 5 cm") {
  Rng rng(1);
  const Pose gt = random_pose(rng);
  const std::vector<Pose> truths = {gt, gt};
  CHECK(mpjpe(truths, truths).overall == 0.0);

  Pose pred = gt;
  pred[kLeftHand][0] += 0.03;
  pred[kLeftHand][1] += 0.04;
  const std::vector<Pose> preds = {pred, pred};
  const JointErrors e = mpjpe(preds, truths);
  CHECK(e.per_keypoint[kLeftHand] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(e.per_keypoint[kHead] == 0.0);
  CHECK(e.overall == doctest::Approx(0.05 / kNumKeypoints).epsilon(1e-12));
  CHECK(e.frames == 2);

  CHECK(kind_of([] { mpjpe({}, {}); }) == ErrorKind::kInvalidArgument);
  CHECK(kind_of([&] { mpjpe(std::span(preds).first(1), truths); }) == ErrorKind::kShapeMismatch);
  CHECK(kind_of([] { p_mpjpe({}, {}); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("p-mpjpe removes rotation, scale and translation") {
  Rng rng(2);
  const Pose gt = random_pose(rng);
  const std::vector<Pose> truths = {gt};
  const std::vector<Pose> moved = {similarity(gt, 37.0, 1.3, {1.0, 2.0, 3.0})};
  CHECK(p_mpjpe(moved, truths).overall < 1e-9);

  const std::vector<Pose> shifted = {similarity(gt, 0.0, 1.0, {0.1, -0.2, 0.2})};
  CHECK(mpjpe(shifted, truths).overall == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(p_mpjpe(shifted, truths).overall < 1e-12);

  // Reflections are not similarity transforms and must not be undone.
  Pose mirrored = gt;
  for (auto& kp : mirrored.keypoints) kp[0] = -kp[0];
  CHECK(p_mpjpe(std::vector<Pose>{mirrored}, truths).overall > 1e-3);
}

TEST_CASE("p-mpjpe never exceeds mpjpe on random frames") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const Pose gt = random_pose(rng);
    Pose pred = similarity(gt, 40.0 * rng.uniform(), 0.8 + 0.4 * rng.uniform(),
                           {rng.normal(), rng.normal(), rng.normal()});
    for (auto& kp : pred.keypoints)
      for (double& v : kp) v += 0.05 * rng.normal();
    const std::vector<Pose> p = {pred}, t = {gt};
    CHECK(p_mpjpe(p, t).overall <= mpjpe(p, t).overall + 1e-12);
  }
}

TEST_CASE("the procrustes fit is a local least-squares optimum") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose gt = random_pose(rng);
    Pose pred = random_pose(rng);
    Pose aligned;
    REQUIRE(procrustes_align(pred, gt, aligned));
    auto sse = [&](const Pose& p) {
      double s = 0.0;
      for (std::size_t k = 0; k < kNumKeypoints; ++k)
        for (int a = 0; a < 3; ++a) s += (p[k][a] - gt[k][a]) * (p[k][a] - gt[k][a]);
      return s;
    };
    const double best = sse(aligned);
    // Any further small similarity transform (about the aligned centroid) cannot help.
    Vec3 c{};
    for (const auto& kp : aligned.keypoints)
      for (int a = 0; a < 3; ++a) c[a] += kp[a] / kNumKeypoints;
    for (double deg : {-0.5, 0.5})
      for (double s : {0.99, 1.0, 1.01})
        for (double t : {-1e-3, 0.0, 1e-3}) {
          Pose centered = aligned;
          for (auto& kp : centered.keypoints)
            for (int a = 0; a < 3; ++a) kp[a] -= c[a];
          Pose q = similarity(centered, deg, s, {c[0] + t, c[1], c[2] - t});
          CHECK(sse(q) >= best - 1e-12);
        }
  }
}

TEST_CASE("degenerate frames are skipped and counted") {
  Rng rng(5);
  const Pose gt = random_pose(rng);
  Pose point;  // every joint at the origin
  Pose line;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) line[k] = {0.1 * k, 0.2 * k, 0.0};
  const std::vector<Pose> preds = {point, line, gt};
  const std::vector<Pose> truths = {gt, gt, gt};
  const JointErrors e = p_mpjpe(preds, truths);
  CHECK(e.skipped == 2);
  CHECK(e.frames == 1);
  CHECK(e.overall < 1e-12);
}

TEST_CASE("joint uncertainty sums the per-axis variances") {
  PredictiveDistribution g = make_pred(Likelihood::kGaussDiag, 0.0, 1.0);
  g.dispersion[3 * kHead + 0] = 1.0;
  g.dispersion[3 * kHead + 1] = 2.0;
  g.dispersion[3 * kHead + 2] = 3.0;
  const auto u = joint_uncertainty(g);
  CHECK(u[kHead] == doctest::Approx(6.0));
  CHECK(u[kHips] == doctest::Approx(3.0));

  const auto iso = joint_uncertainty(make_pred(Likelihood::kGaussDiag, 0.0, 0.7));
  for (double v : iso) CHECK(v == doctest::Approx(2.1));

  const auto lap = joint_uncertainty(make_pred(Likelihood::kLaplace, 0.0, 1.0));
  for (double v : lap) CHECK(v == doctest::Approx(6.0));
}

TEST_CASE("coverage of a correctly specified predictor follows the diagonal") {
  const auto levels = uniform_levels(20);
  for (Likelihood lik : {Likelihood::kGaussDiag, Likelihood::kLaplace, Likelihood::kGaussCov}) {
    CAPTURE(to_string(lik));
    Rng rng(6);
    std::vector<PredictiveDistribution> preds;
    std::vector<Pose> truths;
    self_consistent_set(lik, 1300, 1.0, rng, preds, truths);  // ~1e5 scalars
    const CoverageCurve c = coverage(preds, truths, levels);
    REQUIRE(c.empirical.size() == levels.size());
    for (std::size_t j = 0; j < levels.size(); ++j) {
      CHECK(std::abs(c.empirical[j] - levels[j]) <= 0.02);
      if (j > 0) CHECK(c.empirical[j] >= c.empirical[j - 1]);
    }
    CHECK(ece(c) < 0.01);
  }
}

TEST_CASE("coverage is a step when every target sits on the median") {
  const std::vector<PredictiveDistribution> preds = {make_pred(Likelihood::kGaussDiag, 0.3, 0.5),
                                                     make_pred(Likelihood::kLaplace, -0.2, 0.5)};
  std::vector<Pose> truths(2);
  for (auto& kp : truths[0].keypoints) kp = {0.3, 0.3, 0.3};
  for (auto& kp : truths[1].keypoints) kp = {-0.2, -0.2, -0.2};
  const std::vector<double> levels = {0.1, 0.25, 0.49, 0.5, 0.75, 1.0};
  const CoverageCurve c = coverage(preds, truths, levels);
  CHECK(c.empirical == std::vector<double>{0.0, 0.0, 0.0, 1.0, 1.0, 1.0});

  const std::vector<double> top = {1.0};
  CHECK(coverage(preds, truths, top).empirical == std::vector<double>{1.0});
  const std::vector<double> unsorted = {0.5, 0.2};
  CHECK(kind_of([&] { coverage(preds, truths, unsorted); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("ece of simple curves") {
  CoverageCurve diag{uniform_levels(20), uniform_levels(20)};
  CHECK(ece(diag) == 0.0);
  CoverageCurve flat{{0.25, 0.75}, {0.5, 0.5}};
  CHECK(ece(flat) == doctest::Approx(0.25));
  CHECK(kind_of([] { ece(CoverageCurve{}); }) == ErrorKind::kInvalidArgument);
  CHECK(uniform_levels(4) == std::vector<double>{0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("quantile levels are sorted interior empirical quantiles") {
  std::vector<double> pit;
  for (int i = 0; i < 1000; ++i) pit.push_back((i % 100) / 100.0);  // 0.00 .. 0.99, ten each
  const auto q = quantile_levels(pit, 9);
  CHECK(q == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
  const auto dense = quantile_levels(pit, 5000);
  CHECK(dense.size() == 99);  // zero is dropped, duplicates merged
  CHECK(std::is_sorted(dense.begin(), dense.end()));
  CHECK(kind_of([] { quantile_levels({}, 3); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("pav matches a brute-force monotone least-squares fit") {
  const std::vector<double> y = {1.0, 3.0, 2.0};
  const auto fit = pav(y);
  // Exhaustive search over monotone triples on a 0.05 grid in [0, 4].
  double best = 1e300;
  std::array<double, 3> arg{};
  for (int a = 0; a <= 80; ++a)
    for (int b = a; b <= 80; ++b)
      for (int c = b; c <= 80; ++c) {
        const double f[3] = {0.05 * a, 0.05 * b, 0.05 * c};
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += (f[i] - y[i]) * (f[i] - y[i]);
        if (s < best) {
          best = s;
          arg = {f[0], f[1], f[2]};
        }
      }
  REQUIRE(fit.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(fit[i] == doctest::Approx(arg[i]).epsilon(1e-12));
  CHECK(fit == std::vector<double>{1.0, 2.5, 2.5});

  const std::vector<double> mono = {0.1, 0.1, 0.4, 0.9};
  CHECK(pav(mono) == mono);

  // Weights pull the pooled value toward the heavier point.
  const std::vector<double> w = {1.0, 3.0};
  const std::vector<double> pair = {2.0, 0.0};
  const auto wf = pav(pair, w);
  CHECK(wf[0] == doctest::Approx(0.5));
  CHECK(wf[1] == doctest::Approx(0.5));
}

TEST_CASE("pav output is monotone and preserves the total") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> y(1 + trial % 30);
    for (double& v : y) v = rng.normal();
    const auto f = pav(y);
    REQUIRE(f.size() == y.size());
    double sy = 0.0, sf = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      sy += y[i];
      sf += f[i];
      if (i > 0) CHECK(f[i] >= f[i - 1]);
    }
    CHECK(sf == doctest::Approx(sy).epsilon(1e-10));
  }
}

TEST_CASE("calibration maps interpolate, invert and round-trip through csv") {
  const CalibrationMap m({0.0, 0.5, 0.8, 1.0}, {0.0, 0.2, 0.2, 1.0});
  CHECK(m(0.25) == doctest::Approx(0.1));
  CHECK(m(0.6) == doctest::Approx(0.2));
  CHECK(m(0.9) == doctest::Approx(0.6));
  CHECK(m(-1.0) == 0.0);
  CHECK(m(2.0) == 1.0);
  // Generalized inverse: the flat stretch maps back to its left end.
  CHECK(m.inverse(0.2) == doctest::Approx(0.5));
  CHECK(m.inverse(0.1) == doctest::Approx(0.25));
  CHECK(m.inverse(0.6) == doctest::Approx(0.9));
  for (double q = 0.01; q < 1.0; q += 0.01) {
    const double p = m.inverse(q);
    CHECK(m(p) >= q - 1e-12);
    CHECK(m(p - 1e-6) < q + 1e-12);
  }

  const auto path = test::temp_path("map.csv");
  m.write_csv(path);
  const CalibrationMap back = CalibrationMap::read_csv(path);
  CHECK(back.breakpoints() == m.breakpoints());
  CHECK(back.values() == m.values());

  CHECK(kind_of([] { CalibrationMap({0.0, 1.0}, {0.5, 0.4}); }) == ErrorKind::kInvalidArgument);
  CHECK(kind_of([] { CalibrationMap({0.1, 1.0}, {0.0, 1.0}); }) == ErrorKind::kInvalidArgument);
  CHECK(kind_of([] { CalibrationMap::read_csv("/nonexistent/map.csv"); }) ==
        ErrorKind::kFileNotFound);
  const CalibrationMap clamped({0.0, 1.0}, {-0.5, 1.5});
  CHECK(clamped.values() == std::vector<double>{0.0, 1.0});
}

TEST_CASE("isotonic recalibration fixes an overconfident predictor on its own data") {
  Rng rng(8);
  std::vector<PredictiveDistribution> preds;
  std::vector<Pose> truths;
  self_consistent_set(Likelihood::kGaussDiag, 200, 2.0, rng, preds, truths);
  auto pit = pit_values(preds, truths);
  const double n = static_cast<double>(pit.size());
  const CalibrationMap map = fit_isotonic(pit, quantile_levels(pit, 1000));
  for (std::size_t i = 1; i < map.values().size(); ++i)
    CHECK(map.values()[i] >= map.values()[i - 1]);
  CHECK(map.breakpoints().front() == 0.0);
  CHECK(map.breakpoints().back() == 1.0);

  const auto levels = uniform_levels(20);
  const double before = ece(coverage(pit, levels));
  for (double& u : pit) u = map(u);
  const CoverageCurve after = coverage(pit, levels);
  CHECK(ece(after) <= before);
  CHECK(before > 0.05);
  for (std::size_t j = 0; j < levels.size(); ++j)
    CHECK(std::abs(after.empirical[j] - levels[j]) <= 1.0 / std::sqrt(n));

  // A coarse uniform grid still never makes the fitted data worse.
  std::vector<double> raw = pit_values(preds, truths);
  const CalibrationMap coarse = fit_isotonic(raw, uniform_levels(20));
  for (double& u : raw) u = coarse(u);
  CHECK(ece(coverage(raw, levels)) <= before);

  const std::vector<double> few(9, 0.5);
  CHECK(kind_of([&] { fit_isotonic(few, levels); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("recalibrated quantiles invert the calibrated cdf") {
  const PredictiveDistribution g = make_pred(Likelihood::kGaussDiag, 0.4, 0.25);
  const PredictiveDistribution l = make_pred(Likelihood::kLaplace, -0.1, 0.3);
  const CalibrationMap id = CalibrationMap::identity();
  CHECK(recalibrated_quantile(g, id, kHead, 1, 0.5) == doctest::Approx(0.4).epsilon(1e-14));
  for (double p : {0.01, 0.2, 0.7, 0.99}) {
    CHECK(recalibrated_quantile(g, id, 3, 2, p) == predictive_quantile(g, 11, p));
    CHECK(recalibrated_quantile(l, id, 3, 2, p) == predictive_quantile(l, 11, p));
  }
  // Gaussian quantile at 0.975 is mu + 1.959964 sigma.
  CHECK(predictive_quantile(g, 0, 0.975) == doctest::Approx(0.4 + 0.5 * 1.959963984540054));

  const CalibrationMap m({0.0, 0.3, 0.6, 1.0}, {0.0, 0.1, 0.7, 1.0});
  for (double p = 0.05; p < 1.0; p += 0.05) {
    const double q = recalibrated_quantile(l, m, 0, 0, p);
    CHECK(m(predictive_cdf(l, 0, q)) == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(kind_of([&] { recalibrated_quantile(g, id, 0, 0, 0.0); }) == ErrorKind::kInvalidArgument);
  CHECK(kind_of([&] { recalibrated_quantile(g, id, 0, 0, 1.0); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("calibrated variance under the identity map reproduces analytic variances") {
  const CalibrationMap id = CalibrationMap::identity();
  CHECK(calibrated_dim_variance(make_pred(Likelihood::kGaussDiag, 0.0, 1.0), id, 0) ==
        doctest::Approx(1.0).epsilon(0.01));
  CHECK(calibrated_dim_variance(make_pred(Likelihood::kLaplace, 0.0, 1.0), id, 0) ==
        doctest::Approx(2.0).epsilon(0.01));
  CHECK(calibrated_dim_variance(make_pred(Likelihood::kGaussDiag, 0.3, 0.0), id, 0) == 0.0);

  const CalibratedVarianceGrid grid(id);
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const double mu = rng.normal();
    const double s = 0.01 + 2.0 * rng.uniform();
    const auto g = make_pred(Likelihood::kGaussDiag, mu, s * s);
    const auto l = make_pred(Likelihood::kLaplace, mu, s);
    CHECK(calibrated_dim_variance(g, id, 5) == doctest::Approx(s * s).epsilon(0.01));
    CHECK(calibrated_dim_variance(l, id, 5) == doctest::Approx(2.0 * s * s).epsilon(0.01));
    CHECK(grid.dim_variance(g, 5) == doctest::Approx(calibrated_dim_variance(g, id, 5)).epsilon(1e-9));
    CHECK(grid.dim_variance(l, 5) == doctest::Approx(calibrated_dim_variance(l, id, 5)).epsilon(1e-9));
  }
  // Widening map: R compresses the middle, so the recalibrated spread grows.
  const CalibrationMap widen({0.0, 0.2, 0.8, 1.0}, {0.0, 0.4, 0.6, 1.0});
  const auto g = make_pred(Likelihood::kGaussDiag, 0.0, 1.0);
  CHECK(calibrated_dim_variance(g, widen, 0) > 1.5);
  CHECK(CalibratedVarianceGrid(widen).keypoint_variance_cm2(g, 0) ==
        doctest::Approx(3e4 * calibrated_dim_variance(g, widen, 0)).epsilon(1e-9));
}

TEST_CASE("sharpness and pearson") {
  const std::vector<double> twos(7, 2.0);
  CHECK(sharpness(twos) == 2.0);
  const std::vector<double> mix = {1.0, 3.0, 1.0, 3.0};
  CHECK(sharpness(mix) == 2.0);
  CHECK(kind_of([] { sharpness({}); }) == ErrorKind::kInvalidArgument);

  Rng rng(10);
  std::vector<double> e(10000), u(10000);
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = std::abs(rng.normal());
    u[i] = rng.uniform();
  }
  CHECK(pearson(e, e) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(pearson(e, u)) < 0.05);
  std::vector<double> neg(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) neg[i] = 3.0 - 2.0 * e[i];
  CHECK(pearson(e, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  const std::vector<double> flat(5, 1.0), ramp = {1, 2, 3, 4, 5};
  CHECK(kind_of([&] { pearson(flat, ramp); }) == ErrorKind::kInvalidArgument);
  CHECK(kind_of([&] { pearson(std::span(ramp).first(2), std::span(ramp).first(2)); }) ==
        ErrorKind::kInvalidArgument);
}

TEST_CASE("reports aggregate groups as member means and write every table") {
  Rng rng(11);
  std::vector<PredictiveDistribution> preds;
  std::vector<Pose> truths;
  self_consistent_set(Likelihood::kGaussDiag, 40, 1.5, rng, preds, truths);
  std::vector<EvalRecord> records;
  for (std::size_t i = 0; i < preds.size(); ++i)
    records.push_back({"w" + std::to_string(i), 0, 0, preds[i], truths[i]});
  std::vector<double> pit = pit_values(preds, truths);
  const CalibrationMap map = fit_isotonic(pit, uniform_levels(100));
  const MetricsReport rep = compute_report(records, map);

  CHECK(rep.windows == 40);
  CHECK(rep.likelihood == "gauss_diag");
  CHECK(std::isfinite(rep.pearson_r));
  CHECK(rep.ece_calibrated <= rep.ece_uncalibrated);
  CHECK(rep.sharpness_calibrated_cm2 > rep.sharpness_uncalibrated_cm2);
  REQUIRE(rep.groups.size() == body_part_groups().size());
  for (std::size_t g = 0; g < rep.groups.size(); ++g) {
    double m = 0.0, u = 0.0;
    for (std::size_t k : body_part_groups()[g].keypoints) {
      m += rep.mpjpe.per_keypoint[k] * 100.0;
      u += rep.uncertainty_cm2[k];
    }
    const double n = static_cast<double>(body_part_groups()[g].keypoints.size());
    CHECK(rep.groups[g].mpjpe_cm == doctest::Approx(m / n).epsilon(1e-12));
    CHECK(rep.groups[g].uncertainty_cm2 == doctest::Approx(u / n).epsilon(1e-12));
  }
  double total = 0.0;
  for (double v : rep.uncertainty_cm2) total += v;
  CHECK(rep.sharpness_uncalibrated_cm2 == doctest::Approx(total / kNumKeypoints).epsilon(1e-12));

  const auto dir = test::temp_path("report");
  std::filesystem::remove_all(dir);
  write_report(dir, rep);
  for (const char* f : {"report.json", "per_keypoint.csv", "body_parts.csv",
                        "calibration_sharpness.csv", "coverage.csv"})
    CHECK(std::filesystem::exists(dir / f));
  std::ifstream in(dir / "report.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["schema"] == 1);
  CHECK(j["keypoints"].size() == kNumKeypoints);
  CHECK(j["ece_calibrated"].get<double>() == rep.ece_calibrated);

  CHECK(kind_of([&] { compute_report({}, map); }) == ErrorKind::kInvalidArgument);
}
