// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.
// Usage: radpose_acceptance [criterion ...]   (all when none given)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "radpose/calib_metrics.hpp"
#include "radpose/cli.hpp"
#include "radpose/latent_activity.hpp"
#include "radpose/prob_losses.hpp"
#include "radpose/radar_frontend.hpp"
#include "radpose/scatter_sim.hpp"
#include "radpose/trainer.hpp"

using namespace radpose;
namespace fs = std::filesystem;

namespace {

constexpr double kC = 299792458.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

// ---------------------------------------------------------------------------
// 1. Peak bins of single scatterers against the radar equations.

Outcome fft_physics_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const RadarParams p = RadarParams::defaults();
  const RadarDims& d = p.dims;
  const double v_limit = 0.9 * p.max_doppler() * kC / (2.0 * p.carrier_hz);
  Rng rng(101);
  std::size_t worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const double r = rng.uniform(0.5, 8.5);
    const double v = rng.uniform(-v_limit, v_limit);
    const double az = rng.uniform(-0.6, 0.6);
    const double el = rng.uniform(-0.3, 0.3);
    const Vec3 dir{std::sin(az) * std::cos(el), std::cos(az) * std::cos(el), std::sin(el)};
    std::vector<std::vector<Scatterer>> frames{
        {{{r * dir[0], r * dir[1], r * dir[2]}, {v * dir[0], v * dir[1], v * dir[2]}, 1.0}}};
    Rng noise(1);
    const RadarCube cube = synthesize(p, frames, 0.0, noise);
    const Tensor f = preprocess_frame(cube.frame(0), d, {false});
    const auto c = f.cdata();
    const std::size_t D = d.pad_chirps, A = d.pad_azimuth, E = d.pad_elevation, R = d.pad_samples;
    double best = -1.0;
    std::size_t best_dop = 0, best_range = 0;
    for (std::size_t dop = 0; dop < D; ++dop)
      for (std::size_t rb = 0; rb < R; ++rb) {
        double e = 0.0;
        for (std::size_t a = 0; a < A; ++a)
          for (std::size_t l = 0; l < E; ++l) e += std::norm(c[((dop * A + a) * E + l) * R + rb]);
        if (e > best) {
          best = e;
          best_dop = dop;
          best_range = rb;
        }
      }
    const double f_b = 2.0 * r * p.bandwidth_hz / (kC * p.chirp_s);
    const double f_d = 2.0 * v * p.carrier_hz / kC;
    const long exp_range = std::lround(f_b / p.adc_hz * static_cast<double>(R));
    const long exp_dop = std::lround(f_d * p.chirp_s * static_cast<double>(D));
    auto circ = [](long a, long b, long n) {
      const long m = ((a - b) % n + n) % n;
      return static_cast<std::size_t>(std::min(m, n - m));
    };
    worst = std::max({worst, circ(static_cast<long>(best_range), exp_range, static_cast<long>(R)),
                      circ(static_cast<long>(best_dop), exp_dop, static_cast<long>(D))});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1 && secs < 30.0,
          "50 scatterers, worst bin offset " + std::to_string(worst) + ", " + fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------
// 2. Static clutter removal.

Outcome clutter_invariant() {
  RadarParams p = RadarParams::defaults();
  p.dims = RadarDims::unpadded(4, 4, 4, 64, 128);
  Rng rng(202);
  std::vector<std::vector<Scatterer>> frames(p.dims.frames);
  for (auto& f : frames)
    for (int i = 0; i < 12; ++i)
      f.push_back({{rng.uniform(-1.0, 1.0), rng.uniform(1.0, 6.0), rng.uniform(-0.5, 1.5)}, {0.0, 0.0, 0.0},
                   rng.uniform(0.1, 2.0)});
  const RadarCube cube = synthesize(p, frames, 0.0, rng);
  const double in = sum_squares(cube.data);
  const double out = sum_squares(preprocess(cube).data);
  const double ratio = out / in;
  return {in > 0.0 && ratio <= 1e-12, "output/input energy " + fmt("%.3g", ratio)};
}

// ---------------------------------------------------------------------------
// 3. Gradient suite.

using Fn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

double fd_error(const Fn& fn, std::vector<Tensor> inputs) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.variable(t));
  tape.backward(fn(tape, leaves));
  auto value = [&](const std::vector<Tensor>& in) {
    ad::Tape t(false);
    std::vector<ad::Var> v;
    for (const auto& x : in) v.push_back(t.variable(x));
    return fn(t, v).item();
  };
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor g = tape.grad(leaves[i]);
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
      const double x0 = inputs[i][j];
      inputs[i][j] = x0 + h;
      const double fp = value(inputs);
      inputs[i][j] = x0 - h;
      const double fm = value(inputs);
      inputs[i][j] = x0;
      const double num = (fp - fm) / (2.0 * h);
      worst = std::max(worst, std::abs(g[j] - num) / std::max({std::abs(g[j]), std::abs(num), 1e-6}));
    }
  }
  return worst;
}

Outcome gradient_suite() {
  using namespace ad;
  Rng rng(303);
  auto shaped = [&](std::size_t r, std::size_t c) { return random_tensor({r, c}, rng); };
  auto positive = [&](std::size_t r, std::size_t c) {
    Tensor t({r, c});
    for (double& v : t.data()) v = rng.uniform(0.2, 3.0);
    return t;
  };
  auto off_zero = [&](std::size_t r, std::size_t c) {
    Tensor t = random_tensor({r, c}, rng, 0.5);
    for (double& v : t.data()) v += v >= 0.0 ? 0.05 : -0.05;
    return t;
  };
  // Weighted sum so every output entry gets its own upstream gradient.
  auto ws = [](Tape& t, const Var& y, std::uint64_t seed) {
    Rng w(seed);
    return sum(mul(y, t.constant(random_tensor(y.shape(), w))));
  };
  struct Prim {
    const char* name;
    std::function<std::pair<Fn, std::vector<Tensor>>()> make;
  };
  std::vector<Prim> prims;
  auto un = [&](const char* name, std::function<Var(const Var&)> op, int gen) {
    prims.push_back({name, [&, op, gen] {
                       const std::size_t r = 1 + rng.below(4), c = 1 + rng.below(5);
                       const auto seed = rng.next_u64();
                       Tensor x = gen == 0 ? shaped(r, c) : gen == 1 ? positive(r, c) : off_zero(r, c);
                       Fn fn = [&ws, op, seed](Tape& t, const std::vector<Var>& v) { return ws(t, op(v[0]), seed); };
                       return std::make_pair(fn, std::vector<Tensor>{x});
                     }});
  };
  auto bin = [&](const char* name, std::function<Var(const Var&, const Var&)> op, bool pos) {
    prims.push_back({name, [&, op, pos] {
                       const std::size_t r = 1 + rng.below(4), c = 1 + rng.below(5);
                       const auto seed = rng.next_u64();
                       Tensor a = shaped(r, c), b = pos ? positive(r, c) : shaped(r, c);
                       Fn fn = [&ws, op, seed](Tape& t, const std::vector<Var>& v) {
                         return ws(t, op(v[0], v[1]), seed);
                       };
                       return std::make_pair(fn, std::vector<Tensor>{a, b});
                     }});
  };
  bin("add", [](const Var& a, const Var& b) { return add(a, b); }, false);
  bin("sub", [](const Var& a, const Var& b) { return sub(a, b); }, false);
  bin("mul", [](const Var& a, const Var& b) { return mul(a, b); }, false);
  bin("div", [](const Var& a, const Var& b) { return div(a, b); }, true);
  un("scale", [](const Var& a) { return scale(a, -1.7); }, 0);
  un("add_scalar", [](const Var& a) { return square(add_scalar(a, 0.3)); }, 0);
  un("exp", [](const Var& a) { return exp(a); }, 0);
  un("log", [](const Var& a) { return log(a); }, 1);
  un("abs", [](const Var& a) { return abs(a); }, 2);
  un("square", [](const Var& a) { return square(a); }, 0);
  un("relu", [](const Var& a) { return relu(a); }, 2);
  un("softplus", [](const Var& a) { return softplus(a); }, 0);
  un("softmax", [](const Var& a) { return softmax(a); }, 0);
  un("transpose", [](const Var& a) { return transpose(a); }, 0);
  un("sum_rows", [](const Var& a) { return sum_rows(a); }, 0);
  un("sum", [](const Var& a) { return square(sum(a)); }, 0);
  un("mean", [](const Var& a) { return square(mean(a)); }, 0);
  un("reshape", [](const Var& a) { return square(reshape(a, {a.value().numel(), 1})); }, 0);
  un("slice", [](const Var& a) { return slice(a, 1, a.cols() / 2, a.cols()); }, 0);
  un("broadcast_rows", [](const Var& a) { return broadcast_rows(slice(a, 0, 0, 1), 3); }, 0);
  un("scale_by", [](const Var& a) { return scale_by(slice(slice(a, 0, 0, 1), 1, 0, 1), a); }, 0);
  prims.push_back({"matmul", [&] {
                     const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);
                     const auto seed = rng.next_u64();
                     Fn fn = [&ws, seed](Tape& t, const std::vector<Var>& v) { return ws(t, matmul(v[0], v[1]), seed); };
                     return std::make_pair(fn, std::vector<Tensor>{shaped(m, k), shaped(k, n)});
                   }});
  prims.push_back({"linear", [&] {
                     const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);
                     const auto seed = rng.next_u64();
                     Fn fn = [&ws, seed](Tape& t, const std::vector<Var>& v) {
                       return ws(t, linear(v[0], v[1], v[2]), seed);
                     };
                     return std::make_pair(fn, std::vector<Tensor>{shaped(m, k), shaped(k, n), shaped(1, n)});
                   }});
  prims.push_back({"concat", [&] {
                     const std::size_t r = 1 + rng.below(3), a = 1 + rng.below(3), b = 1 + rng.below(3);
                     const auto seed = rng.next_u64();
                     Fn fn = [&ws, seed](Tape& t, const std::vector<Var>& v) {
                       return ws(t, concat(std::vector<Var>{v[0], v[1], v[0]}, 1), seed);
                     };
                     return std::make_pair(fn, std::vector<Tensor>{shaped(r, a), shaped(r, b)});
                   }});

  double prim_worst = 0.0;
  std::string prim_name;
  for (const auto& p : prims)
    for (int trial = 0; trial < 20; ++trial) {
      auto [fn, inputs] = p.make();
      const double e = fd_error(fn, inputs);
      if (e > prim_worst) {
        prim_worst = e;
        prim_name = p.name;
      }
    }

  // End-to-end loss through encoder, reparameterized sampling with frozen
  // noise, decoder moments and the loss, for every latent/likelihood pair.
  double e2e_worst = 0.0;
  std::string e2e_name;
  for (LatentFamily fam : {LatentFamily::kGauss, LatentFamily::kLaplace})
    for (Likelihood lik : {Likelihood::kGaussDiag, Likelihood::kGaussCov, Likelihood::kLaplace}) {
      ModelConfig c;
      c.dims = RadarDims::unpadded(2, 2, 2, 4, 4);
      c.d_lat = 5;
      c.n_samples = lik == Likelihood::kGaussCov ? 100 : 12;
      c.reducer_hidden = 4;
      c.feature_dim = 6;
      c.d_k = 3;
      c.post_dim = 2;
      c.decoder_hidden = 7;
      c.latent_family = fam;
      c.likelihood = lik;
      // The sample covariance has low rank here; a larger ridge keeps its
      // small eigenvalues well conditioned for finite differences.
      if (lik == Likelihood::kGaussCov) c.cov_ridge = 0.05;
      PoseModel model(c, 31);
      Rng r(32);
      const ProcessedTensor x{random_tensor(c.dims.processed_shape(), r)};
      const Tensor y = random_tensor({1, kPoseDims}, r, 0.5);
      const Tensor noise = draw_latent_noise(fam, c.n_samples, c.d_lat, r);
      auto loss = [&](ad::Tape& t) {
        LatentVars lv = model.encode(t, x, true);
        PredictiveVars pv = model.moments(t, model.decode(t, model.sample_latent(t, lv, noise), true));
        return ad_loss::total_loss(pv, lv, y, {.beta = 0.1, .gamma = 1.0}).total;
      };
      // Backprop once, then compare against central differences on 40 entries.
      model.params().zero_grad();
      {
        ad::Tape t;
        t.backward(loss(t));
      }
      std::vector<std::string> names;
      for (const auto& p : model.params()) names.push_back(p.name);
      for (int k = 0; k < 40; ++k) {
        auto& p = model.params().at(names[r.below(names.size())]);
        const std::size_t j = r.below(p.value.numel());
        const double analytic = p.grad[j];
        const double x0 = p.value[j], h = 1e-5;
        p.value[j] = x0 + h;
        ad::Tape tp(false);
        const double fp = loss(tp).item();
        p.value[j] = x0 - h;
        ad::Tape tm(false);
        const double fm = loss(tm).item();
        p.value[j] = x0;
        const double num = (fp - fm) / (2.0 * h);
        const double e = std::abs(analytic - num) / std::max({std::abs(analytic), std::abs(num), 1e-6});
        if (e > e2e_worst) {
          e2e_worst = e;
          e2e_name = to_string(fam) + "/" + to_string(lik);
        }
      }
    }
  return {prim_worst < 1e-4 && e2e_worst < 1e-3,
          std::to_string(prims.size()) + " primitives worst " + fmt("%.2g", prim_worst) + " (" + prim_name +
              "), end-to-end worst " + fmt("%.2g", e2e_worst) + " (" + e2e_name + ")"};
}

// ---------------------------------------------------------------------------
// 4. Loss identities.

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

double integrate(const std::function<double(double)>& f, std::vector<double> cuts) {
  cuts.push_back(-50.0);
  cuts.push_back(50.0);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] > cuts[i]) total += simpson(f, cuts[i], cuts[i + 1], 40000);
  return total;
}

double log_grid_argmin(const std::function<double(double)>& f) {
  double best_x = 1.0, best = f(1.0);
  for (int i = -9000; i <= 9000; ++i) {
    const double x = std::exp(i * 1e-3);
    const double v = f(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

Outcome loss_identities() {
  using Vec = std::vector<double>;
  Rng rng(404);
  double cov_worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng.below(kPoseDims);
    Vec y(d), mu(d), var(d);
    Tensor chol({d, d});
    for (std::size_t i = 0; i < d; ++i) {
      y[i] = rng.normal();
      mu[i] = rng.normal();
      var[i] = rng.uniform(1e-3, 5.0);
      chol.at(i, i) = std::sqrt(var[i]);
    }
    const double gamma = rng.uniform(0.0, 2.0);
    const double diag = nll_gauss_diag(y, mu, var, gamma);
    cov_worst = std::max(cov_worst, std::abs(nll_gauss_cov(y, mu, chol, gamma) - diag) / std::max(1.0, std::abs(diag)));
  }

  double kl_worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double mu = rng.uniform(-3.0, 3.0), b = rng.uniform(0.2, 3.0);
    const double lap = integrate(
        [&](double x) {
          const double lp = -std::abs(x - mu) / b - std::log(2.0 * b);
          return std::exp(lp) * (lp - (-std::abs(x) - std::log(2.0)));
        },
        {mu, 0.0});
    kl_worst = std::max(kl_worst, std::abs(lap - kl_laplace(Vec{mu}, Vec{b})));
    const double var = b * b;
    const double gauss = integrate(
        [&](double x) {
          const double lp = -0.5 * (x - mu) * (x - mu) / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
          const double lq = -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
          return std::exp(lp) * (lp - lq);
        },
        {mu});
    kl_worst = std::max(kl_worst, std::abs(gauss - kl_gauss(Vec{mu}, Vec{std::log(var)})));
  }

  double stat_worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double r = rng.uniform(0.05, 3.0);
    const double v = log_grid_argmin([&](double s) { return nll_gauss_diag(Vec{r}, Vec{0.0}, Vec{s}, 1.0); });
    const double b = log_grid_argmin([&](double s) { return nll_laplace(Vec{r}, Vec{0.0}, Vec{s}, 1.0); });
    stat_worst = std::max({stat_worst, std::abs(v / (r * r) - 1.0), std::abs(b / r - 1.0)});
  }
  return {cov_worst <= 1e-10 && kl_worst <= 1e-6 && stat_worst <= 0.01,
          "cov vs diag " + fmt("%.2g", cov_worst) + ", KL vs quadrature " + fmt("%.2g", kl_worst) +
              ", stationarity " + fmt("%.2g", stat_worst)};
}

// ---------------------------------------------------------------------------
// 5. Training efficacy at desk scale.

double mean_mpjpe(const std::vector<EvalRecord>& recs, const Pose* constant) {
  double s = 0.0;
  for (const auto& r : recs) {
    const auto d = joint_distances(constant ? *constant : r.pred.mean_pose(), r.truth);
    for (double v : d) s += v;
  }
  return s / static_cast<double>(recs.size() * kNumKeypoints);
}

Outcome training_efficacy() {
  const auto t0 = std::chrono::steady_clock::now();
  RadarParams p = RadarParams::defaults();
  p.dims = RadarDims::unpadded(8, 4, 4, 16, 32);
  p.array_mask = RadarParams::l_shaped_mask(4, 4);
  SimulationPlan plan;
  plan.rcs = RcsProfile::kThreePoint;
  plan.noise_std = 0.1;
  plan.n_subjects = 20;
  plan.frames_per_recording = 18;
  plan.spread.range_min = 2.4;
  plan.spread.range_max = 2.6;
  plan.spread.lateral_max = 0.1;
  plan.spread.yaw_deg = {0.0};
  Rng rng(7);
  const Dataset data = Dataset::from_recordings(simulate_recordings(plan, p, rng), p.dims);
  const SplitSpec split =
      SplitSpec::parse("train=0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15;calib=16;test=17,18,19");

  TrainConfig tc;
  tc.epochs = 16;
  tc.lr = 1e-3;
  tc.grad_clip = 5.0;
  tc.weight_decay = 1.0;
  tc.model.dims = p.dims;
  tc.model.d_lat = 32;
  tc.model.n_samples = 100;
  tc.model.reducer_hidden = 16;
  tc.model.var_floor = 1e-3;
  const TrainResult res = train(data, split, tc);
  if (res.aborted) return {false, "training aborted: " + res.abort_reason};

  const Pose baseline = mean_pose(data, data.windows(split.train));
  const auto val = evaluate(res.model, data, data.windows({split.calib}), 1);
  const auto test = evaluate(res.model, data, data.windows(split.test), 2);
  const double val_ratio = mean_mpjpe(val, nullptr) / mean_mpjpe(val, &baseline);
  const double test_ratio = mean_mpjpe(test, nullptr) / mean_mpjpe(test, &baseline);
  const double secs = seconds_since(t0);
  const std::size_t windows = data.windows(split.train).size() + val.size() + test.size();
  return {val_ratio < 0.7 && test_ratio < 0.7 && secs < 900.0,
          std::to_string(windows) + " windows, MPJPE / mean-pose MPJPE: val " + fmt("%.3f", val_ratio) +
              ", test " + fmt("%.3f", test_ratio) + ", " + fmt("%.0f s", secs)};
}

// ---------------------------------------------------------------------------
// 6. Uncertainty follows per-joint error under rcs-weighted joints.

Outcome uncertainty_alignment() {
  const auto w = rcs_weights(RcsProfile::kHeteroscedastic);
  double min_ratio = std::numeric_limits<double>::infinity();
  int wins = 0;
  std::string rs;
  for (int seed = 0; seed < 10; ++seed) {
    RadarParams p = RadarParams::defaults();
    p.dims = RadarDims::unpadded(4, 4, 4, 16, 32);
    p.array_mask = RadarParams::l_shaped_mask(4, 4);
    SimulationPlan plan;
    plan.rcs = RcsProfile::kHeteroscedastic;
    plan.noise_std = 0.3;
    plan.n_subjects = 16;
    plan.activities = {0, 5, 8};
    plan.frames_per_recording = 14;
    plan.spread.range_min = 2.4;
    plan.spread.range_max = 2.6;
    plan.spread.lateral_max = 0.1;
    plan.spread.yaw_deg = {0.0};
    Rng rng(1000 + seed);
    const Dataset data = Dataset::from_recordings(simulate_recordings(plan, p, rng), p.dims);
    const SplitSpec split = SplitSpec::parse("train=0,1,2,3,4,5,6,7,8,9,10,11,12;calib=13;test=14,15");
    TrainConfig tc;
    tc.epochs = 60;
    tc.batch_size = 4;
    tc.seed = static_cast<std::uint64_t>(seed);
    tc.lr = 3e-3;
    tc.grad_clip = 5.0;
    tc.weight_decay = 1.0;
    tc.model.dims = p.dims;
    tc.model.d_lat = 16;
    tc.model.n_samples = 20;
    tc.model.reducer_hidden = 8;
    tc.model.feature_dim = 8;
    tc.model.d_k = 4;
    tc.model.post_dim = 2;
    tc.model.decoder_hidden = 12;
    tc.model.var_floor = 1e-3;
    const TrainResult res = train(data, split, tc);
    if (res.aborted) {
      rs += " abort";
      continue;
    }
    std::vector<double> err, unc;
    double lo = 0.0, hi = 0.0;
    std::size_t n_lo = 0, n_hi = 0;
    for (const auto& r : evaluate(res.model, data, data.windows(split.test), 1)) {
      const auto u = joint_uncertainty(r.pred);
      const auto e = joint_distances(r.pred.mean_pose(), r.truth);
      for (std::size_t k = 0; k < kNumKeypoints; ++k) {
        err.push_back(e[k]);
        unc.push_back(u[k]);
        if (w[k] <= 0.1) {
          lo += u[k];
          ++n_lo;
        } else if (w[k] >= 1.0) {
          hi += u[k];
          ++n_hi;
        }
      }
    }
    const double r = pearson(err, unc);
    const double ratio = (lo / n_lo) / (hi / n_hi);
    min_ratio = std::min(min_ratio, ratio);
    wins += r > 0.3 && ratio > 1.0;
    rs += " " + fmt("%.2f", r);
  }
  return {wins >= 8, std::to_string(wins) + "/10 seeds with r > 0.3 and u(low rcs) > u(high rcs); r:" + rs +
                         "; min u ratio " + fmt("%.2f", min_ratio)};
}

// ---------------------------------------------------------------------------
// 7. Isotonic recalibration on held-out shards.

// Predictive distributions whose true spread is `true_scale` times the
// predicted one, with an optional shift in units of the predicted scale.
void shard(Likelihood lik, std::size_t n, double true_scale, double shift, Rng& rng,
           std::vector<PredictiveDistribution>& preds, std::vector<Pose>& truths) {
  preds.clear();
  truths.clear();
  for (std::size_t i = 0; i < n; ++i) {
    PredictiveDistribution p;
    p.likelihood = lik;
    std::vector<double> y(kPoseDims);
    for (std::size_t d = 0; d < kPoseDims; ++d) {
      const double mu = 0.2 * rng.normal();
      const double s = rng.uniform(0.005, 0.05);
      p.mean.push_back(mu);
      p.dispersion.push_back(lik == Likelihood::kLaplace ? s : s * s);
      const double eps = lik == Likelihood::kLaplace ? laplace_from_uniform(rng.uniform()) : rng.normal();
      y[d] = mu + s * (shift + true_scale * eps);
    }
    preds.push_back(std::move(p));
    truths.push_back(Pose::from_flat(y));
  }
}

Outcome calibration() {
  const auto levels = uniform_levels(20);
  int wins = 0;
  double mean_before = 0.0, mean_after = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(700 + seed);
    const Likelihood lik = seed % 2 ? Likelihood::kLaplace : Likelihood::kGaussDiag;
    // Over- or under-confident by a factor between 1.3 and 3, slightly biased.
    const double factor = rng.uniform(1.3, 3.0);
    const double true_scale = rng.uniform() < 0.5 ? factor : 1.0 / factor;
    const double shift = rng.uniform(-0.3, 0.3);
    std::vector<PredictiveDistribution> cp, tp;
    std::vector<Pose> ct, tt;
    shard(lik, 100, true_scale, shift, rng, cp, ct);
    shard(lik, 300, true_scale, shift, rng, tp, tt);
    const auto calib_pit = pit_values(cp, ct);
    const CalibrationMap map = fit_isotonic(calib_pit, quantile_levels(calib_pit, 1000));
    auto pit = pit_values(tp, tt);
    const double before = ece(coverage(pit, levels));
    for (double& u : pit) u = map(u);
    const double after = ece(coverage(pit, levels));
    wins += after < before;
    mean_before += before / 20.0;
    mean_after += after / 20.0;
  }
  Rng rng(799);
  std::vector<PredictiveDistribution> preds;
  std::vector<Pose> truths;
  shard(Likelihood::kGaussDiag, 1283, 1.0, 0.0, rng, preds, truths);  // 100074 scalars
  const double calibrated = ece(coverage(preds, truths, levels));
  return {wins >= 18 && calibrated <= 0.03,
          std::to_string(wins) + "/20 seeds reduce test ECE (mean " + fmt("%.3f", mean_before) + " -> " +
              fmt("%.3f", mean_after) + "); calibrated-by-construction ECE " + fmt("%.4f", calibrated) +
              " at n=1e5"};
}

// ---------------------------------------------------------------------------
// 8. Quantile-integration variance.

Outcome quantile_variance() {
  Rng rng(808);
  const CalibrationMap id = CalibrationMap::identity();
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double mu = rng.normal();
    const double s = rng.uniform(0.01, 2.0);
    PredictiveDistribution g, l;
    g.likelihood = Likelihood::kGaussDiag;
    l.likelihood = Likelihood::kLaplace;
    g.mean = l.mean = std::vector<double>(kPoseDims, mu);
    g.dispersion = std::vector<double>(kPoseDims, s * s);
    l.dispersion = std::vector<double>(kPoseDims, s);
    worst = std::max(worst, std::abs(calibrated_dim_variance(g, id, 7) / (s * s) - 1.0));
    worst = std::max(worst, std::abs(calibrated_dim_variance(l, id, 7) / (2.0 * s * s) - 1.0));
  }
  return {worst <= 0.01, "100 parameterizations, worst relative error " + fmt("%.4f", worst)};
}

// ---------------------------------------------------------------------------
// 9. Procrustes alignment on simulated skeletons.

double sq_error(const Pose& a, const Pose& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < kNumKeypoints; ++k)
    for (int i = 0; i < 3; ++i) s += (a[k][i] - b[k][i]) * (a[k][i] - b[k][i]);
  return s;
}

Outcome procrustes() {
  RadarParams p = RadarParams::defaults();
  p.dims = RadarDims::unpadded(2, 4, 4, 8, 16);
  SimulationPlan plan;
  plan.n_subjects = 3;
  plan.frames_per_recording = 20;
  Rng rng(909);
  std::vector<Pose> truths;
  for (const auto& r : simulate_recordings(plan, p, rng)) truths.insert(truths.end(), r.poses.begin(), r.poses.end());

  double worst_aligned = 0.0;
  std::size_t violations = 0, sq_violations = 0, frames = 0;
  for (const Pose& gt : truths) {
    // Random rotation from a normalized quaternion, scale and shift.
    double q[4] = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    for (double& v : q) v /= qn;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    const double rot[3][3] = {{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                              {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                              {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
    const double scale = rng.uniform(0.5, 2.0);
    const Vec3 shift{rng.normal(), rng.normal(), rng.normal()};
    Pose moved, noisy;
    for (std::size_t k = 0; k < kNumKeypoints; ++k)
      for (int i = 0; i < 3; ++i) {
        double v = 0.0;
        for (int j = 0; j < 3; ++j) v += rot[i][j] * gt[k][j];
        moved[k][i] = scale * v + shift[i];
        noisy[k][i] = gt[k][i] + 0.03 * rng.normal();
      }
    const std::vector<Pose> t = {gt}, a = {moved}, b = {noisy};
    worst_aligned = std::max(worst_aligned, p_mpjpe(a, t).overall);
    for (const auto* pred : {&a, &b}) {
      ++frames;
      if (p_mpjpe(*pred, t).overall > mpjpe(*pred, t).overall) ++violations;
      // The alignment minimizes summed squared distance, which must never grow.
      Pose aligned;
      if (procrustes_align(pred->front(), gt, aligned) &&
          sq_error(aligned, gt) > sq_error(pred->front(), gt) * (1.0 + 1e-12))
        ++sq_violations;
    }
  }
  return {worst_aligned <= 1e-9 && violations == 0,
          std::to_string(truths.size()) + " skeletons, worst aligned P-MPJPE " + fmt("%.2g m", worst_aligned) +
              ", P-MPJPE > MPJPE in " + std::to_string(violations) + "/" + std::to_string(frames) +
              " frames, squared error increased in " + std::to_string(sq_violations)};
}

// ---------------------------------------------------------------------------
// 10. Latent augmentation against the mean-only baseline.

Outcome augmentation() {
  int wins = 0;
  std::string scores;
  for (int seed = 0; seed < 10; ++seed) {
    SyntheticLatentSpec spec;
    Rng rng(static_cast<std::uint64_t>(seed) * 7919 + 1);
    const auto train = synthetic_latents(spec, 2, rng, static_cast<std::uint64_t>(seed));
    const auto test = synthetic_latents(spec, 20, rng, static_cast<std::uint64_t>(seed));
    Rng arng(static_cast<std::uint64_t>(seed) + 100);
    const auto plan = AugmentationPlan::around(0.0129, 0.01, 10, 100, arng);
    // Both training sets hold 100 sequences per source so the step budgets match.
    std::vector<Tensor> mx, ax;
    std::vector<int> my, ay;
    for (const auto& s : train) {
      for (std::size_t r = 0; r < plan.samples_per_sequence; ++r) {
        mx.push_back(s.mean_matrix());
        my.push_back(s.label);
      }
      for (auto& z : augment(s, plan, arng)) {
        ax.push_back(std::move(z));
        ay.push_back(s.label);
      }
    }
    ClassifierConfig cc;
    cc.d_lat = spec.d_lat;
    cc.epochs = 10;
    cc.seed = static_cast<std::uint64_t>(seed);
    auto f1 = [&](const std::vector<Tensor>& x, const std::vector<int>& y) {
      ActivityClassifier clf(cc, static_cast<std::uint64_t>(seed));
      clf.fit(x, y);
      std::vector<int> preds, labels;
      for (const auto& s : test) {
        preds.push_back(clf.classify(s.mean_matrix()));
        labels.push_back(s.label);
      }
      return classification_report(preds, labels).f1;
    };
    const double mean_f1 = f1(mx, my), aug_f1 = f1(ax, ay);
    wins += aug_f1 > mean_f1;
    scores += " " + fmt("%.2f", mean_f1) + "/" + fmt("%.2f", aug_f1);
  }
  return {wins >= 8, std::to_string(wins) + "/10 seeds improve macro-F1 (mean-only/augmented:" + scores + ")"};
}

// ---------------------------------------------------------------------------
// 11. Bit-identical pipeline reruns.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "radpose_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "run.cfg";
  std::ofstream(cfg) << "seed = 11\n"
                        "split = train=0,1,2;calib=3;test=4\n"
                        "dims.frames = 4\ndims.samples = 16\ndims.chirps = 32\n"
                        "dims.pad_samples = 16\ndims.pad_chirps = 32\n"
                        "sim.subjects = 5\nsim.frames = 8\nsim.activities = 0,2,5\nsim.noise_std = 0.1\n"
                        "model.d_lat = 8\nmodel.n_samples = 20\nmodel.reducer_hidden = 4\n"
                        "train.epochs = 3\ntrain.batch_size = 4\n";
  std::vector<std::string> compared;
  bool same = true;
  for (const char* run : {"a", "b"}) {
    const std::string dir = (root / run).string();
    const std::string c = cfg.string();
    const std::vector<std::vector<std::string>> steps = {
        {"simulate", "--config", c, "--out", dir + "/data"},
        {"train", "--config", c, "--data", dir + "/data", "--out", dir + "/train"},
        {"evaluate", "--config", c, "--data", dir + "/data", "--checkpoint", dir + "/train/checkpoint.bin", "--out",
         dir + "/eval"},
        {"calibrate", "--config", c, "--in", dir + "/eval", "--out", dir + "/calib"},
        {"report", "--config", c, "--in", dir + "/eval", "--calib", dir + "/calib", "--out", dir + "/report"}};
    for (const auto& s : steps) {
      std::ostringstream out, err;
      if (run_cli(s, out, err) != 0) return {false, s.front() + " failed: " + err.str()};
    }
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    ++files;
    if (slurp(e.path()) != slurp(root / "b" / rel)) {
      same = false;
      compared.push_back(rel.string());
    }
  }
  std::string detail = std::to_string(files) + " output files compared";
  if (!same) {
    detail += "; differing:";
    for (const auto& f : compared) detail += " " + f;
  } else {
    detail += ", all bit-identical";
  }
  return {same && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria = {
      {1, {"FFT physics oracle", fft_physics_oracle}},
      {2, {"clutter invariant", clutter_invariant}},
      {3, {"gradient suite", gradient_suite}},
      {4, {"loss identities", loss_identities}},
      {5, {"training efficacy", training_efficacy}},
      {6, {"uncertainty alignment", uncertainty_alignment}},
      {7, {"calibration", calibration}},
      {8, {"quantile-integration variance", quantile_variance}},
      {9, {"procrustes", procrustes}},
      {10, {"augmentation", augmentation}},
      {11, {"determinism", determinism}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (!criteria.count(n)) {
      std::fprintf(stderr, "unknown criterion %s\n", argv[i]);
      return 2;
    }
    selected.push_back(n);
  }
  if (selected.empty())
    for (const auto& [n, c] : criteria) selected.push_back(n);

  int failed = 0;
  for (int n : selected) {
    const auto& [name, fn] = criteria.at(n);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %2d %-30s %s  %s\n", n, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
