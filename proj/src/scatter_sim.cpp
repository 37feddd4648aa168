#include "radpose/scatter_sim.hpp"

#include <cmath>
#include <numbers>

#include "radpose/error.hpp"

namespace radpose {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 normalized(const Vec3& a) { return scale(a, 1.0 / norm(a)); }

}  // namespace

RadarParams RadarParams::defaults() {
  RadarParams p;
  p.dims = RadarDims{};
  p.array_mask = l_shaped_mask(p.dims.azimuth, p.dims.elevation);
  return p;
}

std::vector<bool> RadarParams::l_shaped_mask(std::size_t azimuth, std::size_t elevation) {
  std::vector<bool> mask(azimuth * elevation, true);
  for (std::size_t a = azimuth / 2; a < azimuth; ++a)
    for (std::size_t e = elevation / 2; e < elevation; ++e) mask[a * elevation + e] = false;
  return mask;
}

void RadarParams::validate() const {
  dims.validate();
  for (double v : {carrier_hz, bandwidth_hz, chirp_s, adc_hz, frame_rate_hz, element_spacing})
    require(std::isfinite(v) && v > 0.0, ErrorKind::kConfig, "radar parameters must be positive");
  require(n_tx > 0, ErrorKind::kConfig, "n_tx must be positive");
  require(array_mask.size() == dims.azimuth * dims.elevation, ErrorKind::kConfig,
          "array mask must have azimuth x elevation entries");
}

RadarCube synthesize(const RadarParams& params, std::span<const std::vector<Scatterer>> frames,
                     double noise_std, Rng& rng) {
  params.validate();
  require(!frames.empty(), ErrorKind::kInvalidArgument, "synthesize needs at least one frame");
  require(noise_std >= 0.0, ErrorKind::kInvalidArgument, "noise_std must be non-negative");
  const RadarDims& d = params.dims;
  RadarCube cube;
  cube.dims = d;
  cube.dims.frames = frames.size();
  cube.data = Tensor(cube.dims.cube_shape(), DType::kComplex);
  auto out = cube.data.cdata();

  const std::size_t S = d.samples, C = d.chirps, A = d.azimuth, E = d.elevation;
  const std::size_t frame_size = A * E * S * C;
  std::vector<cplx> range_doppler(S * C);
  std::vector<cplx> range_phase(S), doppler_phase(C);

  for (std::size_t t = 0; t < frames.size(); ++t) {
    cplx* frame = out.data() + t * frame_size;
    for (const Scatterer& s : frames[t]) {
      require(s.rcs >= 0.0 && std::isfinite(s.rcs), ErrorKind::kInvalidArgument,
              "scatterer rcs must be finite and non-negative");
      require(s.position[1] > 0.0, ErrorKind::kInvalidArgument,
              "scatterer behind the radar (non-positive boresight coordinate)");
      if (s.rcs == 0.0) continue;
      const double r = norm(s.position);
      const double v_radial = dot(s.velocity, s.position) / r;
      const double f_b = params.beat_frequency(r);
      const double f_d = params.doppler_frequency(v_radial);
      require(std::abs(f_d) < params.max_doppler(), ErrorKind::kInvalidArgument,
              "scatterer Doppler " + std::to_string(f_d) +
                  " Hz exceeds the TDM unambiguous limit");
      const double az = std::atan2(s.position[0], s.position[1]);
      const double el = std::asin(s.position[2] / r);

      for (std::size_t n = 0; n < S; ++n)
        range_phase[n] = std::polar(s.rcs, 2.0 * kPi * f_b * static_cast<double>(n) / params.adc_hz);
      for (std::size_t m = 0; m < C; ++m)
        doppler_phase[m] = std::polar(1.0, 2.0 * kPi * f_d * static_cast<double>(m) * params.chirp_s);
      for (std::size_t n = 0; n < S; ++n)
        for (std::size_t m = 0; m < C; ++m) range_doppler[n * C + m] = range_phase[n] * doppler_phase[m];

      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t e = 0; e < E; ++e) {
          if (!params.populated(a, e)) continue;
          const double cycles = params.element_spacing *
                                (static_cast<double>(a) * std::sin(az) * std::cos(el) +
                                 static_cast<double>(e) * std::sin(el));
          const cplx w = std::polar(1.0, 2.0 * kPi * cycles);
          cplx* channel = frame + (a * E + e) * S * C;
          for (std::size_t i = 0; i < S * C; ++i) channel[i] += w * range_doppler[i];
        }
      }
    }
    if (noise_std > 0.0) {
      const double sd = noise_std / std::sqrt(2.0);
      for (std::size_t a = 0; a < A; ++a)
        for (std::size_t e = 0; e < E; ++e) {
          if (!params.populated(a, e)) continue;
          cplx* channel = frame + (a * E + e) * S * C;
          for (std::size_t i = 0; i < S * C; ++i) {
            const double re = rng.normal() * sd;
            const double im = rng.normal() * sd;
            channel[i] += cplx{re, im};
          }
        }
    }
  }
  for (double& v : cube.data.data()) v = static_cast<double>(static_cast<float>(v));
  return cube;
}

std::vector<Scatterer> scatterers_at(const MotionScript& script, std::size_t frame,
                                     double frame_rate_hz) {
  const auto& traj = script.trajectory;
  require(frame < traj.size(), ErrorKind::kInvalidArgument, "frame outside trajectory");
  std::vector<Scatterer> out;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    if (script.rcs[k] <= 0.0) continue;
    Scatterer s;
    s.position = traj[frame][k];
    s.rcs = script.rcs[k];
    if (traj.size() > 1) {
      const std::size_t a = frame == 0 ? 0 : frame - 1;
      const std::size_t b = frame == 0 ? 1 : frame;
      s.velocity = scale(sub(traj[b][k], traj[a][k]), frame_rate_hz);
    }
    out.push_back(s);
  }
  return out;
}

RadarCube synthesize_script(const MotionScript& script, const RadarParams& params, Rng& rng) {
  require(!script.trajectory.empty(), ErrorKind::kInvalidArgument, "empty motion script");
  std::vector<std::vector<Scatterer>> frames;
  frames.reserve(script.trajectory.size());
  for (std::size_t t = 0; t < script.trajectory.size(); ++t)
    frames.push_back(scatterers_at(script, t, params.frame_rate_hz));
  return synthesize(params, frames, script.noise_std, rng);
}

std::vector<LabeledWindow> script_to_dataset(const MotionScript& script,
                                             const RadarParams& params, Rng& rng) {
  require(!script.trajectory.empty(), ErrorKind::kInvalidArgument, "empty motion script");
  const std::size_t T = params.dims.frames;
  require(script.trajectory.size() >= T, ErrorKind::kInvalidArgument,
          "trajectory shorter than one window");
  const RadarCube full = synthesize_script(script, params, rng);
  std::vector<LabeledWindow> out;
  for (std::size_t start = 0; start + T <= script.trajectory.size(); ++start) {
    RadarCube w = full.window(start, T);
    w.dims.frames = T;
    out.push_back({std::move(w), script.trajectory[start + T - 1]});
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string activity_name(int activity) {
  static const char* kNames[kNumActivities] = {
      "left_upper_limb_extension", "right_upper_limb_extension",
      "bilateral_upper_limb_extension", "bicep_curls", "front_arm_rotation",
      "trunk_forward_bending", "left_front_lunge", "right_front_lunge", "squats",
  };
  require(activity >= 0 && activity < kNumActivities, ErrorKind::kInvalidArgument,
          "activity id out of range");
  return kNames[activity];
}

SubjectProfile random_subject(Rng& rng, const SubjectSpread& spread) {
  require(!spread.yaw_deg.empty(), ErrorKind::kConfig, "subject spread needs at least one yaw");
  SubjectProfile s;
  s.scale = rng.uniform(spread.scale_min, spread.scale_max);
  s.range_m = rng.uniform(spread.range_min, spread.range_max);
  s.lateral_m = rng.uniform(-spread.lateral_max, spread.lateral_max);
  s.height_m = -1.0;
  s.yaw_rad = spread.yaw_deg[rng.below(spread.yaw_deg.size())] * kDeg;
  s.tempo = rng.uniform(spread.tempo_min, spread.tempo_max);
  s.phase = rng.uniform(0.0, 1.0);
  return s;
}

Pose skeleton_pose(const PoseParams& p, const SubjectProfile& subject) {
  const double s = subject.scale;
  // Body basis: facing the radar (-y) at yaw 0; the subject's right is then -x.
  const double cy = std::cos(subject.yaw_rad), sy = std::sin(subject.yaw_rad);
  const Vec3 fwd0 = {sy, -cy, 0.0};
  const Vec3 right0 = {-cy, -sy, 0.0};
  const Vec3 up0 = {0.0, 0.0, 1.0};
  auto body = [&](const Vec3& v) {  // (right, forward, up) -> world offset
    return add(add(scale(right0, v[0]), scale(fwd0, v[1])), scale(up0, v[2]));
  };

  const double thigh = 0.44 * s, shin = 0.42 * s, heel_h = 0.07 * s;
  auto leg_height = [&](int i) {
    return thigh * std::cos(p.hip_flex[i]) + shin * std::cos(p.hip_flex[i] - p.knee_flex[i]) +
           heel_h;
  };
  const double hip_h = std::max(leg_height(0), leg_height(1));
  const Vec3 ground = {subject.lateral_m, subject.range_m, subject.height_m};
  const Vec3 hips = add(add(ground, body({p.lateral_shift, p.forward_shift, 0.0})),
                        body({0.0, 0.0, hip_h}));

  Pose pose;
  pose[kHips] = hips;

  // Legs: index 0 right, 1 left.
  const std::size_t leg_joints[2][5] = {
      {kRightHip, kRightKnee, kRightHeel, kRightFootCenter, kRightFootEnd},
      {kLeftHip, kLeftKnee, kLeftHeel, kLeftFootCenter, kLeftFootEnd},
  };
  for (int i = 0; i < 2; ++i) {
    const double side = i == 0 ? 1.0 : -1.0;
    const Vec3 hip = add(hips, body({side * 0.1 * s, 0.0, -0.05 * s}));
    const double hf = p.hip_flex[i], kf = p.knee_flex[i];
    const Vec3 knee = add(hip, body({0.0, thigh * std::sin(hf), -thigh * std::cos(hf)}));
    const Vec3 heel = add(knee, body({0.0, shin * std::sin(hf - kf), -shin * std::cos(hf - kf)}));
    pose[leg_joints[i][0]] = hip;
    pose[leg_joints[i][1]] = knee;
    pose[leg_joints[i][2]] = heel;
    pose[leg_joints[i][3]] = add(heel, body({0.0, 0.08 * s, -0.04 * s}));
    pose[leg_joints[i][4]] = add(heel, body({0.0, 0.17 * s, -0.06 * s}));
  }

  // Trunk frame pitched forward about the right axis.
  const double cp = std::cos(p.trunk_pitch), sp = std::sin(p.trunk_pitch);
  auto trunk = [&](const Vec3& v) {  // trunk-local (right, forward, up) -> world offset
    const Vec3 fwd = {0.0, cp, -sp};
    const Vec3 up = {0.0, sp, cp};
    return body(add(add(scale({1.0, 0.0, 0.0}, v[0]), scale(fwd, v[1])), scale(up, v[2])));
  };
  pose[kSpine] = add(hips, trunk({0.0, 0.0, 0.12 * s}));
  pose[kSpine1] = add(hips, trunk({0.0, 0.0, 0.28 * s}));
  pose[kNeck] = add(hips, trunk({0.0, 0.0, 0.48 * s}));
  pose[kHead] = add(hips, trunk({0.0, 0.02 * s, 0.60 * s}));
  pose[kHeadEnd] = add(hips, trunk({0.0, 0.03 * s, 0.76 * s}));

  const std::size_t arm_joints[2][5] = {
      {kRightNeck, kRightShoulder, kRightForeArm, kRightHand, kRightHandEnd},
      {kLeftNeck, kLeftShoulder, kLeftForeArm, kLeftHand, kLeftHandEnd},
  };
  const double upper = 0.28 * s, fore = 0.25 * s, hand = 0.08 * s;
  for (int i = 0; i < 2; ++i) {
    const double side = i == 0 ? 1.0 : -1.0;
    const double flex = p.arm_flex[i], abd = p.arm_abduct[i], elbow = p.elbow_flex[i];
    const Vec3 clavicle = add(hips, trunk({side * 0.05 * s, 0.0, 0.45 * s}));
    const Vec3 shoulder = add(hips, trunk({side * 0.18 * s, 0.0, 0.44 * s}));
    const Vec3 d_upper = normalized(
        {side * std::sin(abd), std::sin(flex) * std::cos(abd), -std::cos(flex) * std::cos(abd)});
    Vec3 ref = {0.0, std::cos(flex), std::sin(flex)};
    ref = normalized(sub(ref, scale(d_upper, dot(ref, d_upper))));
    const Vec3 d_fore = add(scale(d_upper, std::cos(elbow)), scale(ref, std::sin(elbow)));
    const Vec3 elbow_pos = add(shoulder, trunk(scale(d_upper, upper)));
    const Vec3 wrist = add(elbow_pos, trunk(scale(d_fore, fore)));
    pose[arm_joints[i][0]] = clavicle;
    pose[arm_joints[i][1]] = shoulder;
    pose[arm_joints[i][2]] = elbow_pos;
    pose[arm_joints[i][3]] = wrist;
    pose[arm_joints[i][4]] = add(wrist, trunk(scale(d_fore, hand)));
  }
  return pose;
}

PoseParams activity_params(Activity activity, double time_s, const SubjectProfile& subject) {
  const double period = 2.4 * subject.tempo;
  const double cycle = time_s / period + subject.phase;
  const double s = 0.5 * (1.0 - std::cos(2.0 * kPi * cycle));  // 0 -> 1 -> 0
  PoseParams p;
  // Small postural sway present in every exercise.
  p.forward_shift = 0.03 * std::sin(2.0 * kPi * (0.23 * time_s + subject.phase));
  p.lateral_shift = 0.02 * std::sin(2.0 * kPi * (0.17 * time_s + 0.5 * subject.phase));
  p.elbow_flex = {10 * kDeg, 10 * kDeg};
  p.arm_abduct = {8 * kDeg, 8 * kDeg};
  constexpr int R = 0, L = 1;
  switch (activity) {
    case Activity::kLeftUpperLimbExtension:
      p.arm_flex[L] = 150 * kDeg * s;
      break;
    case Activity::kRightUpperLimbExtension:
      p.arm_flex[R] = 150 * kDeg * s;
      break;
    case Activity::kBilateralUpperLimbExtension:
      p.arm_flex = {150 * kDeg * s, 150 * kDeg * s};
      break;
    case Activity::kBicepCurls:
      p.arm_flex = {10 * kDeg, 10 * kDeg};
      p.elbow_flex = {(10 + 120 * s) * kDeg, (10 + 120 * s) * kDeg};
      break;
    case Activity::kFrontArmRotation: {
      const double a = 2.0 * kPi * cycle;
      p.arm_flex = {(80 + 20 * std::sin(a)) * kDeg, (80 + 20 * std::sin(a)) * kDeg};
      p.arm_abduct = {(20 + 20 * std::cos(a)) * kDeg, (20 + 20 * std::cos(a)) * kDeg};
      break;
    }
    case Activity::kTrunkForwardBending:
      p.trunk_pitch = 70 * kDeg * s;
      p.arm_flex = {0.9 * p.trunk_pitch, 0.9 * p.trunk_pitch};
      break;
    case Activity::kLeftFrontLunge:
    case Activity::kRightFrontLunge: {
      const int front = activity == Activity::kLeftFrontLunge ? L : R;
      const int back = 1 - front;
      p.hip_flex[front] = 60 * kDeg * s;
      p.knee_flex[front] = 60 * kDeg * s;
      p.hip_flex[back] = -20 * kDeg * s;
      p.knee_flex[back] = 50 * kDeg * s;
      p.forward_shift += 0.3 * subject.scale * s;
      break;
    }
    case Activity::kSquats:
      p.hip_flex = {80 * kDeg * s, 80 * kDeg * s};
      p.knee_flex = {110 * kDeg * s, 110 * kDeg * s};
      p.trunk_pitch = 30 * kDeg * s;
      p.arm_flex = {80 * kDeg * s, 80 * kDeg * s};
      break;
  }
  return p;
}

RcsProfile parse_rcs_profile(const std::string& name) {
  if (name == "uniform") return RcsProfile::kUniform;
  if (name == "heteroscedastic") return RcsProfile::kHeteroscedastic;
  if (name == "three_point") return RcsProfile::kThreePoint;
  fail(ErrorKind::kConfig, "unknown rcs profile '" + name + "'");
}

std::string to_string(RcsProfile profile) {
  switch (profile) {
    case RcsProfile::kUniform: return "uniform";
    case RcsProfile::kHeteroscedastic: return "heteroscedastic";
    case RcsProfile::kThreePoint: return "three_point";
  }
  return "uniform";
}

std::array<double, kNumKeypoints> rcs_weights(RcsProfile profile) {
  std::array<double, kNumKeypoints> w{};
  switch (profile) {
    case RcsProfile::kUniform:
      w.fill(1.0);
      break;
    case RcsProfile::kHeteroscedastic:
      w.fill(0.6);
      for (auto k : {kHips, kSpine, kSpine1, kRightHip, kLeftHip}) w[k] = 1.0;
      for (auto k : {kRightForeArm, kLeftForeArm, kHead, kHeadEnd}) w[k] = 0.3;
      for (auto k : {kRightHand, kRightHandEnd, kLeftHand, kLeftHandEnd}) w[k] = 0.1;
      break;
    case RcsProfile::kThreePoint:
      w[kHips] = 1.0;
      w[kRightHand] = 1.0;
      w[kLeftHand] = 1.0;
      break;
  }
  return w;
}

MotionScript make_script(Activity activity, const SubjectProfile& subject, std::size_t n_frames,
                         double frame_rate_hz, RcsProfile profile, double noise_std,
                         int subject_id) {
  require(n_frames > 0, ErrorKind::kInvalidArgument, "script needs at least one frame");
  MotionScript script;
  script.rcs = rcs_weights(profile);
  script.noise_std = noise_std;
  script.activity = static_cast<int>(activity);
  script.subject = subject_id;
  script.trajectory.reserve(n_frames);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double time = static_cast<double>(t) / frame_rate_hz;
    script.trajectory.push_back(skeleton_pose(activity_params(activity, time, subject), subject));
  }
  return script;
}

std::vector<Recording> simulate_recordings(const SimulationPlan& plan, const RadarParams& params,
                                           Rng& rng) {
  require(plan.n_subjects > 0 && !plan.activities.empty(), ErrorKind::kConfig,
          "simulation needs at least one subject and one activity");
  require(plan.frames_per_recording >= params.dims.frames, ErrorKind::kConfig,
          "frames_per_recording must cover at least one window");
  std::vector<Recording> out;
  for (std::size_t subj = 0; subj < plan.n_subjects; ++subj) {
    Rng subject_rng = rng.derive(1000 + subj);
    const SubjectProfile profile = random_subject(subject_rng, plan.spread);
    for (int act : plan.activities) {
      require(act >= 0 && act < kNumActivities, ErrorKind::kConfig, "activity id out of range");
      SubjectProfile take = profile;
      take.phase = subject_rng.uniform(0.0, 1.0);
      const MotionScript script =
          make_script(static_cast<Activity>(act), take, plan.frames_per_recording,
                      params.frame_rate_hz, plan.rcs, plan.noise_std, static_cast<int>(subj));
      Rng noise_rng = rng.derive(mix_seed(subj, static_cast<std::uint64_t>(act)));
      Recording rec;
      rec.subject = static_cast<int>(subj);
      rec.activity = act;
      rec.poses = script.trajectory;
      rec.cube = synthesize_script(script, params, noise_rng);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace radpose
