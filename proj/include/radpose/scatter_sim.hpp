#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "radpose/radar_frontend.hpp"
#include "radpose/rng.hpp"
#include "radpose/skeleton.hpp"

namespace radpose {

inline constexpr double kSpeedOfLight = 299792458.0;

struct RadarParams {
  double carrier_hz = 60e9;
  double bandwidth_hz = 1.02e9;
  double chirp_s = 17e-6;
  double adc_hz = 3.8e6;
  double frame_rate_hz = 15.0;
  std::size_t n_tx = 3;
  double element_spacing = 0.5;  // wavelengths
  RadarDims dims;
  // Row-major [azimuth][elevation] occupancy of the virtual array.
  std::vector<bool> array_mask;

  // Table-II defaults with the 12-channel L-shaped virtual array: the 2x2
  // block at azimuth >= 2, elevation >= 2 is unpopulated.
  static RadarParams defaults();
  static std::vector<bool> l_shaped_mask(std::size_t azimuth, std::size_t elevation);

  void validate() const;
  double range_resolution() const { return kSpeedOfLight / (2.0 * bandwidth_hz); }
  double beat_frequency(double range_m) const {
    return 2.0 * range_m * bandwidth_hz / (kSpeedOfLight * chirp_s);
  }
  double doppler_frequency(double radial_velocity) const {
    return 2.0 * radial_velocity * carrier_hz / kSpeedOfLight;
  }
  // TDM-MIMO unambiguous Doppler limit, 1 / (2 * T_chirp * n_tx).
  double max_doppler() const { return 1.0 / (2.0 * chirp_s * static_cast<double>(n_tx)); }
  bool populated(std::size_t a, std::size_t e) const {
    return array_mask[a * dims.elevation + e];
  }
};

struct Scatterer {
  Vec3 position{};
  Vec3 velocity{};
  double rcs = 1.0;
};

// Beat signal for every populated virtual channel (a, e), sample n and chirp m:
//   sum_k rcs_k exp(j 2 pi [f_b n / f_s + f_d m T_chirp + spacing (a sin(az) cos(el) + e sin(el))])
// plus complex white noise with E|w|^2 = noise_std^2. One scatterer list per
// frame. Samples are rounded to single precision, the on-disk precision.
RadarCube synthesize(const RadarParams& params,
                     std::span<const std::vector<Scatterer>> frames, double noise_std,
                     Rng& rng);

struct MotionScript {
  std::vector<Pose> trajectory;
  std::array<double, kNumKeypoints> rcs{};  // per-keypoint scatterer weight
  double noise_std = 0.0;
  int activity = -1;
  int subject = -1;
};

// Scatterers at keypoints with rcs > 0; velocities by finite differences of the
// trajectory at the frame rate.
std::vector<Scatterer> scatterers_at(const MotionScript& script, std::size_t frame,
                                     double frame_rate_hz);

// Whole-recording cube, one frame per trajectory entry.
RadarCube synthesize_script(const MotionScript& script, const RadarParams& params, Rng& rng);

struct LabeledWindow {
  RadarCube cube;
  Pose label;
};

// Sliding windows of dims.frames frames, stride 1, labeled with the pose of
// the last frame in each window.
std::vector<LabeledWindow> script_to_dataset(const MotionScript& script,
                                             const RadarParams& params, Rng& rng);

// ---------------------------------------------------------------------------
// Motion library: parametric skeleton and the nine exercise types.

enum class Activity : int {
  kLeftUpperLimbExtension = 0,
  kRightUpperLimbExtension,
  kBilateralUpperLimbExtension,
  kBicepCurls,
  kFrontArmRotation,
  kTrunkForwardBending,
  kLeftFrontLunge,
  kRightFrontLunge,
  kSquats,
};
inline constexpr int kNumActivities = 9;
std::string activity_name(int activity);

struct SubjectProfile {
  double scale = 1.0;        // body size factor
  double range_m = 2.5;      // hip distance along boresight
  double lateral_m = 0.0;
  double height_m = -1.0;    // ground plane z relative to the radar
  double yaw_rad = 0.0;      // 0 = facing the radar
  double tempo = 1.0;        // movement period multiplier
  double phase = 0.0;        // start phase in cycles
};

// Ranges that random_subject draws from.
struct SubjectSpread {
  double scale_min = 0.92, scale_max = 1.08;
  double range_min = 2.2, range_max = 2.8;
  double lateral_max = 0.25;  // symmetric, meters
  std::vector<double> yaw_deg = {0.0, 45.0, 90.0};
  double tempo_min = 0.85, tempo_max = 1.15;
};

SubjectProfile random_subject(Rng& rng, const SubjectSpread& spread = {});

// Skeleton configuration in body-relative angles (radians).
struct PoseParams {
  double trunk_pitch = 0.0;
  std::array<double, 2> arm_flex{};     // [right, left] forward raise
  std::array<double, 2> arm_abduct{};   // sideways raise
  std::array<double, 2> elbow_flex{};
  std::array<double, 2> hip_flex{};
  std::array<double, 2> knee_flex{};
  double forward_shift = 0.0;           // meters, body frame
  double lateral_shift = 0.0;
};

Pose skeleton_pose(const PoseParams& params, const SubjectProfile& subject);
PoseParams activity_params(Activity activity, double time_s, const SubjectProfile& subject);

enum class RcsProfile { kUniform, kHeteroscedastic, kThreePoint };
RcsProfile parse_rcs_profile(const std::string& name);
std::string to_string(RcsProfile profile);
// kHeteroscedastic: hands and hand ends 0.1, forearms and head 0.3, torso and
// hips 1.0. kThreePoint: Hips, RightHand and LeftHand only.
std::array<double, kNumKeypoints> rcs_weights(RcsProfile profile);

MotionScript make_script(Activity activity, const SubjectProfile& subject, std::size_t n_frames,
                         double frame_rate_hz, RcsProfile profile, double noise_std,
                         int subject_id);

struct SimulationPlan {
  std::size_t n_subjects = 6;
  std::vector<int> activities = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::size_t frames_per_recording = 44;
  RcsProfile rcs = RcsProfile::kThreePoint;
  double noise_std = 1.0;
  SubjectSpread spread;
};

struct Recording {
  int subject = -1;
  int activity = -1;
  std::vector<Pose> poses;
  RadarCube cube;  // dims.frames == poses.size()
};

// Deterministic given the rng seed; each recording uses a derived stream.
std::vector<Recording> simulate_recordings(const SimulationPlan& plan, const RadarParams& params,
                                           Rng& rng);

}  // namespace radpose
