#include "radpose/skeleton.hpp"

#include <cmath>

#include "radpose/error.hpp"

namespace radpose {

namespace {

constexpr std::array<std::string_view, kNumKeypoints> kNames = {
    "Hips",          "RightHip",      "RightKnee",       "RightHeel",     "RightFootCenter",
    "RightFootEnd",  "LeftHip",       "LeftKnee",        "LeftHeel",      "LeftFootCenter",
    "LeftFootEnd",   "Spine",         "Spine1",          "RightNeck",     "RightShoulder",
    "RightForeArm",  "RightHand",     "RightHandEnd",    "LeftNeck",      "LeftShoulder",
    "LeftForeArm",   "LeftHand",      "LeftHandEnd",     "Neck",          "Head",
    "HeadEnd",
};

}  // namespace

std::string_view keypoint_name(std::size_t index) {
  require(index < kNumKeypoints, ErrorKind::kInvalidArgument, "keypoint index out of range");
  return kNames[index];
}

const std::vector<BodyPartGroup>& body_part_groups() {
  static const std::vector<BodyPartGroup> groups = {
      {"Body Center", {kHips, kSpine, kSpine1, kNeck, kHead, kHeadEnd}},
      {"Right Leg", {kRightHip, kRightKnee, kRightHeel, kRightFootCenter, kRightFootEnd}},
      {"Left Leg", {kLeftHip, kLeftKnee, kLeftHeel, kLeftFootCenter, kLeftFootEnd}},
      {"Right Arm", {kRightNeck, kRightShoulder, kRightForeArm, kRightHand, kRightHandEnd}},
      {"Left Arm", {kLeftNeck, kLeftShoulder, kLeftForeArm, kLeftHand, kLeftHandEnd}},
  };
  return groups;
}

std::array<double, kPoseDims> Pose::flat() const {
  std::array<double, kPoseDims> out{};
  for (std::size_t k = 0; k < kNumKeypoints; ++k)
    for (std::size_t d = 0; d < 3; ++d) out[3 * k + d] = keypoints[k][d];
  return out;
}

Pose Pose::from_flat(std::span<const double> values) {
  require(values.size() == kPoseDims, ErrorKind::kShapeMismatch,
          "pose needs 78 values, got " + std::to_string(values.size()));
  Pose p;
  for (std::size_t k = 0; k < kNumKeypoints; ++k)
    for (std::size_t d = 0; d < 3; ++d) p.keypoints[k][d] = values[3 * k + d];
  return p;
}

bool Pose::finite() const {
  for (const auto& kp : keypoints)
    for (double v : kp)
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace radpose
