#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace radpose {

inline constexpr std::size_t kNumKeypoints = 26;
inline constexpr std::size_t kPoseDims = kNumKeypoints * 3;

using Vec3 = std::array<double, 3>;

enum Keypoint : std::size_t {
  kHips = 0,
  kRightHip = 1,
  kRightKnee = 2,
  kRightHeel = 3,
  kRightFootCenter = 4,
  kRightFootEnd = 5,
  kLeftHip = 6,
  kLeftKnee = 7,
  kLeftHeel = 8,
  kLeftFootCenter = 9,
  kLeftFootEnd = 10,
  kSpine = 11,
  kSpine1 = 12,
  kRightNeck = 13,
  kRightShoulder = 14,
  kRightForeArm = 15,
  kRightHand = 16,
  kRightHandEnd = 17,
  kLeftNeck = 18,
  kLeftShoulder = 19,
  kLeftForeArm = 20,
  kLeftHand = 21,
  kLeftHandEnd = 22,
  kNeck = 23,
  kHead = 24,
  kHeadEnd = 25,
};

std::string_view keypoint_name(std::size_t index);

struct BodyPartGroup {
  std::string_view name;
  std::vector<std::size_t> keypoints;
};

// Body center, right leg, left leg, right arm, left arm.
const std::vector<BodyPartGroup>& body_part_groups();

// 26 keypoints x 3 coordinates in meters, radar frame: x lateral, y boresight,
// z up.
struct Pose {
  std::array<Vec3, kNumKeypoints> keypoints{};

  Vec3& operator[](std::size_t k) { return keypoints[k]; }
  const Vec3& operator[](std::size_t k) const { return keypoints[k]; }

  // Flattened kp0_x, kp0_y, kp0_z, kp1_x, ...
  std::array<double, kPoseDims> flat() const;
  static Pose from_flat(std::span<const double> values);
  bool finite() const;
  bool operator==(const Pose&) const = default;
};

}  // namespace radpose
