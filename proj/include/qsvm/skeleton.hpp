#pragma once

// Joint-angle variance features for 20-joint Kinect-v1 skeletons.
//
// The skeleton is the standard Kinect-v1 tree (1-based joint indices):
//
//   1 HipCenter      2 Spine          3 ShoulderCenter  4 Head
//   5 ShoulderLeft   6 ElbowLeft      7 WristLeft       8 HandLeft
//   9 ShoulderRight 10 ElbowRight    11 WristRight     12 HandRight
//  13 HipLeft       14 KneeLeft      15 AnkleLeft      16 FootLeft
//  17 HipRight      18 KneeRight     19 AnkleRight     20 FootRight
//
// Limbs: 1-2 2-3 3-4 3-5 5-6 6-7 7-8 3-9 9-10 10-11 11-12
//        1-13 13-14 14-15 15-16 1-17 17-18 18-19 19-20
//
// Every joint with d >= 2 neighbours contributes C(d,2) angles. Joints are
// visited in ascending index and, within a joint, neighbour pairs in
// lexicographic order of (lower index, higher index). That yields 22 angles:
//
//   theta 1..3   HipCenter (2,13) (2,17) (13,17)
//   theta 4      Spine
//   theta 5..10  ShoulderCenter (2,4) (2,5) (2,9) (4,5) (4,9) (5,9)
//   theta 11..13 ShoulderLeft, ElbowLeft, WristLeft
//   theta 14..16 ShoulderRight, ElbowRight, WristRight
//   theta 17..19 HipLeft, KneeLeft, AnkleLeft
//   theta 20..22 HipRight, KneeRight, AnkleRight

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qsvm/error.hpp"

namespace qsvm {

inline constexpr std::size_t kJointCount = 20;
inline constexpr std::size_t kAngleCount = 22;

enum class JointId : int {
  HipCenter = 1,
  Spine,
  ShoulderCenter,
  Head,
  ShoulderLeft,
  ElbowLeft,
  WristLeft,
  HandLeft,
  ShoulderRight,
  ElbowRight,
  WristRight,
  HandRight,
  HipLeft,
  KneeLeft,
  AnkleLeft,
  FootLeft,
  HipRight,
  KneeRight,
  AnkleRight,
  FootRight,
};

inline constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "HipCenter",    "Spine",      "ShoulderCenter", "Head",     "ShoulderLeft",
    "ElbowLeft",    "WristLeft",  "HandLeft",       "ShoulderRight", "ElbowRight",
    "WristRight",   "HandRight",  "HipLeft",        "KneeLeft", "AnkleLeft",
    "FootLeft",     "HipRight",   "KneeRight",      "AnkleRight", "FootRight"};

constexpr int joint_index(JointId j) noexcept { return static_cast<int>(j); }

// Zero-based slot for arrays indexed by joint.
constexpr std::size_t joint_slot(JointId j) noexcept {
  return static_cast<std::size_t>(joint_index(j) - 1);
}

constexpr std::string_view joint_name(JointId j) noexcept {
  return kJointNames[joint_slot(j)];
}

inline std::optional<JointId> joint_from_index(int index) noexcept {
  if (index < 1 || index > static_cast<int>(kJointCount)) return std::nullopt;
  return static_cast<JointId>(index);
}

inline std::optional<JointId> joint_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kJointCount; ++i)
    if (kJointNames[i] == name) return static_cast<JointId>(static_cast<int>(i) + 1);
  return std::nullopt;
}

struct Vec3 {
  double x = 0, y = 0, z = 0;

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr bool operator==(Vec3, Vec3) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

struct SkeletonFrame {
  std::array<Vec3, kJointCount> positions{};
  std::size_t frame_index = 0;

  Vec3& operator[](JointId j) { return positions[joint_slot(j)]; }
  const Vec3& operator[](JointId j) const { return positions[joint_slot(j)]; }

  bool finite() const {
    return std::all_of(positions.begin(), positions.end(), [](const Vec3& p) {
      return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
    });
  }
};

using AngleVector = std::array<double, kAngleCount>;

struct ActionWindow {
  std::vector<SkeletonFrame> frames;
  std::optional<int> label;
  std::string source_id;
};

struct FeatureVector {
  std::array<double, kAngleCount> values{};
  std::optional<int> label;
};

// An angle slot: the joint it sits on and the two neighbours forming it.
struct AngleDefinition {
  JointId center;
  JointId first;
  JointId second;
};

class SkeletonTopology {
 public:
  using Edge = std::pair<JointId, JointId>;

  explicit SkeletonTopology(std::span<const Edge> edges) : edges_(edges.begin(), edges.end()) {
    for (auto [a, b] : edges_) {
      neighbors_[joint_slot(a)].push_back(b);
      neighbors_[joint_slot(b)].push_back(a);
    }
    for (auto& list : neighbors_)
      std::sort(list.begin(), list.end(),
                [](JointId l, JointId r) { return joint_index(l) < joint_index(r); });
    for (int j = 1; j <= static_cast<int>(kJointCount); ++j) {
      const auto center = static_cast<JointId>(j);
      const auto& nb = neighbors(center);
      for (std::size_t p = 0; p < nb.size(); ++p)
        for (std::size_t q = p + 1; q < nb.size(); ++q) angles_.push_back({center, nb[p], nb[q]});
    }
  }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<JointId>& neighbors(JointId j) const { return neighbors_[joint_slot(j)]; }
  std::size_t degree(JointId j) const { return neighbors(j).size(); }

  // Angle slots in canonical order.
  const std::vector<AngleDefinition>& angles() const noexcept { return angles_; }

  // Canonical slot of the angle at `center` formed by neighbours a and b.
  std::optional<std::size_t> angle_slot(JointId center, JointId a, JointId b) const {
    if (joint_index(a) > joint_index(b)) std::swap(a, b);
    for (std::size_t i = 0; i < angles_.size(); ++i)
      if (angles_[i].center == center && angles_[i].first == a && angles_[i].second == b) return i;
    return std::nullopt;
  }

 private:
  std::vector<Edge> edges_;
  std::array<std::vector<JointId>, kJointCount> neighbors_;
  std::vector<AngleDefinition> angles_;
};

inline const SkeletonTopology& canonical_topology() {
  using J = JointId;
  static const std::array<SkeletonTopology::Edge, 19> kEdges = {{
      {J::HipCenter, J::Spine},
      {J::Spine, J::ShoulderCenter},
      {J::ShoulderCenter, J::Head},
      {J::ShoulderCenter, J::ShoulderLeft},
      {J::ShoulderLeft, J::ElbowLeft},
      {J::ElbowLeft, J::WristLeft},
      {J::WristLeft, J::HandLeft},
      {J::ShoulderCenter, J::ShoulderRight},
      {J::ShoulderRight, J::ElbowRight},
      {J::ElbowRight, J::WristRight},
      {J::WristRight, J::HandRight},
      {J::HipCenter, J::HipLeft},
      {J::HipLeft, J::KneeLeft},
      {J::KneeLeft, J::AnkleLeft},
      {J::AnkleLeft, J::FootLeft},
      {J::HipCenter, J::HipRight},
      {J::HipRight, J::KneeRight},
      {J::KneeRight, J::AnkleRight},
      {J::AnkleRight, J::FootRight},
  }};
  static const SkeletonTopology topology{kEdges};
  return topology;
}

struct LimbVector {
  JointId neighbor;
  Vec3 vector;
};

// Displacements from `center` to each neighbour, ascending neighbour index.
inline std::vector<LimbVector> limb_vectors(const SkeletonFrame& frame, JointId center,
                                            const SkeletonTopology& topology = canonical_topology()) {
  std::vector<LimbVector> out;
  for (JointId n : topology.neighbors(center)) out.push_back({n, frame[n] - frame[center]});
  return out;
}

namespace detail {

inline double angle_between(Vec3 a, Vec3 b, double na, double nb) {
  const double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace detail

// Angle in [0, pi] between two limb vectors.
inline double joint_angle(Vec3 a, Vec3 b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0))
    throw DegenerateLimbError(0, 0, "joint_angle: zero-length limb vector");
  return detail::angle_between(a, b, na, nb);
}

inline AngleVector frame_angles(const SkeletonFrame& frame,
                                const SkeletonTopology& topology = canonical_topology()) {
  const auto& defs = topology.angles();
  if (defs.size() != kAngleCount)
    throw InvalidArgumentError("frame_angles: topology yields " + std::to_string(defs.size()) +
                               " angles, expected 22");
  AngleVector out{};
  for (std::size_t i = 0; i < kAngleCount; ++i) {
    const auto& d = defs[i];
    const Vec3 a = frame[d.first] - frame[d.center];
    const Vec3 b = frame[d.second] - frame[d.center];
    const double na = norm(a);
    const double nb = norm(b);
    if (!(na > 0.0) || !(nb > 0.0)) {
      const JointId bad = na > 0.0 ? d.second : d.first;
      throw DegenerateLimbError(
          joint_index(d.center), joint_index(bad),
          "frame " + std::to_string(frame.frame_index) + ": coincident joints " +
              std::string(joint_name(d.center)) + " and " + std::string(joint_name(bad)));
    }
    out[i] = detail::angle_between(a, b, na, nb);
  }
  return out;
}

// Per-angle sample variance (divisor M-1) over the window.
inline FeatureVector window_features(const ActionWindow& window,
                                     const SkeletonTopology& topology = canonical_topology()) {
  const std::size_t m = window.frames.size();
  if (m < 2)
    throw WindowTooShortError("window '" + window.source_id + "' has " + std::to_string(m) +
                              " frame(s); at least 2 are required");
  std::vector<AngleVector> angles;
  angles.reserve(m);
  for (const auto& f : window.frames) angles.push_back(frame_angles(f, topology));

  FeatureVector fv;
  fv.label = window.label;
  // Two-pass on values shifted by the first frame; constant angles give exactly 0.
  for (std::size_t n = 0; n < kAngleCount; ++n) {
    const double origin = angles.front()[n];
    double mean = 0.0;
    for (const auto& a : angles) mean += a[n] - origin;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (const auto& a : angles) {
      const double d = (a[n] - origin) - mean;
      ss += d * d;
    }
    fv.values[n] = ss / static_cast<double>(m - 1);
  }
  return fv;
}

}  // namespace qsvm
