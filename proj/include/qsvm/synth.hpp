#pragma once

// Synthetic two-class skeleton captures.
//
// A standing figure holds both forearms forward. Within each action window
// the left and right elbows flex sinusoidally,
//
//   angle(t) = rest + A * sin(2 pi t / P + phase),
//
// by rotating the forearm and hand about the axis normal to the upper-arm /
// forearm plane, so A changes the elbow angle and nothing else. Class 1
// swings both elbows widely; class 2 swings the right elbow widely and the
// left one only a little. Per window, each amplitude is scaled by
// (1 + amplitude_jitter * U(-1, 1)), P is drawn from
// [0.6, 1.0] * frames_per_window and the phase uniformly. Every joint then
// receives i.i.d. Gaussian noise (position_noise, metres) and the whole
// figure a random heading and translation, which the angle features ignore.
// `rest_frames` static frames separate consecutive windows.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "qsvm/dataset.hpp"
#include "qsvm/error.hpp"
#include "qsvm/rng.hpp"
#include "qsvm/skeleton.hpp"

namespace qsvm {

struct SynthSpec {
  std::vector<int> windows_per_class{130, 160};
  int frames_per_window = 40;
  int rest_frames = 5;
  double class1_left_amplitude = 0.8;   // radians
  double class1_right_amplitude = 0.8;
  double class2_left_amplitude = 0.3;
  double class2_right_amplitude = 0.8;
  double amplitude_jitter = 0.4;
  double position_noise = 0.006;
  std::uint64_t seed = 0;

  // Sets class 2's left amplitude to `ratio` times class 1's; a ratio of 1
  // (with equal right amplitudes) makes the classes indistinguishable.
  SynthSpec& with_left_amplitude_ratio(double ratio) {
    class2_left_amplitude = ratio * class1_left_amplitude;
    return *this;
  }

  void validate() const {
    if (windows_per_class.size() != 2) throw InvalidArgumentError("synthetic data supports exactly 2 classes");
    for (int n : windows_per_class)
      if (n < 0) throw InvalidArgumentError("windows_per_class must be non-negative");
    if (frames_per_window < 2) throw InvalidArgumentError("frames_per_window must be >= 2");
    if (rest_frames < 0) throw InvalidArgumentError("rest_frames must be >= 0");
    if (amplitude_jitter < 0.0 || amplitude_jitter >= 1.0)
      throw InvalidArgumentError("amplitude_jitter must lie in [0, 1)");
    if (position_noise < 0.0) throw InvalidArgumentError("position_noise must be >= 0");
  }
};

struct SynthCapture {
  std::vector<SkeletonFrame> frames;
  std::vector<Annotation> annotations;
};

namespace detail {

// Rest pose in metres: x to the subject's left, y up, z away from the sensor.
inline SkeletonFrame rest_pose() {
  using J = JointId;
  SkeletonFrame f;
  f[J::HipCenter] = {0.00, 0.00, 2.50};
  f[J::Spine] = {0.00, 0.12, 2.53};
  f[J::ShoulderCenter] = {0.00, 0.45, 2.50};
  f[J::Head] = {0.00, 0.63, 2.47};
  f[J::ShoulderLeft] = {0.18, 0.40, 2.50};
  f[J::ElbowLeft] = {0.22, 0.12, 2.51};
  f[J::WristLeft] = {0.22, 0.07, 2.27};
  f[J::HandLeft] = {0.23, 0.04, 2.20};
  f[J::ShoulderRight] = {-0.18, 0.40, 2.50};
  f[J::ElbowRight] = {-0.22, 0.12, 2.51};
  f[J::WristRight] = {-0.22, 0.07, 2.27};
  f[J::HandRight] = {-0.23, 0.04, 2.20};
  f[J::HipLeft] = {0.09, -0.05, 2.50};
  f[J::KneeLeft] = {0.10, -0.48, 2.47};
  f[J::AnkleLeft] = {0.10, -0.90, 2.52};
  f[J::FootLeft] = {0.10, -0.95, 2.42};
  f[J::HipRight] = {-0.09, -0.05, 2.50};
  f[J::KneeRight] = {-0.10, -0.48, 2.47};
  f[J::AnkleRight] = {-0.10, -0.90, 2.52};
  f[J::FootRight] = {-0.10, -0.95, 2.42};
  return f;
}

// Rodrigues rotation of v about unit axis k.
inline Vec3 rotate_about(Vec3 v, Vec3 k, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return c * v + s * cross(k, v) + (dot(k, v) * (1.0 - c)) * k;
}

inline void flex_elbow(SkeletonFrame& f, JointId shoulder, JointId elbow, JointId wrist, JointId hand,
                       double angle) {
  const Vec3 upper = f[shoulder] - f[elbow];
  const Vec3 fore = f[wrist] - f[elbow];
  Vec3 axis = cross(upper, fore);
  axis = (1.0 / norm(axis)) * axis;
  // Positive angle opens the elbow: rotate the forearm away from the upper arm.
  const Vec3 new_fore = rotate_about(fore, axis, angle);
  const Vec3 new_hand = rotate_about(f[hand] - f[wrist], axis, angle);
  f[wrist] = f[elbow] + new_fore;
  f[hand] = f[wrist] + new_hand;
}

}  // namespace detail

inline SynthCapture synth_generate(const SynthSpec& spec) {
  spec.validate();
  using J = JointId;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  // Interleave the classes in a seeded random order.
  std::vector<int> order;
  for (int c = 0; c < 2; ++c) order.insert(order.end(), static_cast<std::size_t>(spec.windows_per_class[c]), c + 1);
  auto order_rng = make_rng(spec.seed, {0x6f72646572ULL});
  shuffle(order, order_rng);

  SynthCapture out;
  auto rng = make_rng(spec.seed, {0x6d6f74696f6eULL});
  const SkeletonFrame rest = detail::rest_pose();

  auto emit = [&](const SkeletonFrame& pose, double heading, Vec3 shift) {
    SkeletonFrame f;
    f.frame_index = out.frames.size();
    const double c = std::cos(heading), s = std::sin(heading);
    for (std::size_t j = 0; j < kJointCount; ++j) {
      Vec3 p = pose.positions[j];
      p = {c * p.x + s * (p.z - 2.5), p.y, -s * p.x + c * (p.z - 2.5) + 2.5};
      p = p + shift;
      p = p + Vec3{spec.position_noise * standard_normal(rng), spec.position_noise * standard_normal(rng),
                   spec.position_noise * standard_normal(rng)};
      f.positions[j] = p;
    }
    out.frames.push_back(f);
  };

  for (int label : order) {
    const double heading = 0.3 * (2.0 * uniform01(rng) - 1.0);
    const Vec3 shift{0.4 * (2.0 * uniform01(rng) - 1.0), 0.05 * (2.0 * uniform01(rng) - 1.0),
                     0.5 * (2.0 * uniform01(rng) - 1.0)};
    for (int r = 0; r < spec.rest_frames; ++r) emit(rest, heading, shift);

    const double base_left = label == 1 ? spec.class1_left_amplitude : spec.class2_left_amplitude;
    const double base_right = label == 1 ? spec.class1_right_amplitude : spec.class2_right_amplitude;
    const double amp_left = base_left * (1.0 + spec.amplitude_jitter * (2.0 * uniform01(rng) - 1.0));
    const double amp_right = base_right * (1.0 + spec.amplitude_jitter * (2.0 * uniform01(rng) - 1.0));
    const double period = spec.frames_per_window * (0.6 + 0.4 * uniform01(rng));
    const double phase_left = kTwoPi * uniform01(rng);
    const double phase_right = kTwoPi * uniform01(rng);

    Annotation a;
    a.start_frame = out.frames.size();
    for (int t = 0; t < spec.frames_per_window; ++t) {
      SkeletonFrame pose = rest;
      detail::flex_elbow(pose, J::ShoulderLeft, J::ElbowLeft, J::WristLeft, J::HandLeft,
                         amp_left * std::sin(kTwoPi * t / period + phase_left));
      detail::flex_elbow(pose, J::ShoulderRight, J::ElbowRight, J::WristRight, J::HandRight,
                         amp_right * std::sin(kTwoPi * t / period + phase_right));
      emit(pose, heading, shift);
    }
    a.end_frame = out.frames.size() - 1;
    a.label = label;
    out.annotations.push_back(a);
  }
  return out;
}

}  // namespace qsvm
