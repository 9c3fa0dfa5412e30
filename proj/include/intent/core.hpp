#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace intent {

inline constexpr double kPi = 3.14159265358979323846;

/// Raised when an input violates a documented precondition (non-finite
/// values, mismatched shapes, out-of-range parameters).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed or inconsistent data streams and files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  double norm() const;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// One timestamped observation of one person, expressed in the fixed robot
/// frame. Yaw angles are measured counter-clockwise from the robot's +x axis
/// (the direction the robot faces), so a person standing at (2, 0) and
/// facing the robot has torso_yaw = pi.
struct TrackSample {
  double time = 0.0;
  std::string track_id;
  Vec2 torso_position;
  double torso_yaw = 0.0;
  double head_yaw = 0.0;
  Vec2 velocity;

  double distance() const { return torso_position.norm(); }
};

/// Throws InvalidInput unless every numeric field is finite and both yaw
/// angles lie in (-pi, pi].
void validate(const TrackSample& sample);

enum class FeatureSet { F1 = 1, F2, F3, F4, F5, F6 };

inline constexpr std::array<FeatureSet, 6> kAllFeatureSets = {
    FeatureSet::F1, FeatureSet::F2, FeatureSet::F3,
    FeatureSet::F4, FeatureSet::F5, FeatureSet::F6};

std::size_t dimension(FeatureSet set);
std::string_view to_string(FeatureSet set);
/// Accepts "F1".."F6" (case-insensitive) or "1".."6".
FeatureSet parse_feature_set(std::string_view text);

struct FeatureVector {
  FeatureSet set = FeatureSet::F1;
  std::vector<double> values;
  // Distance to the robot, carried for binned evaluation even when it is not
  // one of the features.
  double distance = 0.0;
};

/// Maps any finite angle into (-pi, pi].
double wrap_angle(double raw);

/// Encodes a sample as one of the six proxemic feature sets:
///   F1 = [d]                 F2 = [torso_yaw]
///   F3 = [px, py]            F4 = F3 + [sin, cos torso_yaw]
///   F5 = F4 + [sin, cos head_yaw]
///   F6 = F5 + [vx, vy]
FeatureVector extract_features(const TrackSample& sample, FeatureSet set);

/// Writes the features of `sample` into `out` (size must equal dimension(set)).
/// Allocation-free variant used on the inference hot path.
void extract_features_into(const TrackSample& sample, FeatureSet set,
                           double* out);

/// Causal velocity estimate by backward finite differences over a window of
/// past positions. Used when the input stream does not carry velocities.
class VelocityEstimator {
 public:
  explicit VelocityEstimator(std::size_t window = 5);

  /// Returns the velocity at `time` given all previously pushed positions.
  /// The first sample after construction or reset() yields zero velocity.
  Vec2 push(double time, Vec2 position);
  void reset();

 private:
  struct Entry {
    double time;
    Vec2 position;
  };
  std::size_t window_;
  std::vector<Entry> history_;  // ring buffer of up to window_+1 entries
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

}  // namespace intent
