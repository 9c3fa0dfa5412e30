#include "intent/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace intent {

double Vec2::norm() const { return std::hypot(x, y); }

void validate(const TrackSample& s) {
  const double values[] = {s.time,         s.torso_position.x, s.torso_position.y,
                           s.torso_yaw,    s.head_yaw,         s.velocity.x,
                           s.velocity.y};
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw InvalidInput("non-finite value in sample of track '" + s.track_id + "'");
    }
  }
  for (double yaw : {s.torso_yaw, s.head_yaw}) {
    if (!(yaw > -kPi && yaw <= kPi)) {
      throw InvalidInput("yaw outside (-pi, pi] in sample of track '" + s.track_id + "'");
    }
  }
}

std::size_t dimension(FeatureSet set) {
  switch (set) {
    case FeatureSet::F1: return 1;
    case FeatureSet::F2: return 1;
    case FeatureSet::F3: return 2;
    case FeatureSet::F4: return 4;
    case FeatureSet::F5: return 6;
    case FeatureSet::F6: return 8;
  }
  throw InvalidInput("unknown feature set");
}

std::string_view to_string(FeatureSet set) {
  static constexpr std::string_view names[] = {"F1", "F2", "F3", "F4", "F5", "F6"};
  const int i = static_cast<int>(set) - 1;
  if (i < 0 || i > 5) throw InvalidInput("unknown feature set");
  return names[i];
}

FeatureSet parse_feature_set(std::string_view text) {
  if (!text.empty() && (text.front() == 'F' || text.front() == 'f')) text.remove_prefix(1);
  if (text.size() == 1 && text[0] >= '1' && text[0] <= '6') {
    return static_cast<FeatureSet>(text[0] - '0');
  }
  throw InvalidInput("unknown feature set '" + std::string(text) + "'");
}

double wrap_angle(double raw) {
  if (!std::isfinite(raw)) throw InvalidInput("wrap_angle: non-finite angle");
  double a = std::remainder(raw, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

void extract_features_into(const TrackSample& s, FeatureSet set, double* out) {
  const Vec2& p = s.torso_position;
  switch (set) {
    case FeatureSet::F1:
      out[0] = p.norm();
      return;
    case FeatureSet::F2:
      out[0] = s.torso_yaw;
      return;
    case FeatureSet::F6:
      out[6] = s.velocity.x;
      out[7] = s.velocity.y;
      [[fallthrough]];
    case FeatureSet::F5:
      out[4] = std::sin(s.head_yaw);
      out[5] = std::cos(s.head_yaw);
      [[fallthrough]];
    case FeatureSet::F4:
      out[2] = std::sin(s.torso_yaw);
      out[3] = std::cos(s.torso_yaw);
      [[fallthrough]];
    case FeatureSet::F3:
      out[0] = p.x;
      out[1] = p.y;
      return;
  }
  throw InvalidInput("unknown feature set");
}

FeatureVector extract_features(const TrackSample& sample, FeatureSet set) {
  validate(sample);
  FeatureVector fv;
  fv.set = set;
  fv.values.resize(dimension(set));
  extract_features_into(sample, set, fv.values.data());
  fv.distance = sample.distance();
  return fv;
}

VelocityEstimator::VelocityEstimator(std::size_t window)
    : window_(std::max<std::size_t>(window, 1)), history_(window_ + 1) {}

Vec2 VelocityEstimator::push(double time, Vec2 position) {
  const std::size_t cap = history_.size();
  history_[head_] = {time, position};
  head_ = (head_ + 1) % cap;
  count_ = std::min(count_ + 1, cap);
  if (count_ < 2) return {};
  // oldest retained entry sits count_-1 steps behind the newest
  const Entry& oldest = history_[(head_ + cap - count_) % cap];
  const double dt = time - oldest.time;
  if (dt <= 0.0) return {};
  return {(position.x - oldest.position.x) / dt, (position.y - oldest.position.y) / dt};
}

void VelocityEstimator::reset() {
  head_ = 0;
  count_ = 0;
}

}  // namespace intent
