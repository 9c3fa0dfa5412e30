#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "intent/core.hpp"
#include "intent/labeling.hpp"

namespace fixtures {

inline intent::TrackSample sample(const std::string& id, double t, double x, double y,
                                  double torso = 0.0, double head = 0.0, double vx = 0.0,
                                  double vy = 0.0) {
  intent::TrackSample s;
  s.time = t;
  s.track_id = id;
  s.torso_position = {x, y};
  s.torso_yaw = torso;
  s.head_yaw = head;
  s.velocity = {vx, vy};
  return s;
}

// Track standing still at (x, 0) from t0 to t1 sampled at `rate` Hz.
inline std::vector<intent::TrackSample> still(const std::string& id, double x, double t0, double t1,
                                              double rate = 10.0) {
  std::vector<intent::TrackSample> out;
  const auto n = static_cast<int>(std::lround((t1 - t0) * rate));
  for (int k = 0; k <= n; ++k) out.push_back(sample(id, t0 + k / rate, x, 0.0, intent::kPi, intent::kPi));
  return out;
}

// Straight walk along +x at y = offset, from x0 to x1 at `speed` m/s.
inline std::vector<intent::TrackSample> walk(const std::string& id, double x0, double x1,
                                             double offset, double t0, double speed,
                                             double rate = 10.0) {
  std::vector<intent::TrackSample> out;
  const double dir = x1 > x0 ? 1.0 : -1.0;
  const double dur = std::abs(x1 - x0) / speed;
  const auto n = static_cast<int>(std::floor(dur * rate));
  for (int k = 0; k <= n; ++k) {
    const double t = k / rate;
    out.push_back(sample(id, t0 + t, x0 + dir * speed * t, offset, dir > 0 ? 0.0 : intent::kPi,
                         dir > 0 ? 0.0 : intent::kPi, dir * speed, 0.0));
  }
  return out;
}

inline intent::Sequence labeled(const std::string& id, std::vector<intent::TrackSample> samples,
                                int label, std::optional<double> interaction = std::nullopt) {
  intent::Sequence s;
  s.id = id;
  s.track_id = samples.empty() ? id : samples.front().track_id;
  s.samples = std::move(samples);
  s.label = label;
  s.interaction_time = interaction;
  s.end_time = s.samples.empty() ? 0.0 : s.samples.back().time;
  return s;
}

// Random labeled sequences whose features carry a weak signal.
inline std::vector<intent::Sequence> random_sequences(std::size_t n, std::uint64_t seed,
                                                      std::size_t length = 12) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<intent::Sequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<intent::TrackSample> ss;
    for (std::size_t k = 0; k < length; ++k) {
      const double r = 1.0 + 1.5 * (u(rng) + 1.0) - 0.5 * label;
      const double a = u(rng) * intent::kPi;
      ss.push_back(sample("t" + std::to_string(i), 10.0 * i + 0.1 * k, r * std::cos(a),
                          r * std::sin(a), intent::wrap_angle(a + intent::kPi + (label ? 0.1 : 1.5) * u(rng)),
                          intent::wrap_angle(a + intent::kPi + u(rng)), 0.5 * u(rng), 0.5 * u(rng)));
    }
    out.push_back(labeled("t" + std::to_string(i) + "#0", std::move(ss), label,
                          label ? std::optional<double>(10.0 * i + 0.1 * length + 1.0) : std::nullopt));
  }
  return out;
}

}  // namespace fixtures
