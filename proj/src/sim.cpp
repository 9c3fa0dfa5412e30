#include "intent/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace intent::sim {

namespace {

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
Vec2 polar(double r, double angle) { return {r * std::cos(angle), r * std::sin(angle)}; }
double bearing(Vec2 from, Vec2 to) { return std::atan2(to.y - from.y, to.x - from.x); }

Vec2 unit(Vec2 v) {
  const double n = v.norm();
  return n > 0.0 ? (1.0 / n) * v : Vec2{1.0, 0.0};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::ApproachAndInteract: return "approach";
    case Behavior::PassBy: return "pass_by";
    case Behavior::Loiter: return "loiter";
    case Behavior::ApproachThenLeave: return "approach_then_leave";
  }
  return "?";
}

void ScenarioConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidInput(std::string("scenario: ") + name + " must be positive");
    }
  };
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidInput(std::string("scenario: ") + name + " must be non-negative");
    }
  };
  positive(sample_rate, "sample_rate");
  positive(sensor_range, "sensor_range");
  positive(social_radius, "social_radius");
  positive(walking_speed_mean, "walking_speed_mean");
  non_negative(walking_speed_std, "walking_speed_std");
  positive(acceleration, "acceleration");
  positive(deceleration, "deceleration");
  non_negative(position_noise, "position_noise");
  non_negative(yaw_noise, "yaw_noise");
  non_negative(velocity_noise, "velocity_noise");
  positive(scene_duration, "scene_duration");
  positive(gaze_fixation_distance, "gaze_fixation_distance");
  positive(dwell_radius, "dwell_radius");
  positive(dwell_duration, "dwell_duration");
  non_negative(dropout_rate, "dropout_rate");
  non_negative(dropout_duration, "dropout_duration");
  if (agents_per_scene < 1) throw InvalidInput("scenario: agents_per_scene must be >= 1");
  if (social_radius >= sensor_range) {
    throw InvalidInput("scenario: sensor_range must exceed social_radius");
  }
  if (walking_speed_mean - 2.5 * walking_speed_std < 0.3) {
    throw InvalidInput("scenario: walking speed distribution reaches near zero");
  }
  for (double w : {mix.approach, mix.pass_by, mix.loiter, mix.approach_then_leave}) {
    non_negative(w, "behavior weight");
  }
  if (mix.approach + mix.pass_by + mix.loiter + mix.approach_then_leave <= 0.0) {
    throw InvalidInput("scenario: behavior weights sum to zero");
  }
}

ScenarioConfig ScenarioConfig::noiseless() const {
  ScenarioConfig c = *this;
  c.position_noise = 0.0;
  c.yaw_noise = 0.0;
  c.velocity_noise = 0.0;
  return c;
}

DwellLabelConfig label_config_for(const ScenarioConfig& cfg) {
  DwellLabelConfig l;
  l.social_radius = cfg.social_radius;
  l.dwell_radius = cfg.dwell_radius;
  l.dwell_duration = cfg.dwell_duration;
  return l;
}

// ---------------------------------------------------------------------------
// Trajectory

Trajectory::Trajectory(const std::vector<Waypoint>& wps, double cruise, double start_time,
                       double accel, double decel, double corner_radius)
    : t_start_(start_time) {
  if (wps.size() < 2) throw InvalidInput("trajectory needs at least two waypoints");
  if (!(cruise > 0.0) || !(accel > 0.0) || !(decel > 0.0)) {
    throw InvalidInput("trajectory speeds and accelerations must be positive");
  }

  // Geometry: lines between waypoints, with interior pass-through corners
  // replaced by tangent arcs. mark[i] is the arc length at which waypoint i
  // takes effect (its position for stops, the start of its fillet otherwise).
  std::vector<double> mark{0.0};
  Vec2 cursor = wps.front().position;
  double s = 0.0;
  auto add_line = [&](Vec2 to) {
    const Vec2 d = to - cursor;
    const double len = d.norm();
    if (len > 1e-12) {
      Piece p;
      p.s0 = s;
      p.len = len;
      p.a = cursor;
      p.dir = unit(d);
      pieces_.push_back(p);
      s += len;
    }
    cursor = to;
  };
  for (std::size_t i = 1; i < wps.size(); ++i) {
    const Vec2 w = wps[i].position;
    if (i + 1 == wps.size() || wps[i].stop) {
      add_line(w);
      mark.push_back(s);
      continue;
    }
    const Vec2 in = w - wps[i - 1].position;
    const Vec2 out = wps[i + 1].position - w;
    const Vec2 u_in = unit(in), u_out = unit(out);
    const double theta = std::acos(std::clamp(dot(u_in, u_out), -1.0, 1.0));
    if (theta < 1e-6 || in.norm() < 1e-9 || out.norm() < 1e-9) {
      add_line(w);
      mark.push_back(s);
      continue;
    }
    double tangent = corner_radius * std::tan(0.5 * theta);
    const double room_in = (wps[i - 1].stop || i == 1) ? in.norm() : 0.5 * in.norm();
    const double room_out = (wps[i + 1].stop || i + 2 == wps.size()) ? out.norm() : 0.5 * out.norm();
    tangent = std::min({tangent, 0.9 * room_in, 0.9 * room_out});
    const double r = tangent / std::tan(0.5 * theta);
    const Vec2 p1 = w - tangent * u_in;
    add_line(p1);
    mark.push_back(s);
    const double turn = cross(u_in, u_out) > 0.0 ? 1.0 : -1.0;
    const Vec2 normal{-turn * u_in.y, turn * u_in.x};
    Piece arc;
    arc.arc = true;
    arc.s0 = s;
    arc.len = r * theta;
    arc.a = p1 + r * normal;
    arc.radius = r;
    arc.phi0 = bearing(arc.a, p1);
    arc.sweep_sign = turn;
    pieces_.push_back(arc);
    s += arc.len;
    cursor = w + tangent * u_out;
  }
  length_ = s;
  if (pieces_.empty()) throw InvalidInput("trajectory has zero length");

  // Timing: the fastest profile under per-interval speed caps, the
  // acceleration limits, and zero speed at stops.
  const std::size_t n = wps.size();
  std::vector<double> cap(n - 1);
  double current = cruise;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (wps[i].speed > 0.0) current = wps[i].speed;
    cap[i] = current;
  }
  std::vector<double> v(n);
  v[0] = wps[0].stop ? 0.0 : cap[0];
  v[n - 1] = wps[n - 1].stop ? 0.0 : cap[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) v[i] = wps[i].stop ? 0.0 : std::min(cap[i - 1], cap[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    v[i + 1] = std::min(v[i + 1], std::sqrt(v[i] * v[i] + 2.0 * accel * (mark[i + 1] - mark[i])));
  }
  for (std::size_t i = n - 1; i > 0; --i) {
    v[i - 1] = std::min(v[i - 1], std::sqrt(v[i] * v[i] + 2.0 * decel * (mark[i] - mark[i - 1])));
  }

  std::vector<int> next_stop(n, -1);
  {
    int count = 0;
    for (const auto& w : wps) count += w.stop ? 1 : 0;
    int ahead = -1;
    for (std::size_t i = n; i-- > 0;) {
      if (wps[i].stop) ahead = --count;
      next_stop[i] = ahead;
    }
  }

  double t = start_time;
  auto push = [&](double dur, double sa, double va, double acc, bool halted, int stop) {
    if (dur > 0.0) {
      phases_.push_back({t, t + dur, sa, va, acc, halted, stop});
      t += dur;
    }
  };
  if (wps[0].stop) push(wps[0].pause, 0.0, 0.0, 0.0, true, next_stop[0]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double s0 = mark[i];
    const double len = mark[i + 1] - s0;
    const double v0 = v[i], v1 = v[i + 1], vc = cap[i];
    const int stop = next_stop[i + 1];
    if (len > 1e-12) {
      const double d_acc = std::max(0.0, (vc * vc - v0 * v0) / (2.0 * accel));
      const double d_dec = std::max(0.0, (vc * vc - v1 * v1) / (2.0 * decel));
      if (d_acc + d_dec <= len) {
        push((vc - v0) / accel, s0, v0, accel, false, stop);
        push((len - d_acc - d_dec) / vc, s0 + d_acc, vc, 0.0, false, stop);
        push((vc - v1) / decel, s0 + len - d_dec, vc, -decel, false, stop);
      } else {
        const double vp = std::sqrt((2.0 * accel * decel * len + decel * v0 * v0 + accel * v1 * v1) /
                                    (accel + decel));
        if (vp < v0 || vp < v1) {
          push(2.0 * len / (v0 + v1), s0, v0, (v1 * v1 - v0 * v0) / (2.0 * len), false, stop);
        } else {
          push((vp - v0) / accel, s0, v0, accel, false, stop);
          push((vp - v1) / decel, s0 + (vp * vp - v0 * v0) / (2.0 * accel), vp, -decel, false, stop);
        }
      }
    }
    if (wps[i + 1].stop) push(wps[i + 1].pause, mark[i + 1], 0.0, 0.0, true, stop);
  }
  if (phases_.empty()) throw InvalidInput("trajectory has zero duration");
  t_end_ = t;
}

void Trajectory::locate(double s, Vec2& p, Vec2& tangent) const {
  s = std::clamp(s, 0.0, length_);
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), s,
                             [](double v, const Piece& pc) { return v < pc.s0; });
  const Piece& pc = it == pieces_.begin() ? pieces_.front() : *std::prev(it);
  const double u = std::min(s - pc.s0, pc.len);
  if (!pc.arc) {
    p = pc.a + u * pc.dir;
    tangent = pc.dir;
    return;
  }
  const double phi = pc.phi0 + pc.sweep_sign * u / pc.radius;
  p = pc.a + polar(pc.radius, phi);
  tangent = {-pc.sweep_sign * std::sin(phi), pc.sweep_sign * std::cos(phi)};
}

const Trajectory::Phase& Trajectory::phase_at(double t) const {
  auto it = std::upper_bound(phases_.begin(), phases_.end(), t,
                             [](double v, const Phase& ph) { return v < ph.t0; });
  return it == phases_.begin() ? phases_.front() : *std::prev(it);
}

double Trajectory::arc_length_at(double t, double* speed) const {
  t = std::clamp(t, t_start_, t_end_);
  const Phase& ph = phase_at(t);
  const double tau = std::min(t, ph.t1) - ph.t0;
  if (speed) *speed = std::max(0.0, ph.v0 + ph.acc * tau);
  return std::clamp(ph.s0 + ph.v0 * tau + 0.5 * ph.acc * tau * tau, 0.0, length_);
}

Vec2 Trajectory::position(double t) const {
  Vec2 p, tan;
  locate(arc_length_at(t, nullptr), p, tan);
  return p;
}

Vec2 Trajectory::velocity(double t) const {
  double v = 0.0;
  Vec2 p, tan;
  locate(arc_length_at(t, &v), p, tan);
  return v * tan;
}

double Trajectory::speed(double t) const {
  double v = 0.0;
  arc_length_at(t, &v);
  return v;
}

double Trajectory::heading(double t) const {
  Vec2 p, tan;
  locate(arc_length_at(t, nullptr), p, tan);
  return std::atan2(tan.y, tan.x);
}

bool Trajectory::stopped(double t) const {
  return phase_at(std::clamp(t, t_start_, t_end_)).halted;
}

int Trajectory::stop_index(double t) const {
  return phase_at(std::clamp(t, t_start_, t_end_)).stop;
}

// ---------------------------------------------------------------------------
// Agents

namespace {

struct Agent {
  AgentTruth truth;
  Trajectory traj;
  std::vector<double> stop_facing;  // torso target while halted at each stop
  double sweep_amplitude = 0.0;
  double sweep_period = 4.0;
  double sweep_phase = 0.0;
  std::optional<Vec2> attention;  // point the head tracks when close enough
  double attention_range = 0.0;
};

double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

double signed_uniform(std::mt19937_64& rng, double a, double b) {
  const double v = uniform(rng, a, b);
  return uniform(rng, 0.0, 1.0) < 0.5 ? -v : v;
}

double cruise_speed(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> n(cfg.walking_speed_mean, cfg.walking_speed_std);
  const double lo = cfg.walking_speed_mean - 2.5 * cfg.walking_speed_std;
  const double hi = cfg.walking_speed_mean + 2.5 * cfg.walking_speed_std;
  for (;;) {
    const double v = n(rng);
    if (v >= lo && v <= hi) return v;
  }
}

Behavior draw_behavior(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  std::discrete_distribution<int> d(
      {cfg.mix.approach, cfg.mix.pass_by, cfg.mix.loiter, cfg.mix.approach_then_leave});
  switch (d(rng)) {
    case 0: return Behavior::ApproachAndInteract;
    case 1: return Behavior::PassBy;
    case 2: return Behavior::Loiter;
    default: return Behavior::ApproachThenLeave;
  }
}

// Time from which the trajectory stays within `radius` of the robot until it
// ends, or nullopt if it ends outside.
std::optional<double> final_entry(const Trajectory& tr, double radius) {
  const double step = 0.01;
  double prev = tr.end_time();
  if (tr.position(prev).norm() > radius) return std::nullopt;
  for (double t = prev - step; t >= tr.start_time() - step; t -= step) {
    const double tc = std::max(t, tr.start_time());
    if (tr.position(tc).norm() > radius) {
      double lo = tc, hi = prev;
      for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        (tr.position(mid).norm() <= radius ? hi : lo) = mid;
      }
      return hi;
    }
    prev = tc;
  }
  return tr.start_time();
}

// Longest continuous time the trajectory spends within `radius`.
double longest_stay(const Trajectory& tr, double radius) {
  const double step = 0.02;
  double best = 0.0, since = -1.0;
  for (double t = tr.start_time(); t <= tr.end_time(); t += step) {
    if (tr.position(t).norm() <= radius) {
      if (since < 0.0) since = t;
      best = std::max(best, t - since + step);
    } else {
      since = -1.0;
    }
  }
  return best;
}

Agent make_agent(const ScenarioConfig& cfg, std::mt19937_64& rng, const std::string& id,
                 double start_time) {
  const Behavior behavior = draw_behavior(cfg, rng);
  const double v = cruise_speed(cfg, rng);
  const double spawn = cfg.sensor_range + 0.5;
  const double phi = uniform(rng, -kPi, kPi);
  using W = Trajectory::Waypoint;
  std::vector<W> wps;
  std::vector<double> facing;
  std::optional<Vec2> attention;
  double attention_range = 0.0;
  double sweep = 0.0;

  switch (behavior) {
    case Behavior::ApproachAndInteract: {
      // Walks in at cruise speed, slows down inside about 2.5 m, sometimes
      // waits briefly in front of the robot, then stands within reach.
      const double offset = uniform(rng, -0.15, 0.15);
      const Vec2 via = polar(uniform(rng, 2.0, 2.6), phi + offset);
      const Vec2 goal = polar(uniform(rng, 0.3, 0.7), phi + offset + uniform(rng, -0.2, 0.2));
      const double goal_angle = std::atan2(goal.y, goal.x);
      wps = {W{polar(spawn, phi)}, W{via, 0.0, false, v * uniform(rng, 0.3, 0.45)}};
      const double style = uniform(rng, 0.0, 1.0);
      if (style < 0.3) {
        // Steps in briefly, backs off to wait, then comes back.
        wps.push_back(W{polar(uniform(rng, 0.7, 0.95), phi + offset), uniform(rng, 0.5, 2.0), true});
        facing.push_back(wrap_angle(phi + offset + kPi));
      }
      if (style < 0.6) {
        const Vec2 queue = polar(uniform(rng, 1.2, 1.9), phi + offset);
        wps.push_back(W{queue, uniform(rng, 1.0, 4.0), true});
        facing.push_back(wrap_angle(phi + offset + kPi));
      }
      wps.push_back(W{goal, uniform(rng, 8.0, 20.0), true});
      facing.push_back(wrap_angle(goal_angle + kPi));
      attention = Vec2{0.0, 0.0};
      attention_range = cfg.gaze_fixation_distance;
      sweep = uniform(rng, 0.05, 0.3);
      break;
    }
    case Behavior::PassBy: {
      // Most stop for a while at something a few metres from the robot.
      const double psi = uniform(rng, -kPi, kPi);
      const Vec2 u = polar(1.0, psi);
      const Vec2 n{-u.y, u.x};
      const bool pause = uniform(rng, 0.0, 1.0) < 0.7;
      const double b = pause ? signed_uniform(rng, 3.0, 3.6) : signed_uniform(rng, 2.0, 3.9);
      const double half = std::sqrt(spawn * spawn - b * b);
      const Vec2 mid = (b + std::copysign(uniform(rng, -0.1, 0.25), b)) * n + uniform(rng, -1.0, 1.0) * u;
      if (pause) {
        wps = {W{b * n - half * u}, W{mid, uniform(rng, 5.0, 25.0), true}, W{b * n + half * u}};
        facing = {wrap_angle(std::atan2(mid.y, mid.x) + uniform(rng, -1.2, 1.2))};
      } else {
        wps = {W{b * n - half * u}, W{mid}, W{b * n + half * u}};
      }
      sweep = uniform(rng, 0.3, 1.05);
      break;
    }
    case Behavior::Loiter: {
      // Joins along a tangential line, then drifts around the robot in one
      // direction, facing away from it while standing.
      const double dir = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      const double total = uniform(rng, 10.0, 40.0);
      double angle = phi;
      double radius = uniform(rng, 1.3, 2.4);
      const Vec2 n = polar(1.0, phi);
      const Vec2 u = polar(1.0, phi + dir * 0.5 * kPi);
      const double b = uniform(rng, 2.4, 3.2);
      wps.push_back(W{b * n - std::sqrt(spawn * spawn - b * b) * u});
      wps.push_back(W{radius * n - uniform(rng, 1.0, 1.6) * u});
      Vec2 spot = polar(radius, angle);
      double spent = 0.0;
      while (spent < total) {
        const double pause = std::min(uniform(rng, 2.0, 8.0), total - spent + 0.5);
        wps.push_back(W{spot, pause, true});
        facing.push_back(wrap_angle(angle + kPi - dir * uniform(rng, 1.25, 3.0)));
        spent += pause;
        angle += dir * uniform(rng, 0.2, 0.45);
        radius = std::clamp(radius + uniform(rng, -0.3, 0.3), 1.3, 2.4);
        spot = polar(radius, angle);
      }
      wps.push_back(W{polar(spawn, angle + dir * uniform(rng, 0.3, 0.8))});
      sweep = uniform(rng, 0.5, 1.05);
      break;
    }
    case Behavior::ApproachThenLeave: {
      // A pass-by with a short stop beside the robot.
      const Vec2 u = polar(1.0, phi);
      const Vec2 n{-u.y, u.x};
      const double b = signed_uniform(rng, 2.2, 3.0);
      const double half = std::sqrt(spawn * spawn - b * b);
      Vec2 goal = std::copysign(uniform(rng, 0.75, 1.4), b) * n + uniform(rng, 0.3, 1.0) * u;
      const double pause = uniform(rng, 1.0, 3.0);
      for (;;) {
        wps = {W{b * n - half * u}, W{goal, pause, true}, W{b * n + half * u}};
        const Trajectory probe(wps, v, start_time, cfg.acceleration, cfg.deceleration);
        if (longest_stay(probe, cfg.dwell_radius) < 0.8 * cfg.dwell_duration) break;
        goal = 1.05 * goal;
      }
      facing = {std::numeric_limits<double>::quiet_NaN()};
      attention = goal;
      attention_range = 3.0;
      sweep = uniform(rng, 0.3, 0.9);
      break;
    }
  }

  Agent a{AgentTruth{},
          Trajectory(wps, v, start_time, cfg.acceleration, cfg.deceleration,
                     behavior == Behavior::ApproachAndInteract ? 1.5 : 0.8),
          {}, 0.0, 4.0, 0.0, std::nullopt, 0.0};
  a.truth.track_id = id;
  a.truth.behavior = behavior;
  a.truth.intent = behavior == Behavior::ApproachAndInteract;
  a.truth.start_time = a.traj.start_time();
  a.truth.end_time = a.traj.end_time();
  if (a.truth.intent) a.truth.interaction_time = final_entry(a.traj, cfg.dwell_radius);
  a.stop_facing = std::move(facing);
  a.sweep_amplitude = sweep;
  a.sweep_period = uniform(rng, 2.0, 6.0);
  a.sweep_phase = uniform(rng, 0.0, 2.0 * kPi);
  a.attention = attention;
  a.attention_range = attention_range;
  return a;
}

double lag(double current, double target, double alpha) {
  return wrap_angle(current + alpha * wrap_angle(target - current));
}

void render(const Agent& a, const ScenarioConfig& cfg, std::mt19937_64& rng, double time_offset,
            std::vector<TrackSample>& out) {
  const double dt = 1.0 / cfg.sample_rate;
  const auto k0 = static_cast<long long>(std::ceil((a.traj.start_time() - time_offset) * cfg.sample_rate));
  const auto k1 = static_cast<long long>(std::floor((a.traj.end_time() - time_offset) * cfg.sample_rate));
  const double alpha_torso = 1.0 - std::exp(-dt / 0.3);
  const double alpha_head = 1.0 - std::exp(-dt / 0.15);

  std::vector<std::pair<double, double>> occlusions;
  if (cfg.dropout_rate > 0.0) {
    std::exponential_distribution<double> gap(cfg.dropout_rate);
    for (double t = a.traj.start_time() + gap(rng); t < a.traj.end_time(); t += gap(rng)) {
      occlusions.emplace_back(t, t + cfg.dropout_duration);
      t += cfg.dropout_duration;
    }
  }
  std::normal_distribution<double> n01(0.0, 1.0);
  // Tracker position error is temporally correlated (AR(1), stationary std
  // position_noise).
  const double rho = std::exp(-dt / 0.5);
  const double innovation = std::sqrt(1.0 - rho * rho);
  Vec2 jitter{cfg.position_noise * n01(rng), cfg.position_noise * n01(rng)};

  double torso = 0.0, head = 0.0, torso_target = 0.0;
  bool first = true;
  std::size_t occ = 0;
  for (long long k = k0; k <= k1; ++k) {
    const double t = time_offset + static_cast<double>(k) * dt;
    const Vec2 p = a.traj.position(t);
    const Vec2 vel = a.traj.velocity(t);
    const double speed = vel.norm();

    if (a.traj.stopped(t)) {
      const auto idx = static_cast<std::size_t>(a.traj.stop_index(t));
      if (idx < a.stop_facing.size() && !std::isnan(a.stop_facing[idx])) {
        torso_target = a.stop_facing[idx];
      }
    } else if (speed > 0.2) {
      torso_target = std::atan2(vel.y, vel.x);
    } else if (first) {
      torso_target = a.traj.heading(t);
    }

    const double scan = a.sweep_amplitude * std::sin(2.0 * kPi * t / a.sweep_period + a.sweep_phase);
    double head_target = torso + scan;
    if (a.attention) {
      const bool before_release = a.traj.stop_index(t) == 0 || a.truth.intent;
      const Vec2 at = *a.attention;
      if (before_release && (p - at).norm() <= a.attention_range && (p - at).norm() > 1e-6) {
        head_target = bearing(p, at);
      }
    }

    if (first) {
      torso = torso_target;
      head = head_target;
      first = false;
    } else {
      torso = lag(torso, torso_target, alpha_torso);
      head = lag(head, head_target, alpha_head);
    }
    const double rel = std::clamp(wrap_angle(head - torso), -0.5 * kPi, 0.5 * kPi);
    head = wrap_angle(torso + rel);

    jitter = {rho * jitter.x + innovation * cfg.position_noise * n01(rng),
              rho * jitter.y + innovation * cfg.position_noise * n01(rng)};
    while (occ < occlusions.size() && occlusions[occ].second < t) ++occ;
    const bool hidden = occ < occlusions.size() && occlusions[occ].first <= t;
    if (hidden || p.norm() > cfg.sensor_range) continue;

    TrackSample s;
    s.time = t;
    s.track_id = a.truth.track_id;
    s.torso_position = p + jitter;
    s.torso_yaw = wrap_angle(torso + cfg.yaw_noise * n01(rng));
    s.head_yaw = wrap_angle(head + cfg.yaw_noise * n01(rng));
    s.velocity = {vel.x + cfg.velocity_noise * n01(rng), vel.y + cfg.velocity_noise * n01(rng)};
    out.push_back(std::move(s));
  }
}

}  // namespace

const AgentTruth* GroundTruth::find(const std::string& track_id) const {
  for (const auto& a : agents) {
    if (a.track_id == track_id) return &a;
  }
  return nullptr;
}

Scene generate_scene(const ScenarioConfig& cfg, std::uint64_t seed, int scene_index,
                     double time_offset) {
  cfg.validate();
  std::mt19937_64 scene_rng(splitmix64(seed));
  Scene scene;
  scene.end_time = time_offset;
  for (int i = 0; i < cfg.agents_per_scene; ++i) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) + 1)));
    const std::string id = "s" + std::to_string(scene_index) + "a" + std::to_string(i);
    const double start = time_offset + uniform(scene_rng, 0.0, cfg.scene_duration);
    Agent a = make_agent(cfg, rng, id, start);
    render(a, cfg, rng, time_offset, scene.samples);
    scene.end_time = std::max(scene.end_time, a.traj.end_time());
    scene.truth.agents.push_back(std::move(a.truth));
  }
  std::sort(scene.samples.begin(), scene.samples.end(),
            [](const TrackSample& a, const TrackSample& b) {
              return a.time != b.time ? a.time < b.time : a.track_id < b.track_id;
            });
  return scene;
}

bool truth_label(const GroundTruth& truth, const Sequence& seq, double slack) {
  const AgentTruth* a = truth.find(seq.track_id);
  if (!a || !a->intent || !a->interaction_time) return false;
  return *a->interaction_time >= seq.start_time() - slack &&
         *a->interaction_time <= seq.end_time + slack;
}

Corpus generate_corpus(const ScenarioConfig& cfg, std::size_t n_sequences, std::uint64_t seed,
                       const CorpusOptions& options) {
  cfg.validate();
  if (options.stratify_positives && *options.stratify_positives > n_sequences) {
    throw InvalidInput("stratified positive count exceeds corpus size");
  }
  const DwellLabelConfig lcfg = label_config_for(cfg);
  Corpus corpus;
  std::size_t want_pos = options.stratify_positives.value_or(0);
  std::size_t want_neg = n_sequences - want_pos;
  std::size_t have_pos = 0, have_neg = 0;
  double offset = 0.0;
  const std::size_t max_scenes = 100 + 50 * n_sequences;
  while (corpus.sequences.size() < n_sequences) {
    if (corpus.scenes >= max_scenes) {
      throw InvalidInput("scenario cannot produce the requested sequence mix");
    }
    const auto scene_seed = splitmix64(seed + 0x632BE59BD9B4E019ull * (corpus.scenes + 1));
    Scene scene = generate_scene(cfg, scene_seed, static_cast<int>(corpus.scenes), offset);
    offset = std::ceil(scene.end_time + options.scene_gap);
    ++corpus.scenes;

    std::vector<Sequence> seqs;
    if (options.labeling == CorpusLabeling::Dwell) {
      seqs = label_stream(scene.samples, lcfg);
    } else {
      std::vector<InteractionEvent> events;
      for (const auto& a : scene.truth.agents) {
        if (a.intent && a.interaction_time) events.push_back({a.track_id, *a.interaction_time});
      }
      seqs = label_stream_external(scene.samples, events, lcfg);
    }
    std::stable_sort(seqs.begin(), seqs.end(), [](const Sequence& a, const Sequence& b) {
      return a.start_time() < b.start_time();
    });
    for (auto& s : seqs) {
      if (corpus.sequences.size() >= n_sequences) break;
      if (s.samples.empty() || !s.label) continue;
      const bool pos = *s.label == 1;
      if (options.stratify_positives) {
        if (pos && have_pos >= want_pos) continue;
        if (!pos && have_neg >= want_neg) continue;
      }
      (pos ? have_pos : have_neg)++;
      corpus.sequences.push_back(std::move(s));
    }
    for (auto& a : scene.truth.agents) corpus.truth.agents.push_back(std::move(a));
    if (options.keep_stream) {
      corpus.stream.insert(corpus.stream.end(), std::make_move_iterator(scene.samples.begin()),
                           std::make_move_iterator(scene.samples.end()));
    }
  }
  corpus.positives = have_pos;
  return corpus;
}

}  // namespace intent::sim
