#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "intent/core.hpp"
#include "intent/labeling.hpp"

// Synthetic pedestrian scenes around a robot standing at the origin of its
// frame and facing +x. All behaviour statistics below are our own construction
// and only aim to reproduce qualitative effects (distance confound, hard
// negatives, gaze cues); they are not fitted to any real data.

namespace intent::sim {

enum class Behavior { ApproachAndInteract, PassBy, Loiter, ApproachThenLeave };
std::string_view to_string(Behavior b);

struct BehaviorMix {
  double approach = 0.35;
  double pass_by = 0.55;
  double loiter = 0.04;
  double approach_then_leave = 0.06;
};

struct ScenarioConfig {
  double sample_rate = 30.0;  // Hz
  double sensor_range = 6.0;
  double social_radius = 4.0;
  double walking_speed_mean = 1.35;
  double walking_speed_std = 0.15;
  double acceleration = 0.8;  // m/s^2 when speeding up
  double deceleration = 0.5;  // m/s^2 when stopping
  BehaviorMix mix;
  double position_noise = 0.03;  // m
  double yaw_noise = 0.05;       // rad
  double velocity_noise = 0.05;  // m/s
  int agents_per_scene = 4;
  double scene_duration = 60.0;  // window in which agents start, s
  double gaze_fixation_distance = 2.5;
  double dwell_radius = 1.0;
  double dwell_duration = 5.0;
  double dropout_rate = 0.0;  // occlusions per second per agent
  double dropout_duration = 1.5;

  void validate() const;
  ScenarioConfig noiseless() const;
};

/// Planar path of straight segments joined by circular fillets, traversed
/// with a piecewise-constant acceleration profile. Stop waypoints halt the
/// agent for `pause` seconds; a waypoint speed caps the walking speed from
/// that point on.
class Trajectory {
 public:
  struct Waypoint {
    Vec2 position;
    double pause = 0.0;
    bool stop = false;
    double speed = 0.0;  // speed cap from here on; 0 keeps the previous one
  };

  Trajectory(const std::vector<Waypoint>& waypoints, double cruise_speed, double start_time,
             double acceleration, double deceleration, double corner_radius = 0.8);

  double start_time() const { return t_start_; }
  double end_time() const { return t_end_; }
  double length() const { return length_; }
  Vec2 position(double t) const;
  Vec2 velocity(double t) const;
  double speed(double t) const;
  /// Tangent heading at time t (defined even while stopped).
  double heading(double t) const;
  /// True while the agent is halted at a stop waypoint.
  bool stopped(double t) const;
  /// Index of the stop the agent is at or heading towards next; -1 after the last stop.
  int stop_index(double t) const;

 private:
  struct Piece {
    bool arc = false;
    double s0 = 0.0, len = 0.0;
    Vec2 a;           // line start, or arc centre
    Vec2 dir;         // unit direction for lines
    double radius = 0.0, phi0 = 0.0, sweep_sign = 1.0;  // arcs
  };
  struct Phase {
    double t0, t1, s0, v0, acc;
    bool halted;
    int stop;  // index of the stop this phase approaches or rests at
  };
  void locate(double s, Vec2& p, Vec2& tangent) const;
  const Phase& phase_at(double t) const;
  double arc_length_at(double t, double* speed) const;

  std::vector<Piece> pieces_;
  std::vector<Phase> phases_;
  double length_ = 0.0;
  double t_start_ = 0.0, t_end_ = 0.0;
};

struct AgentTruth {
  std::string track_id;
  Behavior behavior = Behavior::PassBy;
  bool intent = false;
  std::optional<double> interaction_time;  // start of the final stay within the dwell radius
  double start_time = 0.0;
  double end_time = 0.0;
};

struct GroundTruth {
  std::vector<AgentTruth> agents;
  const AgentTruth* find(const std::string& track_id) const;
};

struct Scene {
  std::vector<TrackSample> samples;  // ordered by (time, track_id)
  GroundTruth truth;
  double end_time = 0.0;
};

/// Deterministic given (cfg, seed). Track ids are "s<scene>a<agent>".
Scene generate_scene(const ScenarioConfig& cfg, std::uint64_t seed, int scene_index = 0,
                     double time_offset = 0.0);

/// Ground-truth label of a segmented sequence: positive iff its agent intends
/// to interact and the scripted interaction falls within the episode.
bool truth_label(const GroundTruth& truth, const Sequence& seq, double slack = 0.5);

enum class CorpusLabeling { Dwell, GroundTruth };

struct CorpusOptions {
  CorpusLabeling labeling = CorpusLabeling::Dwell;
  // When set, exactly this many positive and (n - positives) negative
  // sequences are kept, in generation order.
  std::optional<std::size_t> stratify_positives;
  bool keep_stream = false;
  double scene_gap = 5.0;  // seconds between consecutive scenes
};

struct Corpus {
  std::vector<Sequence> sequences;   // exactly n, labeled, non-empty, time ordered
  std::vector<TrackSample> stream;   // raw samples (only if keep_stream)
  GroundTruth truth;
  std::size_t positives = 0;
  std::size_t scenes = 0;
};

/// Generates consecutive scenes until `n_sequences` labeled sequences exist.
Corpus generate_corpus(const ScenarioConfig& cfg, std::size_t n_sequences, std::uint64_t seed,
                       const CorpusOptions& options = {});

DwellLabelConfig label_config_for(const ScenarioConfig& cfg);

}  // namespace intent::sim
