#pragma once

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intent/io.hpp"
#include "intent/labeling.hpp"
#include "intent/models.hpp"

namespace intent::runtime {

/// Raised when a record arrives further behind the stream clock than the
/// reordering tolerance allows.
class StreamError : public DataError {
 public:
  using DataError::DataError;
};

struct RuntimeConfig {
  double social_radius = 4.0;
  double track_timeout = 1.0;
  double engage_threshold = 0.86;
  double disengage_threshold = 0.76;
  double reorder_tolerance = 0.1;  // s
  std::size_t velocity_window = 5;
  double frame_budget = 1.0 / 30.0;  // s

  void validate() const;
};

enum class Transition { Engage, Disengage };
std::string_view to_string(Transition t);

struct DecisionEvent {
  double time = 0.0;
  std::string track_id;
  double probability = 0.0;
  Transition transition = Transition::Engage;
  std::optional<std::string> selected_target;
};

/// One scored sample.
struct Prediction {
  std::string track_id;
  std::string sequence_id;
  double time = 0.0;
  double probability = 0.0;
  double distance = 0.0;
};

struct ClosedSequence {
  std::string sequence_id;
  std::string track_id;
  EndReason reason = EndReason::TrackLost;
  double end_time = 0.0;
};

struct StepResult {
  std::vector<Prediction> predictions;
  std::vector<DecisionEvent> events;  // track-id order
  std::vector<ClosedSequence> closed;
  std::optional<std::string> selected_target;
};

struct Candidate {
  std::string track_id;
  double probability = 0.0;
  double distance = 0.0;
};

/// Closest track with probability above `threshold`; ties go to the
/// lexicographically smallest id.
std::optional<std::string> select_target(std::span<const Candidate> candidates, double threshold);

/// select_target with hysteresis on the choice itself: the current target is
/// kept until it stops qualifying or a strictly closer track qualifies.
class TargetSelector {
 public:
  explicit TargetSelector(double threshold) : threshold_(threshold) {}
  std::optional<std::string> update(std::span<const Candidate> candidates);
  const std::optional<std::string>& current() const { return current_; }

 private:
  double threshold_;
  std::optional<std::string> current_;
};

/// Multi-track online inference. Records are ingested as they arrive and
/// scored by step(); each track is segmented and scored exactly as the offline
/// pipeline (segment_tracks + predict_sequence) would.
class StreamEngine {
 public:
  StreamEngine(const Model& model, RuntimeConfig cfg = {});

  /// Buffers a record. Returns false if it was dropped because its track has
  /// already advanced past it. Throws StreamError when the record lags the
  /// stream clock by more than the reordering tolerance.
  bool ingest(const io::TrackRecord& record);

  /// Processes every buffered record with time <= now, expires silent
  /// tracks, and updates engagement decisions.
  StepResult step(double now);

  /// Closes all open sequences (end of stream).
  StepResult finish();

  std::size_t live_tracks() const { return tracks_.size(); }
  std::size_t dropped_records() const { return dropped_; }
  double clock() const { return clock_; }
  const RuntimeConfig& config() const { return cfg_; }

 private:
  struct Track {
    Track(const Model& model, std::size_t window) : velocity(window), scorer(model) {}
    std::vector<io::TrackRecord> pending;  // sorted by time
    std::optional<double> last_time;
    VelocityEstimator velocity;
    Model::Stream scorer;
    std::optional<std::string> sequence_id;
    bool consumed = false;
    bool engaged = false;
    double last_probability = 0.5;
    double distance = 0.0;
  };

  void process(const std::string& id, Track& tr, const io::TrackRecord& rec, StepResult& out);
  void close(const std::string& id, Track& tr, EndReason reason, double end_time, StepResult& out);
  void finalize(StepResult& out);

  const Model* model_;
  RuntimeConfig cfg_;
  std::map<std::string, Track> tracks_;
  std::map<std::string, int> episodes_;
  TargetSelector selector_;
  double clock_ = -std::numeric_limits<double>::infinity();
  std::size_t dropped_ = 0;
};

struct LatencyStats {
  std::size_t steps = 0;
  double mean_ms = 0.0, p50_ms = 0.0, p99_ms = 0.0, max_ms = 0.0;
  std::size_t over_budget = 0;
};

LatencyStats summarize_latencies(std::vector<double> step_ms, double budget_ms);

struct ReplayResult {
  std::vector<Prediction> predictions;
  std::vector<DecisionEvent> events;
  std::vector<ClosedSequence> closed;
  LatencyStats latency;
  std::size_t dropped = 0;
};

/// Feeds time-ordered records through a StreamEngine, stepping once per
/// distinct timestamp, and closes everything at the end.
ReplayResult replay(const Model& model, std::span<const io::TrackRecord> records,
                    const RuntimeConfig& cfg = {});

}  // namespace intent::runtime
