#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "intent/eval.hpp"
#include "intent/labeling.hpp"
#include "intent/sim.hpp"

namespace intent::io {

/// One parsed line of the track JSONL format:
///   {"t":12.3,"id":"a","px":1.0,"py":-0.5,"yaw_t":3.1,"yaw_h":3.0,"vx":-1.2,"vy":0.1}
/// vx/vy may be omitted (has_velocity = false); "evt":"interaction" marks an
/// external interaction trigger.
struct TrackRecord {
  TrackSample sample;
  bool has_velocity = true;
  bool interaction = false;
};

struct ParseOptions {
  bool degrees = false;  // yaw fields given in degrees
};

/// Parses a single line. Throws DataError describing the first problem.
TrackRecord parse_track_record(std::string_view line, const ParseOptions& options = {});
std::string format_track_record(const TrackRecord& record);

struct TrackFile {
  std::vector<TrackRecord> records;
  std::size_t malformed = 0;
  std::vector<std::string> diagnostics;  // "line N: reason", first few only
};

/// Reads a whole JSONL stream; malformed lines are skipped and counted.
TrackFile read_tracks(std::istream& in, const ParseOptions& options = {});
TrackFile read_tracks_file(const std::string& path, const ParseOptions& options = {});

/// Fills missing velocities with the causal backward-difference estimator,
/// restarting the estimate after gaps longer than `track_timeout`.
std::vector<TrackSample> to_samples(std::span<const TrackRecord> records, double track_timeout = 1.0,
                                    std::size_t velocity_window = 5);
std::vector<InteractionEvent> interaction_events(std::span<const TrackRecord> records);

/// Writes samples as track JSONL. Each event sets evt on the first sample of
/// its track at or after the event time.
void write_tracks(std::ostream& out, std::span<const TrackSample> samples,
                  std::span<const InteractionEvent> events = {});

/// Labeled sequences, one JSON object per line with their samples inline.
void write_sequences(std::ostream& out, std::span<const Sequence> sequences);
std::vector<Sequence> read_sequences(std::istream& in);
std::vector<Sequence> read_sequences_file(const std::string& path);
void write_sequences_file(const std::string& path, std::span<const Sequence> sequences);

std::string report_json(const EvalReport& report, int indent = 2);

/// threshold,fpr,tpr,precision,mean_advance_time (empty cell when undefined)
void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve);
/// day,median,q1,q3,min,max,runs
void write_ssl_csv(std::ostream& out, std::span<const DayStats> days);

/// Scenario config as a flat JSON object; unknown keys are rejected.
sim::ScenarioConfig read_scenario_config(const std::string& path);
std::string scenario_config_json(const sim::ScenarioConfig& cfg);

}  // namespace intent::io
