#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intent/core.hpp"

namespace intent {

enum class EndReason { Interaction, ExitedSocialSpace, TrackLost };

std::string_view to_string(EndReason reason);
EndReason parse_end_reason(std::string_view text);

/// One person's samples from social-space entry until interaction or exit.
///
/// A freshly segmented sequence is unlabeled (`label` empty). Once a label has
/// been assigned it is never revised: labels are decided in hindsight, once.
/// For positive sequences `interaction_time` marks the moment the interaction
/// behaviour begins and every retained sample precedes it.
struct Sequence {
  std::string id;  // unique within a corpus: "<track_id>#<episode>"
  std::string track_id;
  std::vector<TrackSample> samples;
  std::optional<int> label;
  EndReason end_reason = EndReason::TrackLost;
  std::optional<double> interaction_time;
  // Time the episode closed: the interaction trigger, the first sample seen
  // outside the social space, or the last sample for lost tracks.
  double end_time = 0.0;

  double start_time() const;
  bool is_labeled() const { return label.has_value(); }
};

struct DwellLabelConfig {
  double social_radius = 4.0;
  double dwell_radius = 1.0;
  double dwell_duration = 5.0;
  double positive_window = 10.0;
  double track_timeout = 1.0;

  void validate() const;
};

/// An interaction reported by an external detector (e.g. a touch sensor or
/// the simulator's ground truth) for one track.
struct InteractionEvent {
  std::string track_id;
  double time = 0.0;
};

/// Splits a time-ordered multi-track stream into per-person episodes inside
/// the social space. An episode closes when the person leaves the social
/// space, when the track goes silent for longer than `track_timeout`, when an
/// external interaction event for the track arrives, or at end of stream
/// (reported as TrackLost). Events close the episode before any sample at or
/// after the event time; the rest of that visit is ignored until the person
/// leaves the social space. Episodes closed by an event are left unlabeled
/// with end_reason Interaction and interaction_time set.
///
/// Output is ordered by (start_time, id). Throws DataError naming the track
/// when a track's timestamps are not strictly increasing.
std::vector<Sequence> segment_tracks(std::span<const TrackSample> samples,
                                     const DwellLabelConfig& cfg,
                                     std::span<const InteractionEvent> interactions = {});

/// Dwell heuristic: a sequence is positive when the person stays within
/// dwell_radius for an uninterrupted dwell_duration. The earliest such dwell
/// is used; its start becomes `interaction_time` and only the samples in the
/// positive_window before it are kept. Sequences that already carry a label
/// are returned unchanged.
Sequence apply_dwell_labels(Sequence seq, const DwellLabelConfig& cfg);

/// Labels a sequence from an external verdict. For a positive verdict the
/// sequence is truncated to samples strictly before `trigger_time`, which
/// must lie within the sequence's time span.
Sequence external_label(Sequence seq, bool interacted,
                        std::optional<double> trigger_time = std::nullopt);

/// segment_tracks followed by apply_dwell_labels.
std::vector<Sequence> label_stream(std::span<const TrackSample> samples,
                                   const DwellLabelConfig& cfg);

/// segment_tracks with external interaction events, then external_label on
/// each episode: positive iff the episode was closed by an event.
std::vector<Sequence> label_stream_external(std::span<const TrackSample> samples,
                                            std::span<const InteractionEvent> interactions,
                                            const DwellLabelConfig& cfg);

/// Flattened sample-level view of a set of labeled sequences. Sequences with
/// no samples are skipped; sample order follows sequence order.
struct Dataset {
  std::vector<Sequence> sequences;

  static Dataset from_sequences(std::vector<Sequence> sequences);

  std::size_t sample_count() const;
  std::size_t positive_sequences() const;
  std::size_t negative_sequences() const;
};

}  // namespace intent
