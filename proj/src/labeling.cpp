#include "intent/labeling.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <unordered_map>

namespace intent {

namespace {

// Guards duration comparisons against accumulated rounding in sample times.
constexpr double kTimeEps = 1e-9;

struct TrackState {
  std::optional<Sequence> open;
  std::optional<double> last_time;
  bool consumed = false;  // interaction seen; ignore until the person leaves
  int episodes = 0;
  std::deque<double> pending_events;
};

void close(TrackState& st, EndReason reason, double end_time, std::vector<Sequence>& out) {
  if (!st.open) return;
  st.open->end_reason = reason;
  st.open->end_time = end_time;
  if (reason == EndReason::Interaction) st.open->interaction_time = end_time;
  out.push_back(std::move(*st.open));
  st.open.reset();
}

}  // namespace

std::string_view to_string(EndReason reason) {
  switch (reason) {
    case EndReason::Interaction: return "interaction";
    case EndReason::ExitedSocialSpace: return "exited";
    case EndReason::TrackLost: return "lost";
  }
  return "lost";
}

EndReason parse_end_reason(std::string_view text) {
  if (text == "interaction") return EndReason::Interaction;
  if (text == "exited") return EndReason::ExitedSocialSpace;
  if (text == "lost") return EndReason::TrackLost;
  throw DataError("unknown end reason '" + std::string(text) + "'");
}

double Sequence::start_time() const { return samples.empty() ? end_time : samples.front().time; }

void DwellLabelConfig::validate() const {
  if (!(social_radius > 0 && dwell_radius > 0 && dwell_duration > 0 && positive_window > 0 &&
        track_timeout > 0)) {
    throw InvalidInput("labeling parameters must be strictly positive");
  }
  if (!(dwell_radius < social_radius)) {
    throw InvalidInput("dwell_radius must be smaller than social_radius");
  }
}

std::vector<Sequence> segment_tracks(std::span<const TrackSample> samples,
                                     const DwellLabelConfig& cfg,
                                     std::span<const InteractionEvent> interactions) {
  cfg.validate();
  std::unordered_map<std::string, TrackState> tracks;
  std::vector<Sequence> out;

  {
    std::vector<InteractionEvent> sorted(interactions.begin(), interactions.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.time < b.time; });
    for (const auto& ev : sorted) tracks[ev.track_id].pending_events.push_back(ev.time);
  }

  auto apply_events_until = [&](TrackState& st, double time) {
    while (!st.pending_events.empty() && st.pending_events.front() <= time) {
      const double te = st.pending_events.front();
      st.pending_events.pop_front();
      if (st.open) {
        close(st, EndReason::Interaction, te, out);
        st.consumed = true;
      }
    }
  };

  for (const TrackSample& s : samples) {
    validate(s);
    TrackState& st = tracks[s.track_id];
    if (st.last_time && !(s.time > *st.last_time)) {
      throw DataError("track '" + s.track_id + "': timestamp " + std::to_string(s.time) +
                      " does not follow " + std::to_string(*st.last_time));
    }
    if (st.last_time && s.time - *st.last_time > cfg.track_timeout) {
      close(st, EndReason::TrackLost, *st.last_time, out);
      st.consumed = false;
    }
    apply_events_until(st, s.time);
    st.last_time = s.time;

    if (s.distance() > cfg.social_radius) {
      close(st, EndReason::ExitedSocialSpace, s.time, out);
      st.consumed = false;
      continue;
    }
    if (st.consumed) continue;
    if (!st.open) {
      Sequence seq;
      seq.track_id = s.track_id;
      seq.id = s.track_id + "#" + std::to_string(st.episodes++);
      st.open = std::move(seq);
    }
    st.open->samples.push_back(s);
  }

  for (auto& [id, st] : tracks) {
    if (st.open && !st.pending_events.empty()) {
      apply_events_until(st, st.pending_events.back());
    }
    if (st.open) close(st, EndReason::TrackLost, st.open->samples.back().time, out);
  }

  std::sort(out.begin(), out.end(), [](const Sequence& a, const Sequence& b) {
    if (a.start_time() != b.start_time()) return a.start_time() < b.start_time();
    return a.id < b.id;
  });
  return out;
}

Sequence apply_dwell_labels(Sequence seq, const DwellLabelConfig& cfg) {
  cfg.validate();
  if (seq.is_labeled()) return seq;

  const auto& xs = seq.samples;
  std::optional<double> dwell_start;
  std::size_t run_begin = 0;
  bool in_run = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].distance() <= cfg.dwell_radius) {
      if (!in_run) {
        in_run = true;
        run_begin = i;
      }
      if (xs[i].time - xs[run_begin].time >= cfg.dwell_duration - kTimeEps) {
        dwell_start = xs[run_begin].time;
        break;
      }
    } else {
      in_run = false;
    }
  }

  if (!dwell_start) {
    seq.label = 0;
    seq.interaction_time.reset();
    if (seq.end_reason == EndReason::Interaction) seq.end_reason = EndReason::TrackLost;
    return seq;
  }

  const double t0 = *dwell_start;
  std::erase_if(seq.samples, [&](const TrackSample& s) {
    return !(s.time < t0 && s.time >= t0 - cfg.positive_window - kTimeEps);
  });
  seq.label = 1;
  seq.end_reason = EndReason::Interaction;
  seq.interaction_time = t0;
  seq.end_time = t0;
  return seq;
}

Sequence external_label(Sequence seq, bool interacted, std::optional<double> trigger_time) {
  if (!interacted) {
    seq.label = 0;
    seq.interaction_time.reset();
    if (seq.end_reason == EndReason::Interaction) seq.end_reason = EndReason::TrackLost;
    return seq;
  }
  const double te = trigger_time ? *trigger_time
                                 : seq.interaction_time.value_or(seq.end_time);
  if (te < seq.start_time() - kTimeEps || te > seq.end_time + kTimeEps) {
    throw InvalidInput("sequence '" + seq.id + "': trigger time " + std::to_string(te) +
                       " outside span [" + std::to_string(seq.start_time()) + ", " +
                       std::to_string(seq.end_time) + "]");
  }
  std::erase_if(seq.samples, [&](const TrackSample& s) { return s.time >= te; });
  seq.label = 1;
  seq.end_reason = EndReason::Interaction;
  seq.interaction_time = te;
  seq.end_time = te;
  return seq;
}

std::vector<Sequence> label_stream(std::span<const TrackSample> samples,
                                   const DwellLabelConfig& cfg) {
  auto seqs = segment_tracks(samples, cfg);
  for (auto& s : seqs) s = apply_dwell_labels(std::move(s), cfg);
  return seqs;
}

std::vector<Sequence> label_stream_external(std::span<const TrackSample> samples,
                                            std::span<const InteractionEvent> interactions,
                                            const DwellLabelConfig& cfg) {
  auto seqs = segment_tracks(samples, cfg, interactions);
  for (auto& s : seqs) {
    const bool hit = s.end_reason == EndReason::Interaction;
    s = external_label(std::move(s), hit, hit ? s.interaction_time : std::nullopt);
  }
  return seqs;
}

Dataset Dataset::from_sequences(std::vector<Sequence> sequences) {
  Dataset ds;
  for (auto& s : sequences) {
    if (!s.is_labeled()) throw InvalidInput("sequence '" + s.id + "' is not labeled");
    if (s.samples.empty()) continue;
    ds.sequences.push_back(std::move(s));
  }
  return ds;
}

std::size_t Dataset::sample_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.samples.size();
  return n;
}

std::size_t Dataset::positive_sequences() const {
  return static_cast<std::size_t>(std::count_if(
      sequences.begin(), sequences.end(), [](const Sequence& s) { return s.label == 1; }));
}

std::size_t Dataset::negative_sequences() const {
  return sequences.size() - positive_sequences();
}

}  // namespace intent
