#include "intent/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace intent::runtime {

void RuntimeConfig::validate() const {
  if (!(social_radius > 0.0) || !(track_timeout > 0.0)) {
    throw InvalidInput("runtime: social_radius and track_timeout must be positive");
  }
  if (!(engage_threshold >= 0.0 && engage_threshold <= 1.0 && disengage_threshold >= 0.0 &&
        disengage_threshold <= engage_threshold)) {
    throw InvalidInput("runtime: need 0 <= disengage_threshold <= engage_threshold <= 1");
  }
  if (!(reorder_tolerance >= 0.0)) throw InvalidInput("runtime: reorder_tolerance must be >= 0");
  if (velocity_window == 0) throw InvalidInput("runtime: velocity_window must be >= 1");
}

std::string_view to_string(Transition t) {
  return t == Transition::Engage ? "engage" : "disengage";
}

std::optional<std::string> select_target(std::span<const Candidate> candidates, double threshold) {
  const Candidate* best = nullptr;
  for (const auto& c : candidates) {
    if (!(c.probability > threshold)) continue;
    if (!best || c.distance < best->distance ||
        (c.distance == best->distance && c.track_id < best->track_id)) {
      best = &c;
    }
  }
  if (!best) return std::nullopt;
  return best->track_id;
}

std::optional<std::string> TargetSelector::update(std::span<const Candidate> candidates) {
  const auto best = select_target(candidates, threshold_);
  if (!best) {
    current_.reset();
    return current_;
  }
  if (current_) {
    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [&](const Candidate& c) { return c.track_id == *current_; });
    if (it != candidates.end() && it->probability > threshold_) {
      auto b = std::find_if(candidates.begin(), candidates.end(),
                            [&](const Candidate& c) { return c.track_id == *best; });
      if (!(b->distance < it->distance)) return current_;
    }
  }
  current_ = best;
  return current_;
}

StreamEngine::StreamEngine(const Model& model, RuntimeConfig cfg)
    : model_(&model), cfg_(cfg), selector_(cfg.engage_threshold) {
  cfg_.validate();
}

bool StreamEngine::ingest(const io::TrackRecord& rec) {
  const double t = rec.sample.time;
  if (!std::isfinite(t)) throw DataError("record time is not finite");
  if (t < clock_ - cfg_.reorder_tolerance) {
    throw StreamError("record for track '" + rec.sample.track_id + "' at t=" + std::to_string(t) +
                      " lags the stream clock " + std::to_string(clock_) + " beyond tolerance");
  }
  clock_ = std::max(clock_, t);
  auto it = tracks_.find(rec.sample.track_id);
  if (it == tracks_.end()) {
    it = tracks_.try_emplace(rec.sample.track_id, *model_, cfg_.velocity_window).first;
  }
  Track& tr = it->second;
  if (tr.last_time && t <= *tr.last_time) {
    ++dropped_;
    return false;
  }
  auto pos = std::lower_bound(tr.pending.begin(), tr.pending.end(), t,
                              [](const io::TrackRecord& r, double v) { return r.sample.time < v; });
  if (pos != tr.pending.end() && pos->sample.time == t) {
    ++dropped_;
    return false;
  }
  tr.pending.insert(pos, rec);
  return true;
}

void StreamEngine::close(const std::string& id, Track& tr, EndReason reason, double end_time,
                         StepResult& out) {
  if (!tr.sequence_id) return;
  out.closed.push_back({*tr.sequence_id, id, reason, end_time});
  if (tr.engaged) {
    out.events.push_back({end_time, id, tr.last_probability, Transition::Disengage, std::nullopt});
    tr.engaged = false;
  }
  tr.sequence_id.reset();
}

void StreamEngine::process(const std::string& id, Track& tr, const io::TrackRecord& rec,
                           StepResult& out) {
  TrackSample s = rec.sample;
  if (tr.last_time && s.time - *tr.last_time > cfg_.track_timeout) {
    close(id, tr, EndReason::TrackLost, *tr.last_time, out);
    tr.consumed = false;
    tr.velocity.reset();
  }
  const Vec2 v = tr.velocity.push(s.time, s.torso_position);
  if (!rec.has_velocity) s.velocity = v;
  if (rec.interaction && tr.sequence_id) {
    close(id, tr, EndReason::Interaction, s.time, out);
    tr.consumed = true;
  }
  tr.last_time = s.time;
  tr.distance = s.distance();

  if (tr.distance > cfg_.social_radius) {
    close(id, tr, EndReason::ExitedSocialSpace, s.time, out);
    tr.consumed = false;
    return;
  }
  if (tr.consumed) return;
  if (!tr.sequence_id) {
    tr.sequence_id = id + "#" + std::to_string(episodes_[id]++);
    tr.scorer.reset();
  }
  const double p = tr.scorer.push(s);
  tr.last_probability = p;
  out.predictions.push_back({id, *tr.sequence_id, s.time, p, tr.distance});
  if (!tr.engaged && p > cfg_.engage_threshold) {
    tr.engaged = true;
    out.events.push_back({s.time, id, p, Transition::Engage, std::nullopt});
  } else if (tr.engaged && p < cfg_.disengage_threshold) {
    tr.engaged = false;
    out.events.push_back({s.time, id, p, Transition::Disengage, std::nullopt});
  }
}

void StreamEngine::finalize(StepResult& out) {
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const DecisionEvent& a, const DecisionEvent& b) { return a.track_id < b.track_id; });
  std::vector<Candidate> candidates;
  for (const auto& [id, tr] : tracks_) {
    if (tr.sequence_id) candidates.push_back({id, tr.last_probability, tr.distance});
  }
  out.selected_target = selector_.update(candidates);
  for (auto& e : out.events) e.selected_target = out.selected_target;
}

StepResult StreamEngine::step(double now) {
  StepResult out;
  for (auto it = tracks_.begin(); it != tracks_.end();) {
    Track& tr = it->second;
    auto end = std::find_if(tr.pending.begin(), tr.pending.end(),
                            [&](const io::TrackRecord& r) { return r.sample.time > now; });
    for (auto r = tr.pending.begin(); r != end; ++r) process(it->first, tr, *r, out);
    tr.pending.erase(tr.pending.begin(), end);
    if (tr.pending.empty() && tr.last_time && now - *tr.last_time > cfg_.track_timeout) {
      close(it->first, tr, EndReason::TrackLost, *tr.last_time, out);
      it = tracks_.erase(it);
    } else {
      ++it;
    }
  }
  finalize(out);
  return out;
}

StepResult StreamEngine::finish() {
  StepResult out = step(std::numeric_limits<double>::infinity());
  for (auto& [id, tr] : tracks_) {
    if (tr.last_time) close(id, tr, EndReason::TrackLost, *tr.last_time, out);
  }
  tracks_.clear();
  finalize(out);
  return out;
}

LatencyStats summarize_latencies(std::vector<double> ms, double budget_ms) {
  LatencyStats s;
  s.steps = ms.size();
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(ms.size())));
    return ms[std::clamp<std::size_t>(k, 1, ms.size()) - 1];
  };
  double sum = 0.0;
  for (double v : ms) {
    sum += v;
    if (v > budget_ms) ++s.over_budget;
  }
  s.mean_ms = sum / static_cast<double>(ms.size());
  s.p50_ms = rank(0.5);
  s.p99_ms = rank(0.99);
  s.max_ms = ms.back();
  return s;
}

ReplayResult replay(const Model& model, std::span<const io::TrackRecord> records,
                    const RuntimeConfig& cfg) {
  StreamEngine engine(model, cfg);
  ReplayResult result;
  std::vector<double> ms;
  auto absorb = [&](StepResult&& r) {
    std::move(r.predictions.begin(), r.predictions.end(), std::back_inserter(result.predictions));
    std::move(r.events.begin(), r.events.end(), std::back_inserter(result.events));
    std::move(r.closed.begin(), r.closed.end(), std::back_inserter(result.closed));
  };
  std::size_t i = 0;
  while (i < records.size()) {
    const double t = records[i].sample.time;
    while (i < records.size() && records[i].sample.time == t) engine.ingest(records[i++]);
    const auto start = std::chrono::steady_clock::now();
    StepResult r = engine.step(std::max(t, engine.clock()));
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    absorb(std::move(r));
  }
  absorb(engine.finish());
  result.latency = summarize_latencies(std::move(ms), 1000.0 * cfg.frame_budget);
  result.dropped = engine.dropped_records();
  return result;
}

}  // namespace intent::runtime
