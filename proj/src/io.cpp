#include "intent/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace intent::io {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxDiagnostics = 20;

double number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("missing key '") + key + "'");
  if (!it->is_number()) throw DataError(std::string("key '") + key + "' is not a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw DataError(std::string("key '") + key + "' is not finite");
  return v;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, *v);
  return std::string(buf, r.ptr);
}

}  // namespace

TrackRecord parse_track_record(std::string_view line, const ParseOptions& options) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::parse_error&) {
    throw DataError("invalid JSON");
  }
  if (!j.is_object()) throw DataError("record is not a JSON object");
  TrackRecord r;
  TrackSample& s = r.sample;
  s.time = number(j, "t");
  auto id = j.find("id");
  if (id == j.end() || !id->is_string()) throw DataError("missing string key 'id'");
  s.track_id = id->get<std::string>();
  if (s.track_id.empty()) throw DataError("empty track id");
  s.torso_position = {number(j, "px"), number(j, "py")};
  const double k = options.degrees ? kPi / 180.0 : 1.0;
  s.torso_yaw = wrap_angle(k * number(j, "yaw_t"));
  s.head_yaw = wrap_angle(k * number(j, "yaw_h"));
  const bool has_vx = j.contains("vx"), has_vy = j.contains("vy");
  if (has_vx != has_vy) throw DataError("vx and vy must be given together");
  r.has_velocity = has_vx;
  if (has_vx) s.velocity = {number(j, "vx"), number(j, "vy")};
  if (auto evt = j.find("evt"); evt != j.end()) {
    if (!evt->is_string() || *evt != "interaction") throw DataError("unknown evt value");
    r.interaction = true;
  }
  return r;
}

std::string format_track_record(const TrackRecord& r) {
  const TrackSample& s = r.sample;
  json j = {{"t", s.time},
            {"id", s.track_id},
            {"px", s.torso_position.x},
            {"py", s.torso_position.y},
            {"yaw_t", s.torso_yaw},
            {"yaw_h", s.head_yaw}};
  if (r.has_velocity) {
    j["vx"] = s.velocity.x;
    j["vy"] = s.velocity.y;
  }
  if (r.interaction) j["evt"] = "interaction";
  return j.dump();
}

TrackFile read_tracks(std::istream& in, const ParseOptions& options) {
  TrackFile f;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      f.records.push_back(parse_track_record(line, options));
    } catch (const DataError& e) {
      ++f.malformed;
      if (f.diagnostics.size() < kMaxDiagnostics) {
        f.diagnostics.push_back("line " + std::to_string(n) + ": " + e.what());
      }
    }
  }
  return f;
}

TrackFile read_tracks_file(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_tracks(in, options);
}

std::vector<TrackSample> to_samples(std::span<const TrackRecord> records, double track_timeout,
                                    std::size_t velocity_window) {
  struct State {
    VelocityEstimator est;
    double last = 0.0;
  };
  std::map<std::string, State, std::less<>> tracks;
  std::vector<TrackSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto it = tracks.find(r.sample.track_id);
    if (it == tracks.end()) {
      it = tracks.emplace(r.sample.track_id, State{VelocityEstimator(velocity_window), r.sample.time})
               .first;
    } else if (r.sample.time - it->second.last > track_timeout) {
      it->second.est.reset();
    }
    it->second.last = r.sample.time;
    const Vec2 est = it->second.est.push(r.sample.time, r.sample.torso_position);
    out.push_back(r.sample);
    if (!r.has_velocity) out.back().velocity = est;
  }
  return out;
}

std::vector<InteractionEvent> interaction_events(std::span<const TrackRecord> records) {
  std::vector<InteractionEvent> events;
  for (const auto& r : records) {
    if (r.interaction) events.push_back({r.sample.track_id, r.sample.time});
  }
  return events;
}

void write_tracks(std::ostream& out, std::span<const TrackSample> samples,
                  std::span<const InteractionEvent> events) {
  // Each event marks the first sample of its track at or after the event time.
  std::map<std::string, std::vector<double>, std::less<>> pending;
  for (const auto& e : events) pending[e.track_id].push_back(e.time);
  for (auto& [id, times] : pending) std::sort(times.begin(), times.end(), std::greater<>());
  for (const auto& s : samples) {
    TrackRecord r{s, true, false};
    auto it = pending.find(s.track_id);
    if (it != pending.end() && !it->second.empty() && s.time >= it->second.back()) {
      r.interaction = true;
      while (!it->second.empty() && s.time >= it->second.back()) it->second.pop_back();
    }
    out << format_track_record(r) << '\n';
  }
}

void write_sequences(std::ostream& out, std::span<const Sequence> sequences) {
  for (const auto& q : sequences) {
    json samples = json::array();
    for (const auto& s : q.samples) {
      samples.push_back({s.time, s.torso_position.x, s.torso_position.y, s.torso_yaw, s.head_yaw,
                         s.velocity.x, s.velocity.y});
    }
    json j = {{"id", q.id},
              {"track_id", q.track_id},
              {"label", q.label ? json(*q.label) : json(nullptr)},
              {"end_reason", std::string(to_string(q.end_reason))},
              {"interaction_time", opt(q.interaction_time)},
              {"end_time", q.end_time},
              {"samples", std::move(samples)}};
    out << j.dump() << '\n';
  }
}

std::vector<Sequence> read_sequences(std::istream& in) {
  std::vector<Sequence> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Sequence q;
      q.id = j.at("id").get<std::string>();
      q.track_id = j.at("track_id").get<std::string>();
      if (!j.at("label").is_null()) {
        const int l = j.at("label").get<int>();
        if (l != 0 && l != 1) throw DataError("label must be 0 or 1");
        q.label = l;
      }
      q.end_reason = parse_end_reason(j.at("end_reason").get<std::string>());
      if (!j.at("interaction_time").is_null()) q.interaction_time = j.at("interaction_time").get<double>();
      q.end_time = j.at("end_time").get<double>();
      for (const auto& row : j.at("samples")) {
        if (!row.is_array() || row.size() != 7) throw DataError("sample rows need 7 numbers");
        TrackSample s;
        s.track_id = q.track_id;
        s.time = row[0].get<double>();
        s.torso_position = {row[1].get<double>(), row[2].get<double>()};
        s.torso_yaw = row[3].get<double>();
        s.head_yaw = row[4].get<double>();
        s.velocity = {row[5].get<double>(), row[6].get<double>()};
        validate(s);
        q.samples.push_back(std::move(s));
      }
      out.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw DataError("sequence line " + std::to_string(n) + ": " + e.what());
    } catch (const std::exception& e) {
      throw DataError("sequence line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Sequence> read_sequences_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_sequences(in);
}

void write_sequences_file(const std::string& path, std::span<const Sequence> sequences) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_sequences(out, sequences);
}

std::string report_json(const EvalReport& r, int indent) {
  json bins = json::array();
  for (std::size_t b = 0; b < r.bins.count(); ++b) {
    bins.push_back({{"range", r.bins.label(b)},
                    {"auroc", b < r.binned.per_bin.size() ? opt(r.binned.per_bin[b]) : json(nullptr)},
                    {"samples", b < r.binned.samples_per_bin.size() ? r.binned.samples_per_bin[b] : 0}});
  }
  json roc = json::array();
  for (const auto& p : r.roc_curve) {
    roc.push_back({{"threshold", p.threshold},
                   {"fpr", p.fpr},
                   {"tpr", p.tpr},
                   {"precision", opt(p.precision)},
                   {"mean_advance_time", opt(p.mean_advance_time)}});
  }
  json j = {{"model", r.model},
            {"feature_set", r.feature_set},
            {"sequences", r.sequences},
            {"samples", r.samples},
            {"seed", r.seed},
            {"folds", r.folds},
            {"interaction_time_convention", r.interaction_time_convention},
            {"pooled_auroc", opt(r.pooled_auroc)},
            {"binned_auroc", {{"bin_edges", r.bins.edges},
                              {"mean", opt(r.binned.mean)},
                              {"skipped_bins", r.binned.skipped},
                              {"bins", std::move(bins)}}},
            {"sequence_auroc", opt(r.sequence_auroc)},
            {"roc_curve", std::move(roc)}};
  return j.dump(indent);
}

void write_roc_csv(std::ostream& out, std::span<const RocPoint> curve) {
  out << "threshold,fpr,tpr,precision,mean_advance_time\n";
  for (const auto& p : curve) {
    out << cell(p.threshold) << ',' << cell(p.fpr) << ',' << cell(p.tpr) << ','
        << cell(p.precision) << ',' << cell(p.mean_advance_time) << '\n';
  }
}

void write_ssl_csv(std::ostream& out, std::span<const DayStats> days) {
  out << "day,median,q1,q3,min,max,runs\n";
  for (const auto& d : days) {
    const bool any = !d.values.empty();
    auto c = [&](double v) { return any ? cell(v) : std::string(); };
    out << d.day << ',' << c(d.median) << ',' << c(d.q1) << ',' << c(d.q3) << ',' << c(d.min)
        << ',' << c(d.max) << ',' << d.values.size() << '\n';
  }
}

namespace {

template <class F>
void for_each_field(sim::ScenarioConfig& c, F&& f) {
  f("sample_rate", c.sample_rate);
  f("sensor_range", c.sensor_range);
  f("social_radius", c.social_radius);
  f("walking_speed_mean", c.walking_speed_mean);
  f("walking_speed_std", c.walking_speed_std);
  f("acceleration", c.acceleration);
  f("deceleration", c.deceleration);
  f("mix_approach", c.mix.approach);
  f("mix_pass_by", c.mix.pass_by);
  f("mix_loiter", c.mix.loiter);
  f("mix_approach_then_leave", c.mix.approach_then_leave);
  f("position_noise", c.position_noise);
  f("yaw_noise", c.yaw_noise);
  f("velocity_noise", c.velocity_noise);
  f("agents_per_scene", c.agents_per_scene);
  f("scene_duration", c.scene_duration);
  f("gaze_fixation_distance", c.gaze_fixation_distance);
  f("dwell_radius", c.dwell_radius);
  f("dwell_duration", c.dwell_duration);
  f("dropout_rate", c.dropout_rate);
  f("dropout_duration", c.dropout_duration);
}

}  // namespace

sim::ScenarioConfig read_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("scenario config: " + std::string(e.what()));
  }
  if (!j.is_object()) throw DataError("scenario config must be a JSON object");
  sim::ScenarioConfig cfg;
  std::size_t used = 0;
  for_each_field(cfg, [&](const char* key, auto& field) {
    if (auto it = j.find(key); it != j.end()) {
      if (!it->is_number()) throw DataError(std::string("scenario config: '") + key + "' must be a number");
      field = it->get<std::remove_reference_t<decltype(field)>>();
      ++used;
    }
  });
  if (used != j.size()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool known = false;
      for_each_field(cfg, [&](const char* key, auto&) { known = known || it.key() == key; });
      if (!known) throw DataError("scenario config: unknown key '" + it.key() + "'");
    }
  }
  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    throw DataError(e.what());
  }
  return cfg;
}

std::string scenario_config_json(const sim::ScenarioConfig& cfg) {
  sim::ScenarioConfig c = cfg;
  json j = json::object();
  for_each_field(c, [&](const char* key, auto& field) { j[key] = field; });
  return j.dump(2);
}

}  // namespace intent::io
