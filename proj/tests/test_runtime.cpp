#include <doctest.h>

#include <chrono>
#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "intent/labeling.hpp"
#include "intent/runtime.hpp"
#include "intent/sim.hpp"

using namespace intent;
using namespace intent::runtime;

namespace {

// p = sigmoid(8 - 4 d): crosses 0.86 near d = 1.546 and 0.76 near d = 1.712.
Model distance_model() {
  ModelSpec spec;
  spec.kind = ModelKind::Linear;
  spec.feature_set = FeatureSet::F1;
  nn::LogisticRegression lr(1);
  lr.parameters() << -4.0, 8.0;
  return Model(spec, Normalizer::identity(1), lr);
}

io::TrackRecord rec(const std::string& id, double t, double x, double y = 0.0) {
  io::TrackRecord r;
  r.sample = fixtures::sample(id, t, x, y, kPi, kPi);
  return r;
}

std::vector<io::TrackRecord> records_of(const std::vector<TrackSample>& xs) {
  std::vector<io::TrackRecord> out;
  for (const auto& x : xs) out.push_back({x, true, false});
  return out;
}

}  // namespace

TEST_CASE("select_target picks the closest qualifying track") {
  const std::vector<Candidate> c{{"A", 0.9, 3.0}, {"B", 0.8, 1.0}};
  CHECK(select_target(c, 0.5) == "B");
  CHECK_FALSE(select_target(c, 0.95));
  CHECK_FALSE(select_target(std::vector<Candidate>{}, 0.5));
  const std::vector<Candidate> tie{{"zed", 0.9, 2.0}, {"amy", 0.7, 2.0}};
  CHECK(select_target(tie, 0.5) == "amy");
}

TEST_CASE("the target selector keeps its choice until a strictly closer track qualifies") {
  TargetSelector sel(0.5);
  CHECK(sel.update(std::vector<Candidate>{{"a", 0.9, 2.0}}) == "a");
  CHECK(sel.update(std::vector<Candidate>{{"a", 0.9, 2.0}, {"b", 0.9, 2.0}}) == "a");
  CHECK(sel.update(std::vector<Candidate>{{"a", 0.9, 2.0}, {"b", 0.4, 1.0}}) == "a");
  CHECK(sel.update(std::vector<Candidate>{{"a", 0.9, 2.0}, {"b", 0.9, 1.5}}) == "b");
  CHECK(sel.update(std::vector<Candidate>{{"a", 0.9, 1.4}, {"b", 0.3, 1.5}}) == "a");
  CHECK_FALSE(sel.update(std::vector<Candidate>{}));
}

TEST_CASE("no tracks, no output") {
  const Model m = distance_model();
  StreamEngine e(m);
  const auto r = e.step(10.0);
  CHECK(r.predictions.empty());
  CHECK(r.events.empty());
  CHECK(r.closed.empty());
  CHECK_FALSE(r.selected_target);
  CHECK(e.finish().predictions.empty());
}

TEST_CASE("a single track crossing the engage threshold raises one engage event") {
  const Model m = distance_model();
  StreamEngine e(m);
  std::vector<DecisionEvent> events;
  std::optional<std::string> target;
  for (int k = 0; k <= 30; ++k) {
    const double t = 0.1 * k;
    e.ingest(rec("a", t, 3.5 - 0.1 * k));
    auto r = e.step(t);
    events.insert(events.end(), r.events.begin(), r.events.end());
    if (r.selected_target) target = r.selected_target;
  }
  REQUIRE(events.size() == 1);
  CHECK(events[0].transition == Transition::Engage);
  CHECK(events[0].track_id == "a");
  CHECK(events[0].probability > 0.86);
  CHECK(events[0].selected_target == "a");
  CHECK(target == "a");
}

TEST_CASE("probabilities inside the hysteresis band raise no events") {
  const Model m = distance_model();
  StreamEngine e(m);
  std::size_t events = 0;
  for (int k = 0; k <= 200; ++k) {
    const double t = 0.1 * k;
    e.ingest(rec("a", t, k % 2 ? 1.56 : 1.70));
    const auto r = e.step(t);
    for (const auto& p : r.predictions) {
      CHECK(p.probability > 0.76);
      CHECK(p.probability < 0.86);
    }
    events += r.events.size();
  }
  CHECK(events == 0);
}

TEST_CASE("engage then disengage below the lower threshold") {
  const Model m = distance_model();
  StreamEngine e(m);
  std::vector<Transition> seen;
  const double xs[] = {3.0, 1.0, 1.6, 1.65, 2.5, 1.0};
  for (int k = 0; k < 6; ++k) {
    e.ingest(rec("a", 0.1 * k, xs[k]));
    for (const auto& ev : e.step(0.1 * k).events) seen.push_back(ev.transition);
  }
  CHECK(seen == std::vector<Transition>{Transition::Engage, Transition::Disengage, Transition::Engage});
}

TEST_CASE("a silent track is closed as lost") {
  const Model m = distance_model();
  StreamEngine e(m);
  e.ingest(rec("a", 0.0, 2.0));
  e.ingest(rec("b", 0.0, 2.5));
  e.step(0.0);
  for (double t : {0.5, 1.0}) {
    e.ingest(rec("b", t, 2.5));
    CHECK(e.step(t).closed.empty());
  }
  e.ingest(rec("b", 1.5, 2.5));
  const auto r = e.step(1.5);
  REQUIRE(r.closed.size() == 1);
  CHECK(r.closed[0].track_id == "a");
  CHECK(r.closed[0].reason == EndReason::TrackLost);
  CHECK(r.closed[0].end_time == 0.0);
  CHECK(e.live_tracks() == 1);
}

TEST_CASE("records lagging the clock beyond the tolerance are stream errors") {
  const Model m = distance_model();
  StreamEngine e(m);
  e.ingest(rec("a", 5.0, 2.0));
  CHECK(e.ingest(rec("b", 4.95, 2.0)));
  CHECK_THROWS_AS(e.ingest(rec("c", 4.85, 2.0)), StreamError);
  e.step(5.0);
  CHECK_FALSE(e.ingest(rec("a", 5.0, 2.0)));
  CHECK(e.dropped_records() == 1);
}

TEST_CASE("interleaved tracks are scored independently") {
  sim::ScenarioConfig cfg;
  cfg.sample_rate = 10;
  const auto corpus = sim::generate_corpus(cfg, 60, 3);
  ModelSpec spec;
  spec.kind = ModelKind::Recurrent;
  spec.feature_set = FeatureSet::F6;
  spec.train.max_epochs = 2;
  const Model m = train(Dataset::from_sequences(corpus.sequences), spec, 3);

  const auto a = fixtures::walk("a", 3.9, 0.6, 0.2, 0.0, 0.8);
  const auto b = fixtures::walk("b", -3.9, 3.9, -1.5, 0.05, 1.3);
  std::vector<TrackSample> both(a.begin(), a.end());
  both.insert(both.end(), b.begin(), b.end());
  std::stable_sort(both.begin(), both.end(), [](auto& x, auto& y) { return x.time < y.time; });

  const auto alone = replay(m, records_of(a));
  const auto mixed = replay(m, records_of(both));
  std::vector<double> pa;
  for (const auto& p : mixed.predictions) {
    if (p.track_id == "a") pa.push_back(p.probability);
  }
  REQUIRE(pa.size() == alone.predictions.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == alone.predictions[i].probability);
}

TEST_CASE("online scoring reproduces offline segmentation and prediction") {
  sim::ScenarioConfig cfg;
  cfg.sample_rate = 10;
  cfg.dropout_rate = 0.05;
  sim::CorpusOptions opt;
  opt.keep_stream = true;
  const auto corpus = sim::generate_corpus(cfg, 80, 5, opt);
  ModelSpec spec;
  spec.kind = ModelKind::Recurrent;
  spec.feature_set = FeatureSet::F5;
  spec.train.max_epochs = 2;
  const Model m = train(Dataset::from_sequences(corpus.sequences), spec, 5);

  const auto offline = segment_tracks(corpus.stream, sim::label_config_for(cfg));
  std::map<std::string, std::vector<double>> want;
  for (const auto& q : offline) {
    if (!q.samples.empty()) want[q.id] = m.predict_sequence(q);
  }
  const auto online = replay(m, records_of(corpus.stream));
  std::map<std::string, std::vector<double>> got;
  for (const auto& p : online.predictions) got[p.sequence_id].push_back(p.probability);
  REQUIRE(got.size() == want.size());
  double worst = 0.0;
  for (const auto& [id, p] : want) {
    REQUIRE(got.count(id));
    REQUIRE(got[id].size() == p.size());
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(got[id][i] - p[i]));
  }
  CHECK(worst <= 1e-12);
  CHECK(online.dropped == 0);
}

TEST_CASE("twenty tracks at 30 Hz fit the frame budget") {
  ModelSpec spec;
  spec.kind = ModelKind::Recurrent;
  spec.feature_set = FeatureSet::F6;
  const Model m = Model::untrained(spec);
  std::vector<io::TrackRecord> recs;
  for (int k = 0; k < 900; ++k) {
    const double t = k / 30.0;
    for (int i = 0; i < 20; ++i) {
      const double a = 2.0 * kPi * i / 20.0 + 0.01 * k;
      recs.push_back(rec("p" + std::to_string(i), t, 3.0 * std::cos(a), 3.0 * std::sin(a)));
    }
  }
  const auto r = replay(m, recs);
  CHECK(r.latency.steps == 900);
  CHECK(r.predictions.size() == recs.size());
  CHECK(r.latency.p99_ms < 33.0);
}

TEST_CASE("latency summary uses nearest-rank percentiles") {
  std::vector<double> ms(100);
  for (int i = 0; i < 100; ++i) ms[i] = i + 1;
  const auto s = summarize_latencies(ms, 95.5);
  CHECK(s.p50_ms == 50);
  CHECK(s.p99_ms == 99);
  CHECK(s.max_ms == 100);
  CHECK(s.over_budget == 5);
  CHECK(s.mean_ms == doctest::Approx(50.5));
}

TEST_CASE("runtime configs are validated") {
  const Model m = distance_model();
  RuntimeConfig cfg;
  cfg.disengage_threshold = 0.9;
  CHECK_THROWS_AS(StreamEngine(m, cfg), InvalidInput);
  cfg = {};
  cfg.track_timeout = 0;
  CHECK_THROWS_AS(StreamEngine(m, cfg), InvalidInput);
}
