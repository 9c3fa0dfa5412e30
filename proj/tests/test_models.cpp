#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "intent/models.hpp"
#include "intent/sim.hpp"

using namespace intent;

namespace {

nn::SampleBatch random_batch(int dim, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  nn::SampleBatch b{nn::Matrix(dim, n), nn::Vector(n), nn::Vector(n)};
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < dim; ++i) b.inputs(i, j) = g(rng);
    b.targets[j] = j % 2;
    b.weights[j] = 0.5 + std::abs(g(rng));
  }
  return b;
}

std::vector<nn::Lstm::SequenceExample> random_sequences(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<nn::Lstm::SequenceExample> out;
  for (int s = 0; s < 3; ++s) {
    const int T = 3 + s * 2;
    nn::Lstm::SequenceExample ex{nn::Matrix(dim, T), static_cast<double>(s % 2), 1.0 + 0.5 * s};
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < dim; ++i) ex.inputs(i, t) = g(rng);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
// against central differences with step h.
template <class Net, class Data>
double gradient_error(Net& net, const Data& data, double h = 1e-5) {
  nn::Vector grad;
  net.loss(data, &grad);
  auto& p = net.parameters();
  nn::Vector numeric(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = net.loss(data, nullptr);
    p[i] = keep - h;
    const double down = net.loss(data, nullptr);
    p[i] = keep;
    numeric[i] = (up - down) / (2.0 * h);
  }
  return (numeric - grad).norm() / std::max({numeric.norm(), grad.norm(), 1e-12});
}

std::vector<Sequence> blobs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<Sequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    const double cx = y ? 2.0 : -2.0;
    out.push_back(fixtures::labeled("b" + std::to_string(i) + "#0",
                                    {fixtures::sample("b" + std::to_string(i), double(i), cx + g(rng), g(rng))},
                                    y));
  }
  return out;
}

std::vector<Sequence> xor_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Sequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    double x = u(rng), y = u(rng);
    if (std::abs(x) < 0.1) x += std::copysign(0.1, x);
    if (std::abs(y) < 0.1) y += std::copysign(0.1, y);
    const int label = (x > 0) != (y > 0) ? 1 : 0;
    out.push_back(fixtures::labeled("x" + std::to_string(i) + "#0",
                                    {fixtures::sample("x" + std::to_string(i), double(i), x, y)}, label));
  }
  return out;
}

double accuracy(const Model& m, const std::vector<Sequence>& seqs) {
  std::size_t ok = 0, n = 0;
  for (const auto& s : seqs) {
    for (double p : m.predict_sequence(s)) {
      ok += (p > 0.5) == (*s.label == 1) ? 1 : 0;
      ++n;
    }
  }
  return static_cast<double>(ok) / static_cast<double>(n);
}

ModelSpec spec_of(ModelKind kind, FeatureSet set, int epochs = 50) {
  ModelSpec s;
  s.kind = kind;
  s.feature_set = set;
  s.train.max_epochs = epochs;
  s.forest.trees = 20;
  return s;
}

}  // namespace

TEST_CASE("Mlp gradient matches central differences") {
  std::mt19937_64 rng(1);
  for (int point = 0; point < 10; ++point) {
    nn::Mlp net(6);
    net.initialize(rng);
    const auto batch = random_batch(6, 16, rng);
    CHECK(gradient_error(net, batch) < 1e-4);
  }
}

TEST_CASE("Lstm gradient matches central differences") {
  std::mt19937_64 rng(2);
  for (int point = 0; point < 10; ++point) {
    nn::Lstm net(4);
    net.initialize(rng);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& v : net.parameters()) v += g(rng);
    const auto seqs = random_sequences(4, rng);
    CHECK(gradient_error(net, std::span<const nn::Lstm::SequenceExample>(seqs)) < 1e-4);
  }
}

TEST_CASE("logistic regression gradient matches central differences") {
  std::mt19937_64 rng(3);
  nn::LogisticRegression net(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : net.parameters()) v = g(rng);
  CHECK(gradient_error(net, random_batch(5, 20, rng)) < 1e-4);
}

TEST_CASE("trainable parameter counts") {
  CHECK(nn::Mlp::parameter_count(8) == (8 * 30 + 30) + (30 * 30 + 30) + (30 + 1));
  CHECK(nn::Mlp::parameter_count(8) == 1231);
  CHECK(nn::Lstm::parameter_count(8) == 4 * ((8 + 10) * 10 + 10) + 4 * ((10 + 10) * 10 + 10) + 11);
  CHECK(nn::Lstm::parameter_count(8) == 1611);
  CHECK(Model::untrained(spec_of(ModelKind::Mlp, FeatureSet::F6)).trainable_parameter_count() == 1231);
  CHECK(Model::untrained(spec_of(ModelKind::Recurrent, FeatureSet::F6)).trainable_parameter_count() == 1611);
  CHECK(Model::untrained(spec_of(ModelKind::Linear, FeatureSet::F1)).trainable_parameter_count() == 2);
  CHECK(Model::untrained(spec_of(ModelKind::RandomForest, FeatureSet::F5)).trainable_parameter_count() == 0);
}

TEST_CASE("untrained models predict exactly 0.5") {
  const auto s = fixtures::random_sequences(3, 4);
  for (auto kind : {ModelKind::Linear, ModelKind::RandomForest, ModelKind::Mlp, ModelKind::Recurrent}) {
    const Model m = Model::untrained(spec_of(kind, FeatureSet::F6));
    for (const auto& q : s) {
      for (double p : m.predict_sequence(q)) CHECK(p == 0.5);
    }
  }
}

TEST_CASE("linear model separates blobs") {
  const auto data = blobs(400, 1);
  const Model m = train(Dataset::from_sequences(data), spec_of(ModelKind::Linear, FeatureSet::F3), 1);
  CHECK(accuracy(m, data) >= 0.99);
  FeatureVector fv = extract_features(fixtures::sample("q", 0, 2.0, 0.0), FeatureSet::F3);
  CHECK(m.predict_sample(fv) > 0.5);
}

TEST_CASE("Mlp learns XOR where the linear model cannot") {
  const auto data = xor_data(800, 2);
  auto spec = spec_of(ModelKind::Mlp, FeatureSet::F3, 200);
  spec.train.learning_rate = 0.01;
  spec.train.patience = 20;
  const Model mlp = train(Dataset::from_sequences(data), spec, 2);
  CHECK(accuracy(mlp, data) >= 0.95);
  const Model lin = train(Dataset::from_sequences(data), spec_of(ModelKind::Linear, FeatureSet::F3), 2);
  CHECK(accuracy(lin, data) < 0.7);
}

TEST_CASE("forest with unanimous positive leaves predicts 1") {
  forest::RandomForest rf(2);
  for (int t = 0; t < 3; ++t) {
    forest::Tree tree;
    tree.nodes.push_back({0, 0.0, 1, 2, 0.0});
    tree.nodes.push_back({-1, 0.0, -1, -1, 1.0});
    tree.nodes.push_back({-1, 0.0, -1, -1, 1.0});
    rf.trees().push_back(tree);
  }
  const double x[] = {0.3, -1.0};
  CHECK(rf.predict(x) == 1.0);
}

TEST_CASE("forest prediction equals the mean of naive per-tree traversals") {
  const auto data = fixtures::random_sequences(60, 7);
  const Model m = train(Dataset::from_sequences(data), spec_of(ModelKind::RandomForest, FeatureSet::F5), 7);
  const auto& rf = std::get<forest::RandomForest>(m.params());
  REQUIRE(rf.trees().size() == 20);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    double x[6];
    for (double& v : x) v = g(rng);
    double sum = 0.0;
    for (const auto& tree : rf.trees()) {
      std::int32_t i = 0;
      while (tree.nodes[i].feature >= 0) {
        const auto& n = tree.nodes[i];
        i = x[n.feature] <= n.threshold ? n.left : n.right;
      }
      sum += tree.nodes[i].value;
    }
    CHECK(rf.predict(x) == doctest::Approx(sum / rf.trees().size()).epsilon(1e-14));
  }
}

TEST_CASE("training is deterministic, keeps predictions in range and reduces the loss") {
  const auto data = fixtures::random_sequences(80, 9);
  for (auto kind : {ModelKind::Linear, ModelKind::RandomForest, ModelKind::Mlp, ModelKind::Recurrent}) {
    CAPTURE(to_string(kind));
    const auto spec = spec_of(kind, FeatureSet::F6, 8);
    const Model a = train(Dataset::from_sequences(data), spec, 11);
    const Model b = train(Dataset::from_sequences(data), spec, 11);
    CHECK(save_model_bytes(a) == save_model_bytes(b));
    for (const auto& q : data) {
      for (double p : a.predict_sequence(q)) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
    if (kind != ModelKind::RandomForest) {
      const auto& curve = a.info().loss_curve;
      REQUIRE(curve.size() >= 2);
      CHECK(curve.back() <= curve.front());
    }
  }
}

TEST_CASE("training rejects degenerate datasets") {
  auto data = fixtures::random_sequences(10, 1);
  for (auto& s : data) s.label = 0;
  CHECK_THROWS_AS(train(Dataset::from_sequences(data), spec_of(ModelKind::Mlp, FeatureSet::F5), 1),
                  InvalidInput);
  CHECK_THROWS_AS(train(Dataset{}, spec_of(ModelKind::Mlp, FeatureSet::F5), 1), InvalidInput);
  const std::vector<TrackSample> xs{fixtures::sample("a", 0, 1, 1), fixtures::sample("b", 0, 2, 2)};
  const std::vector<int> ys{0, 1};
  CHECK_THROWS_AS(train_on_samples(xs, ys, spec_of(ModelKind::Recurrent, FeatureSet::F3), 1),
                  InvalidInput);
  CHECK_NOTHROW(train_on_samples(xs, ys, spec_of(ModelKind::Linear, FeatureSet::F3, 2), 1));
}

TEST_CASE("predict_sample rejects a feature-set mismatch; predict_sequence rejects empty input") {
  const Model m = Model::untrained(spec_of(ModelKind::Mlp, FeatureSet::F5));
  CHECK_THROWS_AS(m.predict_sample(extract_features(fixtures::sample("a", 0, 1, 1), FeatureSet::F4)),
                  InvalidInput);
  CHECK_THROWS_AS(m.predict_sequence(Sequence{}), InvalidInput);
}

TEST_CASE("non-recurrent predict_sequence maps predict_sample") {
  const auto data = fixtures::random_sequences(40, 12);
  const Model m = train(Dataset::from_sequences(data), spec_of(ModelKind::Mlp, FeatureSet::F6, 5), 12);
  for (const auto& q : data) {
    const auto p = m.predict_sequence(q);
    for (std::size_t i = 0; i < q.samples.size(); ++i) {
      CHECK(p[i] == m.predict_sample(extract_features(q.samples[i], FeatureSet::F6)));
    }
  }
}

TEST_CASE("recurrent outputs are causal and match the streaming evaluator") {
  const auto data = fixtures::random_sequences(40, 13, 20);
  const Model m = train(Dataset::from_sequences(data), spec_of(ModelKind::Recurrent, FeatureSet::F5, 5), 13);
  const auto& q = data[3];
  const auto full = m.predict_sequence(q);
  for (std::size_t k = 1; k <= q.samples.size(); k += 4) {
    const auto prefix = m.predict_sequence(std::span(q.samples.data(), k));
    for (std::size_t i = 0; i < k; ++i) CHECK(prefix[i] == full[i]);
  }
  auto stream = m.stream();
  for (std::size_t i = 0; i < q.samples.size(); ++i) {
    CHECK(std::abs(stream.push(q.samples[i]) - full[i]) <= 1e-12);
  }
}

TEST_CASE("recurrent output converges on constant input") {
  const auto data = fixtures::random_sequences(40, 14, 20);
  const Model m = train(Dataset::from_sequences(data), spec_of(ModelKind::Recurrent, FeatureSet::F5, 5), 14);
  std::vector<TrackSample> xs(200, fixtures::sample("c", 0, 1.5, 0.5, 2.0, 2.5));
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i].time = 0.1 * i;
  const auto p = m.predict_sequence(xs);
  CHECK(std::abs(p[99] - p[98]) < 1e-3);
  CHECK(std::abs(p[199] - p[198]) <= std::abs(p[1] - p[0]) + 1e-12);
}

TEST_CASE("a recurrent model learns distance ramps from F1") {
  sim::ScenarioConfig cfg;
  cfg.sample_rate = 10;
  cfg.mix = {0.5, 0.0, 0.5, 0.0};
  const auto corpus = sim::generate_corpus(cfg, 200, 31);
  const auto& all = corpus.sequences;
  std::vector<Sequence> tr(all.begin(), all.begin() + 140), te(all.begin() + 140, all.end());
  auto spec = spec_of(ModelKind::Recurrent, FeatureSet::F1, 40);
  spec.train.learning_rate = 0.01;
  const Model m = train(Dataset::from_sequences(tr), spec, 31);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& q : te) {
    if (q.samples.empty()) continue;
    scores.push_back(m.predict_sequence(q).back());
    labels.push_back(*q.label);
  }
  // pairwise oracle
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] == 1 && labels[j] == 0) {
        wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
        pairs += 1;
      }
    }
  }
  REQUIRE(pairs > 0);
  CHECK(wins / pairs > 0.9);
}

TEST_CASE("serialization round-trips every kind") {
  const auto data = fixtures::random_sequences(40, 15);
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (auto kind : {ModelKind::Linear, ModelKind::RandomForest, ModelKind::Mlp, ModelKind::Recurrent}) {
    CAPTURE(to_string(kind));
    const Model m = train(Dataset::from_sequences(data), spec_of(kind, FeatureSet::F6, 3), 15);
    std::stringstream buf;
    save_model(m, buf);
    const Model back = load_model(buf);
    CHECK(back.spec().kind == kind);
    CHECK(back.spec().feature_set == FeatureSet::F6);
    CHECK(back.info().loss_curve == m.info().loss_curve);
    std::vector<TrackSample> xs;
    for (int i = 0; i < 100; ++i) {
      xs.push_back(fixtures::sample("r", 0.1 * i, u(rng), u(rng), wrap_angle(u(rng)), wrap_angle(u(rng)),
                                    u(rng), u(rng)));
    }
    CHECK(m.predict_sequence(xs) == back.predict_sequence(xs));
  }
}

TEST_CASE("corrupted or truncated model files are rejected") {
  const auto data = fixtures::random_sequences(20, 17);
  const Model m = train(Dataset::from_sequences(data), spec_of(ModelKind::Mlp, FeatureSet::F5, 2), 17);
  const auto bytes = save_model_bytes(m);
  auto bad = bytes;
  bad[0] ^= 0xFF;
  CHECK_THROWS_AS(load_model_bytes(bad), DataError);
  bad = bytes;
  bad[4] = 99;  // version
  CHECK_THROWS_AS(load_model_bytes(bad), DataError);
  bad = bytes;
  bad[bytes.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(load_model_bytes(bad), DataError);
  CHECK_THROWS_AS(load_model_bytes(std::span(bytes.data(), bytes.size() - 9)), DataError);
  CHECK_THROWS_AS(load_model_bytes(std::span(bytes.data(), 3)), DataError);
}

TEST_CASE("a frozen model scores a different scenario without retraining") {
  sim::ScenarioConfig a;
  a.sample_rate = 10;
  const auto train_set = sim::generate_corpus(a, 200, 41);
  const Model m = train(Dataset::from_sequences(train_set.sequences),
                        spec_of(ModelKind::Mlp, FeatureSet::F5, 5), 41);
  const auto bytes = save_model_bytes(m);
  const Model frozen = load_model_bytes(bytes);
  sim::ScenarioConfig b = a;
  b.mix = {0.5, 0.5, 0.0, 0.0};
  b.walking_speed_mean = 1.2;
  b.agents_per_scene = 2;
  const auto other = sim::generate_corpus(b, 50, 42);
  for (const auto& q : other.sequences) {
    if (q.samples.empty()) continue;
    for (double p : frozen.predict_sequence(q)) CHECK((p >= 0.0 && p <= 1.0));
  }
}
