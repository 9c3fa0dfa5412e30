#include <algorithm>
#include <cctype>
#include <limits>
#include <numeric>
#include <random>

#include "intent/models.hpp"

namespace intent {

namespace {

constexpr std::size_t kMaxDim = 8;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

struct ClassWeights {
  double pos = 1.0;
  double neg = 1.0;
  double of(int label) const { return label == 1 ? pos : neg; }
};

ClassWeights class_weights(std::size_t n_pos, std::size_t n_neg, bool enabled) {
  if (!enabled || n_pos == 0 || n_neg == 0) return {};
  const double n = static_cast<double>(n_pos + n_neg);
  return {n / (2.0 * static_cast<double>(n_pos)), n / (2.0 * static_cast<double>(n_neg))};
}

// Normalized features of one sequence as a (dim x T) matrix.
nn::Matrix encode(const Sequence& seq, FeatureSet set, const Normalizer& norm) {
  const auto dim = static_cast<Eigen::Index>(dimension(set));
  nn::Matrix m(dim, static_cast<Eigen::Index>(seq.samples.size()));
  for (std::size_t t = 0; t < seq.samples.size(); ++t) {
    double* col = m.col(static_cast<Eigen::Index>(t)).data();
    extract_features_into(seq.samples[t], set, col);
    norm.apply(col);
  }
  return m;
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

Split validation_split(const Dataset& ds, double fraction, std::mt19937_64& rng) {
  Split s;
  std::vector<std::size_t> order(ds.sequences.size());
  std::iota(order.begin(), order.end(), 0);
  const auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(order.size())));
  if (fraction <= 0.0 || order.size() < 10 || n_val == 0) {
    s.train = order;
    return s;
  }
  std::shuffle(order.begin(), order.end(), rng);
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  auto has_both = [&](const std::vector<std::size_t>& idx) {
    bool pos = false, neg = false;
    for (auto i : idx) (ds.sequences[i].label == 1 ? pos : neg) = true;
    return pos && neg;
  };
  if (!has_both(s.train)) {
    s.train = order;
    s.validation.clear();
  }
  return s;
}

struct EarlyStopping {
  explicit EarlyStopping(int p) : patience(p) {}
  int patience;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  nn::Vector best_params;

  // Returns true when training should stop.
  bool update(double val_loss, const nn::Vector& params) {
    if (val_loss < best) {
      best = val_loss;
      best_params = params;
      stale = 0;
      return false;
    }
    return ++stale >= patience;
  }
};

template <class Net>
void fit_sample_model(Net& net, const nn::SampleBatch& train, const nn::SampleBatch* val,
                      const TrainConfig& cfg, std::mt19937_64& rng, TrainingInfo& info) {
  const auto n = train.inputs.cols();
  nn::Adam adam(static_cast<std::size_t>(net.parameters().size()), cfg.learning_rate);
  EarlyStopping stop(cfg.patience);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index bs = std::max(1, cfg.batch_samples);
  nn::SampleBatch batch;
  nn::Vector grad;

  info.loss_curve.push_back(net.loss(train, nullptr));
  if (val) stop.update(net.loss(*val, nullptr), net.parameters());
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double running = 0.0, weight = 0.0;
    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index m = std::min(bs, n - start);
      batch.inputs.resize(train.inputs.rows(), m);
      batch.targets.resize(m);
      batch.weights.resize(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto i = order[static_cast<std::size_t>(start + j)];
        batch.inputs.col(j) = train.inputs.col(i);
        batch.targets[j] = train.targets[i];
        batch.weights[j] = train.weights[i];
      }
      running += net.loss(batch, &grad) * batch.weights.sum();
      weight += batch.weights.sum();
      adam.step(net.parameters(), grad);
    }
    info.loss_curve.push_back(weight > 0.0 ? running / weight : 0.0);
    if (val) {
      const double v = net.loss(*val, nullptr);
      info.validation_curve.push_back(v);
      if (stop.update(v, net.parameters())) break;
    }
  }
  if (val && stop.best_params.size() == net.parameters().size()) net.parameters() = stop.best_params;
}

void fit_recurrent(nn::Lstm& net, std::vector<nn::Lstm::SequenceExample> train,
                   const std::vector<nn::Lstm::SequenceExample>& val, const TrainConfig& cfg,
                   std::mt19937_64& rng, TrainingInfo& info) {
  nn::Adam adam(static_cast<std::size_t>(net.parameters().size()), cfg.learning_rate);
  EarlyStopping stop(cfg.patience);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, cfg.batch_sequences));
  nn::Vector grad;

  info.loss_curve.push_back(net.loss(train, nullptr));
  if (!val.empty()) stop.update(net.loss(val, nullptr), net.parameters());
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double running = 0.0, weight = 0.0;
    for (std::size_t start = 0; start < train.size(); start += bs) {
      const std::span<const nn::Lstm::SequenceExample> batch(
          train.data() + start, std::min(bs, train.size() - start));
      double w = 0.0;
      for (const auto& ex : batch) w += ex.weight * static_cast<double>(ex.inputs.cols());
      running += net.loss(batch, &grad) * w;
      weight += w;
      adam.step(net.parameters(), grad);
    }
    info.loss_curve.push_back(weight > 0.0 ? running / weight : 0.0);
    if (!val.empty()) {
      const double v = net.loss(val, nullptr);
      info.validation_curve.push_back(v);
      if (stop.update(v, net.parameters())) break;
    }
  }
  if (!val.empty() && stop.best_params.size() == net.parameters().size()) {
    net.parameters() = stop.best_params;
  }
}

nn::SampleBatch stack_samples(const Dataset& ds, const std::vector<std::size_t>& which,
                              FeatureSet set, const Normalizer& norm, const ClassWeights& cw) {
  std::size_t n = 0;
  for (auto i : which) n += ds.sequences[i].samples.size();
  const auto dim = static_cast<Eigen::Index>(dimension(set));
  nn::SampleBatch b{nn::Matrix(dim, static_cast<Eigen::Index>(n)),
                    nn::Vector(static_cast<Eigen::Index>(n)),
                    nn::Vector(static_cast<Eigen::Index>(n))};
  Eigen::Index col = 0;
  for (auto i : which) {
    const Sequence& seq = ds.sequences[i];
    for (const auto& s : seq.samples) {
      double* x = b.inputs.col(col).data();
      extract_features_into(s, set, x);
      norm.apply(x);
      b.targets[col] = *seq.label;
      b.weights[col] = cw.of(*seq.label);
      ++col;
    }
  }
  return b;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::RandomForest: return "forest";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Recurrent: return "lstm";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "linear" || t == "lc") return ModelKind::Linear;
  if (t == "forest" || t == "rf" || t == "random-forest") return ModelKind::RandomForest;
  if (t == "mlp") return ModelKind::Mlp;
  if (t == "lstm" || t == "recurrent") return ModelKind::Recurrent;
  throw InvalidInput("unknown model kind '" + std::string(text) + "'");
}

Model::Model(ModelSpec spec, Normalizer norm, Params params, TrainingInfo info)
    : spec_(spec), norm_(std::move(norm)), params_(std::move(params)), info_(std::move(info)) {
  if (norm_.mean.size() != dimension(spec_.feature_set) ||
      norm_.scale.size() != norm_.mean.size()) {
    throw InvalidInput("normalizer dimension does not match feature set");
  }
  const bool kind_ok = std::visit(
      Overloaded{[&](const nn::LogisticRegression&) { return spec_.kind == ModelKind::Linear; },
                 [&](const forest::RandomForest&) { return spec_.kind == ModelKind::RandomForest; },
                 [&](const nn::Mlp&) { return spec_.kind == ModelKind::Mlp; },
                 [&](const nn::Lstm&) { return spec_.kind == ModelKind::Recurrent; }},
      params_);
  if (!kind_ok) throw InvalidInput("model parameters do not match model kind");
}

Model Model::untrained(const ModelSpec& spec) {
  const int dim = static_cast<int>(dimension(spec.feature_set));
  Params p = [&]() -> Params {
    switch (spec.kind) {
      case ModelKind::Linear: return nn::LogisticRegression(dim);
      case ModelKind::RandomForest: return forest::RandomForest(dim);
      case ModelKind::Mlp: return nn::Mlp(dim);
      case ModelKind::Recurrent: return nn::Lstm(dim);
    }
    throw InvalidInput("unknown model kind");
  }();
  return Model(spec, Normalizer::identity(static_cast<std::size_t>(dim)), std::move(p));
}

double Model::probability(const double* x) const {
  return std::visit(
      Overloaded{[&](const nn::LogisticRegression& m) { return nn::sigmoid(m.logit(x)); },
                 [&](const forest::RandomForest& m) { return m.predict(x); },
                 [&](const nn::Mlp& m) { return nn::sigmoid(m.logit(x)); },
                 [&](const nn::Lstm&) -> double {
                   throw InvalidInput("recurrent models predict whole sequences");
                 }},
      params_);
}

double Model::predict_sample(const FeatureVector& fv) const {
  if (fv.set != spec_.feature_set) {
    throw InvalidInput("feature set " + std::string(to_string(fv.set)) +
                       " does not match model feature set " +
                       std::string(to_string(spec_.feature_set)));
  }
  if (fv.values.size() != dimension(fv.set)) throw InvalidInput("feature vector has wrong size");
  double x[kMaxDim];
  std::copy(fv.values.begin(), fv.values.end(), x);
  norm_.apply(x);
  return probability(x);
}

std::vector<double> Model::predict_sequence(const Sequence& seq) const {
  return predict_sequence(seq.samples);
}

std::vector<double> Model::predict_sequence(std::span<const TrackSample> samples) const {
  if (samples.empty()) throw InvalidInput("predict_sequence: empty sequence");
  Stream st(*this);
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(st.push(s));
  return out;
}

std::size_t Model::trainable_parameter_count() const {
  return std::visit(
      Overloaded{[](const forest::RandomForest&) -> std::size_t { return 0; },
                 [](const auto& m) -> std::size_t {
                   return static_cast<std::size_t>(m.parameters().size());
                 }},
      params_);
}

Model::Stream::Stream(const Model& model) : model_(&model) { reset(); }

void Model::Stream::reset() {
  if (const auto* lstm = std::get_if<nn::Lstm>(&model_->params_)) state_ = lstm->initial_state();
}

double Model::Stream::push(const TrackSample& sample) {
  double x[kMaxDim];
  extract_features_into(sample, model_->spec_.feature_set, x);
  model_->norm_.apply(x);
  if (const auto* lstm = std::get_if<nn::Lstm>(&model_->params_)) {
    return nn::sigmoid(lstm->step(state_, x));
  }
  return model_->probability(x);
}

Model train(const Dataset& dataset, const ModelSpec& spec, std::uint64_t seed) {
  const auto& seqs = dataset.sequences;
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& s : seqs) {
    if (!s.label) throw InvalidInput("train: sequence '" + s.id + "' is unlabeled");
    for (const auto& sample : s.samples) {
      validate(sample);
      (*s.label == 1 ? n_pos : n_neg) += 1;
    }
  }
  if (n_pos + n_neg == 0) throw InvalidInput("train: empty dataset");
  if (n_pos == 0 || n_neg == 0) {
    throw InvalidInput("train: dataset contains a single class; cannot fit a classifier");
  }

  const FeatureSet set = spec.feature_set;
  const std::size_t dim = dimension(set);
  std::mt19937_64 rng(seed);
  TrainingInfo info;
  info.seed = seed;
  info.sequences = seqs.size();
  info.samples = n_pos + n_neg;

  std::vector<double> raw;
  raw.reserve((n_pos + n_neg) * dim);
  for (const auto& s : seqs) {
    for (const auto& sample : s.samples) {
      double x[kMaxDim];
      extract_features_into(sample, set, x);
      raw.insert(raw.end(), x, x + dim);
    }
  }
  Normalizer norm = Normalizer::fit(raw, dim);
  raw.clear();
  raw.shrink_to_fit();

  const int idim = static_cast<int>(dim);
  if (spec.kind == ModelKind::RandomForest) {
    std::vector<std::size_t> all(seqs.size());
    std::iota(all.begin(), all.end(), 0);
    const ClassWeights cw = class_weights(n_pos, n_neg, spec.train.class_weighting);
    const nn::SampleBatch data = stack_samples(dataset, all, set, norm, cw);
    std::vector<double> y(data.targets.data(), data.targets.data() + data.targets.size());
    std::vector<double> w(data.weights.data(), data.weights.data() + data.weights.size());
    auto rf = forest::RandomForest::fit(data.inputs, y, w, spec.forest, rng());
    return Model(spec, std::move(norm), std::move(rf), std::move(info));
  }

  const Split split = validation_split(dataset, spec.train.validation_fraction, rng);
  std::size_t tp = 0, tn = 0;
  for (auto i : split.train) {
    (seqs[i].label == 1 ? tp : tn) += seqs[i].samples.size();
  }
  const ClassWeights cw = class_weights(tp, tn, spec.train.class_weighting);

  if (spec.kind == ModelKind::Recurrent) {
    auto examples = [&](const std::vector<std::size_t>& which) {
      std::vector<nn::Lstm::SequenceExample> ex;
      ex.reserve(which.size());
      for (auto i : which) {
        if (seqs[i].samples.empty()) continue;
        ex.push_back({encode(seqs[i], set, norm), static_cast<double>(*seqs[i].label),
                      cw.of(*seqs[i].label)});
      }
      return ex;
    };
    nn::Lstm net(idim);
    net.initialize(rng);
    fit_recurrent(net, examples(split.train), examples(split.validation), spec.train, rng, info);
    return Model(spec, std::move(norm), std::move(net), std::move(info));
  }

  const nn::SampleBatch train_data = stack_samples(dataset, split.train, set, norm, cw);
  nn::SampleBatch val_data;
  const bool has_val = !split.validation.empty();
  if (has_val) val_data = stack_samples(dataset, split.validation, set, norm, cw);

  if (spec.kind == ModelKind::Linear) {
    nn::LogisticRegression net(idim);
    fit_sample_model(net, train_data, has_val ? &val_data : nullptr, spec.train, rng, info);
    return Model(spec, std::move(norm), std::move(net), std::move(info));
  }
  nn::Mlp net(idim);
  net.initialize(rng);
  fit_sample_model(net, train_data, has_val ? &val_data : nullptr, spec.train, rng, info);
  return Model(spec, std::move(norm), std::move(net), std::move(info));
}

Model train_on_samples(std::span<const TrackSample> samples, std::span<const int> labels,
                       const ModelSpec& spec, std::uint64_t seed) {
  if (spec.kind == ModelKind::Recurrent) {
    throw InvalidInput("recurrent models need sequence structure; got unstructured samples");
  }
  if (samples.size() != labels.size()) throw InvalidInput("samples and labels differ in length");
  std::vector<Sequence> seqs;
  seqs.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Sequence s;
    s.id = "sample#" + std::to_string(i);
    s.track_id = samples[i].track_id;
    s.samples = {samples[i]};
    s.label = labels[i];
    seqs.push_back(std::move(s));
  }
  return train(Dataset::from_sequences(std::move(seqs)), spec, seed);
}

}  // namespace intent
