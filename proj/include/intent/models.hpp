#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "intent/core.hpp"
#include "intent/forest.hpp"
#include "intent/labeling.hpp"
#include "intent/nn.hpp"

namespace intent {

enum class ModelKind { Linear, RandomForest, Mlp, Recurrent };

std::string_view to_string(ModelKind kind);
/// Accepts linear|lc, forest|rf|random-forest, mlp, lstm|recurrent.
ModelKind parse_model_kind(std::string_view text);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_samples = 64;
  int batch_sequences = 16;
  int max_epochs = 50;
  double validation_fraction = 0.1;
  int patience = 5;  // epochs without validation improvement before stopping
  bool class_weighting = true;
};

/// Kind and input encoding of a classifier. The network shapes are fixed:
/// Mlp is 2 x 30 sigmoid units, Recurrent is 2 stacked 10-unit LSTM cells,
/// both with a 1-unit sigmoid read-out.
struct ModelSpec {
  ModelKind kind = ModelKind::Mlp;
  FeatureSet feature_set = FeatureSet::F5;
  TrainConfig train;
  forest::ForestParams forest;
};

/// Per-feature z-score statistics learned on the training split.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Normalizer identity(std::size_t dim);
  static Normalizer fit(std::span<const double> column_major, std::size_t dim);
  void apply(double* x) const;
};

struct TrainingInfo {
  std::uint64_t seed = 0;
  std::uint64_t sequences = 0;
  std::uint64_t samples = 0;
  std::vector<double> loss_curve;  // training loss per epoch
  std::vector<double> validation_curve;
};

class Model {
 public:
  using Params = std::variant<nn::LogisticRegression, forest::RandomForest, nn::Mlp, nn::Lstm>;

  /// Untrained model: identity normalization and all-zero parameters (no
  /// trees for forests), so every prediction is exactly 0.5.
  static Model untrained(const ModelSpec& spec);

  Model(ModelSpec spec, Normalizer norm, Params params, TrainingInfo info = {});

  const ModelSpec& spec() const { return spec_; }
  const Normalizer& normalizer() const { return norm_; }
  const Params& params() const { return params_; }
  Params& params() { return params_; }
  const TrainingInfo& info() const { return info_; }
  bool is_recurrent() const { return spec_.kind == ModelKind::Recurrent; }

  /// Non-recurrent models only; throws InvalidInput on feature-set mismatch.
  double predict_sample(const FeatureVector& fv) const;
  /// One probability per sample. Recurrent models carry their hidden state
  /// left to right from a fresh state; output t depends only on samples 0..t.
  std::vector<double> predict_sequence(const Sequence& seq) const;
  std::vector<double> predict_sequence(std::span<const TrackSample> samples) const;

  /// Exact count of trainable scalars; forests report 0.
  std::size_t trainable_parameter_count() const;

  /// Per-track incremental evaluator. Feeding samples one at a time yields
  /// exactly the outputs of predict_sequence over the same samples.
  class Stream {
   public:
    explicit Stream(const Model& model);
    double push(const TrackSample& sample);
    void reset();

   private:
    const Model* model_;
    nn::Lstm::State state_;
  };

  Stream stream() const { return Stream(*this); }

 private:
  double probability(const double* normalized) const;

  ModelSpec spec_;
  Normalizer norm_;
  Params params_;
  TrainingInfo info_;
};

/// Fits a model. Non-recurrent kinds train on individual samples; Recurrent
/// trains on whole sequences with the label broadcast to every timestep.
/// Deterministic given (dataset, spec, seed). Throws InvalidInput for empty or
/// single-class datasets.
Model train(const Dataset& dataset, const ModelSpec& spec, std::uint64_t seed);

/// Recurrent training from an unstructured sample list is meaningless; this
/// overload always throws for Recurrent specs and otherwise wraps the samples
/// as single-sample sequences.
Model train_on_samples(std::span<const TrackSample> samples, std::span<const int> labels,
                       const ModelSpec& spec, std::uint64_t seed);

inline constexpr std::uint16_t kModelFormatVersion = 1;

void save_model(const Model& model, std::ostream& out);
Model load_model(std::istream& in);
std::vector<std::uint8_t> save_model_bytes(const Model& model);
Model load_model_bytes(std::span<const std::uint8_t> bytes);
void save_model_file(const Model& model, const std::string& path);
Model load_model_file(const std::string& path);

}  // namespace intent
