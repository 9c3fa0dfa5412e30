#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intent/labeling.hpp"
#include "intent/models.hpp"

namespace intent {

/// Area under the ROC curve via the rank-sum statistic with average ranks for
/// ties: the probability that a random positive outscores a random negative,
/// ties counting one half. Returns nullopt when either class is absent.
/// Throws InvalidInput on length mismatch or labels outside {0, 1}.
std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels);

/// Half-open distance bins [e_{i-1}, e_i) over [0, inf).
struct DistanceBins {
  std::vector<double> edges{0.75, 1.0, 1.25, 2.0, 2.5, 3.0};

  static DistanceBins single() { return DistanceBins{{}}; }
  std::size_t count() const { return edges.size() + 1; }
  std::size_t index(double distance) const;
  std::string label(std::size_t bin) const;
};

struct BinnedAuroc {
  std::vector<std::optional<double>> per_bin;
  std::vector<std::size_t> samples_per_bin;
  std::optional<double> mean;  // unweighted mean over defined bins
  std::size_t skipped = 0;     // bins without both classes
};

BinnedAuroc binned_auroc(std::span<const double> scores, std::span<const int> labels,
                         std::span<const double> distances, const DistanceBins& bins = {});

/// Sequence-grouped k-fold assignment. The result depends only on the set of
/// ids and the seed, never on their input order. Each fold lists indices into
/// `sequence_ids`; sizes differ by at most one.
std::vector<std::vector<std::size_t>> kfold_split(std::span<const std::string> sequence_ids,
                                                  int k, std::uint64_t seed);
std::vector<std::vector<std::size_t>> kfold_split(std::span<const Sequence> sequences, int k,
                                                  std::uint64_t seed);

enum class Verdict { TP, FP, TN, FN };
std::string_view to_string(Verdict v);

struct SequenceOutcome {
  std::string sequence_id;
  Verdict verdict = Verdict::TN;
  std::optional<double> first_crossing_time;
  std::optional<double> advance_time;  // TP only
};

struct DecisionSummary {
  std::vector<SequenceOutcome> outcomes;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> false_positive_rate;
  std::optional<double> mean_advance_time;
};

/// Simulates an irreversible decision per sequence: the first timestep whose
/// probability exceeds `threshold` commits a positive decision.
DecisionSummary sequence_decision_eval(std::span<const std::vector<double>> probabilities,
                                       std::span<const Sequence> sequences, double threshold);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
  std::optional<double> precision;
  std::optional<double> mean_advance_time;
};

std::vector<double> default_threshold_grid(std::size_t points = 101);

std::vector<RocPoint> roc_sweep(std::span<const std::vector<double>> probabilities,
                                std::span<const Sequence> sequences,
                                std::span<const double> thresholds);

/// Trapezoid area under a sequence-level curve, closed with (0,0) and (1,1).
double curve_auc(std::span<const RocPoint> curve);

struct EvalReport {
  std::string model;
  std::string feature_set;
  std::size_t sequences = 0;
  std::size_t samples = 0;
  std::optional<double> pooled_auroc;
  BinnedAuroc binned;
  DistanceBins bins;
  std::vector<RocPoint> roc_curve;
  std::optional<double> sequence_auroc;
  // Labeling convention: advance times are measured against the start of the
  // dwell (when the interaction behaviour begins).
  std::string interaction_time_convention = "dwell_start";
  std::uint64_t seed = 0;
  int folds = 0;
};

/// Scores every sample of every sequence with a fitted model.
std::vector<std::vector<double>> predict_all(const Model& model,
                                             std::span<const Sequence> sequences);

/// Out-of-fold predictions: each fold is scored by a model trained on the
/// other k-1 folds.
std::vector<std::vector<double>> cross_validated_predictions(std::span<const Sequence> sequences,
                                                             const ModelSpec& spec, int k,
                                                             std::uint64_t seed);

/// Pooled and binned AUROC plus the sequence-level ROC sweep.
EvalReport evaluate_predictions(std::span<const std::vector<double>> probabilities,
                                std::span<const Sequence> sequences,
                                const DistanceBins& bins = {},
                                std::span<const double> thresholds = {});

/// Splits time-ordered sequences into `n_days` contiguous groups of (nearly)
/// equal count.
std::vector<std::vector<std::size_t>> split_days(std::span<const Sequence> sequences, int n_days);

struct DayStats {
  int day = 0;
  std::vector<double> values;  // one per run (runs with an undefined metric omitted)
  double median = 0.0, q1 = 0.0, q3 = 0.0, min = 0.0, max = 0.0;
};

struct SslConfig {
  int days = 10;
  int runs = 20;
  DistanceBins bins;
};

/// Day-by-day self-supervised protocol. For each run the day order is
/// shuffled; day 0 is scored by an untrained model, and day d >= 1 by a model
/// trained on the d preceding days. The metric is the mean distance-binned
/// AUROC on the evaluated day. Returns one entry per day 0..days-1.
std::vector<DayStats> ssl_protocol(std::span<const Sequence> sequences, const ModelSpec& spec,
                                   const SslConfig& cfg, std::uint64_t seed);

/// Incremental variant for small deployments: on day d the first d days are
/// pooled and scored by sequence-grouped k-fold cross-validation with
/// k = max(2, d). Day 0 is the untrained model. Returns mean binned AUROC per day.
std::vector<std::optional<double>> incremental_cv_protocol(std::span<const Sequence> sequences,
                                                           const ModelSpec& spec, int days,
                                                           const DistanceBins& bins,
                                                           std::uint64_t seed);

double quantile(std::vector<double> values, double q);

}  // namespace intent
