#include "intent/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace intent {

std::optional<double> auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidInput("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidInput("auroc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw InvalidInput("auroc: NaN score");
    n_pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Sum of 1-based average ranks of the positives. Every average rank is a
  // multiple of 1/2, so the sum is exact in double precision.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      pos_in_group += static_cast<std::size_t>(labels[order[j]]);
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += avg_rank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

std::size_t DistanceBins::index(double distance) const {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), distance) -
                                  edges.begin());
}

std::string DistanceBins::label(std::size_t bin) const {
  std::ostringstream os;
  const double lo = bin == 0 ? 0.0 : edges[bin - 1];
  os << "[" << lo << ",";
  if (bin < edges.size()) {
    os << edges[bin] << ")";
  } else {
    os << "inf)";
  }
  return os.str();
}

BinnedAuroc binned_auroc(std::span<const double> scores, std::span<const int> labels,
                         std::span<const double> distances, const DistanceBins& bins) {
  if (scores.size() != labels.size() || scores.size() != distances.size()) {
    throw InvalidInput("binned_auroc: inputs differ in length");
  }
  const std::size_t nb = bins.count();
  std::vector<std::vector<double>> s(nb);
  std::vector<std::vector<int>> l(nb);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const std::size_t b = bins.index(distances[i]);
    s[b].push_back(scores[i]);
    l[b].push_back(labels[i]);
  }
  BinnedAuroc out;
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    out.samples_per_bin.push_back(s[b].size());
    out.per_bin.push_back(auroc(s[b], l[b]));
    if (out.per_bin.back()) {
      sum += *out.per_bin.back();
      ++defined;
    } else {
      ++out.skipped;
    }
  }
  if (defined > 0) out.mean = sum / static_cast<double>(defined);
  return out;
}

std::vector<std::vector<std::size_t>> kfold_split(std::span<const std::string> ids, int k,
                                                  std::uint64_t seed) {
  if (k < 2) throw InvalidInput("kfold_split: k must be at least 2");
  if (static_cast<std::size_t>(k) > ids.size()) {
    throw InvalidInput("kfold_split: k = " + std::to_string(k) + " exceeds the " +
                       std::to_string(ids.size()) + " available sequences");
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (ids[order[i]] == ids[order[i - 1]]) {
      throw InvalidInput("kfold_split: duplicate sequence id '" + ids[order[i]] + "'");
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (std::size_t p = 0; p < order.size(); ++p) folds[p % folds.size()].push_back(order[p]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<std::vector<std::size_t>> kfold_split(std::span<const Sequence> sequences, int k,
                                                  std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(sequences.size());
  for (const auto& s : sequences) ids.push_back(s.id);
  return kfold_split(ids, k, seed);
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::TP: return "TP";
    case Verdict::FP: return "FP";
    case Verdict::TN: return "TN";
    case Verdict::FN: return "FN";
  }
  return "?";
}

DecisionSummary sequence_decision_eval(std::span<const std::vector<double>> probabilities,
                                       std::span<const Sequence> sequences, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw InvalidInput("sequence_decision_eval: threshold must lie in [0, 1]");
  }
  if (probabilities.size() != sequences.size()) {
    throw InvalidInput("sequence_decision_eval: one probability list per sequence required");
  }
  DecisionSummary out;
  double advance_sum = 0.0;
  for (std::size_t j = 0; j < sequences.size(); ++j) {
    const Sequence& seq = sequences[j];
    const auto& p = probabilities[j];
    if (p.size() != seq.samples.size()) {
      throw InvalidInput("sequence '" + seq.id + "': probabilities not aligned with samples");
    }
    if (!seq.label) throw InvalidInput("sequence '" + seq.id + "' is unlabeled");
    SequenceOutcome o;
    o.sequence_id = seq.id;
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p[t] > threshold) {
        o.first_crossing_time = seq.samples[t].time;
        break;
      }
    }
    const bool positive = *seq.label == 1;
    if (o.first_crossing_time) {
      o.verdict = positive ? Verdict::TP : Verdict::FP;
    } else {
      o.verdict = positive ? Verdict::FN : Verdict::TN;
    }
    switch (o.verdict) {
      case Verdict::TP: {
        ++out.tp;
        const double ti = seq.interaction_time.value_or(seq.end_time);
        o.advance_time = ti - *o.first_crossing_time;
        advance_sum += *o.advance_time;
        break;
      }
      case Verdict::FP: ++out.fp; break;
      case Verdict::TN: ++out.tn; break;
      case Verdict::FN: ++out.fn; break;
    }
    out.outcomes.push_back(std::move(o));
  }
  auto ratio = [](std::size_t a, std::size_t b) -> std::optional<double> {
    if (b == 0) return std::nullopt;
    return static_cast<double>(a) / static_cast<double>(b);
  };
  out.precision = ratio(out.tp, out.tp + out.fp);
  out.recall = ratio(out.tp, out.tp + out.fn);
  out.false_positive_rate = ratio(out.fp, out.fp + out.tn);
  if (out.tp > 0) out.mean_advance_time = advance_sum / static_cast<double>(out.tp);
  return out;
}

std::vector<double> default_threshold_grid(std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = points == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

std::vector<RocPoint> roc_sweep(std::span<const std::vector<double>> probabilities,
                                std::span<const Sequence> sequences,
                                std::span<const double> thresholds) {
  std::vector<RocPoint> curve;
  curve.reserve(thresholds.size());
  for (double thr : thresholds) {
    const DecisionSummary d = sequence_decision_eval(probabilities, sequences, thr);
    curve.push_back({thr, d.false_positive_rate.value_or(0.0), d.recall.value_or(0.0), d.precision,
                     d.mean_advance_time});
  }
  return curve;
}

double curve_auc(std::span<const RocPoint> curve) {
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {1.0, 1.0}};
  for (const auto& p : curve) pts.emplace_back(p.fpr, p.tpr);
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
  }
  return area;
}

std::vector<std::vector<double>> predict_all(const Model& model,
                                             std::span<const Sequence> sequences) {
  std::vector<std::vector<double>> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) {
    out.push_back(s.samples.empty() ? std::vector<double>{} : model.predict_sequence(s));
  }
  return out;
}

std::vector<std::vector<double>> cross_validated_predictions(std::span<const Sequence> sequences,
                                                             const ModelSpec& spec, int k,
                                                             std::uint64_t seed) {
  const auto folds = kfold_split(sequences, k, seed);
  std::vector<std::vector<double>> out(sequences.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<char> in_test(sequences.size(), 0);
    for (auto i : folds[f]) in_test[i] = 1;
    std::vector<Sequence> train_set;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      if (!in_test[i]) train_set.push_back(sequences[i]);
    }
    const Model model =
        train(Dataset::from_sequences(std::move(train_set)), spec, seed * 1000003ull + f + 1);
    for (auto i : folds[f]) {
      if (!sequences[i].samples.empty()) out[i] = model.predict_sequence(sequences[i]);
    }
  }
  return out;
}

EvalReport evaluate_predictions(std::span<const std::vector<double>> probabilities,
                                std::span<const Sequence> sequences, const DistanceBins& bins,
                                std::span<const double> thresholds) {
  if (probabilities.size() != sequences.size()) {
    throw InvalidInput("evaluate_predictions: one probability list per sequence required");
  }
  std::vector<double> scores, dist;
  std::vector<int> labels;
  for (std::size_t j = 0; j < sequences.size(); ++j) {
    const auto& seq = sequences[j];
    if (probabilities[j].size() != seq.samples.size()) {
      throw InvalidInput("sequence '" + seq.id + "': probabilities not aligned with samples");
    }
    for (std::size_t t = 0; t < seq.samples.size(); ++t) {
      scores.push_back(probabilities[j][t]);
      labels.push_back(seq.label.value_or(0));
      dist.push_back(seq.samples[t].distance());
    }
  }
  EvalReport r;
  r.sequences = sequences.size();
  r.samples = scores.size();
  r.bins = bins;
  r.pooled_auroc = auroc(scores, labels);
  r.binned = binned_auroc(scores, labels, dist, bins);
  const std::vector<double> grid =
      thresholds.empty() ? default_threshold_grid() : std::vector<double>(thresholds.begin(), thresholds.end());
  r.roc_curve = roc_sweep(probabilities, sequences, grid);
  r.sequence_auroc = curve_auc(r.roc_curve);
  return r;
}

std::vector<std::vector<std::size_t>> split_days(std::span<const Sequence> sequences, int n_days) {
  if (n_days < 1) throw InvalidInput("split_days: need at least one day");
  if (static_cast<std::size_t>(n_days) > sequences.size()) {
    throw InvalidInput("split_days: " + std::to_string(n_days) + " days exceed the " +
                       std::to_string(sequences.size()) + " available sequences");
  }
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    const double ta = sequences[a].start_time(), tb = sequences[b].start_time();
    if (ta != tb) return ta < tb;
    return sequences[a].id < sequences[b].id;
  });
  const std::size_t n = order.size(), d = static_cast<std::size_t>(n_days);
  std::vector<std::vector<std::size_t>> days(d);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t size = n / d + (i < n % d ? 1 : 0);
    days[i].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                   order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return days;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace {

std::optional<double> mean_binned(const Model& model, std::span<const Sequence> seqs,
                                  const DistanceBins& bins) {
  std::vector<double> scores, dist;
  std::vector<int> labels;
  for (const auto& s : seqs) {
    if (s.samples.empty()) continue;
    const auto p = model.predict_sequence(s);
    for (std::size_t t = 0; t < p.size(); ++t) {
      scores.push_back(p[t]);
      labels.push_back(s.label.value_or(0));
      dist.push_back(s.samples[t].distance());
    }
  }
  return binned_auroc(scores, labels, dist, bins).mean;
}

std::vector<Sequence> gather(std::span<const Sequence> seqs,
                             const std::vector<std::vector<std::size_t>>& days,
                             std::span<const std::size_t> which) {
  std::vector<Sequence> out;
  for (auto d : which) {
    for (auto i : days[d]) out.push_back(seqs[i]);
  }
  return out;
}

Model train_or_untrained(std::vector<Sequence> seqs, const ModelSpec& spec, std::uint64_t seed) {
  Dataset ds = Dataset::from_sequences(std::move(seqs));
  if (ds.positive_sequences() == 0 || ds.negative_sequences() == 0) return Model::untrained(spec);
  return train(ds, spec, seed);
}

}  // namespace

std::vector<DayStats> ssl_protocol(std::span<const Sequence> sequences, const ModelSpec& spec,
                                   const SslConfig& cfg, std::uint64_t seed) {
  if (cfg.runs < 1) throw InvalidInput("ssl_protocol: need at least one run");
  const auto days = split_days(sequences, cfg.days);
  const auto n_days = static_cast<std::size_t>(cfg.days);
  std::vector<DayStats> stats(n_days);
  for (std::size_t d = 0; d < n_days; ++d) stats[d].day = static_cast<int>(d);

  const Model untrained = Model::untrained(spec);
  for (int run = 0; run < cfg.runs; ++run) {
    std::vector<std::size_t> perm(n_days);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed + 7919ull * static_cast<std::uint64_t>(run));
    std::shuffle(perm.begin(), perm.end(), rng);

    for (std::size_t d = 0; d < n_days; ++d) {
      const auto test = gather(sequences, days, std::span(perm).subspan(d, 1));
      std::optional<double> v;
      if (d == 0) {
        v = mean_binned(untrained, test, cfg.bins);
      } else {
        const Model m = train_or_untrained(gather(sequences, days, std::span(perm).first(d)), spec,
                                           rng());
        v = mean_binned(m, test, cfg.bins);
      }
      if (v) stats[d].values.push_back(*v);
    }
  }
  for (auto& s : stats) {
    if (s.values.empty()) continue;
    s.median = quantile(s.values, 0.5);
    s.q1 = quantile(s.values, 0.25);
    s.q3 = quantile(s.values, 0.75);
    s.min = *std::min_element(s.values.begin(), s.values.end());
    s.max = *std::max_element(s.values.begin(), s.values.end());
  }
  return stats;
}

std::vector<std::optional<double>> incremental_cv_protocol(std::span<const Sequence> sequences,
                                                           const ModelSpec& spec, int days,
                                                           const DistanceBins& bins,
                                                           std::uint64_t seed) {
  const auto groups = split_days(sequences, days);
  std::vector<std::optional<double>> out;
  out.push_back(mean_binned(Model::untrained(spec), gather(sequences, groups, std::vector<std::size_t>{0}), bins));
  for (int d = 1; d <= days; ++d) {
    std::vector<std::size_t> which(static_cast<std::size_t>(d));
    std::iota(which.begin(), which.end(), 0);
    std::vector<Sequence> pool;
    for (auto& s : gather(sequences, groups, which)) {
      if (!s.samples.empty()) pool.push_back(std::move(s));
    }
    const int k = std::max(2, d);
    const auto probs = cross_validated_predictions(pool, spec, k, seed + static_cast<std::uint64_t>(d));
    std::vector<double> scores, dist;
    std::vector<int> labels;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      for (std::size_t t = 0; t < probs[j].size(); ++t) {
        scores.push_back(probs[j][t]);
        labels.push_back(pool[j].label.value_or(0));
        dist.push_back(pool[j].samples[t].distance());
      }
    }
    out.push_back(binned_auroc(scores, labels, dist, bins).mean);
  }
  return out;
}

}  // namespace intent
