#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "intent/eval.hpp"
#include "intent/io.hpp"
#include "intent/labeling.hpp"
#include "intent/models.hpp"
#include "intent/runtime.hpp"
#include "intent/sim.hpp"

using namespace intent;
using json = nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kBudget = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Global {
  std::uint64_t seed = 1;
};

// Output sink that is either stdout ("-" or empty) or a file.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw DataError("cannot open '" + path + "' for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

io::TrackFile read_tracks_arg(const std::string& path, const io::ParseOptions& opts) {
  if (path.empty() || path == "-") return io::read_tracks(std::cin, opts);
  return io::read_tracks_file(path, opts);
}

void report_malformed(const io::TrackFile& f) {
  if (f.malformed == 0) return;
  std::cerr << "warning: skipped " << f.malformed << " malformed line(s)\n";
  for (const auto& d : f.diagnostics) std::cerr << "  " << d << "\n";
}

struct TrainFlags {
  std::string kind = "mlp";
  std::string features = "F5";
  TrainConfig train;
  forest::ForestParams forest;
  bool no_class_weights = false;

  void add(CLI::App* app) {
    app->add_option("--model", kind, "linear | forest | mlp | lstm")->capture_default_str();
    app->add_option("--features", features, "F1..F6")->capture_default_str();
    app->add_option("--epochs", train.max_epochs, "maximum training epochs")->capture_default_str();
    app->add_option("--lr", train.learning_rate, "Adam learning rate")->capture_default_str();
    app->add_option("--batch", train.batch_samples, "minibatch size in samples (non-recurrent)")
        ->capture_default_str();
    app->add_option("--batch-sequences", train.batch_sequences, "minibatch size in sequences (lstm)")
        ->capture_default_str();
    app->add_option("--patience", train.patience, "early-stopping patience in epochs")
        ->capture_default_str();
    app->add_option("--validation", train.validation_fraction,
                    "fraction of sequences held out for early stopping")
        ->capture_default_str();
    app->add_flag("--no-class-weights", no_class_weights, "disable inverse-frequency class weights");
    app->add_option("--trees", forest.trees, "forest size")->capture_default_str();
    app->add_option("--max-depth", forest.max_depth, "forest tree depth limit")->capture_default_str();
    app->add_option("--min-leaf", forest.min_samples_leaf, "forest minimum samples per leaf")
        ->capture_default_str();
    app->add_option("--mtry", forest.features_per_split, "features tried per split (0 = sqrt)")
        ->capture_default_str();
  }

  ModelSpec spec() const {
    ModelSpec s;
    try {
      s.kind = parse_model_kind(kind);
      s.feature_set = parse_feature_set(features);
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
    s.train = train;
    s.train.class_weighting = !no_class_weights;
    s.forest = forest;
    return s;
  }
};

struct LabelFlags {
  DwellLabelConfig cfg;

  void add(CLI::App* app) {
    app->add_option("--social-radius", cfg.social_radius, "m")->capture_default_str();
    app->add_option("--dwell-radius", cfg.dwell_radius, "m")->capture_default_str();
    app->add_option("--dwell-duration", cfg.dwell_duration, "s")->capture_default_str();
    app->add_option("--window", cfg.positive_window, "positive window before the dwell, s")
        ->capture_default_str();
    app->add_option("--track-timeout", cfg.track_timeout, "s")->capture_default_str();
  }
};

// ---------------------------------------------------------------------------
// simulate

struct SimulateCmd {
  std::string config;
  std::size_t sequences = 3422;
  std::string out;
  std::string tracks;
  std::string truth;
  std::string labeling = "dwell";
  std::optional<std::size_t> stratify;
  std::optional<double> sample_rate;
  std::optional<int> agents;
  bool print_config = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("simulate", "generate a synthetic labeled corpus");
    c->add_option("--config", config, "scenario config (JSON)");
    c->add_option("-n,--sequences", sequences, "number of labeled sequences")->capture_default_str();
    c->add_option("-o,--out", out, "labeled sequences JSONL (default stdout)");
    c->add_option("--tracks", tracks, "also write the raw track stream JSONL");
    c->add_option("--truth", truth, "also write per-agent ground truth JSONL");
    c->add_option("--labeling", labeling, "dwell | truth")->capture_default_str();
    c->add_option("--stratify", stratify, "exact number of positive sequences");
    c->add_option("--sample-rate", sample_rate, "override the config sample rate, Hz");
    c->add_option("--agents", agents, "override agents per scene");
    c->add_flag("--print-config", print_config, "print the effective config and exit");
    cmd = c;
  }

  int run(const Global& g) {
    sim::ScenarioConfig cfg = config.empty() ? sim::ScenarioConfig{} : io::read_scenario_config(config);
    if (sample_rate) cfg.sample_rate = *sample_rate;
    if (agents) cfg.agents_per_scene = *agents;
    try {
      cfg.validate();
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
    if (print_config) {
      std::cout << io::scenario_config_json(cfg) << "\n";
      return kOk;
    }
    sim::CorpusOptions opts;
    if (labeling == "dwell") {
      opts.labeling = sim::CorpusLabeling::Dwell;
    } else if (labeling == "truth") {
      opts.labeling = sim::CorpusLabeling::GroundTruth;
    } else {
      throw UsageError("--labeling must be dwell or truth");
    }
    opts.stratify_positives = stratify;
    opts.keep_stream = !tracks.empty();
    const auto start = std::chrono::steady_clock::now();
    const sim::Corpus corpus = sim::generate_corpus(cfg, sequences, g.seed, opts);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    {
      Output o(out);
      io::write_sequences(o.stream(), corpus.sequences);
    }
    if (!tracks.empty()) {
      std::vector<InteractionEvent> events;
      for (const auto& a : corpus.truth.agents) {
        if (a.intent && a.interaction_time) events.push_back({a.track_id, *a.interaction_time});
      }
      Output o(tracks);
      io::write_tracks(o.stream(), corpus.stream, events);
    }
    if (!truth.empty()) {
      Output o(truth);
      for (const auto& a : corpus.truth.agents) {
        json j{{"id", a.track_id},
               {"behavior", sim::to_string(a.behavior)},
               {"intent", a.intent},
               {"start", a.start_time},
               {"end", a.end_time}};
        j["interaction_time"] = a.interaction_time ? json(*a.interaction_time) : json(nullptr);
        o.stream() << j.dump() << "\n";
      }
    }
    std::cerr << "simulated " << corpus.sequences.size() << " sequences (" << corpus.positives
              << " positive) from " << corpus.scenes << " scenes in " << secs << " s\n";
    return kOk;
  }

  CLI::App* cmd = nullptr;
};

// ---------------------------------------------------------------------------
// label

struct LabelCmd {
  std::string tracks;
  std::string out;
  std::string mode = "dwell";
  bool degrees = false;
  LabelFlags flags;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("label", "segment a track stream and label its sequences");
    c->add_option("tracks", tracks, "track JSONL ('-' for stdin)")->required();
    c->add_option("-o,--out", out, "labeled sequences JSONL (default stdout)");
    c->add_option("--mode", mode, "dwell | events (use evt markers)")->capture_default_str();
    c->add_flag("--degrees", degrees, "yaw fields are in degrees");
    flags.add(c);
    cmd = c;
  }

  int run(const Global&) {
    try {
      flags.cfg.validate();
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
    const io::TrackFile file = read_tracks_arg(tracks, {degrees});
    report_malformed(file);
    const auto samples = io::to_samples(file.records, flags.cfg.track_timeout);
    std::vector<Sequence> seqs;
    if (mode == "dwell") {
      seqs = label_stream(samples, flags.cfg);
    } else if (mode == "events") {
      seqs = label_stream_external(samples, io::interaction_events(file.records), flags.cfg);
    } else {
      throw UsageError("--mode must be dwell or events");
    }
    std::size_t pos = 0, kept = 0;
    std::vector<Sequence> labeled;
    for (auto& s : seqs) {
      if (!s.label || s.samples.empty()) continue;
      pos += *s.label == 1 ? 1 : 0;
      ++kept;
      labeled.push_back(std::move(s));
    }
    Output o(out);
    io::write_sequences(o.stream(), labeled);
    std::cerr << "labeled " << kept << " sequences (" << pos << " positive) from "
              << file.records.size() << " records\n";
    return kOk;
  }

  CLI::App* cmd = nullptr;
};

// ---------------------------------------------------------------------------
// train

struct TrainCmd {
  std::string sequences;
  std::string out = "model.isns";
  TrainFlags flags;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("train", "fit a classifier on labeled sequences");
    c->add_option("sequences", sequences, "labeled sequences JSONL")->required();
    c->add_option("-o,--out", out, "model file")->capture_default_str();
    flags.add(c);
    cmd = c;
  }

  int run(const Global& g) {
    const ModelSpec spec = flags.spec();
    auto seqs = io::read_sequences_file(sequences);
    const auto start = std::chrono::steady_clock::now();
    const Model m = train(Dataset::from_sequences(std::move(seqs)), spec, g.seed);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_model_file(m, out);
    std::cerr << "trained " << to_string(spec.kind) << "/" << to_string(spec.feature_set) << " on "
              << m.info().samples << " samples in " << secs << " s ("
              << m.info().validation_curve.size() << " epochs), wrote " << out << "\n";
    return kOk;
  }

  CLI::App* cmd = nullptr;
};

// ---------------------------------------------------------------------------
// eval

struct EvalCmd {
  std::string sequences;
  std::string model;
  int folds = 5;
  std::string report;
  std::string roc_csv;
  std::size_t thresholds = 101;
  TrainFlags flags;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand(
        "eval", "pooled, distance-binned and sequence-level metrics (frozen model or k-fold CV)");
    c->add_option("sequences", sequences, "labeled sequences JSONL")->required();
    c->add_option("--model-file", model, "evaluate this frozen model instead of cross-validating");
    c->add_option("-k,--folds", folds, "cross-validation folds")->capture_default_str();
    c->add_option("--report", report, "EvalReport JSON (default stdout)");
    c->add_option("--roc-csv", roc_csv, "write the sequence-level ROC sweep as CSV");
    c->add_option("--thresholds", thresholds, "threshold grid points in [0,1]")->capture_default_str();
    flags.add(c);
    cmd = c;
  }

  int run(const Global& g) {
    if (thresholds < 2) throw UsageError("--thresholds must be >= 2");
    const auto seqs = io::read_sequences_file(sequences);
    std::vector<std::vector<double>> probs;
    std::string kind, fs;
    if (!model.empty()) {
      const Model m = load_model_file(model);
      probs = predict_all(m, seqs);
      kind = std::string(to_string(m.spec().kind));
      fs = std::string(to_string(m.spec().feature_set));
    } else {
      const ModelSpec spec = flags.spec();
      if (folds < 2) throw UsageError("--folds must be >= 2");
      probs = cross_validated_predictions(seqs, spec, folds, g.seed);
      kind = std::string(to_string(spec.kind));
      fs = std::string(to_string(spec.feature_set));
    }
    const auto grid = default_threshold_grid(thresholds);
    EvalReport r = evaluate_predictions(probs, seqs, {}, grid);
    r.model = kind;
    r.feature_set = fs;
    r.seed = g.seed;
    r.folds = model.empty() ? folds : 0;
    {
      Output o(report);
      o.stream() << io::report_json(r) << "\n";
    }
    if (!roc_csv.empty()) {
      Output o(roc_csv);
      io::write_roc_csv(o.stream(), r.roc_curve);
    }
    auto fmt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("n/a"); };
    std::cerr << kind << "/" << fs << ": pooled " << fmt(r.pooled_auroc) << ", binned "
              << fmt(r.binned.mean) << ", sequence " << fmt(r.sequence_auroc) << "\n";
    return kOk;
  }

  CLI::App* cmd = nullptr;
};

// ---------------------------------------------------------------------------
// ssl

struct SslCmd {
  std::string sequences;
  int days = 10;
  int runs = 20;
  bool incremental = false;
  std::string csv;
  TrainFlags flags;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("ssl", "day-by-day self-supervised learning protocol");
    c->add_option("sequences", sequences, "time-ordered labeled sequences JSONL")->required();
    c->add_option("--days", days, "number of days")->capture_default_str();
    c->add_option("--runs", runs, "shuffled runs")->capture_default_str();
    c->add_flag("--incremental", incremental,
                "k-fold variant on the days seen so far (k = number of days)");
    c->add_option("--csv", csv, "per-day statistics CSV (default stdout)");
    flags.add(c);
    flags.kind = "lstm";
    cmd = c;
  }

  int run(const Global& g) {
    const ModelSpec spec = flags.spec();
    if (days < 2 || runs < 1) throw UsageError("need --days >= 2 and --runs >= 1");
    const auto seqs = io::read_sequences_file(sequences);
    Output o(csv);
    if (incremental) {
      const auto curve = incremental_cv_protocol(seqs, spec, days, {}, g.seed);
      o.stream() << "day,auroc\n";
      for (std::size_t d = 0; d < curve.size(); ++d) {
        o.stream() << d << "," << (curve[d] ? std::to_string(*curve[d]) : "") << "\n";
      }
      return kOk;
    }
    SslConfig sc;
    sc.days = days;
    sc.runs = runs;
    const auto stats = ssl_protocol(seqs, spec, sc, g.seed);
    io::write_ssl_csv(o.stream(), stats);
    return kOk;
  }

  CLI::App* cmd = nullptr;
};

// ---------------------------------------------------------------------------
// stream

struct StreamCmd {
  std::string model;
  std::string input = "-";
  std::string events_out;
  std::string predictions;
  bool degrees = false;
  bool strict = false;
  runtime::RuntimeConfig cfg;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("stream", "online multi-track inference with engagement events");
    c->add_option("model", model, "model file")->required();
    c->add_option("-i,--input", input, "track JSONL ('-' for stdin)")->capture_default_str();
    c->add_option("-o,--events", events_out, "decision events JSONL (default stdout)");
    c->add_option("--predictions", predictions, "per-sample probabilities JSONL");
    c->add_flag("--degrees", degrees, "yaw fields are in degrees");
    c->add_flag("--strict", strict, "exit 3 when p99 step latency exceeds the frame budget");
    c->add_option("--engage", cfg.engage_threshold, "engage threshold")->capture_default_str();
    c->add_option("--disengage", cfg.disengage_threshold, "disengage threshold")->capture_default_str();
    c->add_option("--social-radius", cfg.social_radius, "m")->capture_default_str();
    c->add_option("--track-timeout", cfg.track_timeout, "s")->capture_default_str();
    c->add_option("--reorder-tolerance", cfg.reorder_tolerance, "s")->capture_default_str();
    c->add_option("--frame-budget", cfg.frame_budget, "s")->capture_default_str();
    cmd = c;
  }

  int run(const Global&) {
    try {
      cfg.validate();
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
    const Model m = load_model_file(model);
    runtime::StreamEngine engine(m, cfg);

    std::ifstream file;
    std::istream* in = &std::cin;
    if (input != "-") {
      file.open(input);
      if (!file) throw DataError("cannot open '" + input + "'");
      in = &file;
    }
    Output ev(events_out);
    std::unique_ptr<Output> pred;
    if (!predictions.empty()) pred = std::make_unique<Output>(predictions);

    std::vector<double> step_ms;
    std::size_t records = 0, malformed = 0, events = 0;
    auto emit = [&](const runtime::StepResult& r) {
      for (const auto& e : r.events) {
        json j{{"t", e.time},
               {"id", e.track_id},
               {"p", e.probability},
               {"event", runtime::to_string(e.transition)}};
        j["target"] = e.selected_target ? json(*e.selected_target) : json(nullptr);
        ev.stream() << j.dump() << "\n";
        ++events;
      }
      if (pred) {
        for (const auto& p : r.predictions) {
          json j{{"t", p.time}, {"id", p.track_id}, {"seq", p.sequence_id}, {"p", p.probability},
                 {"d", p.distance}};
          pred->stream() << j.dump() << "\n";
        }
      }
    };
    auto timed_step = [&](double now) {
      const auto t0 = std::chrono::steady_clock::now();
      runtime::StepResult r = engine.step(now);
      step_ms.push_back(
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      emit(r);
    };

    std::string line;
    std::size_t lineno = 0;
    double last_t = -std::numeric_limits<double>::infinity();
    while (std::getline(*in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      io::TrackRecord rec;
      try {
        rec = io::parse_track_record(line, {degrees});
      } catch (const DataError& e) {
        if (++malformed <= 20) std::cerr << "warning: line " << lineno << ": " << e.what() << "\n";
        continue;
      }
      ++records;
      if (rec.sample.time > last_t && std::isfinite(last_t)) {
        timed_step(engine.clock() - cfg.reorder_tolerance);
      }
      last_t = std::max(last_t, rec.sample.time);
      engine.ingest(rec);
    }
    emit(engine.finish());

    const auto lat = runtime::summarize_latencies(step_ms, 1000.0 * cfg.frame_budget);
    std::cerr << "stream: " << records << " records, " << malformed << " malformed, "
              << engine.dropped_records() << " dropped, " << events << " events; step p50 "
              << lat.p50_ms << " ms, p99 " << lat.p99_ms << " ms, max " << lat.max_ms << " ms\n";
    if (lat.over_budget > 0) {
      std::cerr << "warning: " << lat.over_budget << " step(s) exceeded the "
                << 1000.0 * cfg.frame_budget << " ms frame budget\n";
    }
    if (strict && lat.p99_ms > 1000.0 * cfg.frame_budget) return kBudget;
    return kOk;
  }

  CLI::App* cmd = nullptr;
};

// ---------------------------------------------------------------------------
// inspect-model

struct InspectCmd {
  std::string model;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("inspect-model", "print a model file's header and training info");
    c->add_option("model", model, "model file")->required();
    cmd = c;
  }

  int run(const Global&) {
    const Model m = load_model_file(model);
    const auto& info = m.info();
    json j{{"format_version", kModelFormatVersion},
           {"kind", to_string(m.spec().kind)},
           {"feature_set", to_string(m.spec().feature_set)},
           {"input_dim", dimension(m.spec().feature_set)},
           {"trainable_parameters", m.trainable_parameter_count()},
           {"normalizer", {{"mean", m.normalizer().mean}, {"scale", m.normalizer().scale}}},
           {"training",
            {{"seed", info.seed},
             {"sequences", info.sequences},
             {"samples", info.samples},
             {"loss_curve", info.loss_curve},
             {"validation_curve", info.validation_curve}}}};
    if (const auto* rf = std::get_if<forest::RandomForest>(&m.params())) {
      std::size_t nodes = 0;
      for (const auto& t : rf->trees()) nodes += t.nodes.size();
      j["forest"] = {{"trees", rf->trees().size()}, {"nodes", nodes}};
    }
    std::cout << j.dump(2) << "\n";
    return kOk;
  }

  CLI::App* cmd = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intentctl: interaction-intent prediction toolkit"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();

  SimulateCmd simulate;
  LabelCmd label;
  TrainCmd train_cmd;
  EvalCmd eval_cmd;
  SslCmd ssl;
  StreamCmd stream;
  InspectCmd inspect;
  simulate.add(app);
  label.add(app);
  train_cmd.add(app);
  eval_cmd.add(app);
  ssl.add(app);
  stream.add(app);
  inspect.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (simulate.cmd->parsed()) return simulate.run(g);
    if (label.cmd->parsed()) return label.run(g);
    if (train_cmd.cmd->parsed()) return train_cmd.run(g);
    if (eval_cmd.cmd->parsed()) return eval_cmd.run(g);
    if (ssl.cmd->parsed()) return ssl.run(g);
    if (stream.cmd->parsed()) return stream.run(g);
    if (inspect.cmd->parsed()) return inspect.run(g);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
