// dcprophet: command-line driver for the two-stage failure predictor.
//
//   synth -> ingest -> label -> featurize -> train -> predict -> evaluate
//
// Every stage reads the previous stage's files and writes its own; all
// randomness derives from --seed.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dcprophet/error.hpp"
#include "dcprophet/eval.hpp"
#include "dcprophet/features.hpp"
#include "dcprophet/google_adapter.hpp"
#include "dcprophet/ingestion.hpp"
#include "dcprophet/labeling.hpp"
#include "dcprophet/pipeline.hpp"
#include "dcprophet/synth.hpp"
#include "dcprophet/text_io.hpp"

namespace fs = std::filesystem;
using namespace dcprophet;

namespace {

struct Global {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

std::ifstream open_in(const fs::path& path, const std::string& hint = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path.string() + (hint.empty() ? "" : "; " + hint));
  }
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Re-throws parse errors with the file they came from.
template <typename F>
auto parsing(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

ingest::IntervalStore load_store(const fs::path& path) {
  auto in = open_in(path, "run `dcprophet ingest` first");
  return parsing(path, [&] { return ingest::read_interval_store(in); });
}

std::vector<MachineEvent> load_events(const fs::path& path) {
  auto in = open_in(path);
  return parsing(path, [&] { return ingest::parse_machine_events(in); });
}

std::set<MachineId> load_degenerate(const fs::path& path) {
  auto in = open_in(path, "run `dcprophet label` first");
  std::set<MachineId> out;
  std::string line;
  std::size_t n = 0;
  while (text::read_line(in, line)) {
    ++n;
    if (n == 1 || line.empty()) continue;
    std::uint64_t id = 0;
    if (!text::parse_u64(line, id)) throw Error(path.string() + ": line " + std::to_string(n) + ": bad machine id");
    out.insert(id);
  }
  return out;
}

std::vector<features::Instance> load_dataset(const fs::path& path, bool with_keys) {
  auto in = open_in(path, "run `dcprophet featurize` first");
  auto rows = parsing(path, [&] { return features::read_dataset(in); });
  if (with_keys) {
    fs::path keys = path;
    keys.replace_extension(".keys.csv");
    if (fs::exists(keys)) {
      auto kin = open_in(keys);
      parsing(keys, [&] {
        features::read_keys(kin, rows);
        return 0;
      });
    }
  }
  return rows;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  for (const auto field : text::split(csv, ',')) {
    double v = 0.0;
    if (!text::parse_double(field, v)) throw CLI::ValidationError("bad number in list: " + std::string(field));
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------- synth

void add_synth(CLI::App& app, const Global& g) {
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic trace with ground-truth labels");
  auto cfg = std::make_shared<synth::SynthConfig>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--out", *out, "Output directory")->required();
  cmd->add_option("--machines", cfg->machines, "Machine count")->capture_default_str();
  cmd->add_option("--days", cfg->horizon_days, "Trace length in days")->capture_default_str();
  cmd->add_option("--failing-fraction", cfg->failing_fraction, "Share of machines that fail")->capture_default_str();
  cmd->add_option("--signature-strength", cfg->signature_strength,
                  "Share of failures preceded by a usage ramp")->capture_default_str();
  cmd->add_option("--ramp-amplitude", cfg->ramp_amplitude, "Height of the pre-failure ramp")->capture_default_str();
  cmd->add_option("--degenerate", cfg->degenerate_machines, "All-zero machines with >100 failures")->capture_default_str();
  cmd->callback([cfg, out, &g] {
    cfg->rng_seed = g.seed;
    const fs::path dir(*out);
    fs::create_directories(dir);
    auto events = open_out(dir / "machine_events.csv");
    auto usage = open_out(dir / "resource_usage.csv");
    auto truth = open_out(dir / "truth_labels.csv");
    const auto s = synth::generate(*cfg, events, usage, truth);
    std::cout << "machines=" << s.machines << " intervals=" << s.intervals
              << " usage_rows=" << s.usage_rows << " failures=" << s.failures.size()
              << " heralded=" << s.heralded << " degenerate=" << s.degenerate.size() << '\n';
  });
}

// --------------------------------------------------------- adapt-google

void add_adapt_google(CLI::App& app) {
  auto* cmd = app.add_subcommand("adapt-google", "Convert clusterdata-2011 tables to the native schema");
  auto events = std::make_shared<std::string>();
  auto usage = std::make_shared<std::vector<std::string>>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--machine-events", *events, "Google machine_events file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--task-usage", *usage, "task_usage shards, in time order")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "Output directory")->required();
  cmd->callback([events, usage, out] {
    const fs::path dir(*out);
    fs::create_directories(dir);
    auto ein = open_in(*events);
    auto eout = open_out(dir / "machine_events.csv");
    const auto es = parsing(*events, [&] { return google::adapt_machine_events(ein, eout); });

    std::vector<std::ifstream> shards;
    std::vector<std::istream*> ptrs;
    for (const auto& p : *usage) shards.push_back(open_in(p));
    for (auto& s : shards) ptrs.push_back(&s);
    auto uout = open_out(dir / "resource_usage.csv");
    const auto us = parsing("task_usage", [&] { return google::adapt_task_usage(ptrs, uout); });
    std::cout << "events=" << es.events << " task_rows=" << us.task_rows
              << " usage_rows=" << us.usage_rows << " skipped=" << us.skipped_rows
              << " clamped=" << us.clamped_values << " out_of_order=" << us.out_of_order_rows << '\n';
  });
}

// --------------------------------------------------------------- ingest

void add_ingest(CLI::App& app) {
  auto* cmd = app.add_subcommand("ingest", "Aggregate raw usage into 5-minute interval series");
  auto events = std::make_shared<std::string>();
  auto usage = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto horizon = std::make_shared<std::uint64_t>(0);
  cmd->add_option("--events", *events, "machine_events.csv")->required();
  cmd->add_option("--usage", *usage, "resource_usage.csv")->required();
  cmd->add_option("--out", *out, "Interval store to write")->required();
  cmd->add_option("--horizon-us", *horizon,
                  "Trace end in microseconds (default: last record or event, rounded up to an interval)");
  cmd->callback([=] {
    const auto ev = load_events(*events);
    auto uin = open_in(*usage);
    const auto parsed = parsing(*usage, [&] { return ingest::parse_usage_records(uin); });

    std::uint64_t end = *horizon;
    if (end == 0) {
      for (const auto& r : parsed.records) end = std::max(end, r.end.micros);
      for (const auto& e : ev) end = std::max(end, e.time.micros + 1);
      const auto len = static_cast<std::uint64_t>(kDefaultInterval.count());
      end = (end + len - 1) / len * len;
    }
    const auto series = ingest::aggregate_intervals(parsed.records, Timestamp{end});
    auto os = open_out(*out);
    ingest::write_interval_store(os, series, Timestamp{end});
    std::cout << "machines=" << series.size() << " intervals=" << interval_count(Timestamp{end})
              << " records=" << parsed.records.size() << " clamped_values=" << parsed.clamps.values
              << " clamped_rows=" << parsed.clamps.rows << '\n';
  });
}

// ---------------------------------------------------------------- label

void add_label(CLI::App& app) {
  auto* cmd = app.add_subcommand("label", "Pair REMOVE/ADD events into failures and label intervals");
  auto events = std::make_shared<std::string>();
  auto store = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto ir_minutes = std::make_shared<double>(30.0);
  auto degenerate_min = std::make_shared<std::size_t>(100);
  cmd->add_option("--events", *events, "machine_events.csv")->required();
  cmd->add_option("--store", *store, "Interval store from `ingest`")->required();
  cmd->add_option("--out", *out, "Output directory")->required();
  cmd->add_option("--ir-max-minutes", *ir_minutes, "Downtime below which a failure is IR")->capture_default_str();
  cmd->add_option("--degenerate-min", *degenerate_min,
                  "Failure count a degenerate machine must exceed")->capture_default_str();
  cmd->callback([=] {
    const auto st = load_store(*store);
    const auto ev = load_events(*events);
    labeling::LabelingConfig cfg;
    cfg.ir_max_downtime = Micros(static_cast<std::int64_t>(*ir_minutes * 60e6));
    cfg.degenerate_min_failures = *degenerate_min;
    cfg.trace_end = st.horizon;
    cfg.interval = st.interval;
    cfg.validate();

    const auto pairing = labeling::pair_failures(ev, cfg);
    const auto degenerate = labeling::detect_degenerate_machines(st.series, pairing.failures, cfg);
    const auto tracks = labeling::build_label_tracks(pairing.failures, st.series, cfg);

    const fs::path dir(*out);
    fs::create_directories(dir);
    auto fo = open_out(dir / "failures.csv");
    labeling::write_failures(fo, pairing.failures);
    auto lo = open_out(dir / "labels.csv");
    labeling::write_label_tracks(lo, tracks);
    auto dout = open_out(dir / "degenerate.csv");
    dout << "machine_id\n";
    for (const auto id : degenerate) dout << id << '\n';

    std::array<std::size_t, kClassCount> counts{};
    for (const auto& f : pairing.failures) ++counts[to_label(f.type())];
    std::cout << "failures=" << pairing.failures.size() << " IR=" << counts[1] << " SR=" << counts[2]
              << " FD=" << counts[3] << " dropped_removes=" << pairing.dropped_removes
              << " degenerate=" << degenerate.size() << '\n';
  });
}

// ------------------------------------------------------------ featurize

void add_featurize(CLI::App& app, const Global& g) {
  auto* cmd = app.add_subcommand("featurize", "Build the train/test instance sets");
  auto store = std::make_shared<std::string>();
  auto labels = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto lags = std::make_shared<std::size_t>(6);
  auto dcfg = std::make_shared<features::DatasetConfig>();
  cmd->add_option("--store", *store, "Interval store from `ingest`")->required();
  cmd->add_option("--labels", *labels, "Output directory of `label`")->required();
  cmd->add_option("--out", *out, "Output directory")->required();
  cmd->add_option("--lags", *lags, "Intervals per feature window")->capture_default_str();
  cmd->add_option("--normals", dcfg->normal_sample_count, "Normal instances to sample")->capture_default_str();
  cmd->add_option("--train-fraction", dcfg->train_fraction, "Per-class train share")->capture_default_str();
  cmd->callback([=, &g] {
    const auto st = load_store(*store);
    const fs::path ldir(*labels);
    const auto degenerate = load_degenerate(ldir / "degenerate.csv");
    const auto series = labeling::exclude_machines(st.series, degenerate);
    auto lin = open_in(ldir / "labels.csv", "run `dcprophet label` first");
    const auto tracks = parsing(ldir / "labels.csv", [&] { return labeling::read_label_tracks(lin, series); });

    const features::FeatureConfig cfg(*lags);
    dcfg->rng_seed = g.seed;
    const auto ds = features::build_dataset(series, tracks, cfg, *dcfg, g.threads);
    for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';

    const fs::path dir(*out);
    fs::create_directories(dir);
    for (const auto& [name, rows] : {std::pair{"train", &ds.train}, std::pair{"test", &ds.test}}) {
      auto d = open_out(dir / (std::string(name) + ".csv"));
      features::write_dataset(d, *rows, cfg.dimension());
      auto k = open_out(dir / (std::string(name) + ".keys.csv"));
      features::write_keys(k, *rows);
    }
    auto lj = open_out(dir / "layout.json");
    lj << cfg.to_json().dump(2) << '\n';

    auto failures = [](const std::vector<features::Instance>& v) {
      return std::count_if(v.begin(), v.end(), [](const auto& i) { return is_failure(i.y); });
    };
    std::cout << "excluded_machines=" << degenerate.size() << " train=" << ds.train.size()
              << " train_failures=" << failures(ds.train) << " test=" << ds.test.size()
              << " test_failures=" << failures(ds.test) << '\n';
  });
}

// ---------------------------------------------------------- pacf-report

void add_pacf_report(CLI::App& app, const Global& g) {
  auto* cmd = app.add_subcommand("pacf-report", "Histogram of significant PACF lags");
  auto store = std::make_shared<std::string>();
  auto labels = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto max_lag = std::make_shared<std::size_t>(10);
  cmd->add_option("--store", *store, "Interval store from `ingest`")->required();
  cmd->add_option("--labels", *labels, "Output directory of `label` (masks downtime, drops degenerate machines)");
  cmd->add_option("--out", *out, "Histogram CSV (lag,count)")->required();
  cmd->add_option("--max-lag", *max_lag, "Largest lag examined")->capture_default_str();
  cmd->callback([=, &g] {
    auto st = load_store(*store);
    std::optional<labeling::TrackMap> tracks;
    if (!labels->empty()) {
      const fs::path ldir(*labels);
      st.series = labeling::exclude_machines(st.series, load_degenerate(ldir / "degenerate.csv"));
      auto lin = open_in(ldir / "labels.csv", "run `dcprophet label` first");
      tracks = parsing(ldir / "labels.csv", [&] { return labeling::read_label_tracks(lin, st.series); });
    }
    const auto results = features::machine_pacf(st.series, tracks ? &*tracks : nullptr, *max_lag, g.threads);
    const auto hist = features::significant_lag_histogram(results);
    auto os = open_out(*out);
    os << "lag,count\n";
    std::size_t total = 0, early = 0;
    for (std::size_t lag = 1; lag <= *max_lag; ++lag) {
      const auto it = hist.find(lag);
      const std::size_t c = it == hist.end() ? 0 : it->second;
      os << lag << ',' << c << '\n';
      total += c;
      if (lag <= 6) early += c;
    }
    std::cout << "series=" << results.size() << " significant=" << total << " within_lag_6=" << early << '\n';
  });
}

// ---------------------------------------------------------------- train

void add_train(CLI::App& app, const Global& g) {
  auto* cmd = app.add_subcommand("train", "Grid-search, then fit the cascade on the training set");
  struct Opts {
    std::string data, out, archive, cv_table, split_counts;
    std::string gammas = "0.0078125,0.03125,0.125,0.5,2";
    std::string nus = "0.01,0.05,0.1,0.2";
    std::string trees = "50,100,200";
    std::size_t folds = 5;
    std::size_t mtry = 9;
    std::size_t min_leaf = 1;
    double tolerance = 1e-4;
    bool drop_leaked_normals = false;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--data", o->data, "Output directory of `featurize`")->required();
  cmd->add_option("--out", o->out, "Model bundle directory")->required();
  cmd->add_option("--archive", o->archive, "Also write a single-file archive");
  cmd->add_option("--cv-table", o->cv_table, "CV table path (default: <out>/cv_table.csv)");
  cmd->add_option("--split-counts", o->split_counts, "Write per-feature forest split counts");
  cmd->add_option("--gammas", o->gammas, "RBF widths to search")->capture_default_str();
  cmd->add_option("--nus", o->nus, "OCSVM nu values to search")->capture_default_str();
  cmd->add_option("--trees", o->trees, "Forest sizes to search")->capture_default_str();
  cmd->add_option("--folds", o->folds, "Cross-validation folds")->capture_default_str();
  cmd->add_option("--mtry", o->mtry, "Features tried per split")->capture_default_str();
  cmd->add_option("--min-leaf", o->min_leaf, "Smallest leaf")->capture_default_str();
  cmd->add_option("--tolerance", o->tolerance, "OCSVM stopping tolerance")->capture_default_str();
  cmd->add_flag("--drop-leaked-normals", o->drop_leaked_normals,
                "Train the forest on routed failures only");
  cmd->callback([o, &g] {
    const fs::path dir(o->data);
    const auto rows = load_dataset(dir / "train.csv", false);
    auto lin = open_in(dir / "layout.json", "run `dcprophet featurize` first");
    const auto cfg = features::FeatureConfig::from_json(nlohmann::json::parse(lin));
    const auto data = features::to_labeled(rows);

    pipeline::GridSpec grid;
    grid.gammas = parse_list(o->gammas);
    grid.nus = parse_list(o->nus);
    grid.tree_counts.clear();
    for (const double t : parse_list(o->trees)) grid.tree_counts.push_back(static_cast<std::size_t>(t));
    grid.folds = o->folds;

    pipeline::Hyperparams base;
    base.ocsvm.tolerance = o->tolerance;
    base.forest.mtry = o->mtry;
    base.forest.min_leaf = o->min_leaf;
    base.forest.rng_seed = g.seed;
    base.forest_keeps_leaked_normals = !o->drop_leaked_normals;

    const auto result = pipeline::grid_search_cv(data, grid, base, cfg, g.seed, g.threads);
    auto hp = result.best;
    hp.forest.threads = g.threads;
    const auto model = pipeline::train(data, hp, cfg);
    pipeline::save_bundle(o->out, model);
    if (!o->archive.empty()) pipeline::save_archive(o->archive, model);

    auto cv = open_out(o->cv_table.empty() ? fs::path(o->out) / "cv_table.csv" : fs::path(o->cv_table));
    pipeline::write_cv_table(cv, result);

    if (!o->split_counts.empty()) {
      const auto report = forest::feature_split_counts(model.forest, cfg);
      auto sc = open_out(o->split_counts);
      sc << "index,name,splits\n";
      for (std::size_t i = 0; i < report.by_index.size(); ++i) {
        sc << i << ',' << cfg.name(i) << ',' << report.by_index[i] << '\n';
      }
    }
    const auto& best = result.rows[result.best_row];
    std::cout << "best gamma=" << text::format_double(best.gamma) << " nu=" << text::format_double(best.nu)
              << " trees=" << best.trees << " cv_f3=" << text::format_double(best.mean_f3)
              << " support_vectors=" << model.manifest.support_vectors
              << " forest_rows=" << model.manifest.forest_train_size << '\n';
  });
}

// -------------------------------------------------------------- predict

void write_predictions(std::ostream& out, const pipeline::DcProphetModel& model,
                       const std::vector<features::Instance>& rows) {
  std::string buf = "machine_id,interval,predicted_y,score\n";
  for (const auto& r : rows) {
    const auto p = pipeline::predict_full(model, r.x);
    buf += std::to_string(r.machine) + ',' + std::to_string(r.target) + ',' +
           std::to_string(to_label(p.label)) + ',';
    text::append_double(buf, p.score);
    buf += '\n';
  }
  out << buf;
}

void stream_predictions(const pipeline::DcProphetModel& model) {
  std::string line;
  std::vector<double> x;
  std::size_t n = 0;
  while (text::read_line(std::cin, line)) {
    ++n;
    if (line.empty() || line.front() == 'f' || line.front() == '#') continue;
    x.clear();
    for (const auto field : text::split(line, ',')) {
      double v = 0.0;
      if (!text::parse_double(field, v)) throw Error("stdin: line " + std::to_string(n) + ": bad number");
      x.push_back(v);
    }
    const auto p = pipeline::predict_full(model, x);
    std::string out = std::to_string(to_label(p.label)) + ',';
    text::append_double(out, p.score);
    std::cout << out << '\n' << std::flush;
  }
}

void add_predict(CLI::App& app) {
  auto* cmd = app.add_subcommand("predict", "Classify instances with a trained model");
  auto model_path = std::make_shared<std::string>();
  auto data = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto stream = std::make_shared<bool>(false);
  cmd->add_option("--model", *model_path, "Model bundle directory or archive")->required();
  cmd->add_option("--data", *data, "Dataset CSV (y,f0,...), keys read from the .keys.csv sidecar");
  cmd->add_option("--out", *out, "Predictions CSV");
  cmd->add_flag("--stream", *stream, "Read f0,... lines on stdin, write y,score lines");
  cmd->callback([=] {
    const auto model = pipeline::load_model(*model_path);
    if (*stream) {
      stream_predictions(model);
      return;
    }
    if (data->empty() || out->empty()) throw CLI::ValidationError("predict needs --data and --out unless --stream");
    const auto rows = load_dataset(*data, true);
    auto os = open_out(*out);
    write_predictions(os, model, rows);
  });
}

// ------------------------------------------------------------- evaluate

struct PredictionRow {
  MachineId machine = 0;
  std::size_t interval = 0;
  FailureType y = FailureType::Normal;
  double score = 0.0;
};

std::vector<PredictionRow> load_predictions(const fs::path& path) {
  auto in = open_in(path, "run `dcprophet predict` first");
  std::vector<PredictionRow> rows;
  std::string line;
  std::size_t n = 0;
  while (text::read_line(in, line)) {
    ++n;
    if (n == 1 || line.empty()) continue;
    const auto f = text::split(line, ',');
    PredictionRow r;
    std::uint64_t interval = 0, y = 0;
    if (f.size() != 4 || !text::parse_u64(f[0], r.machine) || !text::parse_u64(f[1], interval) ||
        !text::parse_u64(f[2], y) || y >= kClassCount || !text::parse_double(f[3], r.score)) {
      throw Error(path.string() + ": line " + std::to_string(n) + ": expected machine_id,interval,predicted_y,score");
    }
    r.interval = interval;
    r.y = static_cast<FailureType>(y);
    rows.push_back(r);
  }
  return rows;
}

void add_evaluate(CLI::App& app) {
  auto* cmd = app.add_subcommand("evaluate", "Score predictions against the labeled test set");
  auto data = std::make_shared<std::string>();
  auto predictions = std::make_shared<std::string>();
  auto model_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto latency = std::make_shared<std::size_t>(0);
  cmd->add_option("--data", *data, "Labeled dataset CSV (test.csv)")->required();
  cmd->add_option("--predictions", *predictions, "Output of `predict`");
  cmd->add_option("--model", *model_path, "Model to predict with when --predictions is absent");
  cmd->add_option("--out", *out, "Report directory")->required();
  cmd->add_option("--latency", *latency, "Also time this many predict calls (needs --model)");
  cmd->callback([=] {
    const auto rows = load_dataset(*data, true);
    std::optional<pipeline::DcProphetModel> model;
    if (!model_path->empty()) model = pipeline::load_model(*model_path);

    std::vector<FailureType> actual, predicted;
    std::vector<double> scores;
    for (const auto& r : rows) actual.push_back(r.y);
    if (!predictions->empty()) {
      const auto preds = load_predictions(*predictions);
      if (preds.size() != rows.size()) {
        throw Error("predictions have " + std::to_string(preds.size()) + " rows but the dataset has " +
                    std::to_string(rows.size()));
      }
      for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].machine != rows[i].machine || preds[i].interval != rows[i].target) {
          throw Error("prediction row " + std::to_string(i + 1) + " does not match the dataset keys");
        }
        predicted.push_back(preds[i].y);
        scores.push_back(preds[i].score);
      }
    } else if (model) {
      for (const auto& r : rows) {
        const auto p = pipeline::predict_full(*model, r.x);
        predicted.push_back(p.label);
        scores.push_back(p.score);
      }
    } else {
      throw CLI::ValidationError("evaluate needs --predictions or --model");
    }

    auto report = eval::make_report(predicted, actual, scores);
    const fs::path dir(*out);
    fs::create_directories(dir);
    auto txt = open_out(dir / "report.txt");
    eval::write_report_text(txt, report);
    auto kv = open_out(dir / "report.kv");
    eval::write_report_kv(kv, report);
    std::vector<std::uint8_t> positive;
    for (const auto a : actual) positive.push_back(is_failure(a) ? 1 : 0);
    if (report.auc) {
      auto roc = open_out(dir / "roc.csv");
      eval::write_roc_csv(roc, eval::roc_curve(scores, positive));
    }
    if (*latency > 0) {
      if (!model) throw CLI::ValidationError("--latency needs --model");
      std::vector<std::vector<double>> xs;
      for (const auto& r : rows) xs.push_back(r.x);
      const auto stats = eval::measure_latency(
          [&](std::span<const double> x) { (void)pipeline::predict(*model, x); }, xs, *latency);
      auto lk = open_out(dir / "latency.kv");
      eval::write_latency_kv(lk, stats);
      std::cout << "latency mean_ms=" << text::format_double(stats.mean_ms)
                << " p99_ms=" << text::format_double(stats.p99_ms) << '\n';
    }
    auto show = [](const std::optional<double>& v) {
      return v ? text::format_double(*v) : std::string("undefined");
    };
    std::cout << "binary_f3=" << show(report.binary_f3) << " auc=" << show(report.auc)
              << " macro_f3=" << show(report.macro_f3) << '\n';
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage machine failure prediction from cluster traces"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value file; subcommand keys as `train.nus=...`");
  Global g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  add_synth(app, g);
  add_adapt_google(app);
  add_ingest(app);
  add_label(app);
  add_featurize(app, g);
  add_pacf_report(app, g);
  add_train(app, g);
  add_predict(app);
  add_evaluate(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
