#include "dcprophet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dcprophet/error.hpp"
#include "dcprophet/eval.hpp"
#include "dcprophet/parallel.hpp"
#include "dcprophet/text_io.hpp"

namespace dcprophet::pipeline {
namespace {

constexpr const char* kOcsvmFile = "ocsvm.model";
constexpr const char* kForestFile = "forest.model";
constexpr const char* kLayoutFile = "layout.json";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kArchiveMagic = "dcprophet-bundle 1";

FeatureMatrix select_rows(const FeatureMatrix& x, std::span<const std::size_t> rows) {
  FeatureMatrix out(x.cols());
  out.reserve_rows(rows.size());
  for (const std::size_t r : rows) out.push_row(x.row(r));
  return out;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

nlohmann::json hyperparams_json(const Hyperparams& hp) {
  nlohmann::json j;
  j["ocsvm"] = {{"nu", hp.ocsvm.nu},
                {"gamma", hp.ocsvm.gamma},
                {"tolerance", hp.ocsvm.tolerance},
                {"max_iterations", hp.ocsvm.max_iterations}};
  j["forest"] = {{"tree_count", hp.forest.tree_count},
                 {"mtry", hp.forest.mtry},
                 {"min_leaf", hp.forest.min_leaf},
                 {"max_depth", hp.forest.max_depth ? nlohmann::json(*hp.forest.max_depth)
                                                   : nlohmann::json(nullptr)},
                 {"rng_seed", hp.forest.rng_seed},
                 {"bootstrap", hp.forest.bootstrap}};
  j["forest_keeps_leaked_normals"] = hp.forest_keeps_leaked_normals;
  return j;
}

Hyperparams hyperparams_from_json(const nlohmann::json& j) {
  Hyperparams hp;
  const auto& o = j.at("ocsvm");
  hp.ocsvm.nu = o.at("nu").get<double>();
  hp.ocsvm.gamma = o.at("gamma").get<double>();
  hp.ocsvm.tolerance = o.at("tolerance").get<double>();
  hp.ocsvm.max_iterations = o.at("max_iterations").get<std::size_t>();
  const auto& f = j.at("forest");
  hp.forest.tree_count = f.at("tree_count").get<std::size_t>();
  hp.forest.mtry = f.at("mtry").get<std::size_t>();
  hp.forest.min_leaf = f.at("min_leaf").get<std::size_t>();
  if (!f.at("max_depth").is_null()) hp.forest.max_depth = f.at("max_depth").get<std::size_t>();
  hp.forest.rng_seed = f.at("rng_seed").get<std::uint64_t>();
  hp.forest.bootstrap = f.at("bootstrap").get<bool>();
  hp.forest_keeps_leaked_normals = j.at("forest_keeps_leaked_normals").get<bool>();
  return hp;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << bytes;
  if (!out) throw FormatError("failed writing " + path.string());
}

struct BundleFiles {
  std::string ocsvm, forest, layout, manifest;
};

BundleFiles serialize(const DcProphetModel& model) {
  BundleFiles b;
  std::ostringstream o, f;
  ocsvm::save(o, model.ocsvm);
  forest::save(f, model.forest);
  b.ocsvm = o.str();
  b.forest = f.str();
  b.layout = model.feature_config.to_json().dump(2) + "\n";
  b.manifest = model.manifest.to_json().dump(2) + "\n";
  return b;
}

DcProphetModel deserialize(const BundleFiles& b) {
  DcProphetModel m;
  std::istringstream o(b.ocsvm), f(b.forest);
  m.ocsvm = ocsvm::load(o);
  m.forest = forest::load(f);
  try {
    m.feature_config = features::FeatureConfig::from_json(nlohmann::json::parse(b.layout));
    m.manifest = TrainingManifest::from_json(nlohmann::json::parse(b.manifest));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad bundle metadata: ") + e.what());
  }
  const std::size_t d = m.feature_config.dimension();
  if (m.ocsvm.dimension() != d || m.forest.dimension() != d) {
    throw FormatError("bundle parts disagree on the feature dimension");
  }
  return m;
}

struct FoldOutcome {
  std::vector<double> f3_by_trees;
  double stage1_recall = 0.0;
};

}  // namespace

nlohmann::json TrainingManifest::to_json() const {
  return {{"format", "dcprophet-manifest"},
          {"version", 1},
          {"hyperparams", hyperparams_json(hyperparams)},
          {"train_digest", train_digest},
          {"train_size", train_size},
          {"ocsvm_train_size", ocsvm_train_size},
          {"forest_train_size", forest_train_size},
          {"forest_failures", forest_failures},
          {"support_vectors", support_vectors}};
}

TrainingManifest TrainingManifest::from_json(const nlohmann::json& j) {
  if (j.at("format") != "dcprophet-manifest" || j.at("version") != 1) {
    throw FormatError("unsupported manifest format");
  }
  TrainingManifest m;
  m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
  m.train_digest = j.at("train_digest").get<std::string>();
  m.train_size = j.at("train_size").get<std::size_t>();
  m.ocsvm_train_size = j.at("ocsvm_train_size").get<std::size_t>();
  m.forest_train_size = j.at("forest_train_size").get<std::size_t>();
  m.forest_failures = j.at("forest_failures").get<std::size_t>();
  m.support_vectors = j.at("support_vectors").get<std::size_t>();
  return m;
}

std::string data_digest(const features::LabeledData& data) {
  text::Fnv1a h;
  h.update_u64(data.x.rows());
  h.update_u64(data.x.cols());
  for (std::size_t i = 0; i < data.x.rows(); ++i) {
    h.update_u64(to_label(data.y[i]));
    for (const double v : data.x.row(i)) h.update_double(v);
  }
  return h.hex();
}

DcProphetModel train(const features::LabeledData& data, const Hyperparams& hp,
                     const features::FeatureConfig& cfg) {
  if (data.x.rows() != data.y.size()) throw DimensionMismatch(data.x.rows(), data.y.size());
  if (data.x.cols() != cfg.dimension()) throw DimensionMismatch(cfg.dimension(), data.x.cols());

  std::vector<std::size_t> normal_rows;
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    if (!is_failure(data.y[i])) normal_rows.push_back(i);
  }
  if (normal_rows.empty()) throw DegenerateTrainingError("training data has no normal instances");
  if (normal_rows.size() == data.y.size()) {
    throw DegenerateTrainingError("training data has no failure instances");
  }

  DcProphetModel model;
  model.feature_config = cfg;
  model.ocsvm = ocsvm::train(select_rows(data.x, normal_rows), hp.ocsvm);

  std::vector<std::size_t> routed;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    if (ocsvm::classify(model.ocsvm, data.x.row(i)) == 0) continue;
    if (is_failure(data.y[i])) {
      ++failures;
    } else if (!hp.forest_keeps_leaked_normals) {
      continue;
    }
    routed.push_back(i);
  }
  if (failures == 0) {
    throw DegenerateTrainingError("no failure instance passes the one-class filter");
  }

  std::vector<FailureType> routed_y;
  routed_y.reserve(routed.size());
  for (const std::size_t r : routed) routed_y.push_back(data.y[r]);
  model.forest = forest::train(select_rows(data.x, routed), routed_y, hp.forest);

  auto& m = model.manifest;
  m.hyperparams = hp;
  m.hyperparams.forest.threads = 1;
  m.train_digest = data_digest(data);
  m.train_size = data.y.size();
  m.ocsvm_train_size = normal_rows.size();
  m.forest_train_size = routed.size();
  m.forest_failures = failures;
  m.support_vectors = model.ocsvm.support_count();
  return model;
}

Prediction predict_full(const DcProphetModel& model, std::span<const double> x) {
  if (x.size() != model.dimension()) throw DimensionMismatch(model.dimension(), x.size());
  Prediction p;
  p.decision = ocsvm::decision(model.ocsvm, x);
  p.routed = p.decision < 0.0;
  if (!p.routed) {
    p.score = 0.5 * sigmoid(-p.decision);
    return p;
  }
  const auto votes = forest::predict_votes(model.forest, x);
  p.label = forest::argmax_votes(votes);
  const double b = static_cast<double>(model.forest.tree_count());
  p.score = 0.5 + 0.5 * (1.0 - static_cast<double>(votes[0]) / b);
  return p;
}

FailureType predict(const DcProphetModel& model, std::span<const double> x) {
  return predict_full(model, x).label;
}

double score(const DcProphetModel& model, std::span<const double> x) {
  return predict_full(model, x).score;
}

void GridSpec::validate() const {
  if (gammas.empty() || nus.empty() || tree_counts.empty()) {
    throw std::invalid_argument("every grid axis needs at least one value");
  }
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  for (const double g : gammas) {
    if (!(g > 0.0)) throw std::invalid_argument("grid gamma values must be positive");
  }
  for (const double v : nus) {
    if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("grid nu values must lie in (0, 1]");
  }
  for (const auto b : tree_counts) {
    if (b == 0) throw std::invalid_argument("grid tree counts must be positive");
  }
}

std::vector<std::size_t> stratified_folds(std::span<const FailureType> y, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("need at least 2 folds");
  const auto failures = static_cast<std::size_t>(
      std::count_if(y.begin(), y.end(), [](FailureType t) { return is_failure(t); }));
  if (failures < folds) {
    throw StratificationError("only " + std::to_string(failures) + " failure instances for " +
                              std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> fold(y.size());
  std::mt19937_64 rng(seed);
  // Failure classes first, with the round-robin continuing across classes so
  // every fold receives a failure.
  std::size_t next = 0;
  for (const std::size_t c : {1u, 2u, 3u, 0u}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (static_cast<std::size_t>(to_label(y[i])) == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (const std::size_t i : members) fold[i] = next++ % folds;
  }
  return fold;
}

GridResult grid_search_cv(const features::LabeledData& data, const GridSpec& grid,
                          const Hyperparams& base, const features::FeatureConfig& cfg,
                          std::uint64_t seed, std::size_t threads) {
  grid.validate();
  const auto fold_of = stratified_folds(data.y, grid.folds, seed);
  const std::size_t max_trees = *std::max_element(grid.tree_counts.begin(), grid.tree_counts.end());

  struct Task {
    std::size_t g, v, k;
  };
  std::vector<Task> tasks;
  for (std::size_t g = 0; g < grid.gammas.size(); ++g) {
    for (std::size_t v = 0; v < grid.nus.size(); ++v) {
      for (std::size_t k = 0; k < grid.folds; ++k) tasks.push_back({g, v, k});
    }
  }
  std::vector<FoldOutcome> outcomes(tasks.size());

  parallel_for(tasks.size(), threads, [&](std::size_t t) {
    const Task task = tasks[t];
    features::LabeledData fit{FeatureMatrix(data.x.cols()), {}};
    features::LabeledData held{FeatureMatrix(data.x.cols()), {}};
    for (std::size_t i = 0; i < data.y.size(); ++i) {
      auto& dst = fold_of[i] == task.k ? held : fit;
      dst.x.push_row(data.x.row(i));
      dst.y.push_back(data.y[i]);
    }
    Hyperparams hp = base;
    hp.ocsvm.gamma = grid.gammas[task.g];
    hp.ocsvm.nu = grid.nus[task.v];
    hp.forest.tree_count = max_trees;
    hp.forest.threads = 1;

    FoldOutcome& out = outcomes[t];
    out.f3_by_trees.assign(grid.tree_counts.size(), 0.0);
    std::optional<DcProphetModel> model;
    try {
      model = train(fit, hp, cfg);
    } catch (const DegenerateTrainingError&) {
      // Nothing reaches the forest; every held-out row is predicted normal.
    }

    std::size_t held_failures = 0, held_routed = 0;
    std::vector<std::uint8_t> routed(held.y.size(), 0);
    for (std::size_t i = 0; i < held.y.size(); ++i) {
      if (model) routed[i] = ocsvm::classify(model->ocsvm, held.x.row(i)) == 1 ? 1 : 0;
      if (is_failure(held.y[i])) {
        ++held_failures;
        held_routed += routed[i];
      }
    }
    out.stage1_recall =
        held_failures ? static_cast<double>(held_routed) / static_cast<double>(held_failures) : 0.0;
    if (!model) return;

    std::vector<FailureType> pred(held.y.size());
    for (std::size_t b = 0; b < grid.tree_counts.size(); ++b) {
      const auto sub = model->forest.prefix(grid.tree_counts[b]);
      for (std::size_t i = 0; i < held.y.size(); ++i) {
        pred[i] = routed[i] ? forest::predict(sub, held.x.row(i)) : FailureType::Normal;
      }
      const auto pr = eval::binary_precision_recall(eval::confusion(pred, held.y));
      out.f3_by_trees[b] = eval::f_beta(pr).value_or(0.0);
    }
  });

  GridResult result;
  for (std::size_t g = 0; g < grid.gammas.size(); ++g) {
    for (std::size_t v = 0; v < grid.nus.size(); ++v) {
      for (std::size_t b = 0; b < grid.tree_counts.size(); ++b) {
        CvRow row;
        row.gamma = grid.gammas[g];
        row.nu = grid.nus[v];
        row.trees = grid.tree_counts[b];
        double recall = 0.0;
        for (std::size_t k = 0; k < grid.folds; ++k) {
          const auto& o = outcomes[(g * grid.nus.size() + v) * grid.folds + k];
          row.fold_f3.push_back(o.f3_by_trees[b]);
          recall += o.stage1_recall;
        }
        row.mean_f3 = std::accumulate(row.fold_f3.begin(), row.fold_f3.end(), 0.0) /
                      static_cast<double>(grid.folds);
        row.mean_stage1_recall = recall / static_cast<double>(grid.folds);
        result.rows.push_back(std::move(row));
      }
    }
  }

  auto better = [](const CvRow& a, const CvRow& b) {
    if (a.mean_f3 != b.mean_f3) return a.mean_f3 > b.mean_f3;
    if (a.trees != b.trees) return a.trees < b.trees;
    return a.nu > b.nu;
  };
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    if (better(result.rows[i], result.rows[result.best_row])) result.best_row = i;
  }
  const CvRow& best = result.rows[result.best_row];
  result.best = base;
  result.best.ocsvm.gamma = best.gamma;
  result.best.ocsvm.nu = best.nu;
  result.best.forest.tree_count = best.trees;
  return result;
}

void write_cv_table(std::ostream& out, const GridResult& result) {
  std::string buf = "gamma,nu,trees,mean_f3,mean_stage1_recall,best";
  const std::size_t folds = result.rows.empty() ? 0 : result.rows.front().fold_f3.size();
  for (std::size_t k = 0; k < folds; ++k) buf += ",f3_fold" + std::to_string(k);
  buf += '\n';
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const CvRow& r = result.rows[i];
    text::append_double(buf, r.gamma);
    buf += ',';
    text::append_double(buf, r.nu);
    buf += ',' + std::to_string(r.trees) + ',';
    text::append_double(buf, r.mean_f3);
    buf += ',';
    text::append_double(buf, r.mean_stage1_recall);
    buf += i == result.best_row ? ",1" : ",0";
    for (const double f : r.fold_f3) {
      buf += ',';
      text::append_double(buf, f);
    }
    buf += '\n';
  }
  out << buf;
}

void save_bundle(const std::filesystem::path& dir, const DcProphetModel& model) {
  std::filesystem::create_directories(dir);
  const BundleFiles b = serialize(model);
  write_file(dir / kOcsvmFile, b.ocsvm);
  write_file(dir / kForestFile, b.forest);
  write_file(dir / kLayoutFile, b.layout);
  write_file(dir / kManifestFile, b.manifest);
}

DcProphetModel load_bundle(const std::filesystem::path& dir) {
  for (const char* name : {kOcsvmFile, kForestFile, kLayoutFile, kManifestFile}) {
    if (!std::filesystem::exists(dir / name)) {
      throw FormatError("model bundle " + dir.string() + " lacks " + name +
                        "; run `dcprophet train` first");
    }
  }
  return deserialize({read_file(dir / kOcsvmFile), read_file(dir / kForestFile),
                      read_file(dir / kLayoutFile), read_file(dir / kManifestFile)});
}

void save_archive(const std::filesystem::path& file, const DcProphetModel& model) {
  const BundleFiles b = serialize(model);
  std::string out = std::string(kArchiveMagic) + '\n';
  for (const auto& [name, bytes] : {std::pair{kOcsvmFile, &b.ocsvm}, std::pair{kForestFile, &b.forest},
                                    std::pair{kLayoutFile, &b.layout},
                                    std::pair{kManifestFile, &b.manifest}}) {
    out += std::string("file ") + name + ' ' + std::to_string(bytes->size()) + '\n';
    out += *bytes;
  }
  write_file(file, out);
}

DcProphetModel load_archive(const std::filesystem::path& file) {
  const std::string all = read_file(file);
  std::size_t pos = 0;
  auto line = [&]() {
    const auto eol = all.find('\n', pos);
    if (eol == std::string::npos) throw FormatError("truncated model archive");
    std::string l = all.substr(pos, eol - pos);
    pos = eol + 1;
    return l;
  };
  if (line() != kArchiveMagic) throw FormatError(file.string() + " is not a model archive");
  BundleFiles b;
  for (const auto& [name, dst] : {std::pair{kOcsvmFile, &b.ocsvm}, std::pair{kForestFile, &b.forest},
                                  std::pair{kLayoutFile, &b.layout},
                                  std::pair{kManifestFile, &b.manifest}}) {
    const std::string header = line();
    const auto f = text::split(header, ' ');
    std::uint64_t size = 0;
    if (f.size() != 3 || f[0] != "file" || f[1] != name || !text::parse_u64(f[2], size) ||
        pos + size > all.size()) {
      throw FormatError("model archive entry for " + std::string(name) + " is malformed");
    }
    *dst = all.substr(pos, size);
    pos += size;
  }
  return deserialize(b);
}

DcProphetModel load_model(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_bundle(path);
  if (!std::filesystem::exists(path)) {
    throw FormatError("no model at " + path.string() + "; run `dcprophet train` first");
  }
  return load_archive(path);
}

}  // namespace dcprophet::pipeline
