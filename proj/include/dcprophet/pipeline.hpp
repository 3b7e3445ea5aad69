#pragma once

// The two-stage cascade f(x) = g(x) * h(x): a one-class SVM filter g trained
// on normal instances, and a random forest h trained on what g flags.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcprophet/features.hpp"
#include "dcprophet/forest.hpp"
#include "dcprophet/ocsvm.hpp"

namespace dcprophet::pipeline {

struct Hyperparams {
  ocsvm::OcsvmParams ocsvm;
  forest::ForestParams forest;
  /// Keep normal instances that pass the filter in the forest's training
  /// batch, so h can still answer Normal.
  bool forest_keeps_leaked_normals = true;
};

struct TrainingManifest {
  Hyperparams hyperparams;
  std::string train_digest;  // FNV-1a over labels and features
  std::size_t train_size = 0;
  std::size_t ocsvm_train_size = 0;
  std::size_t forest_train_size = 0;
  std::size_t forest_failures = 0;
  std::size_t support_vectors = 0;

  nlohmann::json to_json() const;
  static TrainingManifest from_json(const nlohmann::json& j);
};

struct DcProphetModel {
  ocsvm::OcsvmModel ocsvm;
  forest::ForestModel forest;
  features::FeatureConfig feature_config;
  TrainingManifest manifest;

  std::size_t dimension() const { return feature_config.dimension(); }
};

/// Digest of a labeled dataset, stable across runs and platforms.
std::string data_digest(const features::LabeledData& data);

/// 1. OCSVM on the normal rows. 2. Drop every row the OCSVM calls normal.
/// 3. Forest on the rest. Throws DegenerateTrainingError when no failure
/// survives step 2 or the data has no normal/failure rows.
DcProphetModel train(const features::LabeledData& data, const Hyperparams& hp,
                     const features::FeatureConfig& cfg);

struct Prediction {
  FailureType label = FailureType::Normal;
  double score = 0.0;
  bool routed = false;  // g(x) == 1
  double decision = 0.0;
};

/// Evaluates the forest only when the filter routes the instance.
Prediction predict_full(const DcProphetModel& model, std::span<const double> x);
FailureType predict(const DcProphetModel& model, std::span<const double> x);

/// Continuous failure score in (0, 1]: 0.5 * sigmoid(-g_hat) below the
/// filter, 0.5 + 0.5 * (1 - votes_normal / B) for routed instances.
double score(const DcProphetModel& model, std::span<const double> x);

struct GridSpec {
  std::vector<double> gammas{1.0 / 128, 1.0 / 32, 1.0 / 8, 0.5, 2.0};
  std::vector<double> nus{0.01, 0.05, 0.1, 0.2};
  std::vector<std::size_t> tree_counts{50, 100, 200};
  std::size_t folds = 5;

  void validate() const;
};

struct CvRow {
  double gamma = 0.0;
  double nu = 0.0;
  std::size_t trees = 0;
  std::vector<double> fold_f3;
  double mean_f3 = 0.0;
  double mean_stage1_recall = 0.0;
};

struct GridResult {
  Hyperparams best;
  std::size_t best_row = 0;
  std::vector<CvRow> rows;  // gamma-major, then nu, then trees
};

/// Per-class fold assignment, deterministic for the seed. Throws
/// StratificationError when there are fewer failures than folds.
std::vector<std::size_t> stratified_folds(std::span<const FailureType> y, std::size_t folds,
                                          std::uint64_t seed);

/// Mean binary F3 across stratified folds for every grid cell; the best
/// cell wins, ties going to fewer trees and then larger nu. `base` supplies
/// every non-grid hyperparameter.
GridResult grid_search_cv(const features::LabeledData& data, const GridSpec& grid,
                          const Hyperparams& base, const features::FeatureConfig& cfg,
                          std::uint64_t seed, std::size_t threads = 1);

void write_cv_table(std::ostream& out, const GridResult& result);

/// Bundle directory: ocsvm.model, forest.model, layout.json, manifest.json.
void save_bundle(const std::filesystem::path& dir, const DcProphetModel& model);
DcProphetModel load_bundle(const std::filesystem::path& dir);

/// The same four files concatenated into one archive.
void save_archive(const std::filesystem::path& file, const DcProphetModel& model);
DcProphetModel load_archive(const std::filesystem::path& file);

/// Loads either form.
DcProphetModel load_model(const std::filesystem::path& path);

}  // namespace dcprophet::pipeline
