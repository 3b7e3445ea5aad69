#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "dcprophet/error.hpp"
#include "dcprophet/pipeline.hpp"

using namespace dcprophet;
using namespace dcprophet::pipeline;

namespace {

// Normals scattered around 0.3, failures around 0.8 (or overlapping when
// `overlap` is set).
features::LabeledData toy_data(std::size_t normals, std::size_t per_failure_class,
                               std::uint64_t seed, bool overlap = false) {
  const features::FeatureConfig cfg;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.03);
  features::LabeledData d{FeatureMatrix(cfg.dimension()), {}};
  std::vector<double> row(cfg.dimension());
  auto add = [&](FailureType y, double centre) {
    for (auto& v : row) v = std::clamp(centre + noise(rng), 0.0, 1.0);
    d.x.push_row(row);
    d.y.push_back(y);
  };
  for (std::size_t i = 0; i < normals; ++i) add(FailureType::Normal, 0.3);
  const std::array<FailureType, 3> fails{FailureType::ImmediateReboot, FailureType::SlowReboot,
                                         FailureType::ForcibleDecommission};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_failure_class; ++i) add(fails[c], overlap ? 0.3 : 0.6 + 0.1 * c);
  }
  return d;
}

Hyperparams small_hp() {
  Hyperparams hp;
  hp.ocsvm.nu = 0.1;
  hp.ocsvm.gamma = 0.5;
  hp.forest.tree_count = 20;
  hp.forest.rng_seed = 9;
  return hp;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dcprophet_pipeline_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Train, RoutingAndManifestAccounting) {
  const auto data = toy_data(200, 10, 1);
  const features::FeatureConfig cfg;
  const auto m = train(data, small_hp(), cfg);
  std::size_t routed = 0, routed_failures = 0, normals = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    normals += data.y[i] == FailureType::Normal;
    if (ocsvm::classify(m.ocsvm, data.x.row(i)) == 1) {
      ++routed;
      routed_failures += is_failure(data.y[i]);
    }
  }
  EXPECT_EQ(m.manifest.ocsvm_train_size, normals);
  EXPECT_EQ(m.manifest.forest_train_size, routed);
  EXPECT_EQ(m.manifest.forest_failures, routed_failures);
  EXPECT_EQ(m.manifest.train_size, data.size());
  EXPECT_EQ(m.manifest.support_vectors, m.ocsvm.support_count());
  EXPECT_EQ(m.forest.tree_count(), 20u);
  EXPECT_EQ(routed_failures, 30u);

  auto hp = small_hp();
  hp.forest_keeps_leaked_normals = false;
  const auto strict = train(data, hp, cfg);
  EXPECT_EQ(strict.manifest.forest_train_size, routed_failures);
}

TEST(Train, Reproducible) {
  const auto data = toy_data(150, 8, 2);
  const features::FeatureConfig cfg;
  const auto a = train(data, small_hp(), cfg);
  const auto b = train(data, small_hp(), cfg);
  EXPECT_EQ(a.manifest.to_json(), b.manifest.to_json());
  EXPECT_EQ(a.forest, b.forest);
  EXPECT_EQ(a.ocsvm.rho(), b.ocsvm.rho());
  EXPECT_EQ(data_digest(data), data_digest(toy_data(150, 8, 2)));
  EXPECT_NE(data_digest(data), data_digest(toy_data(150, 8, 3)));
  EXPECT_EQ(TrainingManifest::from_json(a.manifest.to_json()).to_json(), a.manifest.to_json());
}

TEST(Train, DegenerateInputs) {
  const features::FeatureConfig cfg;
  EXPECT_THROW(train(toy_data(0, 10, 1), small_hp(), cfg), DegenerateTrainingError);
  EXPECT_THROW(train(toy_data(100, 0, 1), small_hp(), cfg), DegenerateTrainingError);
  // Failures identical in distribution to normals, filter tight enough to
  // route nothing.
  auto hp = small_hp();
  hp.ocsvm.nu = 0.05;
  hp.ocsvm.gamma = 1e-4;
  features::LabeledData same{FeatureMatrix(cfg.dimension()), {}};
  const std::vector<double> row(cfg.dimension(), 0.4);
  for (int i = 0; i < 100; ++i) {
    same.x.push_row(row);
    same.y.push_back(i < 97 ? FailureType::Normal : FailureType::SlowReboot);
  }
  EXPECT_THROW(train(same, hp, cfg), DegenerateTrainingError);
}

TEST(Predict, BranchesAndScore) {
  const auto data = toy_data(200, 10, 4);
  const features::FeatureConfig cfg;
  const auto m = train(data, small_hp(), cfg);
  std::size_t seen_routed = 0, seen_filtered = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.x.row(i);
    const auto p = predict_full(m, x);
    EXPECT_EQ(p.decision, ocsvm::decision(m.ocsvm, x));
    EXPECT_EQ(p.routed, p.decision < 0.0);
    EXPECT_EQ(predict(m, x), p.label);
    EXPECT_EQ(score(m, x), p.score);
    EXPECT_GT(p.score, 0.0);
    EXPECT_LE(p.score, 1.0);
    if (p.routed) {
      ++seen_routed;
      const auto v = forest::predict_votes(m.forest, x);
      EXPECT_EQ(p.label, forest::argmax_votes(v));
      EXPECT_DOUBLE_EQ(p.score, 0.5 + 0.5 * (1.0 - double(v[0]) / double(m.forest.tree_count())));
      EXPECT_GE(p.score, 0.5);
      if (is_failure(p.label)) EXPECT_GT(p.score, 0.5);
    } else {
      ++seen_filtered;
      EXPECT_EQ(p.label, FailureType::Normal);
      EXPECT_LE(p.score, 0.25);
    }
  }
  EXPECT_GT(seen_routed, 0u);
  EXPECT_GT(seen_filtered, 0u);
}

TEST(Predict, ForestSkippedBelowFilter) {
  const auto data = toy_data(200, 10, 5);
  const features::FeatureConfig cfg;
  auto m = train(data, small_hp(), cfg);
  m.forest = forest::ForestModel{};  // any descent would fail on the dimension check
  std::size_t filtered = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.x.row(i);
    if (ocsvm::classify(m.ocsvm, x) == 0) {
      ++filtered;
      EXPECT_EQ(predict(m, x), FailureType::Normal);
    } else {
      EXPECT_THROW(predict(m, x), DimensionMismatch);
    }
  }
  EXPECT_GT(filtered, 0u);
}

TEST(Folds, StratifiedAndDeterministic) {
  const auto data = toy_data(103, 7, 6);
  const auto folds = stratified_folds(data.y, 5, 11);
  EXPECT_EQ(folds, stratified_folds(data.y, 5, 11));
  std::array<std::array<std::size_t, 5>, kClassCount> per{};
  std::array<std::size_t, 5> sizes{};
  for (std::size_t i = 0; i < folds.size(); ++i) {
    ASSERT_LT(folds[i], 5u);
    ++per[static_cast<std::size_t>(to_label(data.y[i]))][folds[i]];
    ++sizes[folds[i]];
  }
  for (const auto& c : per) {
    EXPECT_LE(*std::max_element(c.begin(), c.end()) - *std::min_element(c.begin(), c.end()), 1u);
  }
  EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
  EXPECT_THROW(stratified_folds(toy_data(50, 1, 1).y, 5, 0), StratificationError);
}

TEST(Grid, SingleCellAndTieBreaks) {
  const auto data = toy_data(150, 10, 7);
  const features::FeatureConfig cfg;
  GridSpec one;
  one.gammas = {0.5};
  one.nus = {0.1};
  one.tree_counts = {10};
  one.folds = 3;
  const auto r1 = grid_search_cv(data, one, small_hp(), cfg, 3);
  ASSERT_EQ(r1.rows.size(), 1u);
  EXPECT_EQ(r1.best_row, 0u);
  EXPECT_EQ(r1.best.ocsvm.gamma, 0.5);
  EXPECT_EQ(r1.best.forest.tree_count, 10u);
  ASSERT_EQ(r1.rows[0].fold_f3.size(), 3u);

  // Separable data: every cell scores F3 = 1, so the tie-breaks decide.
  GridSpec many;
  many.gammas = {0.5, 0.25};
  many.nus = {0.05, 0.1};
  many.tree_counts = {10, 5};
  many.folds = 3;
  const auto r = grid_search_cv(data, many, small_hp(), cfg, 3);
  ASSERT_EQ(r.rows.size(), 8u);
  for (const auto& row : r.rows) ASSERT_EQ(row.mean_f3, 1.0);
  EXPECT_EQ(r.best.forest.tree_count, 5u);
  EXPECT_EQ(r.best.ocsvm.nu, 0.1);
  EXPECT_EQ(r.best.ocsvm.gamma, 0.5);
  EXPECT_EQ(r.best.forest.rng_seed, small_hp().forest.rng_seed);
  EXPECT_EQ(grid_search_cv(data, many, small_hp(), cfg, 3, 3).best_row, r.best_row);

  std::ostringstream table;
  write_cv_table(table, r);
  EXPECT_EQ(table.str().substr(0, table.str().find('\n')),
            "gamma,nu,trees,mean_f3,mean_stage1_recall,best,f3_fold0,f3_fold1,f3_fold2");
}

TEST(Grid, Validation) {
  GridSpec g;
  g.folds = 1;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = GridSpec{};
  g.nus = {};
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = GridSpec{};
  g.nus = {1.5};
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

TEST(Persistence, BundleAndArchiveRoundTrip) {
  const auto data = toy_data(120, 6, 8);
  const features::FeatureConfig cfg;
  const auto m = train(data, small_hp(), cfg);
  const auto dir = scratch("bundle");
  save_bundle(dir, m);
  const auto file = scratch("archive.dcp");
  save_archive(file, m);
  for (const auto& back : {load_bundle(dir), load_archive(file), load_model(dir), load_model(file)}) {
    EXPECT_EQ(back.forest, m.forest);
    EXPECT_EQ(back.feature_config, m.feature_config);
    EXPECT_EQ(back.manifest.to_json(), m.manifest.to_json());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto a = predict_full(m, data.x.row(i));
      const auto b = predict_full(back, data.x.row(i));
      EXPECT_EQ(a.label, b.label);
      EXPECT_EQ(a.score, b.score);
    }
  }
  std::filesystem::remove(dir / "forest.model");
  EXPECT_THROW(load_bundle(dir), FormatError);
  EXPECT_THROW(load_model(scratch("missing")), Error);
  std::filesystem::remove_all(dir);
  std::filesystem::remove(file);
}
