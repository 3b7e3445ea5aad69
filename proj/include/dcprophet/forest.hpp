#pragma once

// Random forest of Gini-split CART trees for the four failure classes.

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "dcprophet/features.hpp"
#include "dcprophet/matrix.hpp"
#include "dcprophet/trace_model.hpp"

namespace dcprophet::forest {

using ClassCounts = std::array<std::uint32_t, kClassCount>;
using VoteCounts = std::array<std::uint32_t, kClassCount>;

struct ForestParams {
  std::size_t tree_count = 100;
  std::size_t mtry = 9;
  std::size_t min_leaf = 1;
  std::optional<std::size_t> max_depth;
  std::uint64_t rng_seed = 0;
  bool bootstrap = true;  // false grows every tree on the full data
  std::size_t threads = 1;

  void validate(std::size_t dimension) const;
};

/// 1 - sum_c p_c^2. Throws std::invalid_argument on all-zero counts.
double gini(const ClassCounts& counts);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;  // rows with x[feature] <= threshold go left
  double decrease = 0.0;   // parent gini - size-weighted child gini
};

/// Smallest impurity decrease accepted as an improvement.
inline constexpr double kMinDecrease = 1e-12;

/// Best split over `features` and every midpoint between consecutive
/// distinct values, maximizing the weighted Gini decrease. Ties keep the
/// earliest feature in `features` and then the lowest threshold. Both
/// children must hold at least `min_leaf` rows.
std::optional<Split> best_split(const FeatureMatrix& x, std::span<const FailureType> y,
                                std::span<const std::size_t> rows,
                                std::span<const std::size_t> features, std::size_t min_leaf = 1);

struct TreeNode {
  static constexpr std::uint32_t kNone = 0xffffffffu;

  std::uint32_t feature = kNone;  // kNone marks a leaf
  double threshold = 0.0;
  std::uint32_t left = kNone;
  std::uint32_t right = kNone;
  FailureType label = FailureType::Normal;  // leaf class
  ClassCounts counts{};                     // training rows that reached the node

  bool is_leaf() const { return feature == kNone; }
  bool operator==(const TreeNode&) const = default;
};

/// Nodes in pre-order; node 0 is the root.
class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  FailureType predict(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t internal_count() const;

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

/// Grows a tree on `batch` (row indices into x/y, duplicates allowed),
/// sampling params.mtry features per node without replacement. Leaves take
/// the majority class, ties to the lowest label.
DecisionTree grow_tree(const FeatureMatrix& x, std::span<const FailureType> y,
                       std::span<const std::size_t> batch, const ForestParams& params,
                       std::mt19937_64& rng);

/// Per-tree generator seed, so trees can grow in any order.
std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t tree_index);

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<DecisionTree> trees, ForestParams params, std::size_t dimension);

  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t tree_count() const { return trees_.size(); }
  /// Internal nodes per feature index over all trees.
  const std::vector<std::uint64_t>& split_counts() const { return split_counts_; }

  /// The first `count` trees as a standalone forest.
  ForestModel prefix(std::size_t count) const;

  bool operator==(const ForestModel& o) const {
    return trees_ == o.trees_ && dimension_ == o.dimension_;
  }

 private:
  std::vector<DecisionTree> trees_;
  ForestParams params_;
  std::size_t dimension_ = 0;
  std::vector<std::uint64_t> split_counts_;
};

/// B trees on independent size-n bootstrap resamples. Deterministic for a
/// given seed regardless of params.threads.
ForestModel train(const FeatureMatrix& x, std::span<const FailureType> y,
                  const ForestParams& params);

/// Draws the bootstrap batch used for tree `tree_index`.
std::vector<std::size_t> bootstrap_batch(std::size_t n, std::mt19937_64& rng);

VoteCounts predict_votes(const ForestModel& model, std::span<const double> x);
/// Highest vote, ties to the lowest label.
FailureType argmax_votes(const VoteCounts& votes);
FailureType predict(const ForestModel& model, std::span<const double> x);

struct SplitCountReport {
  std::vector<std::uint64_t> by_index;
  /// [resource][lag-1]
  std::array<std::vector<std::uint64_t>, kResourceCount> average;
  std::array<std::vector<std::uint64_t>, kResourceCount> peak;
};

SplitCountReport feature_split_counts(const ForestModel& model,
                                      const features::FeatureConfig& layout);

/// Versioned text format with a pre-order node listing per tree.
void save(std::ostream& out, const ForestModel& model);
ForestModel load(std::istream& in);

}  // namespace dcprophet::forest
