#include "dcprophet/forest.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dcprophet/error.hpp"
#include "dcprophet/parallel.hpp"
#include "dcprophet/text_io.hpp"

namespace dcprophet::forest {
namespace {

constexpr const char* kMagic = "dcprophet-forest";
constexpr int kVersion = 1;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

FailureType majority(const ClassCounts& counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kClassCount; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<FailureType>(best);
}

bool is_pure(const ClassCounts& counts) {
  return std::count_if(counts.begin(), counts.end(), [](std::uint32_t c) { return c > 0; }) <= 1;
}

double midpoint(double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  return mid < hi ? mid : lo;
}

struct Sorted {
  double value;
  std::uint8_t label;
};

/// Best split of rows (given as label/value pairs per feature) using a
/// sorted sweep; shared by best_split and the tree grower.
std::optional<Split> sweep_best(const FeatureMatrix& x, std::span<const FailureType> y,
                                std::span<const std::size_t> rows,
                                std::span<const std::size_t> features, std::size_t min_leaf,
                                std::vector<Sorted>& scratch) {
  const std::size_t m = rows.size();
  if (m < 2) return std::nullopt;
  ClassCounts total{};
  for (const std::size_t r : rows) ++total[to_label(y[r])];
  const double parent = gini(total);
  if (parent <= 0.0) return std::nullopt;

  std::optional<Split> best;
  const double dm = static_cast<double>(m);
  for (const std::size_t f : features) {
    scratch.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      scratch[k] = {x(rows[k], f), static_cast<std::uint8_t>(to_label(y[rows[k]]))};
    }
    std::sort(scratch.begin(), scratch.end(),
              [](const Sorted& a, const Sorted& b) { return a.value < b.value; });
    ClassCounts left{};
    for (std::size_t k = 0; k + 1 < m; ++k) {
      ++left[scratch[k].label];
      if (scratch[k].value == scratch[k + 1].value) continue;
      const std::size_t n_left = k + 1;
      const std::size_t n_right = m - n_left;
      if (n_left < min_leaf || n_right < min_leaf) continue;
      ClassCounts right{};
      for (std::size_t c = 0; c < kClassCount; ++c) right[c] = total[c] - left[c];
      const double decrease =
          parent - (static_cast<double>(n_left) * gini(left) +
                    static_cast<double>(n_right) * gini(right)) / dm;
      if (decrease > kMinDecrease && (!best || decrease > best->decrease)) {
        best = Split{f, midpoint(scratch[k].value, scratch[k + 1].value), decrease};
      }
    }
  }
  return best;
}

}  // namespace

void ForestParams::validate(std::size_t dimension) const {
  if (tree_count == 0) throw std::invalid_argument("tree_count must be at least 1");
  if (mtry == 0 || mtry > dimension) {
    throw std::invalid_argument("mtry must lie in 1.." + std::to_string(dimension));
  }
  if (min_leaf == 0) throw std::invalid_argument("min_leaf must be at least 1");
}

double gini(const ClassCounts& counts) {
  std::uint64_t total = 0;
  for (const auto c : counts) total += c;
  if (total == 0) throw std::invalid_argument("gini of an empty node");
  const double n = static_cast<double>(total);
  double sum_sq = 0.0;
  for (const auto c : counts) {
    const double p = static_cast<double>(c) / n;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

std::optional<Split> best_split(const FeatureMatrix& x, std::span<const FailureType> y,
                                std::span<const std::size_t> rows,
                                std::span<const std::size_t> features, std::size_t min_leaf) {
  std::vector<Sorted> scratch;
  return sweep_best(x, y, rows, features, std::max<std::size_t>(1, min_leaf), scratch);
}

FailureType DecisionTree::predict(std::span<const double> x) const {
  std::uint32_t i = 0;
  for (;;) {
    const TreeNode& node = nodes_[i];
    if (node.is_leaf()) return node.label;
    i = x[node.feature] <= node.threshold ? node.left : node.right;
  }
}

std::size_t DecisionTree::internal_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

DecisionTree grow_tree(const FeatureMatrix& x, std::span<const FailureType> y,
                       std::span<const std::size_t> batch, const ForestParams& params,
                       std::mt19937_64& rng) {
  if (batch.empty()) throw std::invalid_argument("cannot grow a tree on an empty batch");
  params.validate(x.cols());

  std::vector<std::size_t> rows(batch.begin(), batch.end());
  std::vector<std::size_t> feature_pool(x.cols());
  std::iota(feature_pool.begin(), feature_pool.end(), 0);
  std::vector<Sorted> scratch;
  std::vector<TreeNode> nodes;

  struct Task {
    std::size_t begin, end, depth;
    std::uint32_t parent;
    bool left;
  };
  std::vector<Task> stack{{0, rows.size(), 0, TreeNode::kNone, false}};

  while (!stack.empty()) {
    const Task task = stack.back();
    stack.pop_back();
    const auto index = static_cast<std::uint32_t>(nodes.size());
    if (task.parent != TreeNode::kNone) {
      (task.left ? nodes[task.parent].left : nodes[task.parent].right) = index;
    }

    TreeNode node;
    for (std::size_t k = task.begin; k < task.end; ++k) ++node.counts[to_label(y[rows[k]])];
    node.label = majority(node.counts);

    const std::size_t size = task.end - task.begin;
    const bool depth_capped = params.max_depth && task.depth >= *params.max_depth;
    std::optional<Split> split;
    if (!is_pure(node.counts) && size >= 2 * params.min_leaf && !depth_capped) {
      for (std::size_t k = 0; k < params.mtry; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, feature_pool.size() - 1);
        std::swap(feature_pool[k], feature_pool[pick(rng)]);
      }
      const std::span<const std::size_t> candidates(feature_pool.data(), params.mtry);
      split = sweep_best(x, y, std::span<const std::size_t>(rows).subspan(task.begin, size),
                         candidates, params.min_leaf, scratch);
    }
    if (!split) {
      nodes.push_back(node);
      continue;
    }

    node.feature = static_cast<std::uint32_t>(split->feature);
    node.threshold = split->threshold;
    nodes.push_back(node);
    const auto mid = std::stable_partition(
        rows.begin() + static_cast<std::ptrdiff_t>(task.begin),
        rows.begin() + static_cast<std::ptrdiff_t>(task.end),
        [&](std::size_t r) { return x(r, split->feature) <= split->threshold; });
    const auto cut = static_cast<std::size_t>(mid - rows.begin());
    // Right pushed first so the left subtree follows its parent (pre-order).
    stack.push_back({cut, task.end, task.depth + 1, index, false});
    stack.push_back({task.begin, cut, task.depth + 1, index, true});
  }
  return DecisionTree(std::move(nodes));
}

std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t tree_index) {
  return splitmix64(forest_seed ^ splitmix64(static_cast<std::uint64_t>(tree_index) + 1));
}

std::vector<std::size_t> bootstrap_batch(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> batch(n);
  for (auto& b : batch) b = pick(rng);
  return batch;
}

ForestModel::ForestModel(std::vector<DecisionTree> trees, ForestParams params,
                         std::size_t dimension)
    : trees_(std::move(trees)), params_(params), dimension_(dimension), split_counts_(dimension, 0) {
  params_.tree_count = trees_.size();
  for (const auto& tree : trees_) {
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) continue;
      if (node.feature >= dimension_) throw std::invalid_argument("split feature outside dimension");
      ++split_counts_[node.feature];
    }
  }
}

ForestModel ForestModel::prefix(std::size_t count) const {
  count = std::min(count, trees_.size());
  return ForestModel(std::vector<DecisionTree>(trees_.begin(), trees_.begin() + static_cast<std::ptrdiff_t>(count)),
                     params_, dimension_);
}

ForestModel train(const FeatureMatrix& x, std::span<const FailureType> y,
                  const ForestParams& params) {
  if (x.rows() == 0) throw std::invalid_argument("cannot train a forest on empty data");
  if (x.rows() != y.size()) throw DimensionMismatch(x.rows(), y.size());
  params.validate(x.cols());

  std::vector<DecisionTree> trees(params.tree_count);
  parallel_for(params.tree_count, params.threads, [&](std::size_t t) {
    std::mt19937_64 rng(tree_seed(params.rng_seed, t));
    std::vector<std::size_t> batch;
    if (params.bootstrap) {
      batch = bootstrap_batch(x.rows(), rng);
    } else {
      batch.resize(x.rows());
      std::iota(batch.begin(), batch.end(), 0);
    }
    trees[t] = grow_tree(x, y, batch, params, rng);
  });
  return ForestModel(std::move(trees), params, x.cols());
}

VoteCounts predict_votes(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.dimension()) throw DimensionMismatch(model.dimension(), x.size());
  VoteCounts votes{};
  for (const auto& tree : model.trees()) ++votes[to_label(tree.predict(x))];
  return votes;
}

FailureType argmax_votes(const VoteCounts& votes) { return majority(votes); }

FailureType predict(const ForestModel& model, std::span<const double> x) {
  return argmax_votes(predict_votes(model, x));
}

SplitCountReport feature_split_counts(const ForestModel& model,
                                      const features::FeatureConfig& layout) {
  if (layout.dimension() != model.dimension()) {
    throw DimensionMismatch(model.dimension(), layout.dimension());
  }
  SplitCountReport report;
  report.by_index = model.split_counts();
  for (std::size_t r = 0; r < kResourceCount; ++r) {
    report.average[r].assign(layout.lags(), 0);
    report.peak[r].assign(layout.lags(), 0);
  }
  for (std::size_t i = 0; i < report.by_index.size(); ++i) {
    const auto slot = layout.slot(i);
    auto& bucket = slot.kind == features::ValueKind::Average ? report.average : report.peak;
    bucket[index_of(slot.resource)][slot.lag - 1] = report.by_index[i];
  }
  return report;
}

void save(std::ostream& out, const ForestModel& model) {
  const ForestParams& p = model.params();
  std::string buf;
  buf += std::string(kMagic) + ' ' + std::to_string(kVersion) + '\n';
  buf += "# pre-order nodes; I <feature> <threshold> <counts..> goes left when x[feature] <= threshold\n";
  buf += "# L <class> <counts..> is a leaf; counts are training rows per class 0..3\n";
  buf += "dimension " + std::to_string(model.dimension()) + '\n';
  buf += "params trees=" + std::to_string(model.tree_count()) + " mtry=" + std::to_string(p.mtry) +
         " min_leaf=" + std::to_string(p.min_leaf) + " max_depth=" +
         (p.max_depth ? std::to_string(*p.max_depth) : std::string("none")) +
         " seed=" + std::to_string(p.rng_seed) + " bootstrap=" + (p.bootstrap ? "1" : "0") + '\n';
  out << buf;
  for (std::size_t t = 0; t < model.tree_count(); ++t) {
    const auto& nodes = model.trees()[t].nodes();
    out << "tree " << t << ' ' << nodes.size() << '\n';
    for (const auto& node : nodes) {
      buf.clear();
      if (node.is_leaf()) {
        buf += "L " + std::to_string(to_label(node.label));
      } else {
        buf += "I " + std::to_string(node.feature) + ' ';
        text::append_double(buf, node.threshold);
      }
      for (const auto c : node.counts) buf += ' ' + std::to_string(c);
      buf += '\n';
      out << buf;
    }
  }
}

namespace {

// Links children of the pre-order listing; returns one past the subtree at `at`.
std::size_t link_preorder(std::vector<TreeNode>& nodes, std::size_t at) {
  if (at >= nodes.size()) throw FormatError("forest model: truncated tree");
  if (nodes[at].is_leaf()) return at + 1;
  nodes[at].left = static_cast<std::uint32_t>(at + 1);
  const std::size_t right = link_preorder(nodes, at + 1);
  nodes[at].right = static_cast<std::uint32_t>(right);
  return link_preorder(nodes, right);
}

}  // namespace

ForestModel load(std::istream& in) {
  std::string line;
  if (!text::read_line(in, line) || line != std::string(kMagic) + ' ' + std::to_string(kVersion)) {
    throw FormatError("not a version-" + std::to_string(kVersion) + " forest model");
  }
  auto next = [&]() -> std::string& {
    do {
      if (!text::read_line(in, line)) throw FormatError("forest model: unexpected end of file");
    } while (line.starts_with('#'));
    return line;
  };

  std::uint64_t dimension = 0;
  {
    const auto f = text::split(next(), ' ');
    if (f.size() != 2 || f[0] != "dimension" || !text::parse_u64(f[1], dimension)) {
      throw FormatError("forest model: bad dimension line");
    }
  }
  ForestParams params;
  std::uint64_t trees = 0;
  {
    const auto f = text::split(next(), ' ');
    if (f.empty() || f[0] != "params") throw FormatError("forest model: bad params line");
    for (std::size_t k = 1; k < f.size(); ++k) {
      const auto eq = f[k].find('=');
      if (eq == std::string_view::npos) throw FormatError("forest model: bad params entry");
      const auto key = f[k].substr(0, eq);
      const auto val = f[k].substr(eq + 1);
      std::uint64_t v = 0;
      if (key == "max_depth" && val == "none") continue;
      if (!text::parse_u64(val, v)) throw FormatError("forest model: bad params value");
      if (key == "trees") trees = v;
      else if (key == "mtry") params.mtry = v;
      else if (key == "min_leaf") params.min_leaf = v;
      else if (key == "max_depth") params.max_depth = v;
      else if (key == "seed") params.rng_seed = v;
      else if (key == "bootstrap") params.bootstrap = v != 0;
    }
  }

  std::vector<DecisionTree> forest;
  forest.reserve(trees);
  for (std::uint64_t t = 0; t < trees; ++t) {
    const auto head = text::split(next(), ' ');
    std::uint64_t count = 0;
    if (head.size() != 3 || head[0] != "tree" || !text::parse_u64(head[2], count) || count == 0) {
      throw FormatError("forest model: bad tree header");
    }
    std::vector<TreeNode> nodes(count);
    for (auto& node : nodes) {
      const auto f = text::split(next(), ' ');
      std::size_t at = 1;
      if (f[0] == "L" && f.size() == 2 + kClassCount) {
        std::uint64_t label = 0;
        if (!text::parse_u64(f[1], label) || label >= kClassCount) throw FormatError("forest model: bad leaf");
        node.label = static_cast<FailureType>(label);
        at = 2;
      } else if (f[0] == "I" && f.size() == 3 + kClassCount) {
        std::uint64_t feature = 0;
        if (!text::parse_u64(f[1], feature) || feature >= dimension ||
            !text::parse_double(f[2], node.threshold)) {
          throw FormatError("forest model: bad internal node");
        }
        node.feature = static_cast<std::uint32_t>(feature);
        at = 3;
      } else {
        throw FormatError("forest model: bad node line");
      }
      for (std::size_t c = 0; c < kClassCount; ++c) {
        std::uint64_t v = 0;
        if (!text::parse_u64(f[at + c], v)) throw FormatError("forest model: bad class count");
        node.counts[c] = static_cast<std::uint32_t>(v);
      }
      if (!node.is_leaf()) node.label = majority(node.counts);
    }
    if (link_preorder(nodes, 0) != nodes.size()) throw FormatError("forest model: trailing nodes in tree");
    forest.emplace_back(std::move(nodes));
  }
  return ForestModel(std::move(forest), params, dimension);
}

}  // namespace dcprophet::forest
