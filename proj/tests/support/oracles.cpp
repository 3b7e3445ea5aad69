#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace oracle {

double ols_last_coefficient(std::span<const double> series, std::size_t k) {
  const auto n = static_cast<Eigen::Index>(series.size());
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  Eigen::VectorXd z(n);
  for (Eigen::Index t = 0; t < n; ++t) z[t] = series[static_cast<std::size_t>(t)] - mean;

  // Rows t = 0 .. n+k-1 of the zero-padded design; both ends padded so the
  // normal equations use full-sample autocovariances.
  const Eigen::Index rows = n + static_cast<Eigen::Index>(k);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(k));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  for (Eigen::Index t = 0; t < rows; ++t) {
    if (t < n) b[t] = z[t];
    for (std::size_t j = 1; j <= k; ++j) {
      const Eigen::Index s = t - static_cast<Eigen::Index>(j);
      if (s >= 0 && s < n) a(t, static_cast<Eigen::Index>(j - 1)) = z[s];
    }
  }
  const Eigen::VectorXd coef = a.householderQr().solve(b);
  return coef[static_cast<Eigen::Index>(k - 1)];
}

namespace {

// Euclidean projection onto {0 <= a <= c, sum a = 1} by bisection on the shift.
Eigen::VectorXd project(const Eigen::VectorXd& v, double c) {
  double lo = v.minCoeff() - c - 1.0, hi = v.maxCoeff() + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double s = (v.array() - mid).max(0.0).min(c).sum();
    (s > 1.0 ? lo : hi) = mid;
  }
  return (v.array() - 0.5 * (lo + hi)).max(0.0).min(c);
}

}  // namespace

double box_simplex_qp(const std::vector<std::vector<double>>& kernel, double c,
                      std::size_t iterations) {
  const auto n = static_cast<Eigen::Index>(kernel.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = kernel[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  const double lipschitz = std::max(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues().maxCoeff(), 1e-12);
  Eigen::VectorXd x = project(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), c);
  Eigen::VectorXd y = x;
  double t = 1.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const Eigen::VectorXd next = project(y - (k * y) / lipschitz, c);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - x);
    x = next;
    t = t_next;
  }
  return 0.5 * x.dot(k * x);
}

std::optional<dcprophet::forest::Split> exhaustive_split(
    const dcprophet::FeatureMatrix& x, std::span<const dcprophet::FailureType> y,
    std::span<const std::size_t> rows, std::span<const std::size_t> features,
    std::size_t min_leaf) {
  using dcprophet::forest::ClassCounts;
  auto counts_of = [&](auto&& keep) {
    ClassCounts c{};
    std::size_t n = 0;
    for (const auto r : rows) {
      if (keep(r)) {
        ++c[static_cast<std::size_t>(y[r])];
        ++n;
      }
    }
    return std::pair{c, n};
  };
  const auto [all, n] = counts_of([](std::size_t) { return true; });
  if (n < 2) return std::nullopt;
  const double parent = dcprophet::forest::gini(all);

  std::optional<dcprophet::forest::Split> best;
  for (const auto f : features) {
    std::set<double> values;
    for (const auto r : rows) values.insert(x(r, f));
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double lo = *it, hi = *std::next(it);
      double thr = 0.5 * (lo + hi);
      if (!(thr < hi)) thr = lo;
      const auto [left, nl] = counts_of([&](std::size_t r) { return x(r, f) <= thr; });
      const auto [right, nr] = counts_of([&](std::size_t r) { return x(r, f) > thr; });
      if (nl < min_leaf || nr < min_leaf) continue;
      const double dec = parent - (static_cast<double>(nl) * dcprophet::forest::gini(left) +
                                   static_cast<double>(nr) * dcprophet::forest::gini(right)) /
                                      static_cast<double>(n);
      if (dec > dcprophet::forest::kMinDecrease && (!best || dec > best->decrease)) {
        best = dcprophet::forest::Split{f, thr, dec};
      }
    }
  }
  return best;
}

double pair_count_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

}  // namespace oracle
