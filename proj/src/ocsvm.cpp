#include "dcprophet/ocsvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <stdexcept>
#include <string>

#include "dcprophet/error.hpp"
#include "dcprophet/text_io.hpp"

namespace dcprophet::ocsvm {
namespace {

constexpr const char* kMagic = "dcprophet-ocsvm";
constexpr int kVersion = 1;

// Curvature floor for the two-coordinate step.
constexpr double kTau = 1e-12;

double squared_distance(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return acc;
}

/// Kernel rows computed on demand and kept in an LRU cache.
class KernelRows {
 public:
  KernelRows(const FeatureMatrix& x, double gamma, std::size_t budget_bytes)
      : x_(x), gamma_(gamma), rows_(x.rows()), where_(x.rows()) {
    const std::size_t row_bytes = std::max<std::size_t>(1, x.rows() * sizeof(double));
    capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
  }

  const std::vector<double>& row(std::size_t i) {
    if (!rows_[i].empty()) {
      lru_.splice(lru_.begin(), lru_, where_[i]);
      return rows_[i];
    }
    if (lru_.size() >= capacity_) {
      const std::size_t victim = lru_.back();
      lru_.pop_back();
      rows_[victim] = std::vector<double>();
    }
    std::vector<double>& r = rows_[i];
    r.resize(x_.rows());
    const std::size_t d = x_.cols();
    const double* xi = x_.row(i).data();
    for (std::size_t k = 0; k < x_.rows(); ++k) {
      r[k] = k == i ? 1.0 : std::exp(-gamma_ * squared_distance(xi, x_.row(k).data(), d));
    }
    lru_.push_front(i);
    where_[i] = lru_.begin();
    return r;
  }

 private:
  const FeatureMatrix& x_;
  double gamma_;
  std::size_t capacity_ = 2;
  std::vector<std::vector<double>> rows_;
  std::list<std::size_t> lru_;
  std::vector<std::list<std::size_t>::iterator> where_;
};

void expect_line(std::istream& in, std::string& line, std::string_view what) {
  if (!text::read_line(in, line)) throw FormatError("ocsvm model: missing " + std::string(what));
}

double keyed_double(std::istream& in, std::string_view key) {
  std::string line;
  do {
    expect_line(in, line, key);
  } while (line.starts_with('#'));
  const auto parts = text::split(line, ' ');
  double v = 0.0;
  if (parts.size() != 2 || parts[0] != key || !text::parse_double(parts[1], v)) {
    throw FormatError("ocsvm model: bad '" + std::string(key) + "' line");
  }
  return v;
}

}  // namespace

void OcsvmParams::validate() const {
  if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("nu must lie in (0, 1]");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (max_iterations == 0) throw std::invalid_argument("max_iterations must be positive");
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  return std::exp(-gamma * squared_distance(a.data(), b.data(), a.size()));
}

OcsvmModel::OcsvmModel(FeatureMatrix support_vectors, std::vector<double> alphas, double rho,
                       double gamma)
    : support_vectors_(std::move(support_vectors)),
      alphas_(std::move(alphas)),
      rho_(rho),
      gamma_(gamma) {
  if (support_vectors_.rows() != alphas_.size()) {
    throw std::invalid_argument("support vector and alpha counts differ");
  }
  if (alphas_.empty()) throw std::invalid_argument("model needs at least one support vector");
  if (!(gamma_ > 0.0)) throw std::invalid_argument("gamma must be positive");
}

OcsvmModel train(const FeatureMatrix& normals, const OcsvmParams& params, TrainReport* report) {
  params.validate();
  const std::size_t n = normals.rows();
  if (n == 0) throw std::invalid_argument("one-class SVM needs at least one training point");
  const double nu_n = params.nu * static_cast<double>(n);
  if (nu_n < 1.0 - 1e-12) {
    throw InfeasibleNuError("nu * n = " + std::to_string(nu_n) + " < 1; raise nu or add data");
  }
  const double upper = std::min(1.0, 1.0 / nu_n);

  // Feasible start: the first floor(nu n) duals at the bound, the remainder on the next one.
  std::vector<double> alpha(n, 0.0);
  const auto full = std::min(n, static_cast<std::size_t>(std::floor(nu_n + 1e-12)));
  for (std::size_t i = 0; i < full; ++i) alpha[i] = upper;
  if (full < n) alpha[full] = std::max(0.0, 1.0 - static_cast<double>(full) * upper);

  KernelRows kernel(normals, params.gamma, params.cache_mb << 20);
  std::vector<double> grad(n, 0.0);  // G = K alpha
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) continue;
    const auto& row = kernel.row(i);
    for (std::size_t k = 0; k < n; ++k) grad[k] += alpha[i] * row[k];
  }

  auto below_upper = [&](std::size_t i) { return alpha[i] < upper; };
  auto above_lower = [&](std::size_t i) { return alpha[i] > 0.0; };

  std::size_t iter = 0;
  double violation = 0.0;
  for (;; ++iter) {
    // Increase the dual with the smallest gradient, decrease one with a larger gradient.
    std::size_t i = n;
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (below_upper(k) && grad[k] < g_min) {
        g_min = grad[k];
        i = k;
      }
      if (above_lower(k)) g_max = std::max(g_max, grad[k]);
    }
    violation = (i == n) ? 0.0 : g_max - g_min;
    if (i == n || violation < params.tolerance) break;
    if (iter >= params.max_iterations) throw ConvergenceError(violation, iter);

    const auto& row_i = kernel.row(i);
    std::size_t j = n;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (!above_lower(k)) continue;
      const double b = grad[k] - g_min;
      if (b <= 0.0) continue;
      double a = 2.0 - 2.0 * row_i[k];
      if (a <= 0.0) a = kTau;
      const double gain = b * b / a;
      if (gain > best) {
        best = gain;
        j = k;
      }
    }
    if (j == n) break;

    double a = 2.0 - 2.0 * row_i[j];
    if (a <= 0.0) a = kTau;
    double step = (grad[j] - grad[i]) / a;
    bool i_hits = false;
    bool j_hits = false;
    if (step >= upper - alpha[i]) {
      step = upper - alpha[i];
      i_hits = true;
    }
    if (step >= alpha[j]) {
      step = alpha[j];
      j_hits = true;
      i_hits = alpha[i] + step >= upper;
    }
    alpha[i] = i_hits ? upper : alpha[i] + step;
    alpha[j] = j_hits ? 0.0 : alpha[j] - step;

    const auto& ri = kernel.row(i);
    const auto& rj = kernel.row(j);
    for (std::size_t k = 0; k < n; ++k) grad[k] += step * (ri[k] - rj[k]);
  }

  // rho from the KKT conditions: free duals sit on the boundary.
  double free_sum = 0.0;
  std::size_t free_count = 0;
  double lb = -std::numeric_limits<double>::infinity();  // max G over duals at the bound
  double ub = std::numeric_limits<double>::infinity();   // min G over zero duals
  for (std::size_t k = 0; k < n; ++k) {
    if (alpha[k] >= upper) {
      lb = std::max(lb, grad[k]);
    } else if (alpha[k] <= 0.0) {
      ub = std::min(ub, grad[k]);
    } else {
      free_sum += grad[k];
      ++free_count;
    }
  }
  double rho = 0.0;
  if (free_count > 0) {
    rho = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(ub)) {
    rho = 0.5 * (lb + ub);
  } else {
    // Every dual at the bound (nu = 1): any rho >= lb is optimal; step just
    // past it so every training point falls outside.
    rho = lb + params.tolerance;
  }

  FeatureMatrix sv(normals.cols());
  std::vector<double> sv_alpha;
  std::vector<std::size_t> sv_index;
  double objective = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (alpha[k] <= 0.0) continue;
    sv.push_row(normals.row(k));
    sv_alpha.push_back(alpha[k]);
    sv_index.push_back(k);
    objective += 0.5 * alpha[k] * grad[k];
  }
  if (report) {
    report->iterations = iter;
    report->kkt_violation = violation;
    report->objective = objective;
    report->upper_bound = upper;
    report->support_indices = std::move(sv_index);
  }
  return OcsvmModel(std::move(sv), std::move(sv_alpha), rho, params.gamma);
}

double decision(const OcsvmModel& model, std::span<const double> x) {
  const FeatureMatrix& sv = model.support_vectors_;
  if (x.size() != sv.cols()) throw DimensionMismatch(sv.cols(), x.size());
  const std::size_t d = sv.cols();
  double acc = 0.0;
  for (std::size_t i = 0; i < model.alphas_.size(); ++i) {
    acc += model.alphas_[i] * std::exp(-model.gamma_ * squared_distance(sv.row(i).data(), x.data(), d));
  }
  return acc - model.rho_;
}

int classify(const OcsvmModel& model, std::span<const double> x) {
  return decision(model, x) < 0.0 ? 1 : 0;
}

double dual_objective(const OcsvmModel& model) {
  const FeatureMatrix& sv = model.support_vectors();
  const auto& a = model.alphas();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      acc += a[i] * a[j] * rbf_kernel(sv.row(i), sv.row(j), model.gamma());
    }
  }
  return 0.5 * acc;
}

void save(std::ostream& out, const OcsvmModel& model) {
  std::string buf;
  buf += kMagic;
  buf += ' ' + std::to_string(kVersion) + '\n';
  buf +=
      "# nu-parameterized one-class SVM, kernel k(a,b) = exp(-gamma * |a-b|^2)\n"
      "# dual: min 1/2 a'Ka  s.t. 0 <= a_i <= 1/(nu n), sum a_i = 1\n"
      "# primal margin constraint: <w, phi(x_i)> >= rho - xi_i\n"
      "# decision(x) = sum_i a_i k(sv_i, x) - rho; anomaly iff decision < 0\n";
  buf += "gamma ";
  text::append_double(buf, model.gamma());
  buf += "\nrho ";
  text::append_double(buf, model.rho());
  buf += "\nsupport_vectors " + std::to_string(model.support_count()) + ' ' +
         std::to_string(model.dimension()) + '\n';
  out << buf;
  for (std::size_t i = 0; i < model.support_count(); ++i) {
    buf.clear();
    text::append_double(buf, model.alphas()[i]);
    for (const double v : model.support_vectors().row(i)) {
      buf += ' ';
      text::append_double(buf, v);
    }
    buf += '\n';
    out << buf;
  }
}

OcsvmModel load(std::istream& in) {
  std::string line;
  expect_line(in, line, "header");
  if (line != std::string(kMagic) + ' ' + std::to_string(kVersion)) {
    throw FormatError("not a version-" + std::to_string(kVersion) + " ocsvm model");
  }
  const double gamma = keyed_double(in, "gamma");
  const double rho = keyed_double(in, "rho");
  expect_line(in, line, "support_vectors");
  const auto head = text::split(line, ' ');
  std::uint64_t count = 0;
  std::uint64_t dim = 0;
  if (head.size() != 3 || head[0] != "support_vectors" || !text::parse_u64(head[1], count) ||
      !text::parse_u64(head[2], dim)) {
    throw FormatError("ocsvm model: bad support_vectors line");
  }
  FeatureMatrix sv(dim);
  sv.reserve_rows(count);
  std::vector<double> alphas;
  alphas.reserve(count);
  std::vector<double> row(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    expect_line(in, line, "support vector row");
    const auto f = text::split(line, ' ');
    double a = 0.0;
    if (f.size() != dim + 1 || !text::parse_double(f[0], a)) throw FormatError("ocsvm model: bad row");
    for (std::size_t k = 0; k < dim; ++k) {
      if (!text::parse_double(f[k + 1], row[k])) throw FormatError("ocsvm model: bad value");
    }
    alphas.push_back(a);
    sv.push_row(row);
  }
  return OcsvmModel(std::move(sv), std::move(alphas), rho, gamma);
}

}  // namespace dcprophet::ocsvm
