#pragma once

// One-class SVM with an RBF kernel (nu-parameterized, Schoelkopf et al.).
//
// Dual solved here, with C = 1 / (nu * n):
//
//   min_a  1/2 a^T K a    s.t.  0 <= a_i <= C,  sum_i a_i = 1
//
// and decision(x) = sum_i a_i k(sv_i, x) - rho. Points with decision < 0 lie
// outside the learned support of the normal data.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "dcprophet/matrix.hpp"

namespace dcprophet::ocsvm {

struct OcsvmParams {
  double nu = 0.05;
  double gamma = 1.0 / 72.0;
  double tolerance = 1e-4;
  std::size_t max_iterations = 1'000'000;
  std::size_t cache_mb = 256;  // kernel row cache budget

  void validate() const;
  bool operator==(const OcsvmParams&) const = default;
};

/// exp(-gamma * |a - b|^2). Throws DimensionMismatch.
double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

class OcsvmModel {
 public:
  OcsvmModel() = default;
  OcsvmModel(FeatureMatrix support_vectors, std::vector<double> alphas, double rho, double gamma);

  const FeatureMatrix& support_vectors() const { return support_vectors_; }
  const std::vector<double>& alphas() const { return alphas_; }
  double rho() const { return rho_; }
  double gamma() const { return gamma_; }
  std::size_t dimension() const { return support_vectors_.cols(); }
  std::size_t support_count() const { return alphas_.size(); }

  bool operator==(const OcsvmModel&) const = default;

 private:
  FeatureMatrix support_vectors_;
  std::vector<double> alphas_;
  double rho_ = 0.0;
  double gamma_ = 0.0;

  friend double decision(const OcsvmModel&, std::span<const double>);
};

struct TrainReport {
  std::size_t iterations = 0;
  double kkt_violation = 0.0;  // max_{a_j > 0} G_j - min_{a_i < C} G_i at exit
  double objective = 0.0;      // 1/2 a^T K a
  double upper_bound = 0.0;    // C
  std::vector<std::size_t> support_indices;  // training rows with a > 0
};

/// Trains on normal instances only. Throws InfeasibleNuError when nu * n < 1
/// and ConvergenceError if the violation is still above tolerance after
/// max_iterations.
OcsvmModel train(const FeatureMatrix& normals, const OcsvmParams& params,
                 TrainReport* report = nullptr);

double decision(const OcsvmModel& model, std::span<const double> x);

/// 1 (anomaly, route to stage 2) iff decision < 0.
int classify(const OcsvmModel& model, std::span<const double> x);

/// 1/2 sum_ij a_i a_j k(sv_i, sv_j).
double dual_objective(const OcsvmModel& model);

/// Versioned text format; decision values are bit-identical after a
/// round-trip.
void save(std::ostream& out, const OcsvmModel& model);
OcsvmModel load(std::istream& in);

}  // namespace dcprophet::ocsvm
