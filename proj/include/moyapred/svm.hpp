#pragma once
// Soft-margin RBF support vector machine trained with SMO on the dual.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "moyapred/dataset.hpp"

namespace moyapred::svm {

struct Hyperparams {
  double C = 1.0;
  // RBF width; unset means 1 / p.
  std::optional<double> gamma;
  double tol = 1e-3;
  // Iteration cap is max_passes * n pair updates.
  std::size_t max_passes = 200;

  double resolved_gamma(std::size_t p) const;
  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

struct Model {
  std::size_t width = 0;
  std::vector<double> support_vectors;  // row-major, one row per vector
  std::vector<double> coefficients;     // alpha_i * y_i, y in {-1, +1}
  double bias = 0.0;
  double gamma = 1.0;

  std::size_t support_count() const { return coefficients.size(); }
  std::span<const double> support_vector(std::size_t i) const {
    return {support_vectors.data() + i * width, width};
  }
  bool operator==(const Model&) const = default;
};

struct SolverStats {
  std::size_t iterations = 0;   // accepted pair updates
  bool converged = false;       // maximal KKT violation <= tol
  double final_gap = 0.0;       // max violation m(alpha) - M(alpha)
  std::vector<double> alphas;   // all training duals, row order of the input
  std::vector<double> objective_trace;  // dual objective after each update, if recorded
};

struct FitResult {
  Model model;
  SolverStats stats;
};

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma);

// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j);
// y given as {0,1} labels.
double dual_objective(const Dataset& train, std::span<const double> alphas, double gamma);

FitResult train_svm_smo(const Dataset& train, const Hyperparams& hp, std::uint64_t seed,
                        bool record_objective = false);

double decision_value(const Model& model, std::span<const double> x);

struct Prediction {
  int label = 0;
  double score = 0.5;  // logistic squash of the decision value
};

Prediction predict_svm(const Model& model, std::span<const double> x);

}  // namespace moyapred::svm
