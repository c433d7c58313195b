#pragma once
// The three classifiers behind one interface, plus the parameter-setting
// vocabulary shared by config files and grid definitions.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "moyapred/ann.hpp"
#include "moyapred/dataset.hpp"
#include "moyapred/forest.hpp"
#include "moyapred/svm.hpp"

namespace moyapred {

enum class ModelKind : std::uint8_t { ann = 1, svm = 2, forest = 3 };

std::string to_string(ModelKind kind);
// Throws std::invalid_argument("unknown model kind ...").
ModelKind parse_model_kind(const std::string& name);

using Hyperparams = std::variant<ann::Hyperparams, svm::Hyperparams, forest::Hyperparams>;
using TrainedModel = std::variant<ann::Model, svm::Model, forest::Model>;

Hyperparams default_hyperparams(ModelKind kind);
ModelKind kind_of(const Hyperparams& hp);
ModelKind kind_of(const TrainedModel& model);

// Sets one named hyperparameter from text. Names:
//   ann:    learning_rate, batch_size, epochs, hidden (w1,w2,...), hidden_units,
//           hidden_layers, beta1, beta2, epsilon
//   svm:    C, gamma (number or "1/p"), tol, max_passes
//   forest: n_trees, max_depth (count or "none"), min_samples_split,
//           features_per_split (count, "sqrt" or "all"), bootstrap
// hidden_units and hidden_layers rewrite the hidden widths as
// layers x [units]. Throws std::invalid_argument.
void set_hyperparam(Hyperparams& hp, const std::string& name, const std::string& value);

// Stable key = value rendering, used in reports and best-params files.
std::vector<std::pair<std::string, std::string>> describe(const Hyperparams& hp);

// Training output: the model, a scaler fitted on the training rows only, and
// per-kind diagnostics.
struct FittedModel {
  ScalerParams scaler;
  TrainedModel model;
  std::vector<double> trace;  // ann: epoch losses; svm: {iterations, gap}; forest: empty
};

// Fits the scaler on `train`, trains on the scaled rows. Hidden widths and
// features_per_split resolve against the dataset width.
FittedModel fit_model(const Dataset& train, const Hyperparams& hp, std::uint64_t seed,
                      std::size_t workers = 1);

// Scores in [0, 1] (label 1 iff score > 0.5) for raw, unscaled rows.
std::vector<double> predict_scores(const FittedModel& fitted, const Dataset& data);
double predict_score(const FittedModel& fitted, std::span<const double> raw_row);

}  // namespace moyapred
