#pragma once
// Evaluation protocol: stratified hold-out split, optional grid search by
// stratified K-fold CV, K fold models scored on the untouched test split,
// fold-based t intervals and ROC on the fold-mean test scores.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moyapred/eval.hpp"
#include "moyapred/model.hpp"

namespace moyapred {

struct GridAxis {
  std::string name;                 // hyperparameter name, see set_hyperparam
  std::vector<std::string> values;  // in declaration order
};

struct GridCell {
  std::string label;  // "name=value,name=value"
  Hyperparams hp;
};

// Cartesian product of the axes; the first axis varies slowest.
struct Grid {
  std::vector<GridAxis> axes;

  std::size_t size() const;
  std::vector<GridCell> cells(const Hyperparams& base) const;
};

// lr {0.001, 0.01, 0.1} x batch {16, 32, 64} x hidden units {50, 100, 200} x
// hidden layers {1, 2}.
Grid default_ann_grid();
// C {0.1, 1, 10, 100} x gamma {1/p, 0.01, 0.1, 1}.
Grid default_svm_grid();
// n_trees {100} x features_per_split {sqrt, all} x max_depth {none, 5}.
Grid default_forest_grid();
Grid default_grid(ModelKind kind);

struct CvEntry {
  std::size_t cell = 0;
  std::size_t fold = 0;
  std::optional<double> accuracy;  // nullopt when training diverged
  std::string error;
};

struct CellSummary {
  std::string label;
  std::optional<double> mean_accuracy;  // over completed folds
  std::size_t completed_folds = 0;
  bool flagged = false;  // at least one fold diverged
};

struct GridSearchResult {
  std::size_t best = 0;
  Hyperparams best_hp;
  std::vector<CellSummary> cells;
  std::vector<CvEntry> table;  // cells x folds, cell-major
};

// Best cell = highest mean validation accuracy; ties go to the earlier cell.
GridSearchResult grid_search(const Dataset& train, const Hyperparams& base, const Grid& grid,
                             std::size_t k, std::uint64_t seed, std::size_t workers = 1);

enum class ProtocolMode { fold_on_test, retrain_bootstrap };

std::string to_string(ProtocolMode mode);
ProtocolMode parse_protocol_mode(const std::string& name);

struct ProtocolConfig {
  double test_fraction = 0.2;
  std::size_t folds = 5;
  ProtocolMode mode = ProtocolMode::fold_on_test;
  std::size_t bootstrap_resamples = 1000;
  std::optional<Grid> grid;  // grid search runs only with two or more cells
  std::size_t workers = 1;   // never changes results
};

struct FoldResult {
  eval::ConfusionMatrix confusion;
  eval::MetricSet metrics;
  std::string model_digest;  // FNV-1a of the serialized fitted model
};

struct ModelReport {
  ModelKind kind = ModelKind::ann;
  ProtocolMode mode = ProtocolMode::fold_on_test;
  Hyperparams hp;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t test_positives = 0;
  std::optional<GridSearchResult> grid;
  std::vector<FoldResult> folds;  // one per fold model, or one for retrain mode
  // Per-metric interval: across folds (t) or bootstrap percentile.
  std::vector<std::pair<eval::Metric, eval::ConfidenceInterval>> summary;
  eval::ConfidenceInterval auc_ci;
  std::vector<double> test_scores;  // fold-mean scores, test row order
  std::vector<int> test_labels;
  eval::RocCurve roc;

  const eval::ConfidenceInterval& interval(eval::Metric m) const;
};

// Hold-out split is computed from the dataset and seed.
ModelReport run_protocol(const Dataset& data, const Hyperparams& hp, const ProtocolConfig& config,
                         std::uint64_t seed);
// Same protocol on a caller-supplied split.
ModelReport run_protocol_on_split(const Dataset& data, const eval::SplitPlan& split,
                                  const Hyperparams& hp, const ProtocolConfig& config,
                                  std::uint64_t seed);

nlohmann::ordered_json to_json(const ModelReport& report);
nlohmann::ordered_json to_json(const eval::ConfidenceInterval& ci);

// Comparison table with accuracy, sensitivity, specificity, PPV and NPV,
// each as "mean% (lower%-upper%)".
std::string comparison_table(const std::vector<ModelReport>& reports);

// "# moyapred-roc v1" then threshold,fpr,tpr rows.
std::string roc_csv(const eval::RocCurve& roc);

}  // namespace moyapred
