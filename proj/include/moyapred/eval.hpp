#pragma once
// Splits, confusion matrices, metric suite, confidence intervals and ROC.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace moyapred::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SplitPlan {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

// Per-class test counts floor(n_c * fraction), topped up by largest remainder
// (lower class first on equal remainders) to round(n * fraction) in total.
SplitPlan stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed);

struct FoldPlan {
  std::vector<std::vector<std::size_t>> folds;  // validation indices, ascending

  std::size_t k() const { return folds.size(); }
  // All indices of `universe` outside fold f, ascending.
  std::vector<std::size_t> training_rows(std::size_t f, std::span<const std::size_t> universe) const;
};

// Round-robin over K folds after a seeded shuffle of each class; positives
// are dealt first and negatives continue from the next fold.
FoldPlan stratified_kfold(std::span<const std::size_t> indices, std::span<const int> labels,
                          std::size_t k, std::uint64_t seed);

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth);

enum class Metric { accuracy, sensitivity, specificity, ppv, npv };
inline constexpr Metric kAllMetrics[] = {Metric::accuracy, Metric::sensitivity,
                                         Metric::specificity, Metric::ppv, Metric::npv};
const char* metric_name(Metric m);

// Undefined metrics (zero denominator) are nullopt.
struct MetricSet {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> ppv;
  std::optional<double> npv;
  std::optional<double> auc;

  std::optional<double> get(Metric m) const;
  bool operator==(const MetricSet&) const = default;
};

MetricSet metrics(const ConfusionMatrix& cm);

struct ConfidenceInterval {
  double mean = 0.0;
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  double level = 0.95;
  std::size_t count = 0;      // defined values used
  std::size_t excluded = 0;   // undefined values skipped

  bool has_bounds() const { return lower == lower && upper == upper; }
};

// Two-sided Student-t quantile t_{df, p}.
double student_t_quantile(double p, double df);

// mean +/- t_{K-1,0.975} * s / sqrt(K) with the n-1 sample sd; bounds
// clipped to [0, 1]. Fewer than two values give a point estimate.
ConfidenceInterval fold_ci(std::span<const double> values, double level = 0.95);
// Skips undefined values and counts them.
ConfidenceInterval fold_ci(std::span<const std::optional<double>> values, double level = 0.95);

// Percentile interval of bootstrap replicates around a point estimate;
// bounds are widened to contain the estimate and clipped to [0, 1].
ConfidenceInterval percentile_ci(double estimate, std::vector<double> replicates,
                                 double level = 0.95);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // +inf for the (0, 0) start
  bool operator==(const RocPoint&) const = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// Thresholds sweep the distinct scores in descending order; tied scores form
// one step. Area by the trapezoid rule.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

// P(score+ > score-) + 1/2 P(tie) over all positive x negative pairs.
double auc_concordance_oracle(std::span<const double> scores, std::span<const int> labels);

}  // namespace moyapred::eval
