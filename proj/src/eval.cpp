#include "moyapred/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "moyapred/rng.hpp"

namespace moyapred::eval {

namespace {

std::array<std::vector<std::size_t>, 2> by_class(std::span<const std::size_t> indices,
                                                 std::span<const int> labels) {
  std::array<std::vector<std::size_t>, 2> out;
  for (const auto i : indices) {
    if (i >= labels.size()) throw EvalError("index out of range");
    const int y = labels[i];
    if (y != 0 && y != 1) throw EvalError("labels must be 0 or 1");
    out[static_cast<std::size_t>(y)].push_back(i);
  }
  return out;
}

}  // namespace

SplitPlan stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw EvalError("test fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto classes = by_class(all, labels);
  for (const auto& c : classes) {
    if (c.size() < 2) throw EvalError("each class needs at least 2 rows to stratify");
  }

  const auto n = static_cast<double>(labels.size());
  const auto target = static_cast<std::size_t>(std::llround(n * test_fraction));
  std::array<std::size_t, 2> take{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    const double exact = static_cast<double>(classes[c].size()) * test_fraction;
    take[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - std::floor(exact);
    assigned += take[c];
  }
  // Largest remainder first; class 0 first on equal remainders.
  std::array<std::size_t, 2> rank{0, 1};
  if (remainder[1] > remainder[0]) rank = {1, 0};
  for (std::size_t k = 0; assigned < target && k < 2; ++k) {
    const auto c = rank[k];
    if (take[c] < classes[c].size()) {
      ++take[c];
      ++assigned;
    }
  }

  SplitPlan plan;
  Rng rng(derive_seed(seed, "stratified-split"));
  for (std::size_t c = 0; c < 2; ++c) {
    rng.shuffle(classes[c]);
    plan.test.insert(plan.test.end(), classes[c].begin(),
                     classes[c].begin() + static_cast<std::ptrdiff_t>(take[c]));
    plan.train.insert(plan.train.end(), classes[c].begin() + static_cast<std::ptrdiff_t>(take[c]),
                      classes[c].end());
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

std::vector<std::size_t> FoldPlan::training_rows(std::size_t f,
                                                 std::span<const std::size_t> universe) const {
  const auto& held = folds.at(f);
  std::vector<std::size_t> out;
  out.reserve(universe.size());
  for (const auto i : universe) {
    if (!std::binary_search(held.begin(), held.end(), i)) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan stratified_kfold(std::span<const std::size_t> indices, std::span<const int> labels,
                          std::size_t k, std::uint64_t seed) {
  if (k < 2) throw EvalError("K-fold needs K >= 2");
  if (k > indices.size()) throw EvalError("K exceeds the number of rows");
  auto classes = by_class(indices, labels);
  FoldPlan plan;
  plan.folds.resize(k);
  Rng rng(derive_seed(seed, "stratified-kfold"));
  std::size_t next = 0;
  for (const std::size_t c : {std::size_t{1}, std::size_t{0}}) {
    rng.shuffle(classes[c]);
    for (const auto i : classes[c]) {
      plan.folds[next].push_back(i);
      next = (next + 1) % k;
    }
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw EvalError("confusion: length mismatch");
  if (predicted.empty()) throw EvalError("confusion: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == 1;
    const bool t = truth[i] == 1;
    if (p && t) ++cm.tp;
    else if (p) ++cm.fp;
    else if (t) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::accuracy: return "accuracy";
    case Metric::sensitivity: return "sensitivity";
    case Metric::specificity: return "specificity";
    case Metric::ppv: return "ppv";
    case Metric::npv: return "npv";
  }
  return "?";
}

std::optional<double> MetricSet::get(Metric m) const {
  switch (m) {
    case Metric::accuracy: return accuracy;
    case Metric::sensitivity: return sensitivity;
    case Metric::specificity: return specificity;
    case Metric::ppv: return ppv;
    case Metric::npv: return npv;
  }
  return std::nullopt;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricSet metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EvalError("metrics: empty confusion matrix");
  MetricSet m;
  m.accuracy = ratio(cm.tp + cm.tn, cm.total());
  m.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
  m.specificity = ratio(cm.tn, cm.tn + cm.fp);
  m.ppv = ratio(cm.tp, cm.tp + cm.fp);
  m.npv = ratio(cm.tn, cm.tn + cm.fn);
  return m;
}

double student_t_quantile(double p, double df) {
  const boost::math::students_t dist(df);
  return boost::math::quantile(dist, p);
}

ConfidenceInterval fold_ci(std::span<const double> values, double level) {
  ConfidenceInterval ci;
  ci.level = level;
  ci.count = values.size();
  if (values.empty()) {
    ci.mean = std::numeric_limits<double>::quiet_NaN();
    return ci;
  }
  const double k = static_cast<double>(values.size());
  double sum = 0.0;
  for (const double v : values) sum += v;
  ci.mean = sum / k;
  if (values.size() < 2) return ci;
  double ss = 0.0;
  for (const double v : values) ss += (v - ci.mean) * (v - ci.mean);
  const double sd = std::sqrt(ss / (k - 1.0));
  const double half = student_t_quantile(0.5 + level / 2.0, k - 1.0) * sd / std::sqrt(k);
  ci.lower = std::clamp(ci.mean - half, 0.0, 1.0);
  ci.upper = std::clamp(ci.mean + half, 0.0, 1.0);
  return ci;
}

ConfidenceInterval fold_ci(std::span<const std::optional<double>> values, double level) {
  std::vector<double> defined;
  for (const auto& v : values) {
    if (v) defined.push_back(*v);
  }
  auto ci = fold_ci(std::span<const double>(defined), level);
  ci.excluded = values.size() - defined.size();
  return ci;
}

namespace {

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

ConfidenceInterval percentile_ci(double estimate, std::vector<double> replicates, double level) {
  ConfidenceInterval ci;
  ci.level = level;
  ci.mean = estimate;
  ci.count = replicates.size();
  if (replicates.size() < 2) return ci;
  std::sort(replicates.begin(), replicates.end());
  const double alpha = 1.0 - level;
  ci.lower = std::clamp(std::min(quantile_sorted(replicates, alpha / 2.0), estimate), 0.0, 1.0);
  ci.upper = std::clamp(std::max(quantile_sorted(replicates, 1.0 - alpha / 2.0), estimate), 0.0, 1.0);
  return ci;
}

namespace {

std::pair<std::size_t, std::size_t> class_counts(std::span<const double> scores,
                                                 std::span<const int> labels) {
  if (scores.size() != labels.size()) throw EvalError("scores and labels differ in length");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw EvalError("non-finite score");
    if (labels[i] == 1) ++pos;
    else if (labels[i] != 0) throw EvalError("labels must be 0 or 1");
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw EvalError("ROC needs both classes");
  return {pos, neg};
}

}  // namespace

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const auto [pos, neg] = class_counts(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0;
  std::size_t fp = 0;
  // Twice the area in units of (1/neg) x (1/pos), accumulated exactly.
  std::uint64_t area2 = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    const std::size_t tp_before = tp;
    const std::size_t fp_before = fp;
    for (; k < order.size() && scores[order[k]] == s; ++k) {
      (labels[order[k]] == 1 ? tp : fp) += 1;
    }
    area2 += static_cast<std::uint64_t>(fp - fp_before) * (tp + tp_before);
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  roc.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

double auc_concordance_oracle(std::span<const double> scores, std::span<const int> labels) {
  const auto [pos, neg] = class_counts(scores, labels);
  std::uint64_t twice_wins = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) twice_wins += 2;
      else if (scores[i] == scores[j]) twice_wins += 1;
    }
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace moyapred::eval
