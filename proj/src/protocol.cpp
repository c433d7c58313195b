#include "moyapred/protocol.hpp"

#include <cmath>
#include <cstdio>

#include "moyapred/log.hpp"
#include "moyapred/parallel.hpp"
#include "moyapred/rng.hpp"
#include "moyapred/serialize.hpp"

namespace moyapred {

std::size_t Grid::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

std::vector<GridCell> Grid::cells(const Hyperparams& base) const {
  std::vector<GridCell> out;
  const std::size_t total = size();
  for (const auto& a : axes) {
    if (a.values.empty()) throw std::invalid_argument("grid axis '" + a.name + "' has no values");
  }
  for (std::size_t c = 0; c < total; ++c) {
    GridCell cell{"", base};
    std::size_t rest = c;
    std::vector<std::size_t> pick(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      pick[k] = rest % axes[k].values.size();
      rest /= axes[k].values.size();
    }
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const auto& value = axes[k].values[pick[k]];
      set_hyperparam(cell.hp, axes[k].name, value);
      if (!cell.label.empty()) cell.label += ",";
      cell.label += axes[k].name + "=" + value;
    }
    if (cell.label.empty()) cell.label = "default";
    out.push_back(std::move(cell));
  }
  return out;
}

Grid default_ann_grid() {
  return {{{"learning_rate", {"0.001", "0.01", "0.1"}},
           {"batch_size", {"16", "32", "64"}},
           {"hidden_units", {"50", "100", "200"}},
           {"hidden_layers", {"1", "2"}}}};
}

Grid default_svm_grid() {
  return {{{"C", {"0.1", "1", "10", "100"}}, {"gamma", {"1/p", "0.01", "0.1", "1"}}}};
}

Grid default_forest_grid() {
  return {{{"n_trees", {"100"}},
           {"features_per_split", {"sqrt", "all"}},
           {"max_depth", {"none", "5"}}}};
}

Grid default_grid(ModelKind kind) {
  switch (kind) {
    case ModelKind::ann: return default_ann_grid();
    case ModelKind::svm: return default_svm_grid();
    case ModelKind::forest: return default_forest_grid();
  }
  return {};
}

namespace {

double accuracy_of(const std::vector<double>& scores, const Dataset& data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    correct += ann::classify(scores[i]) == data.label(i) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows());
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

bool is_training_failure(const std::exception& e) {
  return dynamic_cast<const ann::DivergenceError*>(&e) != nullptr;
}

}  // namespace

GridSearchResult grid_search(const Dataset& train, const Hyperparams& base, const Grid& grid,
                             std::size_t k, std::uint64_t seed, std::size_t workers) {
  const auto cells = grid.cells(base);
  if (cells.empty()) throw std::invalid_argument("grid search needs at least one cell");
  const auto universe = iota_indices(train.rows());
  const auto plan = eval::stratified_kfold(universe, train.labels(), k, derive_seed(seed, "folds"));

  // Flattened cell-major jobs; seeds depend only on (seed, fold).
  auto table = parallel_map<CvEntry>(cells.size() * k, workers, [&](std::size_t job) {
    CvEntry entry{job / k, job % k, std::nullopt, {}};
    const Dataset fit_rows = train.subset(plan.training_rows(entry.fold, universe));
    const Dataset held = train.subset(plan.folds[entry.fold]);
    try {
      const auto fitted =
          fit_model(fit_rows, cells[entry.cell].hp, derive_seed(seed, "fold-model", entry.fold));
      entry.accuracy = accuracy_of(predict_scores(fitted, held), held);
    } catch (const std::exception& e) {
      if (!is_training_failure(e)) throw;
      entry.error = e.what();
    }
    return entry;
  });

  GridSearchResult result;
  result.table = std::move(table);
  std::optional<double> best_mean;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellSummary s{cells[c].label, std::nullopt, 0, false};
    double sum = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      const auto& e = result.table[c * k + f];
      if (e.accuracy) {
        sum += *e.accuracy;
        ++s.completed_folds;
      } else {
        s.flagged = true;
      }
    }
    if (s.completed_folds > 0) s.mean_accuracy = sum / static_cast<double>(s.completed_folds);
    if (s.flagged) log::warn("grid cell '" + s.label + "' diverged on some folds");
    if (s.mean_accuracy && (!best_mean || *s.mean_accuracy > *best_mean)) {
      best_mean = s.mean_accuracy;
      result.best = c;
    }
    result.cells.push_back(std::move(s));
  }
  if (!best_mean) throw std::runtime_error("grid search: every cell diverged");
  result.best_hp = cells[result.best].hp;
  return result;
}

std::string to_string(ProtocolMode mode) {
  return mode == ProtocolMode::fold_on_test ? "fold-on-test" : "retrain-bootstrap";
}

ProtocolMode parse_protocol_mode(const std::string& name) {
  const auto n = to_lower(trim(name));
  if (n == "fold-on-test") return ProtocolMode::fold_on_test;
  if (n == "retrain-bootstrap") return ProtocolMode::retrain_bootstrap;
  throw std::invalid_argument("unknown protocol '" + name + "'");
}

const eval::ConfidenceInterval& ModelReport::interval(eval::Metric m) const {
  for (const auto& [metric, ci] : summary) {
    if (metric == m) return ci;
  }
  throw std::out_of_range("metric not in report");
}

namespace {

std::vector<int> labels_from_scores(const std::vector<double>& scores) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (const double s : scores) out.push_back(ann::classify(s));
  return out;
}

bool both_classes(const std::vector<int>& labels) {
  bool seen[2] = {false, false};
  for (const int y : labels) seen[y] = true;
  return seen[0] && seen[1];
}

FoldResult score_fold(const FittedModel& fitted, const std::vector<double>& scores,
                      const std::vector<int>& truth) {
  FoldResult r;
  r.confusion = eval::confusion(labels_from_scores(scores), truth);
  r.metrics = eval::metrics(r.confusion);
  if (both_classes(truth)) r.metrics.auc = eval::roc_curve(scores, truth).auc;
  r.model_digest = fnv1a_hex(serialize_fitted(fitted));
  return r;
}

}  // namespace

ModelReport run_protocol(const Dataset& data, const Hyperparams& hp, const ProtocolConfig& config,
                         std::uint64_t seed) {
  const auto split =
      eval::stratified_split(data.labels(), config.test_fraction, derive_seed(seed, "split"));
  return run_protocol_on_split(data, split, hp, config, seed);
}

ModelReport run_protocol_on_split(const Dataset& data, const eval::SplitPlan& split,
                                  const Hyperparams& hp, const ProtocolConfig& config,
                                  std::uint64_t seed) {
  if (split.test.empty()) throw std::invalid_argument("protocol needs a non-empty test split");
  const Dataset train = data.subset(split.train);
  const Dataset test = data.subset(split.test);
  require_both_classes(train, "run_protocol");

  ModelReport report;
  report.kind = kind_of(hp);
  report.mode = config.mode;
  report.hp = hp;
  report.train_rows = train.rows();
  report.test_rows = test.rows();
  report.test_positives = test.positives();
  report.test_labels = test.labels();

  if (config.grid && config.grid->size() > 1) {
    report.grid = grid_search(train, hp, *config.grid, config.folds, seed, config.workers);
    report.hp = report.grid->best_hp;
  } else if (config.grid && config.grid->size() == 1) {
    report.hp = config.grid->cells(hp).front().hp;
  }

  const std::vector<int>& truth = report.test_labels;
  if (config.mode == ProtocolMode::fold_on_test) {
    const auto universe = iota_indices(train.rows());
    const auto plan =
        eval::stratified_kfold(universe, train.labels(), config.folds, derive_seed(seed, "folds"));
    struct FoldOutput {
      FoldResult result;
      std::vector<double> scores;
    };
    auto outputs = parallel_map<FoldOutput>(config.folds, config.workers, [&](std::size_t f) {
      const Dataset fit_rows = train.subset(plan.training_rows(f, universe));
      const auto fitted = fit_model(fit_rows, report.hp, derive_seed(seed, "fold-model", f));
      auto scores = predict_scores(fitted, test);
      FoldOutput out{score_fold(fitted, scores, truth), std::move(scores)};
      return out;
    });
    report.test_scores.assign(test.rows(), 0.0);
    for (const auto& o : outputs) {
      for (std::size_t i = 0; i < test.rows(); ++i) report.test_scores[i] += o.scores[i];
      report.folds.push_back(o.result);
    }
    for (auto& s : report.test_scores) s /= static_cast<double>(outputs.size());

    for (const auto m : eval::kAllMetrics) {
      std::vector<std::optional<double>> values;
      for (const auto& f : report.folds) values.push_back(f.metrics.get(m));
      report.summary.emplace_back(m, eval::fold_ci(values));
    }
    std::vector<std::optional<double>> aucs;
    for (const auto& f : report.folds) aucs.push_back(f.metrics.auc);
    report.auc_ci = eval::fold_ci(aucs);
  } else {
    const auto fitted = fit_model(train, report.hp, derive_seed(seed, "final-model"));
    report.test_scores = predict_scores(fitted, test);
    report.folds.push_back(score_fold(fitted, report.test_scores, truth));
    const auto& point = report.folds.front().metrics;

    Rng rng(derive_seed(seed, "bootstrap-ci"));
    const auto predicted = labels_from_scores(report.test_scores);
    std::vector<std::vector<double>> replicates(std::size(eval::kAllMetrics));
    std::vector<double> auc_replicates;
    std::vector<int> bp(test.rows());
    std::vector<int> bt(test.rows());
    std::vector<double> bs(test.rows());
    for (std::size_t b = 0; b < config.bootstrap_resamples; ++b) {
      for (std::size_t i = 0; i < test.rows(); ++i) {
        const auto j = static_cast<std::size_t>(rng.below(test.rows()));
        bp[i] = predicted[j];
        bt[i] = truth[j];
        bs[i] = report.test_scores[j];
      }
      const auto ms = eval::metrics(eval::confusion(bp, bt));
      for (std::size_t k = 0; k < std::size(eval::kAllMetrics); ++k) {
        if (const auto v = ms.get(eval::kAllMetrics[k])) replicates[k].push_back(*v);
      }
      if (both_classes(bt)) auc_replicates.push_back(eval::roc_curve(bs, bt).auc);
    }
    for (std::size_t k = 0; k < std::size(eval::kAllMetrics); ++k) {
      const auto m = eval::kAllMetrics[k];
      const auto v = point.get(m);
      auto ci = eval::percentile_ci(v.value_or(std::nan("")), replicates[k]);
      ci.excluded = config.bootstrap_resamples - replicates[k].size();
      report.summary.emplace_back(m, ci);
    }
    report.auc_ci = eval::percentile_ci(point.auc.value_or(std::nan("")), auc_replicates);
    report.auc_ci.excluded = config.bootstrap_resamples - auc_replicates.size();
  }
  if (both_classes(truth)) report.roc = eval::roc_curve(report.test_scores, truth);
  return report;
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? number_or_null(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json threshold_json(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  return t;
}

}  // namespace

nlohmann::ordered_json to_json(const eval::ConfidenceInterval& ci) {
  nlohmann::ordered_json j;
  j["mean"] = number_or_null(ci.mean);
  j["lower"] = number_or_null(ci.lower);
  j["upper"] = number_or_null(ci.upper);
  j["level"] = ci.level;
  j["count"] = ci.count;
  j["excluded"] = ci.excluded;
  return j;
}

nlohmann::ordered_json to_json(const ModelReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["model"] = to_string(report.kind);
  j["protocol"] = to_string(report.mode);
  ordered_json hp = ordered_json::object();
  for (const auto& [k, v] : describe(report.hp)) hp[k] = v;
  j["hyperparams"] = hp;
  j["split"] = {{"train_rows", report.train_rows},
                {"test_rows", report.test_rows},
                {"test_positives", report.test_positives}};
  if (report.grid) {
    ordered_json g;
    g["best_cell"] = report.grid->cells[report.grid->best].label;
    ordered_json cells = ordered_json::array();
    for (const auto& c : report.grid->cells) {
      cells.push_back({{"cell", c.label},
                       {"mean_accuracy", optional_json(c.mean_accuracy)},
                       {"completed_folds", c.completed_folds},
                       {"flagged", c.flagged}});
    }
    g["cells"] = cells;
    ordered_json table = ordered_json::array();
    for (const auto& e : report.grid->table) {
      table.push_back({{"cell", report.grid->cells[e.cell].label},
                       {"fold", e.fold},
                       {"accuracy", optional_json(e.accuracy)},
                       {"error", e.error}});
    }
    g["cv_table"] = table;
    j["grid_search"] = g;
  }
  ordered_json folds = ordered_json::array();
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    const auto& r = report.folds[f];
    ordered_json entry;
    entry["fold"] = f;
    entry["confusion"] = {{"tp", r.confusion.tp},
                          {"fp", r.confusion.fp},
                          {"tn", r.confusion.tn},
                          {"fn", r.confusion.fn}};
    for (const auto m : eval::kAllMetrics) entry[eval::metric_name(m)] = optional_json(r.metrics.get(m));
    entry["auc"] = optional_json(r.metrics.auc);
    entry["model_digest"] = r.model_digest;
    folds.push_back(entry);
  }
  j["folds"] = folds;
  ordered_json summary;
  for (const auto& [m, ci] : report.summary) summary[eval::metric_name(m)] = to_json(ci);
  summary["auc"] = to_json(report.auc_ci);
  j["summary"] = summary;
  j["roc_auc"] = report.roc.points.empty() ? ordered_json(nullptr) : ordered_json(report.roc.auc);
  ordered_json points = ordered_json::array();
  for (const auto& p : report.roc.points) {
    points.push_back({threshold_json(p.threshold), p.fpr, p.tpr});
  }
  j["roc_points"] = points;
  return j;
}

namespace {

std::string percent_cell(const eval::ConfidenceInterval& ci) {
  char buf[64];
  if (!std::isfinite(ci.mean)) return "undefined";
  if (!ci.has_bounds()) {
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * ci.mean);
  } else {
    std::snprintf(buf, sizeof buf, "%.1f%% (%.1f%%-%.1f%%)", 100.0 * ci.mean, 100.0 * ci.lower,
                  100.0 * ci.upper);
  }
  return buf;
}

std::string display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::ann: return "ANN";
    case ModelKind::svm: return "SVM";
    case ModelKind::forest: return "Random Forest";
  }
  return "?";
}

}  // namespace

std::string comparison_table(const std::vector<ModelReport>& reports) {
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-14s | %-24s | %-24s | %-24s | %-24s | %-24s\n", "Model",
                "Accuracy (95% CI)", "Sensitivity (95% CI)", "Specificity (95% CI)",
                "PPV (95% CI)", "NPV (95% CI)");
  out += line;
  out += std::string(14, '-') + "-+-" + std::string(24, '-') + "-+-" + std::string(24, '-') +
         "-+-" + std::string(24, '-') + "-+-" + std::string(24, '-') + "-+-" +
         std::string(24, '-') + "\n";
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-14s | %-24s | %-24s | %-24s | %-24s | %-24s\n",
                  display_name(r.kind).c_str(),
                  percent_cell(r.interval(eval::Metric::accuracy)).c_str(),
                  percent_cell(r.interval(eval::Metric::sensitivity)).c_str(),
                  percent_cell(r.interval(eval::Metric::specificity)).c_str(),
                  percent_cell(r.interval(eval::Metric::ppv)).c_str(),
                  percent_cell(r.interval(eval::Metric::npv)).c_str());
    out += line;
  }
  return out;
}

std::string roc_csv(const eval::RocCurve& roc) {
  std::string out = "# moyapred-roc v1\nthreshold,fpr,tpr\n";
  for (const auto& p : roc.points) {
    out += std::isinf(p.threshold) ? std::string(p.threshold > 0 ? "inf" : "-inf")
                                   : format_double(p.threshold);
    out += "," + format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
  }
  return out;
}

}  // namespace moyapred
