#include <gtest/gtest.h>

#include <atomic>

#include "moyapred/cohort.hpp"
#include "moyapred/parallel.hpp"
#include "moyapred/protocol.hpp"
#include "oracles.hpp"

namespace moyapred {
namespace {

Hyperparams quick(ModelKind kind) {
  Hyperparams hp = default_hyperparams(kind);
  if (kind == ModelKind::ann) {
    set_hyperparam(hp, "epochs", "40");
    set_hyperparam(hp, "hidden", "16");
  }
  if (kind == ModelKind::forest) set_hyperparam(hp, "n_trees", "15");
  return hp;
}

const Dataset& cohort() {
  static const Dataset d = generate_cohort(default_cohort_spec(7));
  return d;
}

TEST(Hyperparams, SetAndDescribe) {
  Hyperparams hp = default_hyperparams(ModelKind::ann);
  set_hyperparam(hp, "hidden_units", "50");
  set_hyperparam(hp, "hidden_layers", "2");
  EXPECT_EQ(std::get<ann::Hyperparams>(hp).hidden_layers, (std::vector<std::size_t>{50, 50}));
  set_hyperparam(hp, "hidden", "8,4");
  EXPECT_EQ(std::get<ann::Hyperparams>(hp).hidden_layers, (std::vector<std::size_t>{8, 4}));
  EXPECT_THROW(set_hyperparam(hp, "C", "1"), std::invalid_argument);
  EXPECT_THROW(set_hyperparam(hp, "epochs", "-3"), std::invalid_argument);

  Hyperparams s = default_hyperparams(ModelKind::svm);
  set_hyperparam(s, "gamma", "0.1");
  EXPECT_EQ(std::get<svm::Hyperparams>(s).gamma, 0.1);
  set_hyperparam(s, "gamma", "1/p");
  EXPECT_FALSE(std::get<svm::Hyperparams>(s).gamma);

  Hyperparams f = default_hyperparams(ModelKind::forest);
  set_hyperparam(f, "max_depth", "5");
  set_hyperparam(f, "max_depth", "none");
  EXPECT_FALSE(std::get<forest::Hyperparams>(f).max_depth);
  EXPECT_FALSE(describe(f).empty());

  EXPECT_THROW(parse_model_kind("gbm"), std::invalid_argument);
  EXPECT_EQ(parse_model_kind("forest"), ModelKind::forest);
}

TEST(FitModel, ScalerComesFromTrainingRowsOnly) {
  const Dataset& d = cohort();
  const auto f = fit_model(d, quick(ModelKind::svm), 1);
  EXPECT_EQ(f.scaler, fit_scaler(d));
  const auto scores = predict_scores(f, d);
  for (std::size_t i = 0; i < d.rows(); i += 17) EXPECT_EQ(scores[i], predict_score(f, d.row(i)));
}

TEST(ParallelMap, OrderAndExceptions) {
  const auto v = parallel_map<std::size_t>(50, 4, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(v[i], i * i);
  EXPECT_THROW(parallel_map<int>(10, 3,
                                 [](std::size_t i) -> int {
                                   if (i == 6) throw std::runtime_error("boom");
                                   return 0;
                                 }),
               std::runtime_error);
}

TEST(Grid, CellOrderAndSize) {
  Grid g{{{"learning_rate", {"0.1", "0.01"}}, {"batch_size", {"8", "16", "32"}}}};
  EXPECT_EQ(g.size(), 6u);
  const auto cells = g.cells(default_hyperparams(ModelKind::ann));
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0].label, "learning_rate=0.1,batch_size=8");
  EXPECT_EQ(cells[1].label, "learning_rate=0.1,batch_size=16");
  EXPECT_EQ(cells[3].label, "learning_rate=0.01,batch_size=8");
  EXPECT_EQ(default_ann_grid().size(), 54u);
  EXPECT_EQ(default_svm_grid().size(), 16u);
  EXPECT_EQ(default_forest_grid().size(), 4u);
}

TEST(GridSearch, SingleCellIsReturned) {
  const Dataset& d = cohort();
  Grid g{{{"C", {"2"}}}};
  const auto r = grid_search(d, quick(ModelKind::svm), g, 5, 3);
  EXPECT_EQ(r.best, 0u);
  EXPECT_EQ(r.table.size(), 5u);
  EXPECT_EQ(std::get<svm::Hyperparams>(r.best_hp).C, 2.0);
}

TEST(GridSearch, LearningBeatsFrozenNetwork) {
  // Positive iff x0 > 0; well separated.
  Rng rng(4);
  std::vector<double> x;
  std::vector<int> y;
  for (int i = 0; i < 80; ++i) {
    const int label = i % 2;
    x.push_back((label ? 1.0 : -1.0) * rng.uniform(0.5, 2.0));
    x.push_back(rng.normal(0, 1));
    y.push_back(label);
  }
  const Dataset d = testing::make_dataset(2, x, y);
  Hyperparams base = default_hyperparams(ModelKind::ann);
  set_hyperparam(base, "epochs", "100");
  set_hyperparam(base, "hidden", "8");
  set_hyperparam(base, "batch_size", "8");
  Grid g{{{"learning_rate", {"0", "0.01"}}}};
  const auto r = grid_search(d, base, g, 5, 9);
  EXPECT_EQ(r.best, 1u);
  EXPECT_EQ(r.table.size(), 10u);
  EXPECT_GT(*r.cells[1].mean_accuracy, 0.9);
  for (const auto& c : r.cells) EXPECT_LE(*c.mean_accuracy, *r.cells[r.best].mean_accuracy);
}

TEST(GridSearch, DivergingCellIsFlaggedNotFatal) {
  Rng rng(6);
  std::vector<double> x;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(rng.normal(0, 1) * 1e150);
    y.push_back(i % 2);
  }
  const Dataset d = testing::make_dataset(1, x, y);
  Hyperparams base = default_hyperparams(ModelKind::ann);
  set_hyperparam(base, "epochs", "5");
  set_hyperparam(base, "hidden", "4");
  set_hyperparam(base, "batch_size", "4");
  Grid g{{{"learning_rate", {"1e300", "0.001"}}}};
  const auto r = grid_search(d, base, g, 5, 1);
  EXPECT_TRUE(r.cells[0].flagged);
  EXPECT_FALSE(r.cells[1].flagged);
  EXPECT_EQ(r.cells[1].completed_folds, 5u);
  EXPECT_EQ(r.table.size(), 10u);
  std::size_t done = 0;
  double sum = 0.0;
  for (const auto& e : r.table) {
    if (e.cell != 0) continue;
    if (e.accuracy) {
      ++done;
      sum += *e.accuracy;
    } else {
      EXPECT_FALSE(e.error.empty());
    }
  }
  EXPECT_LT(done, 5u);
  EXPECT_EQ(r.cells[0].completed_folds, done);
  if (done > 0) EXPECT_NEAR(*r.cells[0].mean_accuracy, sum / done, 1e-15);
}

TEST(Protocol, ShapesAndAnnSanity) {
  ProtocolConfig cfg;
  Hyperparams hp = default_hyperparams(ModelKind::ann);
  set_hyperparam(hp, "epochs", "200");
  const auto r = run_protocol(cohort(), hp, cfg, 7);
  EXPECT_EQ(r.train_rows, 302u);
  EXPECT_EQ(r.test_rows, 76u);
  EXPECT_EQ(r.test_positives, 25u);
  EXPECT_EQ(r.folds.size(), 5u);
  for (const auto m : eval::kAllMetrics) EXPECT_TRUE(std::isfinite(r.interval(m).mean));
  EXPECT_GT(r.roc.auc, 0.5);
  EXPECT_EQ(r.roc.points.front().fpr, 0.0);
  EXPECT_EQ(r.roc.points.back().tpr, 1.0);
}

TEST(Protocol, SingleCellGridSkipsSelection) {
  ProtocolConfig cfg;
  cfg.grid = Grid{{{"n_trees", {"7"}}}};
  const auto r = run_protocol(cohort(), quick(ModelKind::forest), cfg, 2);
  EXPECT_FALSE(r.grid);
  EXPECT_EQ(r.folds.size(), 5u);
  EXPECT_EQ(std::get<forest::Hyperparams>(r.hp).n_trees, 7u);
}

TEST(Protocol, DeterministicAndWorkerIndependent) {
  ProtocolConfig cfg;
  cfg.grid = Grid{{{"n_trees", {"5", "9"}}}};
  const auto a = to_json(run_protocol(cohort(), quick(ModelKind::forest), cfg, 5)).dump();
  const auto b = to_json(run_protocol(cohort(), quick(ModelKind::forest), cfg, 5)).dump();
  cfg.workers = 4;
  const auto c = to_json(run_protocol(cohort(), quick(ModelKind::forest), cfg, 5)).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Protocol, TestRowsNeverInfluenceTraining) {
  const Dataset& d = cohort();
  const auto split = eval::stratified_split(d.labels(), 0.2, 11);
  for (const ModelKind kind : {ModelKind::ann, ModelKind::svm, ModelKind::forest}) {
    const auto base = run_protocol_on_split(d, split, quick(kind), ProtocolConfig{}, 3);
    for (const std::size_t drop_at : {std::size_t{0}, split.test.size() / 2}) {
      const std::size_t dropped = split.test[drop_at];
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < d.rows(); ++i) {
        if (i != dropped) keep.push_back(i);
      }
      const Dataset reduced = d.subset(keep);
      const auto remap = [&](std::size_t i) { return i > dropped ? i - 1 : i; };
      eval::SplitPlan plan;
      for (auto i : split.train) plan.train.push_back(remap(i));
      for (auto i : split.test) {
        if (i != dropped) plan.test.push_back(remap(i));
      }
      const auto r = run_protocol_on_split(reduced, plan, quick(kind), ProtocolConfig{}, 3);
      ASSERT_EQ(r.folds.size(), base.folds.size());
      for (std::size_t f = 0; f < r.folds.size(); ++f) {
        EXPECT_EQ(r.folds[f].model_digest, base.folds[f].model_digest) << to_string(kind);
      }
    }
  }
}

TEST(Protocol, RetrainBootstrapMode) {
  ProtocolConfig cfg;
  cfg.mode = ProtocolMode::retrain_bootstrap;
  cfg.bootstrap_resamples = 200;
  const auto r = run_protocol(cohort(), quick(ModelKind::svm), cfg, 4);
  EXPECT_EQ(r.folds.size(), 1u);
  const auto& acc = r.interval(eval::Metric::accuracy);
  EXPECT_EQ(acc.mean, *r.folds[0].metrics.accuracy);
  ASSERT_TRUE(acc.has_bounds());
  EXPECT_LE(acc.lower, acc.mean);
  EXPECT_GE(acc.upper, acc.mean);
  EXPECT_EQ(acc.count + acc.excluded, 200u);
  EXPECT_EQ(parse_protocol_mode("retrain-bootstrap"), ProtocolMode::retrain_bootstrap);
  EXPECT_THROW(parse_protocol_mode("loo"), std::invalid_argument);
}

TEST(Protocol, ReportRendering) {
  std::vector<ModelReport> reports;
  for (const ModelKind kind : {ModelKind::ann, ModelKind::svm, ModelKind::forest}) {
    reports.push_back(run_protocol(cohort(), quick(kind), ProtocolConfig{}, 8));
  }
  const std::string table = comparison_table(reports);
  std::vector<std::string> lines;
  for (const auto& l : split(table, '\n')) {
    if (!l.empty()) lines.push_back(l);
  }
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_TRUE(starts_with(lines[2], "ANN"));
  EXPECT_TRUE(starts_with(lines[3], "SVM"));
  EXPECT_TRUE(starts_with(lines[4], "Random Forest"));
  EXPECT_EQ(split(lines[2], '|').size(), 6u);

  const auto j = to_json(reports[0]);
  EXPECT_EQ(j["model"], "ann");
  EXPECT_EQ(j["folds"].size(), 5u);
  EXPECT_EQ(j["roc_points"][0][0], "inf");

  const std::string csv = roc_csv(reports[0].roc);
  EXPECT_TRUE(starts_with(csv, "# moyapred-roc v1\nthreshold,fpr,tpr\ninf,0,0\n"));
  EXPECT_NE(csv.find(",1,1\n"), std::string::npos);
}

}  // namespace
}  // namespace moyapred
