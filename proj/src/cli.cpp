#include "moyapred/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "moyapred/cohort.hpp"
#include "moyapred/log.hpp"
#include "moyapred/parallel.hpp"
#include "moyapred/protocol.hpp"
#include "moyapred/serialize.hpp"

namespace moyapred {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::optional<long long> seed;
  std::string model;
  std::string out;
  bool impute = false;
  std::string protocol;
  std::string data;
  std::string cohort;
  std::string schema;
  std::string model_file;
};

// Config document with command-line flags layered on top.
struct RunConfig {
  KeyValueDocument doc;

  std::optional<std::string> get(const std::string& key) const { return doc.get(key); }
  std::string get_or(const std::string& key, const std::string& fallback) const {
    return doc.get(key).value_or(fallback);
  }
};

RunConfig resolve_config(const Flags& flags) {
  RunConfig cfg;
  if (!flags.config.empty()) cfg.doc = KeyValueDocument::read_file(flags.config);
  if (flags.seed) cfg.doc.set("seed", std::to_string(*flags.seed));
  if (!flags.model.empty()) cfg.doc.set("model", flags.model);
  if (!flags.out.empty()) cfg.doc.set("out", flags.out);
  if (flags.impute) cfg.doc.set("impute", "true");
  if (!flags.protocol.empty()) cfg.doc.set("protocol", flags.protocol);
  if (!flags.data.empty()) cfg.doc.set("data", flags.data);
  if (!flags.cohort.empty()) cfg.doc.set("cohort", flags.cohort);
  if (!flags.schema.empty()) cfg.doc.set("schema", flags.schema);
  if (!flags.model_file.empty()) cfg.doc.set("model_file", flags.model_file);
  return cfg;
}

std::uint64_t require_seed(const RunConfig& cfg) {
  const auto s = cfg.get("seed");
  if (!s) throw UsageError("a seed is required (--seed N or 'seed = N' in the config)");
  const auto v = parse_int(*s);
  if (!v || *v < 0) throw UsageError("seed must be a non-negative integer");
  return static_cast<std::uint64_t>(*v);
}

fs::path require_out(const RunConfig& cfg) {
  const auto out = cfg.get("out");
  if (!out || out->empty()) throw UsageError("an output directory is required (--out DIR)");
  fs::create_directories(*out);
  return fs::path(*out);
}

std::shared_ptr<const FeatureSchema> resolve_schema(const RunConfig& cfg) {
  if (const auto path = cfg.get("schema")) {
    return std::make_shared<const FeatureSchema>(load_schema_file(*path));
  }
  return std::make_shared<const FeatureSchema>(default_schema());
}

CohortSpec resolve_cohort_spec(const std::string& source, std::uint64_t seed) {
  CohortSpec spec = source == "default" ? default_cohort_spec(seed) : load_cohort_spec_file(source);
  spec.seed = seed;
  return spec;
}

Dataset resolve_dataset(const RunConfig& cfg, std::uint64_t seed) {
  const auto data = cfg.get("data");
  const auto cohort = cfg.get("cohort");
  if (data && cohort) throw UsageError("give exactly one data source: 'data' or 'cohort'");
  if (!data && !cohort) throw UsageError("no data source: use --data PATH or --cohort SPEC");
  auto schema = resolve_schema(cfg);
  if (data) {
    LoadOptions opts;
    opts.impute = require_bool(cfg.get_or("impute", "false"), "impute");
    return load_dataset_file(*data, schema, opts);
  }
  std::uint64_t cohort_seed = seed;
  if (const auto s = cfg.get("cohort_seed")) {
    cohort_seed = static_cast<std::uint64_t>(require_int(*s, "cohort_seed"));
  }
  return generate_cohort(resolve_cohort_spec(*cohort, cohort_seed), schema);
}

std::vector<ModelKind> resolve_kinds(const RunConfig& cfg, bool allow_all) {
  const auto name = to_lower(cfg.get_or("model", "ann"));
  if (name == "all") {
    if (!allow_all) throw UsageError("this command needs a single model kind");
    return {ModelKind::ann, ModelKind::svm, ModelKind::forest};
  }
  return {parse_model_kind(name)};
}

Hyperparams resolve_hyperparams(const RunConfig& cfg, ModelKind kind) {
  Hyperparams hp = default_hyperparams(kind);
  const std::string prefix = to_string(kind) + ".";
  for (const auto& e : cfg.doc.entries()) {
    if (starts_with(e.key, prefix)) set_hyperparam(hp, e.key.substr(prefix.size()), e.value);
  }
  return hp;
}

// grid.<kind>.<param> = v1, v2, ...; no entries means "none given".
std::optional<Grid> configured_grid(const RunConfig& cfg, ModelKind kind) {
  const std::string prefix = "grid." + to_string(kind) + ".";
  Grid grid;
  for (const auto& e : cfg.doc.entries()) {
    if (!starts_with(e.key, prefix)) continue;
    GridAxis axis{e.key.substr(prefix.size()), {}};
    for (const auto& v : split(e.value, ',')) {
      if (!trim(v).empty()) axis.values.push_back(trim(v));
    }
    if (axis.values.empty()) throw UsageError("grid axis '" + e.key + "' is empty");
    std::erase_if(grid.axes, [&](const GridAxis& a) { return a.name == axis.name; });
    grid.axes.push_back(std::move(axis));
  }
  if (grid.axes.empty()) return std::nullopt;
  return grid;
}

ProtocolConfig resolve_protocol(const RunConfig& cfg) {
  ProtocolConfig pc;
  pc.mode = parse_protocol_mode(cfg.get_or("protocol", "fold-on-test"));
  pc.test_fraction = require_double(cfg.get_or("test_fraction", "0.2"), "test_fraction");
  const auto folds = require_int(cfg.get_or("folds", "5"), "folds");
  if (folds < 2) throw UsageError("folds must be at least 2");
  pc.folds = static_cast<std::size_t>(folds);
  const auto b = require_int(cfg.get_or("bootstrap_resamples", "1000"), "bootstrap_resamples");
  if (b < 1) throw UsageError("bootstrap_resamples must be positive");
  pc.bootstrap_resamples = static_cast<std::size_t>(b);
  pc.workers = workers_from_environment();
  return pc;
}

// Config echo: everything that shapes results; output location excluded.
nlohmann::ordered_json config_echo(const RunConfig& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& e : cfg.doc.entries()) {
    if (e.key == "out") continue;
    j[e.key] = e.value;
  }
  return j;
}

std::string summary_line(const std::string& key, const std::string& value) {
  return "  " + key + ": " + value + "\n";
}

int cmd_generate(const RunConfig& cfg, std::ostream& out) {
  const auto seed = require_seed(cfg);
  const auto dir = require_out(cfg);
  auto schema = resolve_schema(cfg);
  const auto spec = resolve_cohort_spec(cfg.get_or("cohort", "default"), seed);
  const Dataset data = generate_cohort(spec, schema);
  const auto path = dir / "cohort.csv";
  write_dataset_file(path.string(), data);
  if (!(load_dataset_file(path.string(), schema) == data)) {
    throw std::runtime_error("written dataset does not read back identically");
  }

  const std::size_t pos = data.positives();
  out << "generated " << path.string() << "\n";
  out << summary_line("rows", std::to_string(data.rows()));
  out << summary_line("positives (hMMD)", std::to_string(pos));
  out << summary_line("negatives (iMMD)", std::to_string(data.rows() - pos));
  out << "  feature means by class (hMMD / iMMD):\n";
  for (std::size_t j = 0; j < data.cols(); ++j) {
    double s[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < data.rows(); ++i) s[data.label(i)] += data.at(i, j);
    char line[160];
    const double mp = pos ? s[1] / static_cast<double>(pos) : std::nan("");
    const double mn = data.rows() > pos ? s[0] / static_cast<double>(data.rows() - pos) : std::nan("");
    std::snprintf(line, sizeof line, "    %-34s %8.3f / %8.3f\n", schema->feature(j).name.c_str(),
                  mp, mn);
    out << line;
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto seed = require_seed(cfg);
  const auto dir = require_out(cfg);
  const Dataset data = resolve_dataset(cfg, seed);
  for (const auto kind : resolve_kinds(cfg, true)) {
    const Hyperparams hp = resolve_hyperparams(cfg, kind);
    const auto fitted = fit_model(data, hp, derive_seed(seed, "train", static_cast<std::uint64_t>(kind)),
                                  workers_from_environment());
    const auto name = to_string(kind);
    const auto model_path = dir / ("model_" + name + ".bin");
    save_fitted(model_path.string(), fitted);

    const auto scores = predict_scores(fitted, data);
    const auto reloaded = load_fitted(model_path.string());
    if (predict_scores(reloaded, data) != scores) {
      throw std::runtime_error("saved model does not reproduce its predictions");
    }

    std::string trace = "# moyapred-trace v1\n";
    if (kind == ModelKind::ann) {
      trace += "epoch,loss\n";
      for (std::size_t e = 0; e < fitted.trace.size(); ++e) {
        trace += std::to_string(e + 1) + "," + format_double(fitted.trace[e]) + "\n";
      }
    } else if (kind == ModelKind::svm) {
      trace += "iterations,kkt_gap\n" + format_double(fitted.trace.at(0)) + "," +
               format_double(fitted.trace.at(1)) + "\n";
    } else {
      trace += "tree,nodes\n";
      const auto& f = std::get<forest::Model>(fitted.model);
      for (std::size_t t = 0; t < f.trees.size(); ++t) {
        trace += std::to_string(t + 1) + "," + std::to_string(f.trees[t].nodes.size()) + "\n";
      }
    }
    const auto trace_path = dir / ("trace_" + name + ".csv");
    write_text_file(trace_path.string(), trace);

    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) correct += ann::classify(scores[i]) == data.label(i);
    out << "trained " << name << " -> " << model_path.string() << "\n";
    for (const auto& [k, v] : describe(hp)) out << summary_line(k, v);
    char acc[32];
    std::snprintf(acc, sizeof acc, "%.4f", static_cast<double>(correct) / static_cast<double>(data.rows()));
    out << summary_line("training accuracy", acc);
    if (const auto* f = std::get_if<forest::Model>(&fitted.model)) {
      out << summary_line("trees", std::to_string(f->trees.size()));
    } else if (const auto* s = std::get_if<svm::Model>(&fitted.model)) {
      out << summary_line("support vectors", std::to_string(s->support_count()));
    } else {
      out << summary_line("final loss", fitted.trace.empty() ? "n/a" : format_double(fitted.trace.back()));
    }
  }
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const auto seed = require_seed(cfg);
  const auto dir = require_out(cfg);
  const Dataset data = resolve_dataset(cfg, seed);
  const auto kinds = resolve_kinds(cfg, true);
  const auto base = resolve_protocol(cfg);

  nlohmann::ordered_json report;
  report["format"] = "moyapred-report v1";
  report["seed"] = seed;
  report["config"] = config_echo(cfg);
  report["dataset"] = {{"rows", data.rows()},
                       {"positives", data.positives()},
                       {"features", data.cols()},
                       {"digest", fnv1a_hex(write_dataset(data))}};
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  std::vector<ModelReport> reports;
  for (const auto kind : kinds) {
    ProtocolConfig pc = base;
    pc.grid = configured_grid(cfg, kind);
    if (to_lower(cfg.get_or("grid", "none")) == "default") pc.grid = default_grid(kind);
    auto r = run_protocol(data, resolve_hyperparams(cfg, kind), pc,
                          derive_seed(seed, "protocol", static_cast<std::uint64_t>(kind)));
    if (!r.roc.points.empty()) {
      write_text_file((dir / ("roc_" + to_string(kind) + ".csv")).string(), roc_csv(r.roc));
    }
    models.push_back(to_json(r));
    reports.push_back(std::move(r));
  }
  report["models"] = models;
  const auto table = comparison_table(reports);
  report["comparison_table"] = table;
  write_text_file((dir / "report.json").string(), report.dump(2) + "\n");
  write_text_file((dir / "comparison.txt").string(), "# moyapred-comparison v1\n" + table);

  out << table;
  for (const auto& r : reports) {
    char line[128];
    std::snprintf(line, sizeof line, "%s test AUC (fold-mean scores): %.3f\n",
                  to_string(r.kind).c_str(), r.roc.auc);
    out << line;
  }
  out << "report written to " << (dir / "report.json").string() << "\n";
  return 0;
}

int cmd_gridsearch(const RunConfig& cfg, std::ostream& out) {
  const auto seed = require_seed(cfg);
  const auto dir = require_out(cfg);
  const Dataset data = resolve_dataset(cfg, seed);
  const auto kind = resolve_kinds(cfg, false).front();
  const auto pc = resolve_protocol(cfg);
  const Grid grid = configured_grid(cfg, kind).value_or(default_grid(kind));
  if (grid.size() == 0) throw UsageError("empty grid");

  // Tuning uses the training part of the hold-out split only.
  const auto split = eval::stratified_split(data.labels(), pc.test_fraction, derive_seed(seed, "split"));
  const Dataset train = data.subset(split.train);
  const auto result = grid_search(train, resolve_hyperparams(cfg, kind), grid, pc.folds,
                                  derive_seed(seed, "grid"), pc.workers);

  std::string table = "# moyapred-cv-table v1\ncell,fold,accuracy,error\n";
  for (const auto& e : result.table) {
    table += "\"" + result.cells[e.cell].label + "\"," + std::to_string(e.fold) + "," +
             (e.accuracy ? format_double(*e.accuracy) : std::string("NA")) + ",\"" + e.error + "\"\n";
  }
  const auto name = to_string(kind);
  write_text_file((dir / ("cv_table_" + name + ".csv")).string(), table);

  std::string best = "# moyapred-best-params v1\nmodel = " + name + "\n";
  best += "cell = " + result.cells[result.best].label + "\n";
  best += "mean_cv_accuracy = " + format_double(*result.cells[result.best].mean_accuracy) + "\n";
  for (const auto& [k, v] : describe(result.best_hp)) best += name + "." + k + " = " + v + "\n";
  write_text_file((dir / ("best_params_" + name + ".cfg")).string(), best);

  for (const auto& c : result.cells) {
    char line[256];
    std::snprintf(line, sizeof line, "%-60s %s\n", c.label.c_str(),
                  c.mean_accuracy ? format_double(*c.mean_accuracy).c_str() : "NA");
    out << line;
  }
  out << "best: " << result.cells[result.best].label << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
  const auto dir = require_out(cfg);
  const auto model_path = cfg.get("model_file");
  if (!model_path) throw UsageError("predict needs --model-file PATH");
  const auto data_path = cfg.get("data");
  if (!data_path) throw UsageError("predict needs --data PATH");
  LoadOptions opts;
  opts.impute = require_bool(cfg.get_or("impute", "false"), "impute");
  const Dataset data = load_dataset_file(*data_path, resolve_schema(cfg), opts);
  const auto fitted = load_fitted(*model_path);
  const auto scores = predict_scores(fitted, data);
  std::string csv = "# moyapred-predictions v1\nid,score,label\n";
  for (std::size_t i = 0; i < data.rows(); ++i) {
    csv += data.ids()[i] + "," + format_double(scores[i]) + "," +
           std::to_string(ann::classify(scores[i])) + "\n";
  }
  const auto path = dir / "predictions.csv";
  write_text_file(path.string(), csv);
  out << "wrote " << data.rows() << " predictions to " << path.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"moyapred: hemorrhage risk classifiers for moyamoya cohorts", "moyapred"};
  app.require_subcommand(1);
  Flags flags;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "key = value run configuration");
    sub->add_option("--seed", flags.seed, "master seed (required)");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--schema", flags.schema, "feature schema document");
    sub->add_flag("--impute", flags.impute, "impute missing cells (mode / median)");
  };
  const auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", flags.data, "dataset CSV");
    sub->add_option("--cohort", flags.cohort, "cohort spec document, or 'default'");
  };

  auto* generate = app.add_subcommand("generate", "write a synthetic cohort");
  add_common(generate);
  generate->add_option("--cohort", flags.cohort, "cohort spec document, or 'default'");

  auto* train = app.add_subcommand("train", "train and save a model on a whole dataset");
  add_common(train);
  add_data(train);
  train->add_option("--model", flags.model, "ann | svm | forest | all");

  auto* evaluate = app.add_subcommand("evaluate", "run the evaluation protocol");
  add_common(evaluate);
  add_data(evaluate);
  evaluate->add_option("--model", flags.model, "ann | svm | forest | all");
  evaluate->add_option("--protocol", flags.protocol, "fold-on-test | retrain-bootstrap");

  auto* gridsearch = app.add_subcommand("gridsearch", "cross-validated grid search");
  add_common(gridsearch);
  add_data(gridsearch);
  gridsearch->add_option("--model", flags.model, "ann | svm | forest");

  auto* predict = app.add_subcommand("predict", "score a dataset with a saved model");
  add_common(predict);
  predict->add_option("--data", flags.data, "dataset CSV");
  predict->add_option("--model-file", flags.model_file, "model written by train");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  try {
    const RunConfig cfg = resolve_config(flags);
    const std::string name = chosen->get_name();
    if (name == "generate") return cmd_generate(cfg, out);
    if (name == "train") return cmd_train(cfg, out);
    if (name == "evaluate") return cmd_evaluate(cfg, out);
    if (name == "gridsearch") return cmd_gridsearch(cfg, out);
    if (name == "predict") return cmd_predict(cfg, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << chosen->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace moyapred
