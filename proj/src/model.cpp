#include "moyapred/model.hpp"

#include <stdexcept>

namespace moyapred {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ann: return "ann";
    case ModelKind::svm: return "svm";
    case ModelKind::forest: return "forest";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  const auto n = to_lower(trim(name));
  if (n == "ann") return ModelKind::ann;
  if (n == "svm") return ModelKind::svm;
  if (n == "forest" || n == "rf") return ModelKind::forest;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

Hyperparams default_hyperparams(ModelKind kind) {
  switch (kind) {
    case ModelKind::ann: return ann::Hyperparams{};
    case ModelKind::svm: return svm::Hyperparams{};
    case ModelKind::forest: return forest::Hyperparams{};
  }
  throw std::invalid_argument("unknown model kind");
}

ModelKind kind_of(const Hyperparams& hp) {
  return static_cast<ModelKind>(hp.index() + 1);
}

ModelKind kind_of(const TrainedModel& model) {
  return static_cast<ModelKind>(model.index() + 1);
}

namespace {

std::size_t count_value(const std::string& name, const std::string& value, bool allow_zero = false) {
  const auto v = require_int(value, name);
  if (v < 0 || (!allow_zero && v == 0)) {
    throw std::invalid_argument(name + " must be " + (allow_zero ? "non-negative" : "positive"));
  }
  return static_cast<std::size_t>(v);
}

double real_value(const std::string& name, const std::string& value) {
  try {
    return require_double(value, name);
  } catch (const ParseError& e) {
    throw std::invalid_argument(e.what());
  }
}

[[noreturn]] void unknown(const std::string& kind, const std::string& name) {
  throw std::invalid_argument("unknown " + kind + " hyperparameter '" + name + "'");
}

std::string join_widths(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

}  // namespace

void set_hyperparam(Hyperparams& hp, const std::string& name, const std::string& value) {
  try {
    if (auto* a = std::get_if<ann::Hyperparams>(&hp)) {
      if (name == "learning_rate") a->learning_rate = real_value(name, value);
      else if (name == "batch_size") a->batch_size = count_value(name, value);
      else if (name == "epochs") a->epochs = count_value(name, value, true);
      else if (name == "beta1") a->beta1 = real_value(name, value);
      else if (name == "beta2") a->beta2 = real_value(name, value);
      else if (name == "epsilon") a->epsilon = real_value(name, value);
      else if (name == "hidden") {
        a->hidden_layers.clear();
        for (const auto& w : split(value, ',')) {
          if (!trim(w).empty()) a->hidden_layers.push_back(count_value(name, w));
        }
      } else if (name == "hidden_units") {
        const auto units = count_value(name, value);
        for (auto& w : a->hidden_layers) w = units;
        if (a->hidden_layers.empty()) a->hidden_layers.push_back(units);
      } else if (name == "hidden_layers") {
        const auto layers = count_value(name, value, true);
        const auto units = a->hidden_layers.empty() ? std::size_t{100} : a->hidden_layers.front();
        a->hidden_layers.assign(layers, units);
      } else {
        unknown("ann", name);
      }
    } else if (auto* s = std::get_if<svm::Hyperparams>(&hp)) {
      if (name == "C") s->C = real_value(name, value);
      else if (name == "gamma") {
        if (trim(value) == "1/p") s->gamma.reset();
        else s->gamma = real_value(name, value);
      } else if (name == "tol") s->tol = real_value(name, value);
      else if (name == "max_passes") s->max_passes = count_value(name, value);
      else unknown("svm", name);
    } else if (auto* f = std::get_if<forest::Hyperparams>(&hp)) {
      if (name == "n_trees") f->n_trees = count_value(name, value);
      else if (name == "max_depth") {
        if (to_lower(trim(value)) == "none") f->max_depth.reset();
        else f->max_depth = count_value(name, value, true);
      } else if (name == "min_samples_split") f->min_samples_split = count_value(name, value);
      else if (name == "features_per_split") {
        const auto v = to_lower(trim(value));
        if (v == "sqrt") f->features_per_split.reset();
        else if (v == "all") f->features_per_split = 0;  // resolved to p at fit time
        else f->features_per_split = count_value(name, value);
      } else if (name == "bootstrap") f->bootstrap = require_bool(value, name);
      else unknown("forest", name);
    }
  } catch (const ParseError& e) {
    throw std::invalid_argument(e.what());
  }
}

std::vector<std::pair<std::string, std::string>> describe(const Hyperparams& hp) {
  std::vector<std::pair<std::string, std::string>> out;
  if (const auto* a = std::get_if<ann::Hyperparams>(&hp)) {
    out = {{"learning_rate", format_double(a->learning_rate)},
           {"batch_size", std::to_string(a->batch_size)},
           {"epochs", std::to_string(a->epochs)},
           {"hidden", join_widths(a->hidden_layers)},
           {"beta1", format_double(a->beta1)},
           {"beta2", format_double(a->beta2)},
           {"epsilon", format_double(a->epsilon)}};
  } else if (const auto* s = std::get_if<svm::Hyperparams>(&hp)) {
    out = {{"C", format_double(s->C)},
           {"gamma", s->gamma ? format_double(*s->gamma) : "1/p"},
           {"tol", format_double(s->tol)},
           {"max_passes", std::to_string(s->max_passes)}};
  } else if (const auto* f = std::get_if<forest::Hyperparams>(&hp)) {
    std::string fps = "sqrt";
    if (f->features_per_split) fps = *f->features_per_split == 0 ? "all" : std::to_string(*f->features_per_split);
    out = {{"n_trees", std::to_string(f->n_trees)},
           {"max_depth", f->max_depth ? std::to_string(*f->max_depth) : "none"},
           {"min_samples_split", std::to_string(f->min_samples_split)},
           {"features_per_split", fps},
           {"bootstrap", f->bootstrap ? "true" : "false"}};
  }
  return out;
}

FittedModel fit_model(const Dataset& train, const Hyperparams& hp, std::uint64_t seed,
                      std::size_t workers) {
  FittedModel fitted;
  fitted.scaler = fit_scaler(train);
  const Dataset scaled = fitted.scaler.apply(train);
  if (const auto* a = std::get_if<ann::Hyperparams>(&hp)) {
    auto result = ann::train_ann(scaled, *a, seed);
    fitted.model = std::move(result.model);
    fitted.trace = std::move(result.trace.epoch_loss);
  } else if (const auto* s = std::get_if<svm::Hyperparams>(&hp)) {
    auto result = svm::train_svm_smo(scaled, *s, seed);
    fitted.model = std::move(result.model);
    fitted.trace = {static_cast<double>(result.stats.iterations), result.stats.final_gap};
  } else if (const auto* f = std::get_if<forest::Hyperparams>(&hp)) {
    forest::Hyperparams resolved = *f;
    if (resolved.features_per_split && *resolved.features_per_split == 0) {
      resolved.features_per_split = train.cols();
    }
    fitted.model = forest::train_forest(scaled, resolved, seed, workers);
  }
  return fitted;
}

double predict_score(const FittedModel& fitted, std::span<const double> raw_row) {
  std::vector<double> row(raw_row.begin(), raw_row.end());
  fitted.scaler.apply_in_place(row);
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ann::Model>) {
          return ann::forward(m, row);
        } else if constexpr (std::is_same_v<M, svm::Model>) {
          return svm::predict_svm(m, row).score;
        } else {
          return forest::predict_forest(m, row).score;
        }
      },
      fitted.model);
}

std::vector<double> predict_scores(const FittedModel& fitted, const Dataset& data) {
  if (const auto* m = std::get_if<ann::Model>(&fitted.model)) {
    const Dataset scaled = fitted.scaler.apply(data);
    return ann::forward_batch(*m, scaled.values(), scaled.rows());
  }
  std::vector<double> out;
  out.reserve(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) out.push_back(predict_score(fitted, data.row(i)));
  return out;
}

}  // namespace moyapred
