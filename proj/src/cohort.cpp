#include "moyapred/cohort.hpp"

#include <cmath>
#include <cstdio>

#include "moyapred/rng.hpp"

namespace moyapred {

namespace {

Marginal bernoulli(double pos, double neg) {
  Marginal m;
  m.kind = Marginal::Kind::bernoulli;
  m.probability = {pos, neg};
  return m;
}

Marginal ordinal_threshold(std::size_t threshold, double pos, double neg) {
  Marginal m;
  m.kind = Marginal::Kind::ordinal_threshold;
  m.threshold = threshold;
  m.probability = {pos, neg};
  return m;
}

void check_probability(const ClassPair& p, const std::string& name) {
  for (const double v : {p.positive, p.negative}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw CohortError("marginal '" + name + "': probability " + format_double(v) +
                        " outside [0, 1]");
    }
  }
}

}  // namespace

void CohortSpec::validate(const FeatureSchema& schema) const {
  if (n_total == 0) throw CohortError("n_total must be positive");
  if (n_positive > n_total) throw CohortError("n_positive exceeds n_total");
  for (const auto& [name, m] : marginals) {
    const auto idx = schema.index_of(name);
    if (!idx) throw CohortError("marginal for unknown feature '" + name + "'");
    const auto& f = schema.feature(*idx);
    using K = Marginal::Kind;
    switch (m.kind) {
      case K::bernoulli:
        if (f.kind != FeatureKind::binary) {
          throw CohortError("bernoulli marginal needs a binary feature: '" + name + "'");
        }
        check_probability(m.probability, name);
        break;
      case K::ordinal_threshold:
        if (f.kind != FeatureKind::ordinal) {
          throw CohortError("ordinal_threshold marginal needs an ordinal feature: '" + name + "'");
        }
        if (m.threshold == 0 || m.threshold >= f.ordinal_levels.size()) {
          throw CohortError("marginal '" + name + "': threshold must split the levels");
        }
        check_probability(m.probability, name);
        break;
      case K::normal:
        if (f.kind != FeatureKind::continuous) {
          throw CohortError("normal marginal needs a continuous feature: '" + name + "'");
        }
        if (!(m.sd.positive > 0.0) || !(m.sd.negative > 0.0)) {
          throw CohortError("marginal '" + name + "': sd must be positive");
        }
        if (!std::isfinite(m.mean.positive) || !std::isfinite(m.mean.negative)) {
          throw CohortError("marginal '" + name + "': mean must be finite");
        }
        break;
      case K::age_band: {
        if (f.kind != FeatureKind::ordinal) {
          throw CohortError("age_band marginal needs an ordinal feature: '" + name + "'");
        }
        const auto src = schema.index_of(m.source);
        if (!src || schema.feature(*src).kind != FeatureKind::continuous) {
          throw CohortError("age_band '" + name + "' needs a continuous source feature");
        }
        if (*src > *idx) {
          throw CohortError("age_band '" + name + "' must follow its source feature");
        }
        if (!(m.width > 0.0)) throw CohortError("age_band '" + name + "': width must be positive");
        break;
      }
    }
  }
  for (const auto& f : schema.features()) {
    if (!marginals.contains(f.name)) throw CohortError("no marginal for feature '" + f.name + "'");
  }
}

CohortSpec default_cohort_spec(std::uint64_t seed) {
  CohortSpec spec;
  spec.n_total = 378;
  spec.n_positive = 126;
  spec.seed = seed;
  auto& m = spec.marginals;

  Marginal age;
  age.kind = Marginal::Kind::normal;
  age.mean = {38.8, 37.9};
  age.sd = {8.9, 9.6};
  age.min = 18.0;
  m["age"] = age;

  Marginal band;
  band.kind = Marginal::Kind::age_band;
  band.source = "age";
  m["age_band"] = band;

  // Baseline characteristics, hemorrhagic vs ischemic.
  m["female"] = bernoulli(0.587, 0.516);
  m["hypertension"] = bernoulli(0.183, 0.353);
  m["diabetes"] = bernoulli(0.024, 0.091);
  m["antiplatelet"] = bernoulli(0.024, 0.056);
  m["drinking"] = bernoulli(0.040, 0.075);
  m["smoking"] = bernoulli(0.071, 0.083);
  m["hyperlipidemia"] = bernoulli(0.008, 0.040);
  m["ischemic_stroke_history"] = bernoulli(0.111, 0.615);
  m["mrs_admission_ge3"] = bernoulli(0.111, 0.079);

  // Key radiographic features.
  m["unilateral"] = bernoulli(0.135, 0.107);
  m["aneurysm"] = bernoulli(0.135, 0.008);
  m["suzuki_stage_left"] = ordinal_threshold(3, 0.500, 0.552);
  m["suzuki_stage_right"] = ordinal_threshold(3, 0.500, 0.552);
  m["mma_collaterals_left"] = bernoulli(0.444, 0.341);
  m["mma_collaterals_right"] = bernoulli(0.405, 0.369);
  m["acha_pcoa_dilation_left"] = bernoulli(0.873, 0.833);
  m["acha_pcoa_dilation_right"] = bernoulli(0.873, 0.833);

  // No published rates: class-independent placeholders.
  for (const char* side : {"left", "right"}) {
    const std::string s(side);
    m["stenosis_ica_" + s] = ordinal_threshold(2, 0.70, 0.70);
    m["stenosis_aca_" + s] = ordinal_threshold(2, 0.45, 0.45);
    m["stenosis_mca_" + s] = ordinal_threshold(2, 0.55, 0.55);
    m["stenosis_pca_" + s] = ordinal_threshold(2, 0.15, 0.15);
    m["leptomeningeal_collaterals_" + s] = bernoulli(0.50, 0.50);
    m["duropial_collaterals_" + s] = bernoulli(0.35, 0.35);
    m["periventricular_collaterals_" + s] = bernoulli(0.40, 0.40);
  }
  return spec;
}

namespace {

std::map<std::string, std::string> parse_options(const std::vector<std::string>& words,
                                                 std::size_t from, const std::string& name) {
  std::map<std::string, std::string> opts;
  for (std::size_t i = from; i < words.size(); ++i) {
    const auto eq = words[i].find('=');
    if (eq == std::string::npos) {
      throw CohortError("marginal '" + name + "': unexpected token '" + words[i] + "'");
    }
    opts[words[i].substr(0, eq)] = words[i].substr(eq + 1);
  }
  return opts;
}

Marginal parse_marginal(const std::string& name, const std::string& value) {
  std::vector<std::string> words;
  for (auto& w : split(value, ' ')) {
    if (!trim(w).empty()) words.push_back(trim(w));
  }
  if (words.empty()) throw CohortError("marginal '" + name + "' is empty");
  const auto need = [&](std::size_t count) {
    if (words.size() < count) throw CohortError("marginal '" + name + "': too few parameters");
  };
  const auto num = [&](std::size_t i) { return require_double(words[i], "marginal " + name); };
  Marginal m;
  const std::string kind = to_lower(words[0]);
  if (kind == "bernoulli") {
    need(3);
    m = bernoulli(num(1), num(2));
    parse_options(words, 3, name);
  } else if (kind == "ordinal_threshold") {
    need(4);
    const auto t = require_int(words[1], "marginal " + name);
    if (t < 0) throw CohortError("marginal '" + name + "': negative threshold");
    m = ordinal_threshold(static_cast<std::size_t>(t), num(2), num(3));
    parse_options(words, 4, name);
  } else if (kind == "normal") {
    need(5);
    m.kind = Marginal::Kind::normal;
    m.mean = {num(1), num(3)};
    m.sd = {num(2), num(4)};
    for (const auto& [k, v] : parse_options(words, 5, name)) {
      if (k != "min") throw CohortError("marginal '" + name + "': unknown option '" + k + "'");
      m.min = require_double(v, "marginal " + name);
    }
  } else if (kind == "age_band") {
    need(2);
    m.kind = Marginal::Kind::age_band;
    m.source = words[1];
    for (const auto& [k, v] : parse_options(words, 2, name)) {
      if (k == "first_upper") {
        m.first_upper = require_double(v, "marginal " + name);
      } else if (k == "width") {
        m.width = require_double(v, "marginal " + name);
      } else {
        throw CohortError("marginal '" + name + "': unknown option '" + k + "'");
      }
    }
  } else {
    throw CohortError("marginal '" + name + "': unknown kind '" + words[0] + "'");
  }
  return m;
}

}  // namespace

CohortSpec load_cohort_spec(const KeyValueDocument& document) {
  CohortSpec spec;
  bool have_total = false;
  bool have_positive = false;
  for (const auto& e : document.entries()) {
    if (e.key == "n_total") {
      const auto v = require_int(e.value, "n_total");
      if (v < 0) throw CohortError("n_total must be non-negative");
      spec.n_total = static_cast<std::size_t>(v);
      have_total = true;
    } else if (e.key == "n_positive") {
      const auto v = require_int(e.value, "n_positive");
      if (v < 0) throw CohortError("n_positive must be non-negative");
      spec.n_positive = static_cast<std::size_t>(v);
      have_positive = true;
    } else if (e.key == "seed") {
      spec.seed = static_cast<std::uint64_t>(require_int(e.value, "seed"));
    } else if (starts_with(e.key, "marginal.")) {
      const auto name = e.key.substr(9);
      if (spec.marginals.contains(name)) throw CohortError("duplicate marginal '" + name + "'");
      spec.marginals[name] = parse_marginal(name, e.value);
    } else {
      throw CohortError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
  }
  if (!have_total || !have_positive) throw CohortError("cohort spec needs n_total and n_positive");
  return spec;
}

CohortSpec load_cohort_spec_file(const std::string& path) {
  return load_cohort_spec(KeyValueDocument::read_file(path));
}

std::string cohort_spec_to_document(const CohortSpec& spec) {
  std::string out = "# moyapred-cohort v1\n";
  out += "n_total = " + std::to_string(spec.n_total) + "\n";
  out += "n_positive = " + std::to_string(spec.n_positive) + "\n";
  out += "seed = " + std::to_string(spec.seed) + "\n";
  for (const auto& [name, m] : spec.marginals) {
    out += "marginal." + name + " = ";
    const auto f = format_double;
    switch (m.kind) {
      case Marginal::Kind::bernoulli:
        out += "bernoulli " + f(m.probability.positive) + " " + f(m.probability.negative);
        break;
      case Marginal::Kind::ordinal_threshold:
        out += "ordinal_threshold " + std::to_string(m.threshold) + " " +
               f(m.probability.positive) + " " + f(m.probability.negative);
        break;
      case Marginal::Kind::normal:
        out += "normal " + f(m.mean.positive) + " " + f(m.sd.positive) + " " +
               f(m.mean.negative) + " " + f(m.sd.negative);
        if (m.min > -1e300) out += " min=" + f(m.min);
        break;
      case Marginal::Kind::age_band:
        out += "age_band " + m.source + " first_upper=" + f(m.first_upper) +
               " width=" + f(m.width);
        break;
    }
    out += "\n";
  }
  return out;
}

Dataset generate_cohort(const CohortSpec& spec, std::shared_ptr<const FeatureSchema> schema) {
  if (!schema) throw CohortError("generate_cohort needs a schema");
  spec.validate(*schema);
  const std::size_t n = spec.n_total;
  const std::size_t p = schema->width();

  std::vector<int> labels(n, 0);
  std::fill_n(labels.begin(), spec.n_positive, 1);
  Rng label_rng(derive_seed(spec.seed, "cohort-labels"));
  label_rng.shuffle(labels);

  // Resolve marginals to schema order once.
  std::vector<const Marginal*> plan(p);
  std::vector<std::size_t> source_index(p, 0);
  for (std::size_t j = 0; j < p; ++j) {
    plan[j] = &spec.marginals.at(schema->feature(j).name);
    if (plan[j]->kind == Marginal::Kind::age_band) source_index[j] = *schema->index_of(plan[j]->source);
  }

  Rng rng(derive_seed(spec.seed, "cohort-features"));
  std::vector<double> x(n * p, 0.0);
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = labels[i] == 1;
    for (std::size_t j = 0; j < p; ++j) {
      const Marginal& m = *plan[j];
      double v = 0.0;
      switch (m.kind) {
        case Marginal::Kind::bernoulli:
          v = rng.bernoulli(m.probability.get(pos)) ? 1.0 : 0.0;
          break;
        case Marginal::Kind::ordinal_threshold: {
          const std::size_t levels = schema->feature(j).ordinal_levels.size();
          const bool high = rng.bernoulli(m.probability.get(pos));
          const std::size_t lo = high ? m.threshold : 0;
          const std::size_t hi = high ? levels : m.threshold;
          v = static_cast<double>(lo + rng.below(hi - lo));
          break;
        }
        case Marginal::Kind::normal:
          v = std::max(m.min, rng.normal(m.mean.get(pos), m.sd.get(pos)));
          break;
        case Marginal::Kind::age_band: {
          const double src = x[i * p + source_index[j]];
          const double levels = static_cast<double>(schema->feature(j).ordinal_levels.size());
          const double level = std::floor((src - m.first_upper) / m.width) + 1.0;
          v = std::clamp(level, 0.0, levels - 1.0);
          break;
        }
      }
      x[i * p + j] = v;
    }
    char id[32];
    std::snprintf(id, sizeof id, "S%04zu", i + 1);
    ids.emplace_back(id);
  }
  return Dataset(std::move(schema), std::move(x), std::move(labels), std::move(ids));
}

Dataset generate_cohort(const CohortSpec& spec) {
  return generate_cohort(spec, std::make_shared<const FeatureSchema>(default_schema()));
}

}  // namespace moyapred
