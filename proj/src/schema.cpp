#include "moyapred/schema.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include "moyapred/log.hpp"

namespace moyapred {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::binary: return "binary";
    case FeatureKind::ordinal: return "ordinal";
    case FeatureKind::continuous: return "continuous";
  }
  return "?";
}

std::string to_string(FeatureGroup group) {
  return group == FeatureGroup::demographic ? "demographic" : "radiographic";
}

double FeatureDef::encode(const std::string& raw) const {
  const std::string value = trim(raw);
  switch (kind) {
    case FeatureKind::binary: {
      const std::string v = to_lower(value);
      if (v == "1" || v == "true" || v == "yes" || v == "y") return 1.0;
      if (v == "0" || v == "false" || v == "no" || v == "n") return 0.0;
      throw EncodeError("feature '" + name + "': '" + raw + "' is not a binary value");
    }
    case FeatureKind::ordinal: {
      const std::string v = to_lower(value);
      for (std::size_t i = 0; i < ordinal_levels.size(); ++i) {
        if (to_lower(ordinal_levels[i]) == v) return static_cast<double>(i);
      }
      // The level index itself is also accepted.
      if (const auto idx = parse_int(value); idx && *idx >= 0 &&
                                             static_cast<std::size_t>(*idx) < ordinal_levels.size()) {
        return static_cast<double>(*idx);
      }
      throw EncodeError("feature '" + name + "': '" + raw + "' is not a declared level");
    }
    case FeatureKind::continuous: {
      const auto v = parse_double(value);
      if (!v || !std::isfinite(*v)) {
        throw EncodeError("feature '" + name + "': '" + raw + "' is not a finite number");
      }
      return *v;
    }
  }
  throw EncodeError("feature '" + name + "': unknown kind");
}

std::string FeatureDef::decode(double value) const {
  switch (kind) {
    case FeatureKind::binary:
      return value != 0.0 ? "1" : "0";
    case FeatureKind::ordinal: {
      const auto i = static_cast<std::size_t>(value);
      if (value < 0 || static_cast<double>(i) != value || i >= ordinal_levels.size()) {
        return format_double(value);
      }
      return ordinal_levels[i];
    }
    case FeatureKind::continuous:
      return format_double(value);
  }
  return format_double(value);
}

FeatureSchema::FeatureSchema(std::vector<FeatureDef> features, std::string label_name)
    : features_(std::move(features)), label_name_(std::move(label_name)) {
  if (label_name_.empty()) throw SchemaError("label name must not be empty");
  std::set<std::string> seen;
  for (const auto& f : features_) {
    if (f.name.empty()) throw SchemaError("feature names must not be empty");
    if (f.name.find(',') != std::string::npos) {
      throw SchemaError("feature name '" + f.name + "' contains a comma");
    }
    if (f.name == label_name_) throw SchemaError("feature '" + f.name + "' collides with the label");
    if (!seen.insert(f.name).second) throw SchemaError("duplicate feature name '" + f.name + "'");
    if (f.kind == FeatureKind::ordinal) {
      if (f.ordinal_levels.size() < 2) {
        throw SchemaError("ordinal feature '" + f.name + "' needs at least 2 levels");
      }
      std::set<std::string> levels;
      for (const auto& l : f.ordinal_levels) {
        if (l.empty() || !levels.insert(to_lower(l)).second) {
          throw SchemaError("ordinal feature '" + f.name + "' has empty or repeated levels");
        }
      }
    } else if (!f.ordinal_levels.empty()) {
      throw SchemaError("feature '" + f.name + "' declares levels but is not ordinal");
    }
  }
}

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureSchema::count(FeatureGroup group) const {
  std::size_t n = 0;
  for (const auto& f : features_) n += f.group == group ? 1 : 0;
  return n;
}

std::vector<std::size_t> FeatureSchema::continuous_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].kind == FeatureKind::continuous) out.push_back(i);
  }
  return out;
}

bool FeatureSchema::operator==(const FeatureSchema& other) const {
  if (label_name_ != other.label_name_ || features_.size() != other.features_.size()) return false;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& a = features_[i];
    const auto& b = other.features_[i];
    if (a.name != b.name || a.kind != b.kind || a.group != b.group ||
        a.ordinal_levels != b.ordinal_levels) {
      return false;
    }
  }
  return true;
}

const std::vector<std::string>& stenosis_levels() {
  static const std::vector<std::string> levels = {"normal", "minor occlusion", "moderate occlusion",
                                                  "severe occlusion"};
  return levels;
}

const std::vector<std::string>& suzuki_levels() {
  static const std::vector<std::string> levels = {"stage 1", "stage 2", "stage 3",
                                                  "stage 4", "stage 5", "stage 6"};
  return levels;
}

const std::vector<std::string>& age_band_levels() {
  static const std::vector<std::string> levels = {"18-29", "30-39", "40-49", "50-59", "60+"};
  return levels;
}

namespace {

FeatureSchema build_default_schema() {
  using K = FeatureKind;
  using G = FeatureGroup;
  std::vector<FeatureDef> f;
  const auto add = [&](std::string name, K kind, G group, std::vector<std::string> levels = {}) {
    f.push_back({std::move(name), kind, group, std::move(levels)});
  };

  // Demographic: the ten baseline rows plus an age-band placeholder.
  add("age", K::continuous, G::demographic);
  add("female", K::binary, G::demographic);
  add("hypertension", K::binary, G::demographic);
  add("diabetes", K::binary, G::demographic);
  add("antiplatelet", K::binary, G::demographic);
  add("drinking", K::binary, G::demographic);
  add("smoking", K::binary, G::demographic);
  add("hyperlipidemia", K::binary, G::demographic);
  add("ischemic_stroke_history", K::binary, G::demographic);
  add("mrs_admission_ge3", K::binary, G::demographic);
  add("age_band", K::ordinal, G::demographic, age_band_levels());

  // Radiographic.
  for (const char* side : {"left", "right"}) {
    for (const char* vessel : {"ica", "aca", "mca", "pca"}) {
      add(std::string("stenosis_") + vessel + "_" + side, K::ordinal, G::radiographic,
          stenosis_levels());
    }
  }
  add("suzuki_stage_left", K::ordinal, G::radiographic, suzuki_levels());
  add("suzuki_stage_right", K::ordinal, G::radiographic, suzuki_levels());
  add("acha_pcoa_dilation_left", K::binary, G::radiographic);
  add("acha_pcoa_dilation_right", K::binary, G::radiographic);
  for (const char* type : {"leptomeningeal", "duropial", "periventricular"}) {
    for (const char* side : {"left", "right"}) {
      add(std::string(type) + "_collaterals_" + side, K::binary, G::radiographic);
    }
  }
  add("mma_collaterals_left", K::binary, G::radiographic);
  add("mma_collaterals_right", K::binary, G::radiographic);
  add("unilateral", K::binary, G::radiographic);
  add("aneurysm", K::binary, G::radiographic);
  return FeatureSchema(std::move(f), "label");
}

FeatureKind parse_kind(const std::string& s) {
  const auto v = to_lower(s);
  if (v == "binary") return FeatureKind::binary;
  if (v == "ordinal") return FeatureKind::ordinal;
  if (v == "continuous") return FeatureKind::continuous;
  throw SchemaError("unknown feature kind '" + s + "'");
}

FeatureGroup parse_group(const std::string& s) {
  const auto v = to_lower(s);
  if (v == "demographic") return FeatureGroup::demographic;
  if (v == "radiographic") return FeatureGroup::radiographic;
  throw SchemaError("unknown feature group '" + s + "'");
}

// Splits on runs of whitespace, keeping at most `max_parts` parts (the last
// part takes the remainder).
std::vector<std::string> split_words(const std::string& s, std::size_t max_parts) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    if (parts.size() + 1 == max_parts) {
      parts.push_back(trim(s.substr(i)));
      break;
    }
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    parts.push_back(s.substr(i, j - i));
    i = j;
  }
  return parts;
}

}  // namespace

const FeatureSchema& default_schema() {
  static const FeatureSchema schema = build_default_schema();
  return schema;
}

FeatureSchema load_schema(const KeyValueDocument& document) {
  std::string label = document.get("label").value_or("label");
  std::vector<FeatureDef> features;
  for (const auto& e : document.entries()) {
    if (e.key == "label") continue;
    if (e.key != "feature") {
      throw SchemaError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
    const auto parts = split_words(e.value, 4);
    if (parts.size() < 3) {
      throw SchemaError("line " + std::to_string(e.line) + ": expected '<name> <kind> <group>'");
    }
    FeatureDef def{parts[0], parse_kind(parts[1]), parse_group(parts[2]), {}};
    if (def.kind == FeatureKind::ordinal) {
      if (parts.size() < 4) {
        throw SchemaError("ordinal feature '" + def.name + "' needs at least 2 levels");
      }
      for (const auto& level : split(parts[3], ',')) def.ordinal_levels.push_back(trim(level));
    } else if (parts.size() > 3) {
      throw SchemaError("line " + std::to_string(e.line) + ": only ordinal features take levels");
    }
    features.push_back(std::move(def));
  }
  FeatureSchema schema(std::move(features), std::move(label));
  const auto demo = schema.count(FeatureGroup::demographic);
  const auto radio = schema.count(FeatureGroup::radiographic);
  if (demo != 11 || radio != 22) {
    log::warn("schema has " + std::to_string(demo) + " demographic and " + std::to_string(radio) +
              " radiographic features (expected 11 and 22)");
  }
  return schema;
}

FeatureSchema load_schema(const std::optional<KeyValueDocument>& document) {
  return document ? load_schema(*document) : default_schema();
}

FeatureSchema load_schema_file(const std::string& path) {
  return load_schema(KeyValueDocument::read_file(path));
}

std::string schema_to_document(const FeatureSchema& schema) {
  std::string out = "# moyapred-schema v1\nlabel = " + schema.label_name() + "\n";
  for (const auto& f : schema.features()) {
    out += "feature = " + f.name + " " + to_string(f.kind) + " " + to_string(f.group);
    if (f.kind == FeatureKind::ordinal) {
      out += " ";
      for (std::size_t i = 0; i < f.ordinal_levels.size(); ++i) {
        if (i) out += ",";
        out += f.ordinal_levels[i];
      }
    }
    out += "\n";
  }
  return out;
}

std::vector<double> encode_record(const RawRecord& record, const FeatureSchema& schema) {
  std::vector<double> out;
  out.reserve(schema.width());
  for (const auto& f : schema.features()) {
    const auto it = record.find(f.name);
    if (it == record.end()) throw EncodeError("record is missing feature '" + f.name + "'");
    out.push_back(f.encode(it->second));
  }
  return out;
}

}  // namespace moyapred
