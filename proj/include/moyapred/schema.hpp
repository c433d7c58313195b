#pragma once
// Patient feature schema and record encoding.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "moyapred/keyvalue.hpp"

namespace moyapred {

enum class FeatureKind { binary, ordinal, continuous };
enum class FeatureGroup { demographic, radiographic };

std::string to_string(FeatureKind kind);
std::string to_string(FeatureGroup group);

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FeatureDef {
  std::string name;
  FeatureKind kind = FeatureKind::binary;
  FeatureGroup group = FeatureGroup::demographic;
  // Present iff kind == ordinal; level i encodes to i.
  std::vector<std::string> ordinal_levels;

  // Throws EncodeError when the raw value is outside the declared domain.
  double encode(const std::string& raw) const;
  // Inverse of encode for values produced by it (continuous values pass through).
  std::string decode(double value) const;
};

class FeatureSchema {
 public:
  FeatureSchema() = default;
  // Validates names, kinds and levels; throws SchemaError.
  FeatureSchema(std::vector<FeatureDef> features, std::string label_name = "label");

  const std::vector<FeatureDef>& features() const { return features_; }
  const FeatureDef& feature(std::size_t i) const { return features_.at(i); }
  const std::string& label_name() const { return label_name_; }
  std::size_t width() const { return features_.size(); }

  std::optional<std::size_t> index_of(const std::string& name) const;
  std::size_t count(FeatureGroup group) const;
  std::vector<std::size_t> continuous_indices() const;

  bool operator==(const FeatureSchema& other) const;

 private:
  std::vector<FeatureDef> features_;
  std::string label_name_ = "label";
};

// Reconstructed 33-feature moyamoya schema: 11 demographic, 22 radiographic.
const FeatureSchema& default_schema();

// Level labels used by the default schema.
const std::vector<std::string>& stenosis_levels();
const std::vector<std::string>& suzuki_levels();
const std::vector<std::string>& age_band_levels();

// Schema documents:
//   label   = <label column name>               (optional, default "label")
//   feature = <name> <binary|continuous> <demographic|radiographic>
//   feature = <name> ordinal <group> <level>,<level>,...
// Features appear in declaration order. A group split other than 11/22 is
// logged as a warning.
FeatureSchema load_schema(const KeyValueDocument& document);
FeatureSchema load_schema(const std::optional<KeyValueDocument>& document);
FeatureSchema load_schema_file(const std::string& path);
std::string schema_to_document(const FeatureSchema& schema);

using RawRecord = std::map<std::string, std::string>;

std::vector<double> encode_record(const RawRecord& record, const FeatureSchema& schema);

}  // namespace moyapred
