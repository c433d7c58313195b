#pragma once
// Encoded patient datasets, CSV ingest/export and feature standardization.

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "moyapred/schema.hpp"

namespace moyapred {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major n x p matrix of encoded features with binary labels
// (1 = hemorrhagic, 0 = ischemic).
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::shared_ptr<const FeatureSchema> schema, std::vector<double> x, std::vector<int> y,
          std::vector<std::string> ids);

  std::size_t rows() const { return y_.size(); }
  std::size_t cols() const { return schema_ ? schema_->width() : 0; }

  std::span<const double> row(std::size_t i) const { return {x_.data() + i * cols(), cols()}; }
  double at(std::size_t i, std::size_t j) const { return x_[i * cols() + j]; }
  double& at(std::size_t i, std::size_t j) { return x_[i * cols() + j]; }

  const std::vector<double>& values() const { return x_; }
  const std::vector<int>& labels() const { return y_; }
  int label(std::size_t i) const { return y_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }

  const FeatureSchema& schema() const { return *schema_; }
  const std::shared_ptr<const FeatureSchema>& schema_ptr() const { return schema_; }

  std::size_t positives() const;
  bool has_both_classes() const;

  // Rows in the given order (indices may repeat).
  Dataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset& other) const;

 private:
  std::shared_ptr<const FeatureSchema> schema_;
  std::vector<double> x_;
  std::vector<int> y_;
  std::vector<std::string> ids_;
};

// Throws DataError unless both labels occur.
void require_both_classes(const Dataset& data, const std::string& context);

struct LoadOptions {
  // Fill missing cells: binary/ordinal with the column mode, continuous with
  // the column median. Off means a missing cell is an error.
  bool impute = false;
};

// CSV layout: optional '#' comment lines, then a header of an optional
// leading "id" column, the schema feature names in order and a final label
// column. Labels are 0/1 or iMMD/hMMD. Empty and "NA" cells are missing.
Dataset load_dataset(std::string_view csv_text, std::shared_ptr<const FeatureSchema> schema,
                     const LoadOptions& options = {});
Dataset load_dataset_file(const std::string& path, std::shared_ptr<const FeatureSchema> schema,
                          const LoadOptions& options = {});

// Writes a format header comment, an id column and decoded feature values.
std::string write_dataset(const Dataset& data);
void write_dataset_file(const std::string& path, const Dataset& data);

struct ScalerParams {
  struct Column {
    std::size_t index = 0;
    double mean = 0.0;
    double sd = 1.0;
    bool passthrough = false;  // constant column, left unscaled

    bool operator==(const Column&) const = default;
  };
  std::vector<Column> columns;

  // (x - mean) / sd on every non-passthrough column.
  Dataset apply(const Dataset& data) const;
  void apply_in_place(std::span<double> row) const;

  bool operator==(const ScalerParams&) const = default;
};

// Population statistics (divide by n) of the continuous columns.
ScalerParams fit_scaler(const Dataset& train);

struct Standardized {
  Dataset train;
  std::vector<Dataset> others;
  ScalerParams params;
};

Standardized standardize(const Dataset& train, std::span<const Dataset> others = {});

}  // namespace moyapred
