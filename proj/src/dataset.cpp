#include "moyapred/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "moyapred/log.hpp"

namespace moyapred {

Dataset::Dataset(std::shared_ptr<const FeatureSchema> schema, std::vector<double> x,
                 std::vector<int> y, std::vector<std::string> ids)
    : schema_(std::move(schema)), x_(std::move(x)), y_(std::move(y)), ids_(std::move(ids)) {
  if (!schema_) throw DataError("dataset needs a schema");
  if (x_.size() != y_.size() * schema_->width()) throw DataError("feature matrix shape mismatch");
  if (ids_.empty()) {
    ids_.reserve(y_.size());
    for (std::size_t i = 0; i < y_.size(); ++i) ids_.push_back(std::to_string(i + 1));
  }
  if (ids_.size() != y_.size()) throw DataError("id count does not match row count");
  for (const int label : y_) {
    if (label != 0 && label != 1) throw DataError("labels must be 0 or 1");
  }
  for (const double v : x_) {
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  }
}

std::size_t Dataset::positives() const {
  return static_cast<std::size_t>(std::count(y_.begin(), y_.end(), 1));
}

bool Dataset::has_both_classes() const {
  const auto pos = positives();
  return pos > 0 && pos < rows();
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  const std::size_t p = cols();
  std::vector<double> x;
  std::vector<int> y;
  std::vector<std::string> ids;
  x.reserve(indices.size() * p);
  y.reserve(indices.size());
  ids.reserve(indices.size());
  for (const auto i : indices) {
    if (i >= rows()) throw DataError("row index out of range");
    const auto r = row(i);
    x.insert(x.end(), r.begin(), r.end());
    y.push_back(y_[i]);
    ids.push_back(ids_[i]);
  }
  return Dataset(schema_, std::move(x), std::move(y), std::move(ids));
}

bool Dataset::operator==(const Dataset& other) const {
  if (!schema_ || !other.schema_) return schema_ == other.schema_ && y_ == other.y_;
  return *schema_ == *other.schema_ && x_ == other.x_ && y_ == other.y_ && ids_ == other.ids_;
}

void require_both_classes(const Dataset& data, const std::string& context) {
  if (!data.has_both_classes()) {
    throw DataError(context + ": training data must contain both classes");
  }
}

namespace {

bool is_missing(const std::string& cell) {
  const auto t = to_lower(trim(cell));
  return t.empty() || t == "na" || t == "nan";
}

int parse_label(const std::string& cell) {
  const auto t = to_lower(trim(cell));
  if (t == "1" || t == "hmmd") return 1;
  if (t == "0" || t == "immd") return 0;
  throw DataError("invalid label '" + cell + "'");
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double column_median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Most frequent value; ties go to the smallest value.
double column_mode(const std::vector<double>& values) {
  std::map<double, std::size_t> counts;
  for (const double v : values) ++counts[v];
  double best = counts.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [v, c] : counts) {
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

}  // namespace

Dataset load_dataset(std::string_view csv_text, std::shared_ptr<const FeatureSchema> schema,
                     const LoadOptions& options) {
  if (!schema) throw DataError("load_dataset needs a schema");
  const std::size_t p = schema->width();

  std::vector<std::pair<std::size_t, std::string>> lines;  // (line number, content)
  {
    std::size_t line_no = 0;
    for (auto& raw : split(csv_text, '\n')) {
      ++line_no;
      auto line = strip_cr(std::move(raw));
      if (trim(line).empty() || trim(line).front() == '#') continue;
      lines.emplace_back(line_no, std::move(line));
    }
  }
  if (lines.empty()) throw DataError("missing header row");

  auto header = split(lines.front().second, ',');
  for (auto& h : header) h = trim(h);
  const bool has_id = !header.empty() && header.front() == "id";
  const std::size_t offset = has_id ? 1 : 0;
  bool header_ok = header.size() == p + offset + 1 && header.back() == schema->label_name();
  for (std::size_t j = 0; header_ok && j < p; ++j) {
    header_ok = header[j + offset] == schema->feature(j).name;
  }
  if (!header_ok) {
    throw DataError("header does not match schema (expected " + std::to_string(p) +
                    " feature columns followed by '" + schema->label_name() + "')");
  }
  if (lines.size() == 1) throw DataError("no records");

  const std::size_t n = lines.size() - 1;
  std::vector<double> x(n * p, 0.0);
  std::vector<int> y(n);
  std::vector<std::string> ids;
  std::vector<std::pair<std::size_t, std::size_t>> missing;  // (row, column)
  if (has_id) ids.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& [line_no, text] = lines[i + 1];
    const auto cells = split(text, ',');
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    if (has_id) ids.push_back(trim(cells.front()));
    for (std::size_t j = 0; j < p; ++j) {
      const auto& cell = cells[j + offset];
      if (is_missing(cell)) {
        if (!options.impute) {
          throw DataError("line " + std::to_string(line_no) + ", column '" +
                          schema->feature(j).name + "': missing value");
        }
        missing.emplace_back(i, j);
        continue;
      }
      try {
        x[i * p + j] = schema->feature(j).encode(cell);
      } catch (const EncodeError& e) {
        throw DataError("line " + std::to_string(line_no) + ", column '" +
                        schema->feature(j).name + "': " + e.what());
      }
    }
    try {
      y[i] = parse_label(cells.back());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ", column '" + schema->label_name() +
                      "': " + e.what());
    }
  }

  if (!missing.empty()) {
    std::vector<bool> is_missing_cell(n * p, false);
    for (const auto& [i, j] : missing) is_missing_cell[i * p + j] = true;
    std::map<std::size_t, double> fill;
    for (const auto& [i, j] : missing) {
      if (fill.contains(j)) continue;
      std::vector<double> observed;
      for (std::size_t r = 0; r < n; ++r) {
        if (!is_missing_cell[r * p + j]) observed.push_back(x[r * p + j]);
      }
      if (observed.empty()) {
        throw DataError("column '" + schema->feature(j).name + "' has no observed values");
      }
      const bool continuous = schema->feature(j).kind == FeatureKind::continuous;
      fill[j] = continuous ? column_median(observed) : column_mode(observed);
    }
    for (const auto& [i, j] : missing) {
      x[i * p + j] = fill[j];
      log::warn("imputed row " + std::to_string(i + 1) + " column '" + schema->feature(j).name +
                "' with " + format_double(fill[j]));
    }
  }

  return Dataset(std::move(schema), std::move(x), std::move(y), std::move(ids));
}

Dataset load_dataset_file(const std::string& path, std::shared_ptr<const FeatureSchema> schema,
                          const LoadOptions& options) {
  return load_dataset(read_text_file(path), std::move(schema), options);
}

std::string write_dataset(const Dataset& data) {
  const auto& schema = data.schema();
  std::string out = "# moyapred-dataset v1\nid";
  for (const auto& f : schema.features()) out += "," + f.name;
  out += "," + schema.label_name() + "\n";
  for (std::size_t i = 0; i < data.rows(); ++i) {
    out += data.ids()[i];
    for (std::size_t j = 0; j < data.cols(); ++j) {
      out += ",";
      out += schema.feature(j).decode(data.at(i, j));
    }
    out += data.label(i) == 1 ? ",1\n" : ",0\n";
  }
  return out;
}

void write_dataset_file(const std::string& path, const Dataset& data) {
  write_text_file(path, write_dataset(data));
}

Dataset ScalerParams::apply(const Dataset& data) const {
  std::vector<double> x = data.values();
  const std::size_t p = data.cols();
  for (std::size_t i = 0; i < data.rows(); ++i) {
    apply_in_place(std::span<double>(x.data() + i * p, p));
  }
  return Dataset(data.schema_ptr(), std::move(x), data.labels(), data.ids());
}

void ScalerParams::apply_in_place(std::span<double> row) const {
  for (const auto& c : columns) {
    if (!c.passthrough) row[c.index] = (row[c.index] - c.mean) / c.sd;
  }
}

ScalerParams fit_scaler(const Dataset& train) {
  if (train.rows() == 0) throw DataError("cannot fit a scaler on an empty dataset");
  ScalerParams params;
  const double n = static_cast<double>(train.rows());
  for (const auto j : train.schema().continuous_indices()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < train.rows(); ++i) sum += train.at(i, j);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < train.rows(); ++i) {
      const double d = train.at(i, j) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / n);
    ScalerParams::Column col{j, mean, sd, false};
    if (!(sd > 0.0)) {
      col.sd = 1.0;
      col.passthrough = true;
      log::warn("continuous feature '" + train.schema().feature(j).name +
                "' is constant in the training data; left unscaled");
    }
    params.columns.push_back(col);
  }
  return params;
}

Standardized standardize(const Dataset& train, std::span<const Dataset> others) {
  Standardized out;
  out.params = fit_scaler(train);
  out.train = out.params.apply(train);
  out.others.reserve(others.size());
  for (const auto& d : others) out.others.push_back(out.params.apply(d));
  return out;
}

}  // namespace moyapred
