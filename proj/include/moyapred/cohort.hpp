#pragma once
// Synthetic cohorts drawn from per-class feature marginals.
//
// Each feature is drawn independently given the class label. Marginal kinds:
//   bernoulli          P(x = 1 | class)
//   ordinal_threshold  P(level >= threshold | class), level uniform inside
//                      the chosen side of the threshold
//   normal             class-specific mean and sd, clipped below at `min`
//   age_band           ordinal derived from a continuous source feature:
//                      level = clamp(floor((v - first_upper) / width) + 1)

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "moyapred/dataset.hpp"

namespace moyapred {

struct ClassPair {
  double positive = 0.0;
  double negative = 0.0;

  double get(bool pos) const { return pos ? positive : negative; }
};

struct Marginal {
  enum class Kind { bernoulli, ordinal_threshold, normal, age_band };
  Kind kind = Kind::bernoulli;
  ClassPair probability;    // bernoulli, ordinal_threshold
  std::size_t threshold = 0;  // ordinal_threshold
  ClassPair mean;           // normal
  ClassPair sd;             // normal
  double min = -1e300;      // normal
  std::string source;       // age_band
  double first_upper = 30.0;
  double width = 10.0;
};

class CohortError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CohortSpec {
  std::size_t n_total = 0;
  std::size_t n_positive = 0;
  std::map<std::string, Marginal> marginals;  // keyed by feature name
  std::uint64_t seed = 0;

  // Checks counts, probability ranges, sd > 0 and that every schema feature
  // has a marginal of a compatible kind. Throws CohortError.
  void validate(const FeatureSchema& schema) const;
};

// 378 patients, 126 hemorrhagic, with the published per-class rates and age
// moments; features without published rates get class-independent rates.
CohortSpec default_cohort_spec(std::uint64_t seed = 7);

// Document grammar (key = value):
//   n_total = <count>
//   n_positive = <count>
//   seed = <integer>
//   marginal.<feature> = bernoulli <p_pos> <p_neg>
//   marginal.<feature> = ordinal_threshold <level> <p_pos> <p_neg>
//   marginal.<feature> = normal <mean_pos> <sd_pos> <mean_neg> <sd_neg> [min=<v>]
//   marginal.<feature> = age_band <source> [first_upper=<v>] [width=<v>]
CohortSpec load_cohort_spec(const KeyValueDocument& document);
CohortSpec load_cohort_spec_file(const std::string& path);
std::string cohort_spec_to_document(const CohortSpec& spec);

Dataset generate_cohort(const CohortSpec& spec,
                        std::shared_ptr<const FeatureSchema> schema);
Dataset generate_cohort(const CohortSpec& spec);  // default schema

}  // namespace moyapred
