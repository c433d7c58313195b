#pragma once
// Random forest of CART Gini trees grown on bootstrap resamples.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "moyapred/dataset.hpp"
#include "moyapred/rng.hpp"

namespace moyapred::forest {

struct Hyperparams {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // unset: unbounded
  std::size_t min_samples_split = 2;
  // Candidates per split; unset means ceil(sqrt(p)).
  std::optional<std::size_t> features_per_split;
  // Off only for testing: every tree sees the training set as-is.
  bool bootstrap = true;

  std::size_t resolved_features(std::size_t p) const;
  void validate(std::size_t p) const;
  bool operator==(const Hyperparams&) const = default;
};

// Flat node; children are indices into Tree::nodes. x[feature] <= threshold
// goes left.
struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::array<std::uint32_t, 2> counts{};  // training rows per class at this node

  bool is_leaf() const { return feature < 0; }
  int label() const { return counts[1] > counts[0] ? 1 : 0; }
  double positive_fraction() const;
  bool operator==(const Node&) const = default;
};

struct Tree {
  std::vector<Node> nodes;  // nodes[0] is the root

  const Node& leaf_for(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return leaf_for(x).label(); }
  bool operator==(const Tree&) const = default;
};

struct Model {
  std::size_t width = 0;
  std::vector<Tree> trees;

  bool operator==(const Model&) const = default;
};

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

double gini_impurity(std::span<const std::size_t> label_counts);

// n rows drawn uniformly with replacement.
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed);
Dataset bootstrap_sample(const Dataset& train, std::uint64_t seed);

// Exhaustive scan over candidate features (any order) and midpoints of
// consecutive distinct values. Gains are compared exactly; ties go to the
// lower feature index, then the lower threshold. nullopt when no split has
// positive gain.
std::optional<Split> best_split(const Dataset& data, std::span<const std::size_t> rows,
                                std::span<const std::size_t> candidate_features);

Tree grow_tree(const Dataset& data, std::span<const std::size_t> rows, const Hyperparams& hp,
               Rng& feature_rng);

// Trees are grown on up to `workers` threads; the result does not depend on it.
Model train_forest(const Dataset& train, const Hyperparams& hp, std::uint64_t seed,
                   std::size_t workers = 1);

struct Prediction {
  int label = 0;
  double score = 0.0;  // fraction of trees voting 1
};

Prediction predict_forest(const Model& model, std::span<const double> x);

}  // namespace moyapred::forest
