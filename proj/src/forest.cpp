#include "moyapred/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "moyapred/parallel.hpp"

namespace moyapred::forest {

std::size_t Hyperparams::resolved_features(std::size_t p) const {
  if (features_per_split) return *features_per_split;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p)))));
}

void Hyperparams::validate(std::size_t p) const {
  if (n_trees == 0) throw std::invalid_argument("forest needs at least one tree");
  const auto m = resolved_features(p);
  if (m == 0 || m > p) throw std::invalid_argument("features_per_split must lie in [1, p]");
  if (min_samples_split < 2) throw std::invalid_argument("min_samples_split must be at least 2");
}

double Node::positive_fraction() const {
  const double total = static_cast<double>(counts[0]) + counts[1];
  return total > 0 ? counts[1] / total : 0.0;
}

const Node& Tree::leaf_for(std::span<const double> x) const {
  const Node* node = &nodes.front();
  while (!node->is_leaf()) {
    node = &nodes[x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                  : node->right];
  }
  return *node;
}

double gini_impurity(std::span<const std::size_t> label_counts) {
  double total = 0.0;
  for (const auto c : label_counts) total += static_cast<double>(c);
  if (total == 0.0) throw std::invalid_argument("gini_impurity: empty node");
  double sum_sq = 0.0;
  for (const auto c : label_counts) {
    const double f = static_cast<double>(c) / total;
    sum_sq += f * f;
  }
  return 1.0 - sum_sq;
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "bootstrap"));
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
  return idx;
}

Dataset bootstrap_sample(const Dataset& train, std::uint64_t seed) {
  if (train.rows() == 0) throw std::invalid_argument("bootstrap_sample: empty dataset");
  const auto idx = bootstrap_indices(train.rows(), seed);
  return train.subset(idx);
}

namespace {

using i128 = __int128;

// Purity score of a two-way partition, S = (l0^2 + l1^2)/nl + (r0^2 + r1^2)/nr,
// kept as an exact fraction num/den. Weighted child Gini is 1 - S/n, so a
// larger S is a larger gain.
struct Score {
  i128 num = 0;
  i128 den = 1;
};

Score partition_score(std::int64_t l0, std::int64_t l1, std::int64_t r0, std::int64_t r1) {
  const i128 nl = l0 + l1;
  const i128 nr = r0 + r1;
  const i128 a = i128(l0) * l0 + i128(l1) * l1;
  const i128 b = i128(r0) * r0 + i128(r1) * r1;
  return {a * nr + b * nl, nl * nr};
}

int compare(const Score& x, const Score& y) {
  const i128 lhs = x.num * y.den;
  const i128 rhs = y.num * x.den;
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

double gain_of(std::int64_t l0, std::int64_t l1, std::int64_t r0, std::int64_t r1) {
  const std::array<std::size_t, 2> parent{static_cast<std::size_t>(l0 + r0),
                                          static_cast<std::size_t>(l1 + r1)};
  const std::array<std::size_t, 2> left{static_cast<std::size_t>(l0), static_cast<std::size_t>(l1)};
  const std::array<std::size_t, 2> right{static_cast<std::size_t>(r0), static_cast<std::size_t>(r1)};
  const double n = static_cast<double>(l0 + l1 + r0 + r1);
  const double nl = static_cast<double>(l0 + l1);
  const double nr = static_cast<double>(r0 + r1);
  return gini_impurity(parent) - (nl / n) * gini_impurity(left) - (nr / n) * gini_impurity(right);
}

}  // namespace

std::optional<Split> best_split(const Dataset& data, std::span<const std::size_t> rows,
                                std::span<const std::size_t> candidate_features) {
  if (rows.size() < 2 || candidate_features.empty()) return std::nullopt;
  std::int64_t total[2] = {0, 0};
  for (const auto r : rows) ++total[data.label(r)];
  const std::int64_t n = total[0] + total[1];
  // Parent score (p0^2 + p1^2)/n; a split helps only if it beats this.
  const Score parent{i128(total[0]) * total[0] + i128(total[1]) * total[1], n};

  std::vector<std::size_t> features(candidate_features.begin(), candidate_features.end());
  std::sort(features.begin(), features.end());

  std::optional<Split> best;
  Score best_score = parent;
  std::vector<std::pair<double, int>> column(rows.size());

  for (const auto f : features) {
    for (std::size_t k = 0; k < rows.size(); ++k) column[k] = {data.at(rows[k], f), data.label(rows[k])};
    std::sort(column.begin(), column.end());
    std::int64_t left[2] = {0, 0};
    for (std::size_t k = 0; k + 1 < column.size(); ++k) {
      ++left[column[k].second];
      if (column[k].first == column[k + 1].first) continue;
      const Score s = partition_score(left[0], left[1], total[0] - left[0], total[1] - left[1]);
      // Strictly better only: earlier (feature, threshold) wins ties.
      if (compare(s, best_score) > 0) {
        best_score = s;
        best = Split{f, 0.5 * (column[k].first + column[k + 1].first),
                     gain_of(left[0], left[1], total[0] - left[0], total[1] - left[1])};
      }
    }
  }
  return best;
}

namespace {

struct Grower {
  const Dataset& data;
  const Hyperparams& hp;
  Rng& rng;
  std::size_t features_per_split;
  Tree tree;

  std::uint32_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
    Node node;
    for (const auto r : rows) ++node.counts[static_cast<std::size_t>(data.label(r))];
    const auto index = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.push_back(node);

    const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
    const bool depth_capped = hp.max_depth && depth >= *hp.max_depth;
    if (pure || depth_capped || rows.size() < hp.min_samples_split) return index;

    const std::size_t p = data.cols();
    std::vector<std::size_t> candidates(p);
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    if (features_per_split < p) {
      // Partial Fisher-Yates: the first m entries are a uniform m-subset.
      for (std::size_t i = 0; i < features_per_split; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(p - i));
        std::swap(candidates[i], candidates[j]);
      }
      candidates.resize(features_per_split);
    }

    const auto split = best_split(data, rows, candidates);
    if (!split) return index;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (const auto r : rows) {
      (data.at(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const auto left = grow(left_rows, depth + 1);
    const auto right = grow(right_rows, depth + 1);
    Node& self = tree.nodes[index];
    self.feature = static_cast<int>(split->feature);
    self.threshold = split->threshold;
    self.left = left;
    self.right = right;
    return index;
  }
};

}  // namespace

Tree grow_tree(const Dataset& data, std::span<const std::size_t> rows, const Hyperparams& hp,
               Rng& feature_rng) {
  if (rows.empty()) throw std::invalid_argument("grow_tree: no rows");
  hp.validate(data.cols());
  Grower g{data, hp, feature_rng, hp.resolved_features(data.cols()), {}};
  std::vector<std::size_t> all(rows.begin(), rows.end());
  g.grow(all, 0);
  return std::move(g.tree);
}

Model train_forest(const Dataset& train, const Hyperparams& hp, std::uint64_t seed,
                   std::size_t workers) {
  require_both_classes(train, "train_forest");
  hp.validate(train.cols());
  Model model;
  model.width = train.cols();
  model.trees = parallel_map<Tree>(hp.n_trees, workers, [&](std::size_t t) {
    std::vector<std::size_t> rows;
    if (hp.bootstrap) {
      rows = bootstrap_indices(train.rows(), derive_seed(seed, "forest-bootstrap", t));
    } else {
      rows.resize(train.rows());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    Rng feature_rng(derive_seed(seed, "forest-features", t));
    return grow_tree(train, rows, hp, feature_rng);
  });
  return model;
}

Prediction predict_forest(const Model& model, std::span<const double> x) {
  if (x.size() != model.width) throw std::invalid_argument("predict_forest: width mismatch");
  if (model.trees.empty()) throw std::invalid_argument("predict_forest: empty forest");
  std::size_t votes = 0;
  for (const auto& t : model.trees) votes += static_cast<std::size_t>(t.predict(x));
  const std::size_t n = model.trees.size();
  return {2 * votes > n ? 1 : 0, static_cast<double>(votes) / static_cast<double>(n)};
}

}  // namespace moyapred::forest
