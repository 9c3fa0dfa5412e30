#include "intent/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace intent::forest {

namespace {

struct Counts {
  double pos = 0.0;  // weighted
  double neg = 0.0;
  double total() const { return pos + neg; }
  // Gini impurity scaled by node weight
  double weighted_gini() const {
    const double t = total();
    if (t <= 0.0) return 0.0;
    return 2.0 * pos * neg / t;
  }
  double fraction() const { return total() > 0.0 ? pos / total() : 0.5; }
};

struct Item {
  double value;
  double label;
  double weight;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const double> y, std::span<const double> w,
              const ForestParams& p, std::mt19937_64& rng)
      : x_(x), y_(y), w_(w), p_(p), rng_(rng), dim_(static_cast<int>(x.rows())) {
    mtry_ = p.features_per_split > 0
                ? std::min(p.features_per_split, dim_)
                : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(dim_)))));
    features_.resize(dim_);
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build(std::vector<int> indices) {
    Tree tree;
    tree.nodes.emplace_back();
    grow(tree, 0, std::move(indices), 0);
    return tree;
  }

 private:
  Counts count(const std::vector<int>& idx) const {
    Counts c;
    for (int i : idx) (y_[i] > 0.5 ? c.pos : c.neg) += w_[i];
    return c;
  }

  void grow(Tree& tree, int node, std::vector<int> idx, int depth) {
    const Counts c = count(idx);
    tree.nodes[node].value = c.fraction();
    const int n = static_cast<int>(idx.size());
    if (depth >= p_.max_depth || c.pos <= 0.0 || c.neg <= 0.0 || n < 2 * p_.min_samples_leaf) {
      return;
    }

    // partial Fisher-Yates: the first mtry_ entries become this node's candidates
    for (int k = 0; k < mtry_; ++k) {
      std::uniform_int_distribution<int> pick(k, dim_ - 1);
      std::swap(features_[k], features_[pick(rng_)]);
    }

    const double parent = c.weighted_gini();
    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    items_.resize(n);
    for (int k = 0; k < mtry_; ++k) {
      const int f = features_[k];
      for (int j = 0; j < n; ++j) items_[j] = {x_(f, idx[j]), y_[idx[j]], w_[idx[j]]};
      std::sort(items_.begin(), items_.end(),
                [](const Item& a, const Item& b) { return a.value < b.value; });
      Counts left;
      for (int j = 0; j + 1 < n; ++j) {
        (items_[j].label > 0.5 ? left.pos : left.neg) += items_[j].weight;
        if (items_[j].value == items_[j + 1].value) continue;
        if (j + 1 < p_.min_samples_leaf || n - j - 1 < p_.min_samples_leaf) continue;
        const Counts right{c.pos - left.pos, c.neg - left.neg};
        const double gain = parent - left.weighted_gini() - right.weighted_gini();
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (items_[j].value + items_[j + 1].value);
          // midpoint can round onto the upper value for adjacent doubles
          if (!(best_threshold < items_[j + 1].value)) best_threshold = items_[j].value;
        }
      }
    }
    if (best_feature < 0) return;

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(idx.size());
    right_idx.reserve(idx.size());
    for (int i : idx) (x_(best_feature, i) <= best_threshold ? left_idx : right_idx).push_back(i);
    idx.clear();
    idx.shrink_to_fit();

    const int l = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    Node& nd = tree.nodes[node];
    nd.feature = best_feature;
    nd.threshold = best_threshold;
    nd.left = l;
    nd.right = l + 1;
    grow(tree, l, std::move(left_idx), depth + 1);
    grow(tree, l + 1, std::move(right_idx), depth + 1);
  }

  const Eigen::MatrixXd& x_;
  std::span<const double> y_;
  std::span<const double> w_;
  const ForestParams& p_;
  std::mt19937_64& rng_;
  int dim_;
  int mtry_;
  std::vector<int> features_;
  std::vector<Item> items_;
};

int depth_of(const Tree& t, int node) {
  const Node& n = t.nodes[node];
  if (n.is_leaf()) return 0;
  return 1 + std::max(depth_of(t, n.left), depth_of(t, n.right));
}

}  // namespace

const Node& Tree::leaf_for(const double* x) const {
  const Node* n = &nodes[0];
  while (!n->is_leaf()) n = &nodes[x[n->feature] <= n->threshold ? n->left : n->right];
  return *n;
}

int Tree::depth() const { return nodes.empty() ? 0 : depth_of(*this, 0); }

RandomForest RandomForest::fit(const Eigen::MatrixXd& inputs, std::span<const double> labels,
                               std::span<const double> weights, const ForestParams& params,
                               std::uint64_t seed) {
  const auto n = static_cast<int>(inputs.cols());
  if (n == 0 || labels.size() != static_cast<std::size_t>(n) ||
      weights.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("RandomForest::fit: inconsistent training data");
  }
  if (params.trees < 1 || params.max_depth < 0 || params.min_samples_leaf < 1) {
    throw std::invalid_argument("RandomForest::fit: invalid parameters");
  }
  RandomForest rf(static_cast<int>(inputs.rows()));
  std::mt19937_64 rng(seed);
  TreeBuilder builder(inputs, labels, weights, params, rng);
  std::uniform_int_distribution<int> draw(0, n - 1);
  rf.trees_.reserve(params.trees);
  for (int t = 0; t < params.trees; ++t) {
    std::vector<int> idx(n);
    if (params.bootstrap) {
      for (auto& i : idx) i = draw(rng);
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    rf.trees_.push_back(builder.build(std::move(idx)));
  }
  return rf;
}

double RandomForest::predict(const double* x) const {
  if (trees_.empty()) return 0.5;
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(x);
  return s / static_cast<double>(trees_.size());
}

}  // namespace intent::forest
