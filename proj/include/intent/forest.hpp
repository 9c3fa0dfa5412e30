#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace intent::forest {

struct ForestParams {
  int trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 1;
  int features_per_split = 0;  // 0: floor(sqrt(input_dim)), at least 1
  bool bootstrap = true;
};

/// Internal nodes route x[feature] <= threshold to `left`. Leaves have
/// feature == -1 and store the (class-weighted) fraction of positives.
struct Node {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<Node> nodes;  // nodes[0] is the root

  const Node& leaf_for(const double* x) const;
  double predict(const double* x) const { return leaf_for(x).value; }
  int depth() const;
};

class RandomForest {
 public:
  RandomForest() = default;
  explicit RandomForest(int input_dim) : input_dim_(input_dim) {}

  /// inputs is (input_dim x n); weights are per-sample class weights.
  static RandomForest fit(const Eigen::MatrixXd& inputs, std::span<const double> labels,
                          std::span<const double> weights, const ForestParams& params,
                          std::uint64_t seed);

  /// Mean of the trees' leaf values; 0.5 for an empty forest.
  double predict(const double* x) const;

  int input_dim() const { return input_dim_; }
  const std::vector<Tree>& trees() const { return trees_; }
  std::vector<Tree>& trees() { return trees_; }

 private:
  int input_dim_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace intent::forest
