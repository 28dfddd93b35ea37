#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "drmp/errors.hpp"

namespace drmp {

// Nodewise argmax tolerance: an index ties with the max when it lies within
// max(rel * |max|, abs) of it.
struct TieTolerance {
  double rel = 1e-9;
  double abs = 1e-12;

  double band(double max_value) const;
};

/// One stage's ambiguity set: a finite noise support in R^d shared by a
/// finite list of candidate probability vectors.
class StageAmbiguity {
 public:
  /// Validates the data. Support points are the columns of `support`.
  static StageAmbiguity discrete(Eigen::MatrixXd support,
                                 std::vector<Eigen::VectorXd> weights,
                                 std::vector<std::string> labels = {});

  /// Three-point-per-axis law on {-cap, 0, cap}^d matching mean zero and the
  /// per-axis variances stds_l^2 of each centered product Gaussian.
  static StageAmbiguity moment_matched_gaussian(
      const std::vector<Eigen::VectorXd>& stds, double cap,
      std::vector<std::string> labels = {});

  int dim() const { return static_cast<int>(support_.rows()); }
  int size() const { return static_cast<int>(support_.cols()); }
  int num_candidates() const { return static_cast<int>(weights_.size()); }

  const Eigen::MatrixXd& support() const { return support_; }
  auto point(int j) const { return support_.col(j); }
  const Eigen::VectorXd& weights(int candidate) const {
    return weights_[candidate];
  }
  const std::vector<Eigen::VectorXd>& all_weights() const { return weights_; }
  const std::string& label(int candidate) const { return labels_[candidate]; }
  const std::vector<std::string>& labels() const { return labels_; }

  bool is_deterministic() const {
    return size() == 1 || num_candidates() == 1;
  }

  // Sum of w_j * values[j] in ascending j.
  double average(int candidate, std::span<const double> values) const;

 private:
  StageAmbiguity() = default;

  Eigen::MatrixXd support_;
  std::vector<Eigen::VectorXd> weights_;
  std::vector<std::string> labels_;
};

inline StageAmbiguity make_discrete_stage(Eigen::MatrixXd support,
                                          std::vector<Eigen::VectorXd> weights,
                                          std::vector<std::string> labels = {}) {
  return StageAmbiguity::discrete(std::move(support), std::move(weights),
                                  std::move(labels));
}

inline StageAmbiguity moment_matched_gaussian_stage(
    const std::vector<Eigen::VectorXd>& stds, double cap,
    std::vector<std::string> labels = {}) {
  return StageAmbiguity::moment_matched_gaussian(stds, cap, std::move(labels));
}

/// Product tree of per-stage supports. A node at stage k is the path of
/// support indices (j_1, ..., j_k); nodes of a stage are numbered in
/// lexicographic path order, so the children of node i at stage k are
/// i * |support_{k+1}| + j.
class ScenarioTree {
 public:
  static constexpr std::size_t kDefaultLeafBudget = 10'000'000;

  explicit ScenarioTree(std::vector<StageAmbiguity> stages,
                        std::size_t leaf_budget = kDefaultLeafBudget);

  int horizon() const { return static_cast<int>(stages_.size()); }
  int noise_dim() const { return stages_.front().dim(); }

  /// Ambiguity of W_{k+1}, i.e. of the transition out of stage k.
  const StageAmbiguity& stage(int k) const { return stages_[k]; }
  const std::vector<StageAmbiguity>& stages() const { return stages_; }

  std::size_t num_nodes(int k) const { return counts_[k]; }
  std::size_t num_leaves() const { return counts_.back(); }
  int branching(int k) const { return stages_[k].size(); }

  std::size_t child(int k, std::size_t node, int j) const {
    return node * static_cast<std::size_t>(stages_[k].size()) + j;
  }
  /// Parent of a stage-k node, k >= 1.
  std::size_t parent(int k, std::size_t node) const {
    return node / static_cast<std::size_t>(stages_[k - 1].size());
  }
  /// Support index of W_k at a stage-k node, k >= 1.
  int last_index(int k, std::size_t node) const {
    return static_cast<int>(node % static_cast<std::size_t>(stages_[k - 1].size()));
  }

  std::vector<int> path(int k, std::size_t node) const;
  /// Columns W_1..W_k observed at a stage-k node.
  Eigen::MatrixXd noise_history(int k, std::size_t node) const;

 private:
  std::vector<StageAmbiguity> stages_;
  std::vector<std::size_t> counts_;
};

inline ScenarioTree build_tree(std::vector<StageAmbiguity> stages,
                               std::size_t leaf_budget = ScenarioTree::kDefaultLeafBudget) {
  return ScenarioTree(std::move(stages), leaf_budget);
}

/// Per-node payload for stages [0, num_stages).
template <typename T>
class NodeField {
 public:
  NodeField() = default;
  NodeField(const ScenarioTree& tree, int num_stages, const T& init = T{}) {
    values_.resize(num_stages);
    for (int k = 0; k < num_stages; ++k) values_[k].assign(tree.num_nodes(k), init);
  }

  int num_stages() const { return static_cast<int>(values_.size()); }
  std::vector<T>& stage(int k) { return values_[k]; }
  const std::vector<T>& stage(int k) const { return values_[k]; }
  T& operator()(int k, std::size_t node) { return values_[k][node]; }
  const T& operator()(int k, std::size_t node) const { return values_[k][node]; }

 private:
  std::vector<std::vector<T>> values_;
};

/// Per-node candidate index for stages 0..N-1; encodes one measure of the
/// rectangular family.
using Selection = NodeField<int>;
using ArgmaxSets = NodeField<std::vector<int>>;

struct SublinearResult {
  double value = 0.0;
  NodeField<double> conditionals;  // stages 0..N
  ArgmaxSets argmax;               // stages 0..N-1, ascending indices
};

struct ConditionalResult {
  double value = 0.0;
  NodeField<double> conditionals;  // stages 0..N
};

struct TieRefinement {
  double value = 0.0;
  Selection selection;
};

/// Nested worst-case expectation of the leaf payload with maximizer tracking.
SublinearResult sublinear_backward(const ScenarioTree& tree,
                                   std::span<const double> leaf_values,
                                   TieTolerance tol = {});

/// Classical nested conditional expectation under one selection.
ConditionalResult expect_under_selection(const ScenarioTree& tree,
                                         const Selection& selection,
                                         std::span<const double> leaf_values);

NodeField<double> node_probabilities(const ScenarioTree& tree,
                                     const Selection& selection);

/// Lowest tied index at every node.
Selection canonical_selection(const ScenarioTree& tree, const ArgmaxSets& argmax);

/// Sup of the secondary payload's expectation over selections restricted to
/// the tie sets, by backward recursion.
TieRefinement refine_sup_over_ties(const ScenarioTree& tree,
                                   const ArgmaxSets& argmax,
                                   std::span<const double> secondary_leaf_values);

Selection constant_selection(const ScenarioTree& tree, int candidate);
void validate_selection(const ScenarioTree& tree, const Selection& selection);

}  // namespace drmp
