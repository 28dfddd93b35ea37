#include "drmp/ambiguity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "drmp/parallel.hpp"

namespace drmp {

namespace {

constexpr double kWeightSumTol = 1e-12;

std::string default_label(int candidate) {
  return "theta" + std::to_string(candidate);
}

std::vector<double> gather_children(const ScenarioTree& tree, int k,
                                    std::size_t node,
                                    const std::vector<double>& next) {
  const int branching = tree.branching(k);
  std::vector<double> out(branching);
  for (int j = 0; j < branching; ++j) out[j] = next[tree.child(k, node, j)];
  return out;
}

}  // namespace

double TieTolerance::band(double max_value) const {
  return std::max(rel * std::abs(max_value), abs);
}

StageAmbiguity StageAmbiguity::discrete(Eigen::MatrixXd support,
                                        std::vector<Eigen::VectorXd> weights,
                                        std::vector<std::string> labels) {
  if (support.cols() == 0 || support.rows() == 0) {
    throw Error(ErrorKind::EmptySupport, "stage support has no points");
  }
  if (weights.empty()) {
    throw Error(ErrorKind::EmptySupport, "stage has no candidate weight vectors");
  }
  for (Eigen::Index a = 0; a < support.cols(); ++a) {
    if (!support.col(a).allFinite()) {
      throw Error(ErrorKind::ShapeMismatch, "support point is not finite");
    }
    for (Eigen::Index b = a + 1; b < support.cols(); ++b) {
      if (support.col(a) == support.col(b)) {
        std::ostringstream msg;
        msg << "support points " << a << " and " << b << " coincide";
        throw Error(ErrorKind::DuplicateSupportPoint, msg.str());
      }
    }
  }
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const auto& w = weights[c];
    if (w.size() != support.cols()) {
      std::ostringstream msg;
      msg << "weight vector " << c << " has length " << w.size()
          << ", support has " << support.cols() << " points";
      throw Error(ErrorKind::ShapeMismatch, msg.str());
    }
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      if (!(w[j] >= 0.0)) {
        std::ostringstream msg;
        msg << "weight vector " << c << " entry " << j << " = " << w[j];
        throw Error(ErrorKind::NegativeWeight, msg.str());
      }
    }
    const double sum = w.sum();
    if (std::abs(sum - 1.0) > kWeightSumTol) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "weight vector " << c << " sums to " << sum;
      throw Error(ErrorKind::WeightSumNotOne, msg.str());
    }
  }
  if (!labels.empty() && labels.size() != weights.size()) {
    throw Error(ErrorKind::ShapeMismatch, "label count differs from weight count");
  }
  if (labels.empty()) {
    for (std::size_t c = 0; c < weights.size(); ++c) {
      labels.push_back(default_label(static_cast<int>(c)));
    }
  }
  StageAmbiguity stage;
  stage.support_ = std::move(support);
  stage.weights_ = std::move(weights);
  stage.labels_ = std::move(labels);
  return stage;
}

StageAmbiguity StageAmbiguity::moment_matched_gaussian(
    const std::vector<Eigen::VectorXd>& stds, double cap,
    std::vector<std::string> labels) {
  if (stds.empty() || stds.front().size() == 0) {
    throw Error(ErrorKind::EmptySupport, "no standard-deviation candidates");
  }
  const int d = static_cast<int>(stds.front().size());
  for (const auto& s : stds) {
    if (s.size() != d) {
      throw Error(ErrorKind::ShapeMismatch, "std vectors differ in dimension");
    }
    for (int l = 0; l < d; ++l) {
      if (!(s[l] > 0.0)) {
        throw Error(ErrorKind::ShapeMismatch, "standard deviations must be positive");
      }
      if (1.0 - s[l] * s[l] / (cap * cap) < 0.0) {
        std::ostringstream msg;
        msg << "cap " << cap << " below std " << s[l] << " on axis " << l + 1;
        throw Error(ErrorKind::CapTooSmall, msg.str());
      }
    }
  }

  // Axis 1 is the most significant digit of the lexicographic support order.
  int points = 1;
  for (int l = 0; l < d; ++l) points *= 3;
  const double levels[3] = {-cap, 0.0, cap};
  Eigen::MatrixXd support(d, points);
  for (int p = 0; p < points; ++p) {
    int rest = p;
    for (int l = d - 1; l >= 0; --l) {
      support(l, p) = levels[rest % 3];
      rest /= 3;
    }
  }

  std::vector<Eigen::VectorXd> weights;
  weights.reserve(stds.size());
  for (const auto& s : stds) {
    Eigen::VectorXd w(points);
    for (int p = 0; p < points; ++p) {
      int rest = p;
      double prob = 1.0;
      for (int l = d - 1; l >= 0; --l) {
        const double tail = s[l] * s[l] / (2.0 * cap * cap);
        const int level = rest % 3;
        prob *= level == 1 ? 1.0 - 2.0 * tail : tail;
        rest /= 3;
      }
      w[p] = prob;
    }
    weights.push_back(std::move(w));
  }
  return discrete(std::move(support), std::move(weights), std::move(labels));
}

double StageAmbiguity::average(int candidate, std::span<const double> values) const {
  const auto& w = weights_[candidate];
  double acc = 0.0;
  for (int j = 0; j < size(); ++j) acc += w[j] * values[j];
  return acc;
}

ScenarioTree::ScenarioTree(std::vector<StageAmbiguity> stages,
                           std::size_t leaf_budget)
    : stages_(std::move(stages)) {
  if (stages_.empty()) {
    throw Error(ErrorKind::ShapeMismatch, "scenario tree needs at least one stage");
  }
  const int d = stages_.front().dim();
  counts_.assign(1, 1);
  // Exact arithmetic on the count so overflow cannot hide a blown budget.
  long double leaves = 1.0L;
  for (const auto& s : stages_) {
    if (s.dim() != d) {
      throw Error(ErrorKind::ShapeMismatch, "stages differ in noise dimension");
    }
    leaves *= s.size();
  }
  if (leaves > static_cast<long double>(leaf_budget)) {
    std::ostringstream msg;
    msg.precision(20);
    msg << "tree has " << leaves << " leaves, budget is " << leaf_budget;
    throw Error(ErrorKind::BudgetExceeded, msg.str());
  }
  for (const auto& s : stages_) {
    counts_.push_back(counts_.back() * static_cast<std::size_t>(s.size()));
  }
}

std::vector<int> ScenarioTree::path(int k, std::size_t node) const {
  std::vector<int> out(k);
  for (int i = k; i >= 1; --i) {
    out[i - 1] = last_index(i, node);
    node = parent(i, node);
  }
  return out;
}

Eigen::MatrixXd ScenarioTree::noise_history(int k, std::size_t node) const {
  Eigen::MatrixXd out(noise_dim(), k);
  for (int i = k; i >= 1; --i) {
    out.col(i - 1) = stages_[i - 1].point(last_index(i, node));
    node = parent(i, node);
  }
  return out;
}

SublinearResult sublinear_backward(const ScenarioTree& tree,
                                   std::span<const double> leaf_values,
                                   TieTolerance tol) {
  const int N = tree.horizon();
  if (leaf_values.size() != tree.num_leaves()) {
    throw Error(ErrorKind::ShapeMismatch, "leaf payload size differs from leaf count");
  }
  SublinearResult out;
  out.conditionals = NodeField<double>(tree, N + 1);
  out.argmax = ArgmaxSets(tree, N);
  std::copy(leaf_values.begin(), leaf_values.end(), out.conditionals.stage(N).begin());

  for (int k = N - 1; k >= 0; --k) {
    const auto& stage = tree.stage(k);
    const auto& next = out.conditionals.stage(k + 1);
    auto& here = out.conditionals.stage(k);
    auto& sets = out.argmax.stage(k);
    parallel_for(tree.num_nodes(k), [&](std::size_t node) {
      const auto children = gather_children(tree, k, node, next);
      std::vector<double> averages(stage.num_candidates());
      double best = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < stage.num_candidates(); ++c) {
        averages[c] = stage.average(c, children);
        best = std::max(best, averages[c]);
      }
      const double band = tol.band(best);
      std::vector<int> tied;
      for (int c = 0; c < stage.num_candidates(); ++c) {
        if (best - averages[c] <= band) tied.push_back(c);
      }
      here[node] = best;
      sets[node] = std::move(tied);
    });
  }
  out.value = out.conditionals(0, 0);
  return out;
}

void validate_selection(const ScenarioTree& tree, const Selection& selection) {
  if (selection.num_stages() < tree.horizon()) {
    throw Error(ErrorKind::ShapeMismatch, "selection does not cover every stage");
  }
  for (int k = 0; k < tree.horizon(); ++k) {
    if (selection.stage(k).size() != tree.num_nodes(k)) {
      throw Error(ErrorKind::ShapeMismatch, "selection stage size differs from node count");
    }
    for (int c : selection.stage(k)) {
      if (c < 0 || c >= tree.stage(k).num_candidates()) {
        std::ostringstream msg;
        msg << "selection index " << c << " invalid at stage " << k;
        throw Error(ErrorKind::ShapeMismatch, msg.str());
      }
    }
  }
}

ConditionalResult expect_under_selection(const ScenarioTree& tree,
                                         const Selection& selection,
                                         std::span<const double> leaf_values) {
  const int N = tree.horizon();
  validate_selection(tree, selection);
  if (leaf_values.size() != tree.num_leaves()) {
    throw Error(ErrorKind::ShapeMismatch, "leaf payload size differs from leaf count");
  }
  ConditionalResult out;
  out.conditionals = NodeField<double>(tree, N + 1);
  std::copy(leaf_values.begin(), leaf_values.end(), out.conditionals.stage(N).begin());
  for (int k = N - 1; k >= 0; --k) {
    const auto& next = out.conditionals.stage(k + 1);
    auto& here = out.conditionals.stage(k);
    parallel_for(tree.num_nodes(k), [&](std::size_t node) {
      const auto children = gather_children(tree, k, node, next);
      here[node] = tree.stage(k).average(selection(k, node), children);
    });
  }
  out.value = out.conditionals(0, 0);
  return out;
}

NodeField<double> node_probabilities(const ScenarioTree& tree,
                                     const Selection& selection) {
  validate_selection(tree, selection);
  const int N = tree.horizon();
  NodeField<double> prob(tree, N + 1);
  prob(0, 0) = 1.0;
  for (int k = 0; k < N; ++k) {
    const auto& stage = tree.stage(k);
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      const auto& w = stage.weights(selection(k, node));
      for (int j = 0; j < stage.size(); ++j) {
        prob(k + 1, tree.child(k, node, j)) = prob(k, node) * w[j];
      }
    }
  }
  return prob;
}

Selection canonical_selection(const ScenarioTree& tree, const ArgmaxSets& argmax) {
  Selection sel(tree, tree.horizon());
  for (int k = 0; k < tree.horizon(); ++k) {
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      sel(k, node) = argmax(k, node).front();
    }
  }
  return sel;
}

Selection constant_selection(const ScenarioTree& tree, int candidate) {
  for (int k = 0; k < tree.horizon(); ++k) {
    if (candidate >= tree.stage(k).num_candidates()) {
      throw Error(ErrorKind::ShapeMismatch, "candidate index exceeds stage candidate count");
    }
  }
  return Selection(tree, tree.horizon(), candidate);
}

TieRefinement refine_sup_over_ties(const ScenarioTree& tree,
                                   const ArgmaxSets& argmax,
                                   std::span<const double> secondary_leaf_values) {
  const int N = tree.horizon();
  if (secondary_leaf_values.size() != tree.num_leaves()) {
    throw Error(ErrorKind::ShapeMismatch, "leaf payload size differs from leaf count");
  }
  TieRefinement out;
  out.selection = Selection(tree, N);
  std::vector<double> next(secondary_leaf_values.begin(), secondary_leaf_values.end());
  for (int k = N - 1; k >= 0; --k) {
    std::vector<double> here(tree.num_nodes(k));
    auto& chosen = out.selection.stage(k);
    parallel_for(tree.num_nodes(k), [&](std::size_t node) {
      const auto children = gather_children(tree, k, node, next);
      const auto& tied = argmax(k, node);
      double best = -std::numeric_limits<double>::infinity();
      int best_index = tied.front();
      for (int c : tied) {
        const double v = tree.stage(k).average(c, children);
        if (v > best) {
          best = v;
          best_index = c;
        }
      }
      here[node] = best;
      chosen[node] = best_index;
    });
    next = std::move(here);
  }
  out.value = next.front();
  return out;
}

}  // namespace drmp
