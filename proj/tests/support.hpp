#pragma once

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "drmp/ambiguity.hpp"
#include "drmp/model.hpp"

namespace drmp::testing {

std::string problems_dir();
Problem load_example(int which);

struct StageText {
  std::vector<std::string> b;
  std::vector<std::vector<std::string>> sigma;  // d x n
  std::string f = "0";
};

/// Parses the stage texts with per-stage identifier scopes.
Problem assemble(int n, int m, int d, const Eigen::VectorXd& x0, const std::vector<StageText>& stages,
                 const std::vector<StageAmbiguity>& noise, const std::string& terminal,
                 std::vector<ControlSet> controls = {}, double box = 4.0);

/// Example 1 built directly, without going through the document reader.
Problem example1_in_code();

/// u at a stage-k node given its state, evaluated along the simulated path.
using Feedback = std::function<Eigen::VectorXd(int k, std::size_t node, const Eigen::VectorXd& x)>;
Policy feedback_policy(const Problem& problem, const ScenarioTree& tree, const Feedback& fb);

/// Closed-form optimal policies of the three worked examples.
Policy example_optimal_policy(int which, const Problem& problem, const ScenarioTree& tree);

// Scalar X' = a x + b u + (c x + e u) W with W = +-s equally likely,
// f = q x^2 + r u^2, phi = qN x^2.
struct ScalarLq {
  int N = 4;
  double a = 1.0, b = 1.0, c = 0.0, e = 0.0, s = 1.0;
  double q = 1.0, r = 1.0, qN = 1.0, x0 = 1.0;
};
Problem scalar_lq_problem(const ScalarLq& p);

struct Riccati {
  std::vector<double> P;  // 0..N
  std::vector<double> K;  // u_k = K_k x
  double J = 0.0;
};
Riccati riccati(const ScalarLq& p);

// Two-stage toy with W in {0, 1}, P(W = 1) in {0.2, 0.4}, b = x + u,
// sigma = 1, f = u^2, phi = x^2, controls in [-2, 2].
Problem coin_toy(double x0);

// Random scalar LQ problem with zero-mean three-point candidates; the
// enlarged variant appends one more candidate at every stage.
Problem random_ambiguity_problem(std::uint64_t seed, bool enlarged);

// Random well-conditioned expressions over x1, x2, u1, w1_1 (stage 1).
// Denominators stay away from zero and exp arguments stay bounded.
class ExpressionGenerator {
 public:
  explicit ExpressionGenerator(std::uint64_t seed) : rng_(seed) {}
  std::string expr(int depth);

 private:
  int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }
  std::string leaf();

  std::mt19937_64 rng_;
};

// Small scalar-noise tree with 1-2 stages, 2-3 points and 1-2 candidates.
ScenarioTree random_small_tree(std::mt19937_64& rng);

// Expectation of the leaf payload under one selection by summing the path
// probability of every leaf.
double path_expectation(const ScenarioTree& tree, const Selection& sel, const std::vector<double>& leaves);

// Every per-node selection of a small tree.
std::vector<Selection> all_selections(const ScenarioTree& tree);

}  // namespace drmp::testing
