#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "drmp/ambiguity.hpp"
#include "drmp/expr.hpp"

namespace drmp {

/// Convex control set U_k: a box whose entries may be infinite.
struct ControlSet {
  enum class Kind { Unconstrained, Box };

  Kind kind = Kind::Unconstrained;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static ControlSet unconstrained(int m);
  static ControlSet box(Eigen::VectorXd lo, Eigen::VectorXd hi);

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Eigen::VectorXd& u, double tol = 1e-12) const;
  Eigen::VectorXd project(const Eigen::VectorXd& u) const;
};

/// Collocation interval for the state of one stage. Not a constraint.
struct StateBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct StageModel {
  std::vector<Expr> drift;                   // b_k, n entries
  std::vector<std::vector<Expr>> diffusion;  // sigma_k^l, d channels of n entries
  Expr running;                              // f_k
  ControlSet control;
  StateBox state_box;
};

struct Problem {
  int horizon = 0;
  int n = 0;
  int m = 0;
  int d = 0;
  Eigen::VectorXd x0;
  std::vector<StageModel> stages;      // k = 0..N-1
  std::vector<StageAmbiguity> noise;   // ambiguity of W_{k+1}, k = 0..N-1
  Expr terminal;                       // phi(x)
  StateBox terminal_box;
};

/// Checks every structural invariant and throws one Error listing all
/// violations. The error kind is that of the first violation.
void validate_problem(const Problem& problem);

ScenarioTree build_tree(const Problem& problem,
                        std::size_t leaf_budget = ScenarioTree::kDefaultLeafBudget);

/// u_k(node) for stages 0..N-1.
using Policy = NodeField<Eigen::VectorXd>;
/// X_k(node) for stages 0..N.
using Trajectory = NodeField<Eigen::VectorXd>;

Policy constant_policy(const ScenarioTree& tree, const Eigen::VectorXd& u);
void check_admissible(const Problem& problem, const ScenarioTree& tree, const Policy& policy);

/// Coefficients of one stage at one point.
struct StageEval {
  Eigen::VectorXd drift;      // n
  Eigen::MatrixXd diffusion;  // n x d, column l = sigma^l
  double running = 0.0;
};

struct StageLinearization : StageEval {
  Eigen::MatrixXd drift_x;                  // n x n
  Eigen::MatrixXd drift_u;                  // n x m
  std::vector<Eigen::MatrixXd> diffusion_x; // d of n x n
  std::vector<Eigen::MatrixXd> diffusion_u; // d of n x m
  Eigen::VectorXd running_x;                // n
  Eigen::VectorXd running_u;                // m
};

StageEval evaluate_stage(const Problem& problem, int k, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, const Eigen::MatrixXd& history);
StageLinearization linearize_stage(const Problem& problem, int k, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u, const Eigen::MatrixXd& history);

/// drift + sum_l diffusion_l * w_l, accumulated in ascending l.
Eigen::VectorXd next_state(const StageEval& eval, const Eigen::Ref<const Eigen::VectorXd>& w);

Trajectory simulate(const Problem& problem, const ScenarioTree& tree, const Policy& policy);

struct CostResult {
  double value = 0.0;
  Trajectory trajectory;
  std::vector<double> leaf_payload;  // sum_k f_k + phi(X_N) per leaf
  NodeField<double> conditionals;
  ArgmaxSets argmax;
};

CostResult cost(const Problem& problem, const ScenarioTree& tree, const Policy& policy,
                TieTolerance tol = {});

/// Derivatives of every coefficient along a trajectory.
struct Linearization {
  NodeField<StageLinearization> stages;       // 0..N-1
  std::vector<Eigen::VectorXd> terminal_grad;  // phi_x(X_N) per leaf
};

Linearization linearize(const Problem& problem, const ScenarioTree& tree,
                        const Trajectory& trajectory, const Policy& policy);

NodeField<Eigen::VectorXd> variational_state(const Problem& problem, const ScenarioTree& tree,
                                             const Policy& u_star, const Policy& direction);
NodeField<Eigen::VectorXd> variational_state(const ScenarioTree& tree, const Linearization& lin,
                                             const Policy& direction);

/// Leaf payload of the first variation of the cost along `direction`.
std::vector<double> gateaux_term(const Problem& problem, const ScenarioTree& tree,
                                 const Policy& u_star, const Policy& direction);
std::vector<double> gateaux_term(const ScenarioTree& tree, const Linearization& lin,
                                 const Policy& direction);

Policy add_scaled(const Policy& base, double eps, const Policy& direction);

/// True when every drift and diffusion entry is affine in (x, u) and every
/// cost is at most quadratic.
bool is_linear_quadratic(const Problem& problem);

}  // namespace drmp
