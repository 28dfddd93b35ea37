#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "drmp/ambiguity.hpp"
#include "drmp/model.hpp"
#include "drmp/mp.hpp"
#include "drmp/poly.hpp"

namespace drmp {

struct SolveOptions {
  int degree = 4;
  int points_per_axis = 0;  // 0 selects degree + 3
  int max_newton_iterations = 100;
  double gradient_tol = 1e-12;
  int max_halvings = 40;
  int multistart = 3;
  int max_fixed_point_iterations = 200;
  double fit_tol = 1e-7;
  TieTolerance tie{};
  bool certify = true;
  CertificateOptions certificate{};

  int grid_points() const { return points_per_axis > 0 ? points_per_axis : degree + 3; }
  void validate() const;
};

/// Per-node collocation representations of one stage.
struct StageFunctions {
  ChebyshevBasis basis;
  std::vector<Eigen::VectorXd> value;     // cost-to-go coefficients per node
  std::vector<Eigen::MatrixXd> feedback;  // basis.size() x m per node
  std::vector<Eigen::MatrixXd> costate;   // basis.size() x n per node (maximum-principle path)
  std::vector<std::vector<int>> point_selection;  // argmax candidate per collocation point
  double value_residual = 0.0;
  double feedback_residual = 0.0;
  double costate_residual = 0.0;

  double value_at(std::size_t node, const Eigen::VectorXd& x) const;
  Eigen::VectorXd feedback_at(std::size_t node, const Eigen::VectorXd& x) const;
};

struct SolveDiagnostics {
  bool linear_quadratic = false;
  std::size_t inner_solves = 0;
  std::size_t iterations = 0;
  std::size_t multistart_disagreements = 0;
  double max_fit_residual = 0.0;
};

struct Solution {
  std::string method;
  Policy policy;
  Trajectory trajectory;
  std::vector<StageFunctions> stages;  // k = 0..N-1
  Selection selection;
  std::vector<TieEntry> ties;
  double value = 0.0;
  bool certified = false;  // certificate computed
  Certificate certificate;
  SolveDiagnostics diagnostics;
};

/// Robust dynamic programming: min over u of max over candidates at every
/// node and collocation point, with fitted per-node value functions.
Solution solve_dp(const Problem& problem, const ScenarioTree& tree, const SolveOptions& options = {});

/// Backward maximum-principle algorithm: worst-case candidate from the
/// continuation cost, adjoint pair from fitted costates, and the projected
/// stationarity condition H_u (v - u) >= 0 solved by damped Newton.
Solution solve_mp_backward(const Problem& problem, const ScenarioTree& tree,
                           const SolveOptions& options = {});

enum class BruteForceMode {
  Recursive,        // exhaustive grid search per node given the ancestors' choices
  FullEnumeration,  // every per-node combination evaluated with cost()
};

struct BruteForceResult {
  Policy policy;
  double value = 0.0;
  std::size_t enumeration_size = 0;
};

/// Grid optimum over per-node controls drawn from `grid` in every control
/// component (tensor grid when m > 1).
BruteForceResult brute_force_oracle(const Problem& problem, const ScenarioTree& tree,
                                    const std::vector<double>& grid,
                                    BruteForceMode mode = BruteForceMode::Recursive,
                                    std::size_t budget = 10'000'000);

std::vector<double> uniform_grid(double lo, double hi, double step);

}  // namespace drmp
