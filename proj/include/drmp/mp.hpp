#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drmp/ambiguity.hpp"
#include "drmp/model.hpp"

namespace drmp {

/// Adjoint pair per node: P_k in R^n and Q_k = [Q_k^1 .. Q_k^d] in R^{n x d}.
struct Adjoint {
  NodeField<Eigen::VectorXd> P;  // stages 0..N-1
  NodeField<Eigen::MatrixXd> Q;  // stages 0..N-1
};

struct TieEntry {
  int stage = 0;  // tree stage whose child distribution is tied
  std::size_t node = 0;
  std::vector<int> candidates;
};

struct WorstCase {
  Selection selection;
  std::vector<TieEntry> ties;
  CostResult cost;
};

/// Canonical per-node argmax of the conditional total cost.
WorstCase worst_case_selection(const Problem& problem, const ScenarioTree& tree,
                               const Policy& policy, TieTolerance tol = {});

Adjoint adjoint_recursive(const Problem& problem, const ScenarioTree& tree, const Policy& policy,
                          const Selection& selection);
Adjoint adjoint_recursive(const ScenarioTree& tree, const Linearization& lin,
                          const Selection& selection);

/// Direct summation of the matrix-product representation over descendants.
Adjoint adjoint_explicit(const Problem& problem, const ScenarioTree& tree, const Policy& policy,
                         const Selection& selection);
Adjoint adjoint_explicit(const ScenarioTree& tree, const Linearization& lin,
                         const Selection& selection);

/// Max componentwise |a - b| over every node of both processes.
double adjoint_discrepancy(const Adjoint& a, const Adjoint& b);

double hamiltonian(const Problem& problem, int k, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& u, const Eigen::VectorXd& p, const Eigen::MatrixXd& q,
                   const Eigen::MatrixXd& history);
Eigen::VectorXd hamiltonian_u(const Problem& problem, int k, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                              const Eigen::MatrixXd& q, const Eigen::MatrixXd& history);
/// H_u from precomputed coefficient derivatives.
Eigen::VectorXd hamiltonian_u(const StageLinearization& lin, const Eigen::VectorXd& p,
                              const Eigen::MatrixXd& q);

/// Nodes with probability at or below this under the certified selection
/// are reported but never asserted on.
inline constexpr double kPositiveNodeProbability = 1e-15;

struct NodeResidual {
  int stage = 0;
  std::size_t node = 0;
  std::vector<int> path;
  double residual = 0.0;
  Eigen::VectorXd control;
  Eigen::VectorXd gradient;  // H_u
};

struct StationarityReport {
  double tol = 1e-8;
  NodeField<double> residuals;  // 0..N-1, every node
  double max_residual = 0.0;    // over positive-probability nodes
  std::size_t positive_nodes = 0;
  std::size_t null_nodes = 0;
  std::vector<NodeResidual> witnesses;  // worst violating nodes, at most 20
  bool passed = true;
};

StationarityReport check_stationarity(const Problem& problem, const ScenarioTree& tree,
                                      const Policy& policy, const Selection& selection,
                                      const Adjoint& adjoint, double tol = 1e-8);
StationarityReport check_stationarity(const Problem& problem, const ScenarioTree& tree,
                                      const Linearization& lin, const Policy& policy,
                                      const Selection& selection, const Adjoint& adjoint,
                                      double tol = 1e-8);

struct EpsilonRecord {
  double eps = 0.0;
  double quotient = 0.0;  // (J(u* + eps v) - J(u*)) / eps
  double error = 0.0;     // |quotient - S|
};

struct DirectionalReport {
  std::vector<EpsilonRecord> records;
  std::vector<double> orders;  // log-ratio order estimate between consecutive eps
  double sup_value = 0.0;      // S: sup over tied selections of E_P[Theta]
  double canonical_value = 0.0;  // E under the canonical selection
  double min_family_value = 0.0;  // S_min over the direction family
  std::size_t family_size = 0;
  double tol = 1e-9;
  bool variational_inequality = true;  // S_min >= -tol
};

struct DirectionalOptions {
  std::vector<double> eps{1e-2, 1e-3, 1e-4};
  double tol = 1e-9;
  bool coordinate_family = true;
  std::vector<Policy> extra_directions;
  TieTolerance tie{};
};

DirectionalReport directional_derivative_check(const Problem& problem, const ScenarioTree& tree,
                                               const Policy& u_star, const Policy& direction,
                                               const DirectionalOptions& options = {});

struct ConvexityVerdict {
  bool satisfied = true;
  std::size_t samples = 0;
  std::string where;  // "hamiltonian" or "terminal" for a violation
  int stage = -1;
  std::size_t node = 0;
  Eigen::VectorXd z1;
  Eigen::VectorXd z2;
  double gap = 0.0;   // midpoint value minus chord average
};

ConvexityVerdict convexity_sample(const Problem& problem, const ScenarioTree& tree,
                                  const Policy& policy, const Adjoint& adjoint,
                                  std::size_t samples, std::uint64_t seed);

struct CertificateOptions {
  double stationarity_tol = 1e-8;
  double adjoint_tol = 1e-10;
  TieTolerance tie{};
  std::size_t convexity_samples = 64;
  std::uint64_t seed = 0;
  std::size_t random_directions = 1;
  std::vector<double> eps{1e-2, 1e-3, 1e-4};
};

struct Certificate {
  Selection selection;
  std::vector<TieEntry> ties;
  double value = 0.0;
  Adjoint adjoint;
  double adjoint_discrepancy = 0.0;
  bool adjoint_agrees = true;
  StationarityReport stationarity;
  std::vector<DirectionalReport> directional;
  std::optional<ConvexityVerdict> convexity;

  /// Stationarity and the adjoint cross-check; the other blocks are
  /// informational.
  bool passed() const { return stationarity.passed && adjoint_agrees; }
};

Certificate certify(const Problem& problem, const ScenarioTree& tree, const Policy& policy,
                    const CertificateOptions& options = {});

/// Random per-node direction with entries uniform in [-1, 1], restricted so
/// that u + eps v stays in the control set for eps <= 1.
Policy random_direction(const Problem& problem, const ScenarioTree& tree, const Policy& base,
                        std::uint64_t seed);

}  // namespace drmp
