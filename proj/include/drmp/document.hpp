#pragma once

#include <Eigen/Dense>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drmp/model.hpp"
#include "drmp/mp.hpp"
#include "drmp/solver.hpp"

namespace drmp {

using Json = nlohmann::ordered_json;

struct NoiseSpec {
  enum class Type { Discrete, GaussianMoment3 };

  Type type = Type::Discrete;
  Eigen::MatrixXd points;               // discrete: d x S
  std::vector<Eigen::VectorXd> weights;  // discrete
  std::vector<Eigen::VectorXd> stds;     // gaussian_moment3: per candidate, d entries
  double cap = 0.0;                      // gaussian_moment3
  std::vector<std::string> labels;

  StageAmbiguity build() const;
};

struct StageSpec {
  std::vector<std::string> b;                   // n
  std::vector<std::vector<std::string>> sigma;  // d x n
  std::string f = "0";
  ControlSet control;
  NoiseSpec noise;
  StateBox state_box;
};

struct SolverSpec {
  std::string method = "dp";  // dp, mp or both
  int degree = 4;
  int points_per_axis = 0;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  int multistart = 3;
  std::size_t leaf_budget = ScenarioTree::kDefaultLeafBudget;

  SolveOptions options() const;
};

struct ProblemDocument {
  int horizon = 0;
  int state_dim = 0;
  int control_dim = 0;
  int noise_dim = 0;
  Eigen::VectorXd x0;
  std::string terminal;
  std::vector<StageSpec> stages;
  std::optional<StateBox> terminal_box;
  std::optional<SolverSpec> solver;

  Problem problem;  // built and validated on parse
};

/// Parses and validates a problem document. Errors carry the field path,
/// and syntax errors the line and column.
ProblemDocument parse_document(const std::string& text);
ProblemDocument load_document(const std::string& path);

Json document_to_json(const ProblemDocument& doc);
/// Canonical serialization; parse_document(serialize_document(d)) reproduces d.
std::string serialize_document(const ProblemDocument& doc);

/// Builds the model from the parsed stages and validates it.
Problem build_problem(const ProblemDocument& doc);

/// Per-node controls in stage-major lexicographic order:
/// {"controls": [[u per node] per stage]}, u an array (or a number when m = 1).
Policy parse_policy(const std::string& text, const Problem& problem, const ScenarioTree& tree);
Policy load_policy(const std::string& path, const Problem& problem, const ScenarioTree& tree);
Json policy_to_json(const Policy& policy, int m);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

/// "p/q" when |x - p/q| <= tol for some q <= max_denominator.
std::optional<std::string> rational_string(double x, double tol = 1e-12,
                                           long long max_denominator = 1'000'000);

Json selection_table(const Problem& problem, const ScenarioTree& tree, const Selection& selection,
                     const std::vector<TieEntry>& ties);
Json certificate_json(const Certificate& cert, double adjoint_tol);
Json stationarity_json(const StationarityReport& report);
Json directional_json(const DirectionalReport& report);
Json feedback_json(const Solution& solution);
Json solution_json(const Problem& problem, const ScenarioTree& tree, const Solution& solution,
                   double adjoint_tol);
Json value_json(double value);

}  // namespace drmp
