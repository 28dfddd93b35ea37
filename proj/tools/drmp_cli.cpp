// drmp: solve, certify and evaluate robust control problems from documents.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "drmp/document.hpp"
#include "drmp/mp.hpp"
#include "drmp/parallel.hpp"
#include "drmp/solver.hpp"

namespace {

using drmp::Json;

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kCertificateFailed = 2;

struct Common {
  std::string document;
  std::string out;
};

void emit(const Json& report, const std::string& out) {
  const std::string text = report.dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else drmp::write_file(out, text);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct SolveArgs {
  Common io;
  std::string method;
  std::optional<double> tol;
  std::optional<int> degree;
  std::optional<std::uint64_t> seed;
  std::string policy_out;
  bool no_timing = false;
};

int cmd_solve(const SolveArgs& args) {
  const auto doc = drmp::load_document(args.io.document);
  drmp::SolverSpec spec = doc.solver.value_or(drmp::SolverSpec{});
  if (!args.method.empty()) spec.method = args.method;
  if (args.tol) spec.tol = *args.tol;
  if (args.degree) spec.degree = *args.degree;
  if (args.seed) spec.seed = *args.seed;
  const drmp::ScenarioTree tree = drmp::build_tree(doc.problem, spec.leaf_budget);
  const drmp::SolveOptions options = spec.options();

  std::vector<drmp::Solution> solutions;
  std::vector<double> elapsed;
  auto run = [&](bool mp) {
    const auto start = std::chrono::steady_clock::now();
    solutions.push_back(mp ? drmp::solve_mp_backward(doc.problem, tree, options)
                           : drmp::solve_dp(doc.problem, tree, options));
    elapsed.push_back(seconds_since(start));
  };
  if (spec.method == "dp" || spec.method == "both") run(false);
  if (spec.method == "mp" || spec.method == "both") run(true);

  bool ok = true;
  Json report = Json::object();
  report["command"] = "solve";
  report["method"] = spec.method;
  report["J"] = drmp::value_json(solutions.front().value);
  Json sols = Json::array();
  for (const auto& s : solutions) {
    ok = ok && s.certificate.passed();
    sols.push_back(drmp::solution_json(doc.problem, tree, s, options.certificate.adjoint_tol));
  }
  if (solutions.size() == 2) {
    const auto& a = solutions[0];
    const auto& b = solutions[1];
    const auto prob = drmp::node_probabilities(tree, a.selection);
    double policy_diff = 0.0;
    for (int k = 0; k < doc.problem.horizon; ++k) {
      for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
        if (prob(k, node) <= drmp::kPositiveNodeProbability || doc.problem.m == 0) continue;
        policy_diff = std::max(policy_diff, (a.policy(k, node) - b.policy(k, node)).cwiseAbs().maxCoeff());
      }
    }
    const double j_diff = std::abs(a.value - b.value);
    Json agreement = Json::object();
    agreement["J_difference"] = j_diff;
    agreement["policy_difference"] = policy_diff;
    agreement["J_tol"] = 1e-9;
    agreement["policy_tol"] = 1e-7;
    agreement["agrees"] = j_diff <= 1e-9 && policy_diff <= 1e-7;
    ok = ok && agreement["agrees"].get<bool>();
    report["agreement"] = agreement;
  }
  report["status"] = ok ? "certified" : "certificate_failed";
  report["solutions"] = sols;
  Json opts = Json::object();
  opts["degree"] = options.degree;
  opts["points_per_axis"] = options.grid_points();
  opts["tol"] = options.certificate.stationarity_tol;
  opts["seed"] = options.certificate.seed;
  opts["multistart"] = options.multistart;
  opts["leaf_budget"] = spec.leaf_budget;
  opts["threads"] = drmp::thread_count();
  report["options"] = opts;
  if (!args.no_timing) {
    Json timing = Json::object();
    for (std::size_t i = 0; i < solutions.size(); ++i) timing[solutions[i].method + "_seconds"] = elapsed[i];
    report["timing"] = timing;
  }
  emit(report, args.io.out);
  if (!args.policy_out.empty()) {
    drmp::write_file(args.policy_out, drmp::policy_to_json(solutions.front().policy, doc.problem.m).dump(2) + "\n");
  }
  return ok ? kOk : kCertificateFailed;
}

int cmd_check(const Common& io, const std::string& policy_path, double tol) {
  const auto doc = drmp::load_document(io.document);
  const drmp::ScenarioTree tree = drmp::build_tree(doc.problem);
  const drmp::Policy policy = drmp::load_policy(policy_path, doc.problem, tree);
  drmp::check_admissible(doc.problem, tree, policy);
  drmp::CertificateOptions opt;
  opt.stationarity_tol = tol;
  opt.random_directions = 0;
  opt.convexity_samples = 0;
  const drmp::Certificate cert = drmp::certify(doc.problem, tree, policy, opt);
  Json report = Json::object();
  report["command"] = "check";
  report["J"] = drmp::value_json(cert.value);
  report["status"] = cert.passed() ? "certified" : "certificate_failed";
  report["selection"] = drmp::selection_table(doc.problem, tree, cert.selection, cert.ties);
  report["certificate"] = drmp::certificate_json(cert, opt.adjoint_tol);
  emit(report, io.out);
  return cert.passed() ? kOk : kCertificateFailed;
}

int cmd_grad(const Common& io, const std::string& policy_path, const std::string& direction_path,
             const std::vector<double>& eps) {
  const auto doc = drmp::load_document(io.document);
  const drmp::ScenarioTree tree = drmp::build_tree(doc.problem);
  const drmp::Policy policy = drmp::load_policy(policy_path, doc.problem, tree);
  const drmp::Policy direction = drmp::load_policy(direction_path, doc.problem, tree);
  drmp::check_admissible(doc.problem, tree, policy);
  drmp::DirectionalOptions opt;
  opt.eps = eps;
  const auto r = drmp::directional_derivative_check(doc.problem, tree, policy, direction, opt);
  Json report = Json::object();
  report["command"] = "grad";
  report["J"] = drmp::value_json(drmp::cost(doc.problem, tree, policy).value);
  report["directional"] = drmp::directional_json(r);
  emit(report, io.out);
  return kOk;
}

int cmd_eval(const Common& io, const std::string& policy_path) {
  const auto doc = drmp::load_document(io.document);
  const drmp::ScenarioTree tree = drmp::build_tree(doc.problem);
  const drmp::Policy policy = drmp::load_policy(policy_path, doc.problem, tree);
  drmp::check_admissible(doc.problem, tree, policy);
  const auto wc = drmp::worst_case_selection(doc.problem, tree, policy);
  Json report = Json::object();
  report["command"] = "eval";
  report["J"] = drmp::value_json(wc.cost.value);
  report["selection"] = drmp::selection_table(doc.problem, tree, wc.selection, wc.ties);
  emit(report, io.out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust stochastic control under distribution uncertainty"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Solve a problem and certify the optimum");
  s->add_option("document", solve.io.document, "Problem document")->required()->check(CLI::ExistingFile);
  s->add_option("--method", solve.method, "dp, mp or both")->check(CLI::IsMember({"dp", "mp", "both"}));
  s->add_option("--out", solve.io.out, "Report path (default stdout)");
  s->add_option("--tol", solve.tol, "Stationarity tolerance");
  s->add_option("--degree", solve.degree, "Collocation degree");
  s->add_option("--seed", solve.seed, "Certificate seed");
  s->add_option("--policy-out", solve.policy_out, "Write the optimal policy file");
  s->add_flag("--no-timing", solve.no_timing, "Omit timing from the report");

  Common check_io;
  std::string check_policy;
  double check_tol = 1e-8;
  auto* c = app.add_subcommand("check", "Certify a given policy");
  c->add_option("document", check_io.document, "Problem document")->required()->check(CLI::ExistingFile);
  c->add_option("policy", check_policy, "Policy file")->required()->check(CLI::ExistingFile);
  c->add_option("--tol", check_tol, "Stationarity tolerance");
  c->add_option("--out", check_io.out, "Report path (default stdout)");

  Common grad_io;
  std::string grad_policy, grad_direction;
  std::vector<double> grad_eps{1e-2, 1e-3, 1e-4};
  auto* g = app.add_subcommand("grad", "Directional derivative table along a perturbation");
  g->add_option("document", grad_io.document, "Problem document")->required()->check(CLI::ExistingFile);
  g->add_option("policy", grad_policy, "Policy file")->required()->check(CLI::ExistingFile);
  g->add_option("direction", grad_direction, "Direction file")->required()->check(CLI::ExistingFile);
  g->add_option("--eps", grad_eps, "Step sizes")->delimiter(',');
  g->add_option("--out", grad_io.out, "Report path (default stdout)");

  Common eval_io;
  std::string eval_policy;
  auto* e = app.add_subcommand("eval", "Worst-case cost of a policy");
  e->add_option("document", eval_io.document, "Problem document")->required()->check(CLI::ExistingFile);
  e->add_option("policy", eval_policy, "Policy file")->required()->check(CLI::ExistingFile);
  e->add_option("--out", eval_io.out, "Report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kError;
  }

  try {
    if (*s) return cmd_solve(solve);
    if (*c) return cmd_check(check_io, check_policy, check_tol);
    if (*g) return cmd_grad(grad_io, grad_policy, grad_direction, grad_eps);
    if (*e) return cmd_eval(eval_io, eval_policy);
  } catch (const std::exception& ex) {
    std::cerr << "drmp: " << ex.what() << "\n";
    return kError;
  }
  return kError;
}
