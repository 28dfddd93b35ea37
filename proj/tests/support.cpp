#include "support.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "drmp/document.hpp"

namespace drmp::testing {

std::string problems_dir() { return DRMP_PROBLEMS_DIR; }

Problem load_example(int which) {
  return load_document(problems_dir() + "/ex" + std::to_string(which) + ".json").problem;
}

Problem assemble(int n, int m, int d, const Eigen::VectorXd& x0, const std::vector<StageText>& stages,
                 const std::vector<StageAmbiguity>& noise, const std::string& terminal,
                 std::vector<ControlSet> controls, double box) {
  Problem p;
  p.horizon = static_cast<int>(stages.size());
  p.n = n;
  p.m = m;
  p.d = d;
  p.x0 = x0;
  for (int k = 0; k < p.horizon; ++k) {
    const ParseContext ctx{n, m, d, k};
    StageModel s;
    for (const auto& t : stages[k].b) s.drift.push_back(Expr::parse(t, ctx));
    for (const auto& channel : stages[k].sigma) {
      std::vector<Expr> exprs;
      for (const auto& t : channel) exprs.push_back(Expr::parse(t, ctx));
      s.diffusion.push_back(exprs);
    }
    s.running = Expr::parse(stages[k].f, ctx);
    s.control = controls.empty() ? ControlSet::unconstrained(m) : controls[k];
    s.state_box = StateBox{Eigen::VectorXd::Constant(n, -box), Eigen::VectorXd::Constant(n, box)};
    p.stages.push_back(s);
    p.noise.push_back(noise[k]);
  }
  p.terminal = Expr::parse(terminal, ParseContext{n, 0, d, 0});
  p.terminal_box = p.stages.back().state_box;
  validate_problem(p);
  return p;
}

Problem example1_in_code() {
  const double r2 = std::sqrt(2.0);
  std::vector<Eigen::VectorXd> stds{Eigen::Vector2d(r2, 1.0), Eigen::Vector2d(1.0, r2)};
  const StageAmbiguity amb = StageAmbiguity::moment_matched_gaussian(stds, std::sqrt(3.0));
  std::vector<StageText> st{
      {{"x1 + u1"}, {{"u1"}, {"u1"}}},
      {{"x1 + u1"}, {{"2*u1"}, {"u1"}}},
      {{"x1 + u1"}, {{"u1"}, {"2*u1"}}},
      {{"x1 + u1"}, {{"u1"}, {"u1"}}},
  };
  return assemble(1, 1, 2, Eigen::VectorXd::Ones(1), st, {amb, amb, amb, amb}, "x1^2");
}

Policy feedback_policy(const Problem& problem, const ScenarioTree& tree, const Feedback& fb) {
  Policy policy(tree, problem.horizon);
  Trajectory x(tree, problem.horizon + 1);
  x(0, 0) = problem.x0;
  for (int k = 0; k < problem.horizon; ++k) {
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      policy(k, node) = fb(k, node, x(k, node));
      const StageEval e = evaluate_stage(problem, k, x(k, node), policy(k, node), tree.noise_history(k, node));
      for (int j = 0; j < tree.branching(k); ++j) {
        x(k + 1, tree.child(k, node, j)) = next_state(e, tree.stage(k).point(j));
      }
    }
  }
  return policy;
}

Policy example_optimal_policy(int which, const Problem& problem, const ScenarioTree& tree) {
  auto scalar = [](double v) { return Eigen::VectorXd::Constant(1, v); };
  if (which == 1 || which == 2) {
    const double g3 = which == 1 ? -0.25 : -0.2;
    const double g12 = which == 1 ? -0.1 : -1.0 / 11.0;
    return feedback_policy(problem, tree, [&](int k, std::size_t, const Eigen::VectorXd& x) {
      if (k == 0) return scalar(g3);
      if (k == 3) return scalar(g3 * x[0]);
      return scalar(g12 * x[0]);
    });
  }
  return feedback_policy(problem, tree, [&](int k, std::size_t node, const Eigen::VectorXd& x) {
    if (k == 0) return scalar(1.0);
    if (k == 1) {
      const double w1 = tree.noise_history(1, node)(0, 0);
      return scalar(-0.6 * std::sin(std::numbers::pi / 2 * w1) * x[0] - 0.4 * x[0]);
    }
    return scalar(0.0);
  });
}

namespace {

std::string num(double v) {
  std::ostringstream out;
  out.precision(17);
  out << "(" << v << ")";
  return out.str();
}

StageAmbiguity symmetric_coin(double s) {
  Eigen::MatrixXd pts(1, 2);
  pts << -s, s;
  return StageAmbiguity::discrete(pts, {Eigen::Vector2d(0.5, 0.5)});
}

}  // namespace

Problem scalar_lq_problem(const ScalarLq& p) {
  StageText st;
  st.b = {num(p.a) + "*x1 + " + num(p.b) + "*u1"};
  st.sigma = {{num(p.c) + "*x1 + " + num(p.e) + "*u1"}};
  st.f = num(p.q) + "*x1^2 + " + num(p.r) + "*u1^2";
  std::vector<StageText> stages(p.N, st);
  std::vector<StageAmbiguity> noise(p.N, symmetric_coin(p.s));
  return assemble(1, 1, 1, Eigen::VectorXd::Constant(1, p.x0), stages, noise, num(p.qN) + "*x1^2");
}

Riccati riccati(const ScalarLq& p) {
  Riccati out;
  out.P.assign(p.N + 1, 0.0);
  out.K.assign(p.N, 0.0);
  out.P[p.N] = p.qN;
  const double s2 = p.s * p.s;
  for (int k = p.N - 1; k >= 0; --k) {
    const double P = out.P[k + 1];
    const double cross = (p.a * p.b + p.c * p.e * s2) * P;
    const double curv = p.r + (p.b * p.b + p.e * p.e * s2) * P;
    out.K[k] = -cross / curv;
    out.P[k] = p.q + (p.a * p.a + p.c * p.c * s2) * P - cross * cross / curv;
  }
  out.J = out.P[0] * p.x0 * p.x0;
  return out;
}

Problem coin_toy(double x0) {
  Eigen::MatrixXd pts(1, 2);
  pts << 0.0, 1.0;
  const StageAmbiguity amb = StageAmbiguity::discrete(pts, {Eigen::Vector2d(0.8, 0.2), Eigen::Vector2d(0.6, 0.4)},
                                                      {"p=0.2", "p=0.4"});
  StageText st{{"x1 + u1"}, {{"1"}}, "u1^2"};
  const ControlSet box = ControlSet::box(Eigen::VectorXd::Constant(1, -2.0), Eigen::VectorXd::Constant(1, 2.0));
  Problem p = assemble(1, 1, 1, Eigen::VectorXd::Constant(1, x0), {st, st}, {amb, amb}, "x1^2", {box, box}, 3.0);
  // Keep the collocation boxes inside the region where p = 0.4 is strictly worst.
  p.stages[0].state_box = StateBox{Eigen::VectorXd::Constant(1, -0.5), Eigen::VectorXd::Constant(1, 2.5)};
  p.stages[1].state_box = StateBox{Eigen::VectorXd::Constant(1, -0.5), Eigen::VectorXd::Constant(1, 3.0)};
  return p;
}

Problem random_ambiguity_problem(std::uint64_t seed, bool enlarged) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> sd(0.3, 1.4);
  std::uniform_real_distribution<double> weight(0.2, 1.2);
  const int N = 2 + static_cast<int>(rng() % 2);
  std::vector<StageText> stages;
  std::vector<StageAmbiguity> noise;
  std::vector<std::vector<double>> stds(N);
  for (int k = 0; k < N; ++k) {
    StageText st;
    st.b = {num(coef(rng)) + "*x1 + " + num(coef(rng) + 2.0) + "*u1"};
    st.sigma = {{num(coef(rng)) + "*x1 + " + num(coef(rng)) + "*u1 + " + num(coef(rng))}};
    st.f = num(weight(rng) - 0.2) + "*x1^2 + " + num(weight(rng)) + "*u1^2";
    stages.push_back(st);
    const int count = 1 + static_cast<int>(rng() % 2);
    for (int c = 0; c < count; ++c) stds[k].push_back(sd(rng));
  }
  const double x0 = 2.0 * coef(rng);
  const double qN = weight(rng);
  // Extra candidates are drawn after the base problem so both variants
  // share every other parameter.
  for (int k = 0; k < N; ++k) {
    const double extra = sd(rng);
    if (enlarged) stds[k].push_back(extra);
    std::vector<Eigen::VectorXd> v;
    for (double s : stds[k]) v.push_back(Eigen::VectorXd::Constant(1, s));
    noise.push_back(StageAmbiguity::moment_matched_gaussian(v, 1.5));
  }
  return assemble(1, 1, 1, Eigen::VectorXd::Constant(1, x0), stages, noise, num(qN) + "*x1^2");
}

std::string ExpressionGenerator::expr(int depth) {
  if (depth == 0 || pick(4) == 0) return leaf();
  switch (pick(9)) {
    case 0: return "(" + expr(depth - 1) + " + " + expr(depth - 1) + ")";
    case 1: return "(" + expr(depth - 1) + " - " + expr(depth - 1) + ")";
    case 2: return expr(depth - 1) + " * " + expr(depth - 1);
    case 3: return "(" + expr(depth - 1) + ") / (2 + (" + expr(depth - 1) + ")^2)";
    case 4: return "-" + expr(depth - 1);
    case 5: return "(" + expr(depth - 1) + ")^" + std::to_string(pick(4));
    case 6: return "sin(" + expr(depth - 1) + ")";
    case 7: return "cos(" + expr(depth - 1) + ")";
    default: return "exp(sin(" + expr(depth - 1) + "))";
  }
}

std::string ExpressionGenerator::leaf() {
  static const char* names[] = {"x1", "x2", "u1", "w1_1", "pi"};
  if (pick(3) == 0) {
    std::uniform_real_distribution<double> c(-2.0, 2.0);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", std::abs(c(rng_)));
    return buf;
  }
  return names[pick(5)];
}

double path_expectation(const ScenarioTree& tree, const Selection& sel, const std::vector<double>& leaves) {
  const int N = tree.horizon();
  double total = 0.0;
  for (std::size_t leaf = 0; leaf < tree.num_leaves(); ++leaf) {
    const auto path = tree.path(N, leaf);
    double prob = 1.0;
    std::size_t node = 0;
    for (int k = 0; k < N; ++k) {
      prob *= tree.stage(k).weights(sel(k, node))[path[k]];
      node = tree.child(k, node, path[k]);
    }
    total += prob * leaves[leaf];
  }
  return total;
}

std::vector<Selection> all_selections(const ScenarioTree& tree) {
  std::vector<std::pair<int, std::size_t>> slots;
  for (int k = 0; k < tree.horizon(); ++k) {
    for (std::size_t n = 0; n < tree.num_nodes(k); ++n) slots.emplace_back(k, n);
  }
  std::vector<Selection> out;
  std::vector<int> idx(slots.size(), 0);
  while (true) {
    Selection s(tree, tree.horizon());
    for (std::size_t i = 0; i < slots.size(); ++i) s(slots[i].first, slots[i].second) = idx[i];
    out.push_back(s);
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(slots.size()) - 1;
    while (i >= 0 && ++idx[i] == tree.stage(slots[i].first).num_candidates()) idx[i--] = 0;
    if (i < 0) break;
  }
  return out;
}

ScenarioTree random_small_tree(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const int N = 1 + static_cast<int>(rng() % 2);
  std::vector<StageAmbiguity> stages;
  for (int k = 0; k < N; ++k) {
    const int S = 2 + static_cast<int>(rng() % 2);
    const int C = 1 + static_cast<int>(rng() % 2);
    Eigen::MatrixXd pts(1, S);
    for (int j = 0; j < S; ++j) pts(0, j) = j - 1.0;
    std::vector<Eigen::VectorXd> ws;
    for (int c = 0; c < C; ++c) {
      Eigen::VectorXd w(S);
      for (int j = 0; j < S; ++j) w[j] = u(rng);
      ws.push_back(w / w.sum());
    }
    stages.push_back(StageAmbiguity::discrete(pts, ws));
  }
  return ScenarioTree(stages);
}

}  // namespace drmp::testing
