// Runs the eight acceptance criteria and prints one PASS/FAIL line each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drmp/mp.hpp"
#include "drmp/solver.hpp"
#include "support.hpp"

using namespace drmp;
using namespace drmp::testing;

namespace {

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

// Collects failed conditions with a short reason each.
struct Verdict {
  std::vector<std::string> failures;
  std::ostringstream info;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Timed {
  Solution solution;
  double seconds = 0.0;
};

Timed timed_solve(const Problem& p, const ScenarioTree& t, bool mp) {
  const auto start = std::chrono::steady_clock::now();
  Solution s = mp ? solve_mp_backward(p, t) : solve_dp(p, t);
  return {std::move(s), std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
}

double max_gain_error(const Solution& s, int k, double gain) {
  double err = 0.0;
  for (std::size_t node = 0; node < s.policy.stage(k).size(); ++node) {
    err = std::max(err, std::abs(s.policy(k, node)[0] - gain * s.trajectory(k, node)[0]));
  }
  return err;
}

bool stage_all(const Problem& p, const Solution& s, int k, const std::string& label) {
  for (int c : s.selection.stage(k)) {
    if (p.noise[k].label(c) != label) return false;
  }
  return true;
}

// Number of stage-k nodes reported as tied between exactly the two candidates.
std::size_t pair_ties(const Solution& s, int k) {
  std::size_t count = 0;
  for (const auto& t : s.ties) count += t.stage == k && t.candidates.size() == 2;
  return count;
}

void criterion1(Verdict& v) {
  const Problem p = load_example(1);
  const ScenarioTree t = build_tree(p);
  double worst_time = 0.0;
  for (bool mp : {false, true}) {
    const std::string tag = mp ? "mp" : "dp";
    const Timed r = timed_solve(p, t, mp);
    const Solution& s = r.solution;
    worst_time = std::max(worst_time, r.seconds);
    v.require(std::abs(s.value - 729.0 / 1600.0) <= 1e-9, tag + " J = " + fmt(s.value));
    v.require(std::abs(s.policy(0, 0)[0] + 0.25) <= 1e-8, tag + " u0");
    v.require(max_gain_error(s, 3, -0.25) <= 1e-8, tag + " stage-3 gain");
    v.require(max_gain_error(s, 2, -0.1) <= 1e-8, tag + " stage-2 gain");
    v.require(max_gain_error(s, 1, -0.1) <= 1e-8, tag + " stage-1 gain");
    v.require(pair_ties(s, 0) == t.num_nodes(0), tag + " tie at W1");
    v.require(pair_ties(s, 3) == t.num_nodes(3), tag + " tie at W4");
    v.require(pair_ties(s, 1) == 0 && pair_ties(s, 2) == 0, tag + " unique at W2, W3");
    v.require(stage_all(p, s, 2, "F(1,sqrt2)"), tag + " W3 selection");
    v.require(stage_all(p, s, 1, "F(sqrt2,1)"), tag + " W2 selection");
  }
  v.require(worst_time < 5.0, "runtime " + fmt(worst_time) + " s");
  v.info << "runtime " << fmt(worst_time) << " s";
}

void criterion2(Verdict& v) {
  const Problem p = load_example(2);
  const ScenarioTree t = build_tree(p);
  double worst_time = 0.0;
  for (bool mp : {false, true}) {
    const std::string tag = mp ? "mp" : "dp";
    const Timed r = timed_solve(p, t, mp);
    const Solution& s = r.solution;
    worst_time = std::max(worst_time, r.seconds);
    v.require(std::abs(s.value - 64.0 / 121.0) <= 1e-9, tag + " J = " + fmt(s.value));
    v.require(std::abs(s.policy(0, 0)[0] + 0.2) <= 1e-8, tag + " u0");
    v.require(max_gain_error(s, 3, -0.2) <= 1e-8, tag + " stage-3 gain");
    v.require(max_gain_error(s, 2, -1.0 / 11) <= 1e-8, tag + " stage-2 gain");
    v.require(max_gain_error(s, 1, -1.0 / 11) <= 1e-8, tag + " stage-1 gain");
    v.require(s.ties.empty(), tag + " ties present");
    for (int k = 0; k < 4; ++k) v.require(stage_all(p, s, k, "F(sqrt2,sqrt2)"), tag + " selection");
  }
  v.require(worst_time < 5.0, "runtime " + fmt(worst_time) + " s");
  v.info << "runtime " << fmt(worst_time) << " s";
}

void criterion3(Verdict& v) {
  const Problem p = load_example(3);
  const ScenarioTree t = build_tree(p);
  double worst_time = 0.0;
  for (bool mp : {false, true}) {
    const std::string tag = mp ? "mp" : "dp";
    const Timed r = timed_solve(p, t, mp);
    const Solution& s = r.solution;
    worst_time = std::max(worst_time, r.seconds);
    v.require(std::abs(s.value - 8.0 / 45.0) <= 1e-9, tag + " J = " + fmt(s.value));
    v.require(std::abs(s.policy(0, 0)[0] - 1.0) <= 1e-8, tag + " u0");
    for (int k = 2; k < 4; ++k) {
      for (const auto& u : s.policy.stage(k)) v.require(std::abs(u[0]) <= 1e-8, tag + " u" + std::to_string(k));
    }
    for (std::size_t node = 0; node < t.num_nodes(1); ++node) {
      const double x = s.trajectory(1, node)[0];
      const double w1 = t.noise_history(1, node)(0, 0);
      const double expected = -0.6 * std::sin(std::numbers::pi / 2 * w1) * x - 0.4 * x;
      v.require(std::abs(s.policy(1, node)[0] - expected) <= 1e-8, tag + " stage-1 feedback");
    }
    v.require(p.noise[0].label(s.selection(0, 0)) == "F(1/3)", tag + " W1 selection");
    for (int k = 1; k < 4; ++k) v.require(stage_all(p, s, k, "F(2/3)"), tag + " W" + std::to_string(k + 1));
  }
  v.require(worst_time < 2.0, "runtime " + fmt(worst_time) + " s");
  v.info << "runtime " << fmt(worst_time) << " s";
}

void criterion4(Verdict& v) {
  double worst_res = 0.0, worst_adj = 0.0, worst_p3 = 0.0;
  for (int which = 1; which <= 3; ++which) {
    const Problem p = load_example(which);
    const ScenarioTree t = build_tree(p);
    const Solution s = solve_dp(p, t);
    const WorstCase wc = worst_case_selection(p, t, s.policy);
    const Adjoint rec = adjoint_recursive(p, t, s.policy, wc.selection);
    const Adjoint exp = adjoint_explicit(p, t, s.policy, wc.selection);
    const double adj = adjoint_discrepancy(rec, exp);
    const StationarityReport st = check_stationarity(p, t, s.policy, wc.selection, rec, 1e-8);
    worst_res = std::max(worst_res, st.max_residual);
    worst_adj = std::max(worst_adj, adj);
    v.require(st.max_residual <= 1e-8, "ex" + std::to_string(which) + " stationarity " + fmt(st.max_residual));
    v.require(adj <= 1e-10, "ex" + std::to_string(which) + " adjoint " + fmt(adj));
    if (which == 1) {
      const Trajectory x = simulate(p, t, s.policy);
      for (std::size_t node = 0; node < t.num_nodes(3); ++node) {
        const double X = x(3, node)[0], u = s.policy(3, node)[0];
        worst_p3 = std::max({worst_p3, std::abs(rec.P(3, node)[0] - 2 * (X + u)),
                             std::abs(rec.Q(3, node).sum() - 6 * u)});
      }
      v.require(worst_p3 <= 1e-10, "ex1 P3/Q3 " + fmt(worst_p3));
    }
  }
  v.info << "residual " << fmt(worst_res) << ", adjoint " << fmt(worst_adj) << ", P3/Q3 " << fmt(worst_p3);
}

void criterion5(Verdict& v) {
  double worst_ratio = 0.0, min_s = INFINITY;
  for (int which = 1; which <= 3; ++which) {
    const Problem p = load_example(which);
    const ScenarioTree t = build_tree(p);
    const Solution s = solve_dp(p, t);
    DirectionalOptions opt;
    opt.eps = {1e-2, 1e-3};
    opt.coordinate_family = false;
    const NodeField<double> prob = node_probabilities(t, worst_case_selection(p, t, s.policy).selection);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      // The tolerance is stated for a unit direction, so v is scaled to unit
      // mean square norm under the worst-case measure.
      Policy dir = random_direction(p, t, s.policy, 1000 * which + seed);
      double norm2 = 0.0;
      for (int k = 0; k < p.horizon; ++k) {
        for (std::size_t node = 0; node < t.num_nodes(k); ++node) norm2 += prob(k, node) * dir(k, node).squaredNorm();
      }
      const double scale = 1.0 / std::sqrt(norm2);
      for (int k = 0; k < p.horizon; ++k) {
        for (std::size_t node = 0; node < t.num_nodes(k); ++node) dir(k, node) *= scale;
      }
      const DirectionalReport r = directional_derivative_check(p, t, s.policy, dir, opt);
      min_s = std::min(min_s, r.sup_value);
      v.require(r.sup_value >= -1e-9, "ex" + std::to_string(which) + " S = " + fmt(r.sup_value));
      for (const auto& rec : r.records) {
        const double bound = 10 * rec.eps * (1 + std::abs(r.sup_value));
        worst_ratio = std::max(worst_ratio, rec.error / bound);
        v.require(rec.error <= bound, "ex" + std::to_string(which) + " eps " + fmt(rec.eps) + " error " +
                                          fmt(rec.error));
      }
    }
  }
  v.info << "max error/bound " << fmt(worst_ratio) << ", min S " << fmt(min_s);
}

void criterion6(Verdict& v) {
  ScalarLq lq;
  lq.N = 4;
  lq.a = 1.1;
  lq.b = 0.8;
  lq.c = 0.3;
  lq.e = -0.2;
  lq.s = 1.0;
  lq.q = 0.5;
  lq.r = 1.3;
  lq.qN = 2.0;
  lq.x0 = 1.7;
  const Riccati ric = riccati(lq);
  const Problem p = scalar_lq_problem(lq);
  const ScenarioTree t = build_tree(p);
  double worst = 0.0;
  for (bool mp : {false, true}) {
    const Solution s = mp ? solve_mp_backward(p, t) : solve_dp(p, t);
    worst = std::max(worst, std::abs(s.value - ric.J));
    for (int k = 0; k < lq.N; ++k) {
      worst = std::max(worst, max_gain_error(s, k, ric.K[k]));
      for (std::size_t node = 0; node < t.num_nodes(k); ++node) {
        for (double x : {-2.0, 0.5, 3.0}) {
          worst = std::max(worst, std::abs(s.stages[k].feedback_at(node, scalar(x))[0] - ric.K[k] * x));
        }
      }
    }
  }
  v.require(worst <= 1e-10, "max deviation " + fmt(worst));
  v.info << "max deviation " << fmt(worst);
}

void criterion7(Verdict& v) {
  const auto grid = uniform_grid(-2.0, 2.0, 0.01);
  const double h = 0.01;
  {
    const Problem p = coin_toy(1.0);
    const ScenarioTree t = build_tree(p);
    const Solution s = solve_dp(p, t);
    const BruteForceResult b = brute_force_oracle(p, t, grid);
    v.require(std::abs(b.value - s.value) <= 1e-12, "on-grid gap " + fmt(b.value - s.value));
    v.info << "on-grid gap " << fmt(b.value - s.value);
  }
  {
    const Problem p = coin_toy(0.5);
    const ScenarioTree t = build_tree(p);
    const Solution s = solve_dp(p, t);
    const BruteForceResult b = brute_force_oracle(p, t, grid);
    // Curvature of J over the per-node controls from central differences.
    std::vector<std::pair<int, std::size_t>> slots;
    for (int k = 0; k < p.horizon; ++k) {
      for (std::size_t node = 0; node < t.num_nodes(k); ++node) slots.emplace_back(k, node);
    }
    const int n = static_cast<int>(slots.size());
    const double d = 1e-3;
    auto J = [&](int i, double di, int j, double dj) {
      Policy u = s.policy;
      u(slots[i].first, slots[i].second)[0] += di;
      u(slots[j].first, slots[j].second)[0] += dj;
      return cost(p, t, u).value;
    };
    Eigen::MatrixXd H(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        H(i, j) = (J(i, d, j, d) - J(i, d, j, -d) - J(i, -d, j, d) + J(i, -d, j, -d)) / (4 * d * d);
      }
    }
    const double lambda = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (H + H.transpose())).eigenvalues().maxCoeff();
    const double kappa = lambda * n / 8.0;
    const double gap = b.value - s.value;
    v.require(gap >= -1e-12, "grid beats solver by " + fmt(-gap));
    v.require(gap <= h * h * kappa, "off-grid gap " + fmt(gap) + " > " + fmt(h * h * kappa));
    v.info << ", off-grid gap " << fmt(gap) << " <= " << fmt(h * h * kappa);
  }
}

void criterion8(Verdict& v) {
  // Sublinear-expectation axioms against exhaustive enumeration of selections.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t axiom_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ScenarioTree t = random_small_tree(rng);
    const std::size_t L = t.num_leaves();
    std::vector<double> x(L), y(L), sum(L), scaled(L), shifted(L), above(L);
    const double lambda = 3 * unit(rng), c = gauss(rng);
    for (std::size_t i = 0; i < L; ++i) {
      x[i] = gauss(rng);
      y[i] = gauss(rng);
      sum[i] = x[i] + y[i];
      scaled[i] = lambda * x[i];
      shifted[i] = x[i] + c;
      above[i] = x[i] + unit(rng);
    }
    const auto ex = sublinear_backward(t, x);
    const double e = ex.value;
    const double tol = 1e-12 * (1 + std::abs(e));
    double best = -INFINITY;
    for (const auto& s : all_selections(t)) best = std::max(best, path_expectation(t, s, x));
    bool ok = best <= e + tol;                                                       // dominance
    ok = ok && std::abs(best - e) <= tol;                                            // attainment
    ok = ok && std::abs(path_expectation(t, canonical_selection(t, ex.argmax), x) - e) <= tol;
    ok = ok && sublinear_backward(t, sum).value <= e + sublinear_backward(t, y).value + 1e-12;  // subadditivity
    ok = ok && std::abs(sublinear_backward(t, scaled).value - lambda * e) <= 1e-12 * (1 + lambda * std::abs(e));
    ok = ok && std::abs(sublinear_backward(t, shifted).value - (e + c)) <= 1e-12 * (1 + std::abs(e + c));
    ok = ok && sublinear_backward(t, above).value >= e - tol;                         // monotonicity
    axiom_failures += !ok;
  }
  v.require(axiom_failures == 0, std::to_string(axiom_failures) + " payloads violate an axiom");

  // DSL partials against central differences.
  ExpressionGenerator gen(2026);
  std::mt19937_64 vals(9);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  const ParseContext ctx{2, 1, 1, 1};
  const auto wrt = state_control_vars(2, 1);
  std::size_t dsl_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Expr e = Expr::parse(gen.expr(4), ctx);
    Eigen::VectorXd x(2), u(1);
    x << val(vals), val(vals);
    u << val(vals);
    Eigen::MatrixXd noise(1, 1);
    noise << val(vals);
    const Partials p = e.evaluate_with_partials(make_env(x, u, &noise), wrt);
    for (int i = 0; i < 3; ++i) {
      Eigen::VectorXd xp = x, xm = x, up = u, um = u;
      if (i < 2) {
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
      } else {
        up[0] += 1e-6;
        um[0] -= 1e-6;
      }
      const double fd = (e.evaluate(make_env(xp, up, &noise)) - e.evaluate(make_env(xm, um, &noise))) / 2e-6;
      if (std::abs(p.gradient[i] - fd) > 1e-5 * (1 + std::abs(p.gradient[i]))) {
        ++dsl_failures;
        break;
      }
    }
  }
  v.require(dsl_failures == 0, std::to_string(dsl_failures) + " expressions fail the derivative check");

  // Enlarging every stage's candidate list never lowers J.
  std::size_t mono_failures = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Problem small = random_ambiguity_problem(seed, false);
    const Problem large = random_ambiguity_problem(seed, true);
    const double js = solve_dp(small, build_tree(small)).value;
    const double jl = solve_dp(large, build_tree(large)).value;
    mono_failures += jl < js - 1e-12 * (1 + std::abs(js));
  }
  v.require(mono_failures == 0, std::to_string(mono_failures) + " problems violate monotonicity");
  v.info << "1000 payloads, 1000 expressions, 50 problems";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
      {"example 1 (Gaussian two-channel family)", criterion1},
      {"example 2 (four extreme volatilities)", criterion2},
      {"example 3 (three-point noise)", criterion3},
      {"certificate suite", criterion4},
      {"variational identity", criterion5},
      {"classical Riccati reduction", criterion6},
      {"grid oracle equivalence", criterion7},
      {"property suites", criterion8},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = v.failures.empty();
    failed += !ok;
    std::printf("criterion %zu %s: %s", i + 1, ok ? "PASS" : "FAIL", criteria[i].first.c_str());
    if (ok) {
      std::printf(" (%s)\n", v.info.str().c_str());
    } else {
      std::printf(" -- %s", v.failures.front().c_str());
      if (v.failures.size() > 1) std::printf(" (+%zu more)", v.failures.size() - 1);
      std::printf("\n");
    }
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
