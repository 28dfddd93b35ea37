#include "drmp/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "drmp/parallel.hpp"

namespace drmp {

namespace {

constexpr double kBoundTol = 1e-14;
constexpr double kStallFactor = 1e-8;

std::string where(int k, std::size_t node, const Eigen::VectorXd& x) {
  std::ostringstream out;
  out << "stage " << k << " node " << node << " at x = (";
  for (Eigen::Index i = 0; i < x.size(); ++i) out << (i ? ", " : "") << x[i];
  out << ")";
  return out.str();
}

// Cost-to-go and costate continuation for stage k + 1.
struct Continuation {
  const Problem* problem = nullptr;
  const StageFunctions* fns = nullptr;  // null at the horizon

  double value(std::size_t node, const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    if (fns == nullptr) {
      const Eigen::VectorXd none;
      if (grad == nullptr) return problem->terminal.evaluate(make_env(x, none));
      const auto vars = state_control_vars(problem->n, 0);
      Partials p = problem->terminal.evaluate_with_partials(make_env(x, none), vars);
      *grad = p.gradient;
      return p.value;
    }
    if (grad == nullptr) return fns->basis.values(x).dot(fns->value[node]);
    const Eigen::MatrixXd B = fns->basis.values_and_gradients(x);
    const Eigen::VectorXd vg = B.transpose() * fns->value[node];
    *grad = vg.tail(vg.size() - 1);
    return vg[0];
  }

  Eigen::VectorXd costate(std::size_t node, const Eigen::VectorXd& x) const {
    if (fns == nullptr) {
      Eigen::VectorXd g;
      value(node, x, &g);
      return g;
    }
    return fns->costate[node].transpose() * fns->basis.values(x);
  }
};

// One node's one-step robust problem at a fixed state.
struct LocalProblem {
  const Problem& problem;
  const ScenarioTree& tree;
  const Continuation& next;
  int k;
  std::size_t node;
  Eigen::VectorXd x;
  Eigen::MatrixXd history;
  TieTolerance tie;

  const StageAmbiguity& amb() const { return tree.stage(k); }
  const ControlSet& control() const { return problem.stages[k].control; }
  int candidates() const { return amb().is_deterministic() ? 1 : amb().num_candidates(); }

  struct Eval {
    std::vector<double> values;              // per candidate
    std::vector<Eigen::VectorXd> gradients;  // per candidate, d/du
    std::vector<Eigen::VectorXd> child_states;
  };

  Eval evaluate(const Eigen::VectorXd& u, bool with_gradient) const {
    const auto& st = amb();
    const int S = st.size();
    const int C = candidates();
    Eval out;
    out.values.assign(C, 0.0);
    std::vector<double> child_value(S);
    std::vector<Eigen::VectorXd> child_grad(S);
    out.child_states.resize(S);
    if (!with_gradient) {
      const StageEval e = evaluate_stage(problem, k, x, u, history);
      for (int j = 0; j < S; ++j) {
        out.child_states[j] = next_state(e, st.point(j));
        child_value[j] = e.running + next.value(tree.child(k, node, j), out.child_states[j], nullptr);
      }
      for (int c = 0; c < C; ++c) out.values[c] = st.average(c, child_value);
      return out;
    }
    const StageLinearization L = linearize_stage(problem, k, x, u, history);
    for (int j = 0; j < S; ++j) {
      out.child_states[j] = next_state(L, st.point(j));
      Eigen::VectorXd g;
      child_value[j] = L.running + next.value(tree.child(k, node, j), out.child_states[j], &g);
      Eigen::MatrixXd dx_du = L.drift_u;
      for (int l = 0; l < st.dim(); ++l) dx_du += L.diffusion_u[l] * st.point(j)[l];
      child_grad[j] = L.running_u + dx_du.transpose() * g;
    }
    out.gradients.resize(C);
    for (int c = 0; c < C; ++c) {
      out.values[c] = st.average(c, child_value);
      const auto& w = st.weights(c);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(problem.m);
      for (int j = 0; j < S; ++j) acc += w[j] * child_grad[j];
      out.gradients[c] = acc;
    }
    return out;
  }

  // Lowest index within the tie band of the max, or `keep` when it ties.
  int select(const std::vector<double>& values, int keep = -1) const {
    double best = values[0];
    for (double v : values) best = std::max(best, v);
    const double band = tie.band(best);
    if (keep >= 0 && values[keep] >= best - band) return keep;
    for (int c = 0; c < static_cast<int>(values.size()); ++c) {
      if (values[c] >= best - band) return c;
    }
    return 0;
  }

  double objective(const Eigen::VectorXd& u) const {
    const Eval e = evaluate(u, false);
    return *std::max_element(e.values.begin(), e.values.end());
  }

  // H_u under candidate c from the costate continuation at the children.
  Eigen::VectorXd hamiltonian_gradient(const Eigen::VectorXd& u, int c, Eigen::VectorXd* lambda,
                                       std::vector<double>* values) const {
    const auto& st = amb();
    const int S = st.size();
    const StageLinearization L = linearize_stage(problem, k, x, u, history);
    Eigen::VectorXd P = Eigen::VectorXd::Zero(problem.n);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(problem.n, st.dim());
    std::vector<double> child_value(S);
    const auto& w = st.weights(c);
    for (int j = 0; j < S; ++j) {
      const Eigen::VectorXd xn = next_state(L, st.point(j));
      const std::size_t ch = tree.child(k, node, j);
      if (values != nullptr) child_value[j] = L.running + next.value(ch, xn, nullptr);
      if (w[j] == 0.0) continue;
      const Eigen::VectorXd lam = next.costate(ch, xn);
      P += w[j] * lam;
      for (int l = 0; l < st.dim(); ++l) Q.col(l) += w[j] * st.point(j)[l] * lam;
    }
    if (values != nullptr) {
      values->assign(candidates(), 0.0);
      for (int cc = 0; cc < candidates(); ++cc) (*values)[cc] = st.average(cc, child_value);
    }
    if (lambda != nullptr) {
      Eigen::VectorXd out = L.drift_x.transpose() * P + L.running_x;
      for (int l = 0; l < st.dim(); ++l) out += L.diffusion_x[l].transpose() * Q.col(l);
      *lambda = out;
    }
    return hamiltonian_u(L, P, Q);
  }
};

std::vector<bool> free_mask(const ControlSet& set, const Eigen::VectorXd& u,
                            const Eigen::VectorXd& g) {
  std::vector<bool> free(u.size(), true);
  if (set.kind == ControlSet::Kind::Unconstrained) return free;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double tol = kBoundTol * std::max(1.0, std::abs(u[i]));
    if (u[i] <= set.lo[i] + tol && g[i] > 0.0) free[i] = false;
    if (u[i] >= set.hi[i] - tol && g[i] < 0.0) free[i] = false;
  }
  return free;
}

double fd_step(double u) { return 1e-5 * (1.0 + std::abs(u)); }

// Symmetric positive definite modification by eigenvalue flooring.
Eigen::MatrixXd make_positive(const Eigen::MatrixXd& H) {
  const Eigen::MatrixXd S = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  bool modified = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double floor_value = 1e-10 * scale;
    if (ev[i] < floor_value) {
      ev[i] = std::max(std::abs(ev[i]), floor_value);
      modified = true;
    }
  }
  if (!modified) return S;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct InnerResult {
  bool converged = false;
  Eigen::VectorXd u;
  double value = 0.0;
  int candidate = 0;
  std::size_t iterations = 0;
};

InnerResult newton_minimize(const LocalProblem& lp, Eigen::VectorXd u, const SolveOptions& opt) {
  const ControlSet& set = lp.control();
  const int m = lp.problem.m;
  u = set.project(u);
  InnerResult res;
  // The tolerance scale is fixed at the start point so that a run-away
  // descent on an unbounded objective cannot pass as converged.
  double scale = 0.0;
  for (int it = 0; it <= opt.max_newton_iterations; ++it) {
    const auto e = lp.evaluate(u, true);
    const int c = lp.select(e.values);
    const double q = e.values[c];
    if (it == 0) scale = std::max(1.0, std::abs(q));
    const Eigen::VectorXd& g = e.gradients[c];
    const auto free = free_mask(set, u, g);
    double gnorm = 0.0;
    for (int i = 0; i < m; ++i) {
      if (free[i]) gnorm = std::max(gnorm, std::abs(g[i]));
    }
    res.u = u;
    res.value = q;
    res.candidate = c;
    res.iterations = static_cast<std::size_t>(it);
    if (gnorm <= opt.gradient_tol * scale) {
      res.converged = true;
      return res;
    }
    if (it == opt.max_newton_iterations) break;

    std::vector<int> idx;
    for (int i = 0; i < m; ++i) {
      if (free[i]) idx.push_back(i);
    }
    const int f = static_cast<int>(idx.size());
    Eigen::MatrixXd H(f, f);
    Eigen::VectorXd gf(f);
    for (int a = 0; a < f; ++a) {
      const int i = idx[a];
      gf[a] = g[i];
      const double h = fd_step(u[i]);
      Eigen::VectorXd up = u, dn = u;
      up[i] += h;
      dn[i] -= h;
      const Eigen::VectorXd gp = lp.evaluate(up, true).gradients[c];
      const Eigen::VectorXd gm = lp.evaluate(dn, true).gradients[c];
      for (int b = 0; b < f; ++b) H(b, a) = (gp[idx[b]] - gm[idx[b]]) / (2.0 * h);
    }
    const Eigen::VectorXd step_f = -make_positive(H).ldlt().solve(gf);
    Eigen::VectorXd step = Eigen::VectorXd::Zero(m);
    for (int a = 0; a < f; ++a) step[idx[a]] = step_f[a];

    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h <= opt.max_halvings; ++h, t *= 0.5) {
      const Eigen::VectorXd trial = set.project(u + t * step);
      if (lp.objective(trial) < q) {
        u = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No representable decrease: accept the point if it is stationary to
      // rounding level.
      res.converged = gnorm <= kStallFactor * scale;
      return res;
    }
  }
  return res;
}

Eigen::VectorXd start_center(const ControlSet& set, int m) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
  if (set.kind == ControlSet::Kind::Unconstrained) return c;
  for (int i = 0; i < m; ++i) {
    const bool lo = std::isfinite(set.lo[i]), hi = std::isfinite(set.hi[i]);
    if (lo && hi) c[i] = 0.5 * (set.lo[i] + set.hi[i]);
    else if (lo) c[i] = set.lo[i] + 1.0;
    else if (hi) c[i] = set.hi[i] - 1.0;
  }
  return c;
}

// Box center followed by the two corners along the steepest-descent
// coordinate at the center.
std::vector<Eigen::VectorXd> multistart_points(const LocalProblem& lp, int count) {
  const int m = lp.problem.m;
  const ControlSet& set = lp.control();
  std::vector<Eigen::VectorXd> starts{start_center(set, m)};
  if (count <= 1 || m == 0) return starts;
  const auto e = lp.evaluate(starts[0], true);
  const Eigen::VectorXd& g = e.gradients[lp.select(e.values)];
  Eigen::Index axis = 0;
  g.cwiseAbs().maxCoeff(&axis);
  const double c = starts[0][axis];
  const double lo = set.kind == ControlSet::Kind::Box && std::isfinite(set.lo[axis]) ? set.lo[axis] : c - 1.0;
  const double hi = set.kind == ControlSet::Kind::Box && std::isfinite(set.hi[axis]) ? set.hi[axis] : c + 1.0;
  for (double v : {g[axis] > 0 ? lo : hi, g[axis] > 0 ? hi : lo}) {
    if (static_cast<int>(starts.size()) >= count) break;
    Eigen::VectorXd s = starts[0];
    s[axis] = v;
    starts.push_back(s);
  }
  return starts;
}

struct PointResult {
  Eigen::VectorXd u;
  double value = 0.0;
  int candidate = 0;
  Eigen::VectorXd lambda;
  std::size_t iterations = 0;
  bool disagreement = false;
};

PointResult solve_point_dp(const LocalProblem& lp, const SolveOptions& opt) {
  PointResult out;
  if (lp.problem.m == 0) {
    const auto e = lp.evaluate(Eigen::VectorXd(), false);
    out.candidate = lp.select(e.values);
    out.value = e.values[out.candidate];
    out.u = Eigen::VectorXd();
    return out;
  }
  const auto starts = multistart_points(lp, opt.multistart);
  std::vector<InnerResult> runs;
  for (const auto& s : starts) runs.push_back(newton_minimize(lp, s, opt));
  const InnerResult* canonical = nullptr;
  for (const auto& r : runs) {
    out.iterations += r.iterations;
    if (r.converged && canonical == nullptr) canonical = &r;
  }
  if (canonical == nullptr) {
    throw Error(ErrorKind::InnerSolveFailed,
                "projected Newton did not converge from any of " + std::to_string(runs.size()) +
                    " starts at " + where(lp.k, lp.node, lp.x));
  }
  for (const auto& r : runs) {
    if (r.converged && (r.u - canonical->u).cwiseAbs().maxCoeff() > 1e-6) out.disagreement = true;
  }
  out.u = canonical->u;
  out.value = canonical->value;
  out.candidate = canonical->candidate;
  return out;
}

struct FixedPointResult {
  bool converged = false;
  Eigen::VectorXd u;
  int candidate = 0;
  std::size_t iterations = 0;
};

FixedPointResult mp_fixed_point(const LocalProblem& lp, Eigen::VectorXd u, const SolveOptions& opt) {
  const ControlSet& set = lp.control();
  const int m = lp.problem.m;
  u = set.project(u);
  FixedPointResult res;
  std::vector<double> values;
  lp.hamiltonian_gradient(u, 0, nullptr, &values);
  int c = lp.select(values);

  auto residual = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& hu) {
    return (v - set.project(v - hu)).cwiseAbs().maxCoeff();
  };

  for (int it = 0; it <= opt.max_fixed_point_iterations; ++it) {
    Eigen::VectorXd hu = lp.hamiltonian_gradient(u, c, nullptr, &values);
    const int reselected = lp.select(values, c);
    if (reselected != c) {
      c = reselected;
      hu = lp.hamiltonian_gradient(u, c, nullptr, nullptr);
    }
    const double r = residual(u, hu);
    const double scale = std::max(1.0, std::abs(values[c]));
    res.u = u;
    res.candidate = c;
    res.iterations = static_cast<std::size_t>(it);
    if (r <= opt.gradient_tol * scale) {
      res.converged = true;
      return res;
    }
    if (it == opt.max_fixed_point_iterations) break;

    const auto free = free_mask(set, u, hu);
    std::vector<int> idx;
    for (int i = 0; i < m; ++i) {
      if (free[i]) idx.push_back(i);
    }
    const int f = static_cast<int>(idx.size());
    Eigen::MatrixXd J(f, f);
    Eigen::VectorXd hf(f);
    for (int a = 0; a < f; ++a) {
      const int i = idx[a];
      hf[a] = hu[i];
      const double h = fd_step(u[i]);
      Eigen::VectorXd up = u, dn = u;
      up[i] += h;
      dn[i] -= h;
      const Eigen::VectorXd gp = lp.hamiltonian_gradient(up, c, nullptr, nullptr);
      const Eigen::VectorXd gm = lp.hamiltonian_gradient(dn, c, nullptr, nullptr);
      for (int b = 0; b < f; ++b) J(b, a) = (gp[idx[b]] - gm[idx[b]]) / (2.0 * h);
    }
    Eigen::VectorXd step = Eigen::VectorXd::Zero(m);
    if (f > 0) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
      if (!lu.isInvertible()) {
        throw Error(ErrorKind::FixedPointDiverged,
                    "singular stationarity Jacobian at " + where(lp.k, lp.node, lp.x));
      }
      const Eigen::VectorXd sf = -lu.solve(hf);
      for (int a = 0; a < f; ++a) step[idx[a]] = sf[a];
    } else {
      // Every coordinate is pinned with the wrong sign: project the gradient step.
      step = set.project(u - hu) - u;
    }
    Eigen::VectorXd next = set.project(u + step);
    double t = 1.0;
    for (int h = 0; h <= opt.max_halvings; ++h, t *= 0.5) {
      const Eigen::VectorXd trial = set.project(u + t * step);
      if (residual(trial, lp.hamiltonian_gradient(trial, c, nullptr, nullptr)) < r) {
        next = trial;
        break;
      }
    }
    u = next;
  }
  return res;
}

PointResult solve_point_mp(const LocalProblem& lp, const SolveOptions& opt) {
  PointResult out;
  std::vector<double> values;
  if (lp.problem.m == 0) {
    out.u = Eigen::VectorXd();
    lp.hamiltonian_gradient(out.u, 0, nullptr, &values);
    out.candidate = lp.select(values);
    lp.hamiltonian_gradient(out.u, out.candidate, &out.lambda, nullptr);
    out.value = values[out.candidate];
    return out;
  }
  const auto starts = multistart_points(lp, opt.multistart);
  std::vector<FixedPointResult> runs;
  const FixedPointResult* canonical = nullptr;
  for (const auto& s : starts) {
    runs.push_back(mp_fixed_point(lp, s, opt));
    out.iterations += runs.back().iterations;
    if (runs.back().converged) break;
  }
  for (const auto& r : runs) {
    if (r.converged) {
      canonical = &r;
      break;
    }
  }
  if (canonical == nullptr) {
    throw Error(ErrorKind::FixedPointDiverged,
                "stationarity fixed point exceeded " +
                    std::to_string(opt.max_fixed_point_iterations) + " iterations at " +
                    where(lp.k, lp.node, lp.x));
  }
  out.u = canonical->u;
  out.candidate = canonical->candidate;
  lp.hamiltonian_gradient(out.u, out.candidate, &out.lambda, &values);
  out.value = values[out.candidate];
  return out;
}

enum class Method { Dp, Mp };

void check_fit(const CollocationFit::Result& r, const Eigen::VectorXd& samples, double tol,
               const char* what, int k, std::size_t node) {
  const double scale = 1.0 + samples.cwiseAbs().maxCoeff();
  if (!(r.residual <= tol * scale)) {
    std::ostringstream out;
    out << what << " fit residual " << r.residual << " exceeds " << tol * scale << " at stage "
        << k << " node " << node;
    throw Error(ErrorKind::FitResidualExceeded, out.str());
  }
}

struct NodeStats {
  std::size_t solves = 0;
  std::size_t iterations = 0;
  std::size_t disagreements = 0;
};

Solution run(const Problem& problem, const ScenarioTree& tree, const SolveOptions& opt,
             Method method) {
  opt.validate();
  validate_problem(problem);
  const int N = problem.horizon;
  const int n = problem.n;
  const int m = problem.m;
  Solution sol;
  sol.method = method == Method::Dp ? "dp" : "mp";
  sol.stages.resize(N);
  sol.diagnostics.linear_quadratic = is_linear_quadratic(problem);

  for (int k = N - 1; k >= 0; --k) {
    const StageModel& sm = problem.stages[k];
    StageFunctions& fns = sol.stages[k];
    fns.basis = ChebyshevBasis(sm.state_box.lo, sm.state_box.hi, opt.degree);
    const CollocationFit fitter(fns.basis, fns.basis.chebyshev_grid(opt.grid_points()));
    const int P = fitter.num_points();
    const std::size_t nodes = tree.num_nodes(k);
    fns.value.assign(nodes, Eigen::VectorXd());
    fns.feedback.assign(nodes, Eigen::MatrixXd());
    if (method == Method::Mp) fns.costate.assign(nodes, Eigen::MatrixXd());
    fns.point_selection.assign(nodes, std::vector<int>(P, 0));
    std::vector<NodeStats> stats(nodes);
    std::vector<std::array<double, 3>> residuals(nodes, {0.0, 0.0, 0.0});

    Continuation next;
    next.problem = &problem;
    next.fns = k + 1 < N ? &sol.stages[k + 1] : nullptr;

    parallel_for(nodes, [&](std::size_t node) {
      const Eigen::MatrixXd history = tree.noise_history(k, node);
      Eigen::VectorXd v_samples(P);
      Eigen::MatrixXd u_samples(P, m);
      Eigen::MatrixXd l_samples(P, n);
      for (int p = 0; p < P; ++p) {
        LocalProblem lp{problem, tree, next, k, node, fitter.points().col(p), history, opt.tie};
        const PointResult r = method == Method::Dp ? solve_point_dp(lp, opt) : solve_point_mp(lp, opt);
        v_samples[p] = r.value;
        if (m > 0) u_samples.row(p) = r.u.transpose();
        if (method == Method::Mp) l_samples.row(p) = r.lambda.transpose();
        fns.point_selection[node][p] = r.candidate;
        stats[node].solves += 1;
        stats[node].iterations += r.iterations;
        if (r.disagreement) stats[node].disagreements += 1;
      }
      const auto vfit = fitter.fit(v_samples);
      check_fit(vfit, v_samples, opt.fit_tol, "value", k, node);
      fns.value[node] = vfit.coefficients;
      residuals[node][0] = vfit.residual;
      Eigen::MatrixXd fb(fns.basis.size(), m);
      for (int i = 0; i < m; ++i) {
        const Eigen::VectorXd col = u_samples.col(i);
        const auto ufit = fitter.fit(col);
        check_fit(ufit, col, opt.fit_tol, "feedback", k, node);
        fb.col(i) = ufit.coefficients;
        residuals[node][1] = std::max(residuals[node][1], ufit.residual);
      }
      fns.feedback[node] = fb;
      if (method == Method::Mp) {
        Eigen::MatrixXd cs(fns.basis.size(), n);
        for (int i = 0; i < n; ++i) {
          const Eigen::VectorXd col = l_samples.col(i);
          const auto lfit = fitter.fit(col);
          check_fit(lfit, col, opt.fit_tol, "costate", k, node);
          cs.col(i) = lfit.coefficients;
          residuals[node][2] = std::max(residuals[node][2], lfit.residual);
        }
        fns.costate[node] = cs;
      }
    });

    for (std::size_t node = 0; node < nodes; ++node) {
      sol.diagnostics.inner_solves += stats[node].solves;
      sol.diagnostics.iterations += stats[node].iterations;
      sol.diagnostics.multistart_disagreements += stats[node].disagreements;
      fns.value_residual = std::max(fns.value_residual, residuals[node][0]);
      fns.feedback_residual = std::max(fns.feedback_residual, residuals[node][1]);
      fns.costate_residual = std::max(fns.costate_residual, residuals[node][2]);
    }
    sol.diagnostics.max_fit_residual =
        std::max({sol.diagnostics.max_fit_residual, fns.value_residual, fns.feedback_residual,
                  fns.costate_residual});
  }

  // Forward pass: the feedback evaluated along the simulated trajectory.
  sol.policy = Policy(tree, N);
  sol.trajectory = Trajectory(tree, N + 1);
  sol.trajectory(0, 0) = problem.x0;
  for (int k = 0; k < N; ++k) {
    const auto& st = tree.stage(k);
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      const Eigen::VectorXd& x = sol.trajectory(k, node);
      const Eigen::VectorXd u =
          m > 0 ? problem.stages[k].control.project(sol.stages[k].feedback_at(node, x))
                : Eigen::VectorXd();
      sol.policy(k, node) = u;
      const StageEval e = evaluate_stage(problem, k, x, u, tree.noise_history(k, node));
      for (int j = 0; j < st.size(); ++j) {
        sol.trajectory(k + 1, tree.child(k, node, j)) = next_state(e, st.point(j));
      }
    }
  }

  if (opt.certify) {
    sol.certificate = certify(problem, tree, sol.policy, opt.certificate);
    sol.certified = true;
    sol.selection = sol.certificate.selection;
    sol.ties = sol.certificate.ties;
    sol.value = sol.certificate.value;
  } else {
    WorstCase wc = worst_case_selection(problem, tree, sol.policy, opt.tie);
    sol.selection = wc.selection;
    sol.ties = wc.ties;
    sol.value = wc.cost.value;
  }
  return sol;
}

std::vector<Eigen::VectorXd> control_grid(const ControlSet& set, int m,
                                          const std::vector<double>& grid) {
  std::vector<Eigen::VectorXd> out;
  if (m == 0) {
    out.emplace_back();
    return out;
  }
  std::vector<std::size_t> idx(m, 0);
  while (true) {
    Eigen::VectorXd u(m);
    for (int i = 0; i < m; ++i) u[i] = grid[idx[i]];
    if (set.contains(u)) out.push_back(u);
    int i = m - 1;
    while (i >= 0 && ++idx[i] == grid.size()) idx[i--] = 0;
    if (i < 0) break;
  }
  return out;
}

}  // namespace

void SolveOptions::validate() const {
  if (degree < 2) throw Error(ErrorKind::InvalidProblem, "collocation degree must be at least 2");
  if (grid_points() <= degree) {
    throw Error(ErrorKind::InvalidProblem, "points per axis must exceed the collocation degree");
  }
  if (multistart < 1) throw Error(ErrorKind::InvalidProblem, "multistart count must be positive");
  if (max_newton_iterations < 1 || max_fixed_point_iterations < 1 || max_halvings < 0) {
    throw Error(ErrorKind::InvalidProblem, "iteration limits must be positive");
  }
}

double StageFunctions::value_at(std::size_t node, const Eigen::VectorXd& x) const {
  return basis.values(x).dot(value[node]);
}

Eigen::VectorXd StageFunctions::feedback_at(std::size_t node, const Eigen::VectorXd& x) const {
  return feedback[node].transpose() * basis.values(x);
}

Solution solve_dp(const Problem& problem, const ScenarioTree& tree, const SolveOptions& options) {
  return run(problem, tree, options, Method::Dp);
}

Solution solve_mp_backward(const Problem& problem, const ScenarioTree& tree,
                           const SolveOptions& options) {
  return run(problem, tree, options, Method::Mp);
}

std::vector<double> uniform_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) {
    throw Error(ErrorKind::InvalidProblem, "grid needs step > 0 and hi >= lo");
  }
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out(count);
  const double inv = 1.0 / step;
  const double scale = std::round(inv);
  const bool decimal = std::abs(inv - scale) <= 1e-9 * inv;
  const double base = std::round(lo * scale);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = decimal ? (base + static_cast<double>(i)) / scale : lo + static_cast<double>(i) * step;
  }
  return out;
}

BruteForceResult brute_force_oracle(const Problem& problem, const ScenarioTree& tree,
                                    const std::vector<double>& grid, BruteForceMode mode,
                                    std::size_t budget) {
  validate_problem(problem);
  if (grid.empty()) throw Error(ErrorKind::InvalidProblem, "empty control grid");
  const int N = problem.horizon;
  std::vector<std::vector<Eigen::VectorXd>> controls(N);
  for (int k = 0; k < N; ++k) {
    controls[k] = control_grid(problem.stages[k].control, problem.m, grid);
    if (controls[k].empty()) {
      throw Error(ErrorKind::InvalidProblem,
                  "no grid control is admissible at stage " + std::to_string(k));
    }
  }

  BruteForceResult out;
  long double size = 0.0L;
  if (mode == BruteForceMode::Recursive) {
    long double prefix = 1.0L;
    for (int k = 0; k < N; ++k) {
      prefix *= static_cast<long double>(controls[k].size());
      size += prefix * static_cast<long double>(tree.num_nodes(k));
    }
  } else {
    size = 1.0L;
    for (int k = 0; k < N; ++k) {
      size *= std::pow(static_cast<long double>(controls[k].size()),
                       static_cast<long double>(tree.num_nodes(k)));
    }
  }
  if (size > static_cast<long double>(budget)) {
    std::ostringstream msg;
    msg << "enumeration size " << static_cast<double>(size) << " exceeds budget " << budget;
    throw Error(ErrorKind::BudgetExceeded, msg.str());
  }
  out.enumeration_size = static_cast<std::size_t>(size);
  out.policy = Policy(tree, N);

  if (mode == BruteForceMode::FullEnumeration) {
    std::vector<std::pair<int, std::size_t>> slots;
    for (int k = 0; k < N; ++k) {
      for (std::size_t node = 0; node < tree.num_nodes(k); ++node) slots.emplace_back(k, node);
    }
    std::vector<std::size_t> idx(slots.size(), 0);
    Policy trial(tree, N);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
      for (std::size_t s = 0; s < slots.size(); ++s) {
        trial(slots[s].first, slots[s].second) = controls[slots[s].first][idx[s]];
      }
      const double v = cost(problem, tree, trial).value;
      if (v < best) {
        best = v;
        out.policy = trial;
      }
      std::ptrdiff_t s = static_cast<std::ptrdiff_t>(slots.size()) - 1;
      while (s >= 0 && ++idx[s] == controls[slots[s].first].size()) idx[s--] = 0;
      if (s < 0) break;
    }
    out.value = best;
    return out;
  }

  // Exhaustive grid search of each node's control given its state; exact
  // for the grid optimum because the nested worst case is monotone and the
  // ambiguity is rectangular.
  std::function<double(int, std::size_t, const Eigen::VectorXd&, Eigen::VectorXd*)> best_cost =
      [&](int k, std::size_t node, const Eigen::VectorXd& x, Eigen::VectorXd* arg) -> double {
    if (k == N) return problem.terminal.evaluate(make_env(x, Eigen::VectorXd()));
    const Eigen::MatrixXd history = tree.noise_history(k, node);
    const auto& st = tree.stage(k);
    std::vector<double> child(st.size());
    double best = std::numeric_limits<double>::infinity();
    for (const auto& u : controls[k]) {
      const StageEval e = evaluate_stage(problem, k, x, u, history);
      for (int j = 0; j < st.size(); ++j) {
        child[j] = e.running + best_cost(k + 1, tree.child(k, node, j), next_state(e, st.point(j)), nullptr);
      }
      double v = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < st.num_candidates(); ++c) v = std::max(v, st.average(c, child));
      if (v < best) {
        best = v;
        if (arg != nullptr) *arg = u;
      }
    }
    return best;
  };

  Trajectory x(tree, N + 1);
  x(0, 0) = problem.x0;
  for (int k = 0; k < N; ++k) {
    const auto& st = tree.stage(k);
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      Eigen::VectorXd u;
      best_cost(k, node, x(k, node), &u);
      out.policy(k, node) = u;
      const StageEval e = evaluate_stage(problem, k, x(k, node), u, tree.noise_history(k, node));
      for (int j = 0; j < st.size(); ++j) x(k + 1, tree.child(k, node, j)) = next_state(e, st.point(j));
    }
  }
  out.value = cost(problem, tree, out.policy).value;
  return out;
}

}  // namespace drmp
