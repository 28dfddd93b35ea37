#include "drmp/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "drmp/parallel.hpp"

namespace drmp {

namespace {

std::string node_label(int k, const std::vector<int>& path) {
  std::ostringstream out;
  out << "stage " << k << " node (";
  for (std::size_t i = 0; i < path.size(); ++i) out << (i ? "," : "") << path[i];
  out << ")";
  return out.str();
}

struct Issues {
  std::vector<std::pair<ErrorKind, std::string>> list;

  void add(ErrorKind kind, std::string what) { list.emplace_back(kind, std::move(what)); }
};

void check_expr_scope(const Expr& e, const ParseContext& ctx, const std::string& where,
                      Issues& issues) {
  for (const auto& v : e.free_variables()) {
    switch (v.kind) {
      case Variable::Kind::State:
        if (v.index >= ctx.n) issues.add(ErrorKind::UnknownIdentifier, where + ": x" + std::to_string(v.index + 1));
        break;
      case Variable::Kind::Control:
        if (v.index >= ctx.m) issues.add(ErrorKind::UnknownIdentifier, where + ": u" + std::to_string(v.index + 1));
        break;
      case Variable::Kind::Noise:
        if (v.index >= ctx.d) {
          issues.add(ErrorKind::UnknownIdentifier, where + ": noise component " + std::to_string(v.index + 1));
        } else if (v.noise_stage > ctx.stage) {
          issues.add(ErrorKind::FutureNoiseReference,
                     where + ": w" + std::to_string(v.noise_stage) + " not observed");
        }
        break;
    }
  }
}

void check_box(const StateBox& box, int n, const std::string& where, Issues& issues) {
  if (box.lo.size() != n || box.hi.size() != n) {
    issues.add(ErrorKind::ShapeMismatch, where + ": state box has wrong dimension");
    return;
  }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(box.lo[i]) || !std::isfinite(box.hi[i]) || !(box.lo[i] < box.hi[i])) {
      issues.add(ErrorKind::InvalidProblem, where + ": state box needs finite lo < hi");
    }
  }
}

}  // namespace

ControlSet ControlSet::unconstrained(int m) {
  ControlSet set;
  set.kind = Kind::Unconstrained;
  set.lo = Eigen::VectorXd::Constant(m, -std::numeric_limits<double>::infinity());
  set.hi = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
  return set;
}

ControlSet ControlSet::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  ControlSet set;
  set.kind = Kind::Box;
  set.lo = std::move(lo);
  set.hi = std::move(hi);
  return set;
}

bool ControlSet::contains(const Eigen::VectorXd& u, double tol) const {
  if (u.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i])) return false;
    if (u[i] < lo[i] - tol || u[i] > hi[i] + tol) return false;
  }
  return true;
}

Eigen::VectorXd ControlSet::project(const Eigen::VectorXd& u) const {
  return u.cwiseMax(lo).cwiseMin(hi);
}

void validate_problem(const Problem& p) {
  Issues issues;
  if (p.horizon < 1) issues.add(ErrorKind::InvalidProblem, "horizon must be at least 1");
  if (p.n < 1 || p.m < 1 || p.d < 1) issues.add(ErrorKind::InvalidProblem, "dimensions must be positive");
  if (p.x0.size() != p.n) {
    issues.add(ErrorKind::ShapeMismatch, "x0 has wrong dimension");
  } else if (!p.x0.allFinite()) {
    issues.add(ErrorKind::InvalidProblem, "x0 must be finite");
  }
  if (static_cast<int>(p.stages.size()) != p.horizon) {
    issues.add(ErrorKind::ShapeMismatch, "stage count differs from horizon");
  }
  if (static_cast<int>(p.noise.size()) != p.horizon) {
    issues.add(ErrorKind::ShapeMismatch, "noise stage count differs from horizon");
  }
  for (std::size_t k = 0; k < p.stages.size(); ++k) {
    const auto& s = p.stages[k];
    const std::string where = "stages[" + std::to_string(k) + "]";
    const ParseContext ctx{p.n, p.m, p.d, static_cast<int>(k)};
    if (static_cast<int>(s.drift.size()) != p.n) issues.add(ErrorKind::ShapeMismatch, where + ".b has wrong length");
    for (std::size_t i = 0; i < s.drift.size(); ++i) {
      check_expr_scope(s.drift[i], ctx, where + ".b[" + std::to_string(i) + "]", issues);
    }
    if (static_cast<int>(s.diffusion.size()) != p.d) issues.add(ErrorKind::ShapeMismatch, where + ".sigma has wrong channel count");
    for (std::size_t l = 0; l < s.diffusion.size(); ++l) {
      if (static_cast<int>(s.diffusion[l].size()) != p.n) {
        issues.add(ErrorKind::ShapeMismatch, where + ".sigma[" + std::to_string(l) + "] has wrong length");
      }
      for (std::size_t i = 0; i < s.diffusion[l].size(); ++i) {
        check_expr_scope(s.diffusion[l][i], ctx,
                         where + ".sigma[" + std::to_string(l) + "][" + std::to_string(i) + "]", issues);
      }
    }
    check_expr_scope(s.running, ctx, where + ".f", issues);
    if (s.control.dim() != p.m || s.control.hi.size() != p.m) {
      issues.add(ErrorKind::ShapeMismatch, where + ".control has wrong dimension");
    } else {
      for (int i = 0; i < p.m; ++i) {
        if (std::isnan(s.control.lo[i]) || std::isnan(s.control.hi[i]) || s.control.lo[i] > s.control.hi[i]) {
          issues.add(ErrorKind::InvalidProblem, where + ".control needs lo <= hi");
        }
      }
    }
    check_box(s.state_box, p.n, where + ".state_box", issues);
    if (k < p.noise.size() && p.noise[k].dim() != p.d) {
      issues.add(ErrorKind::ShapeMismatch, where + ".noise has wrong dimension");
    }
  }
  check_expr_scope(p.terminal, ParseContext{p.n, 0, p.d, 0}, "terminal", issues);
  check_box(p.terminal_box, p.n, "terminal_box", issues);

  if (!issues.list.empty()) {
    std::ostringstream msg;
    msg << issues.list.size() << " problem issue(s)";
    for (const auto& [kind, what] : issues.list) msg << "; [" << to_string(kind) << "] " << what;
    throw Error(issues.list.front().first, msg.str());
  }
}

ScenarioTree build_tree(const Problem& problem, std::size_t leaf_budget) {
  return ScenarioTree(problem.noise, leaf_budget);
}

Policy constant_policy(const ScenarioTree& tree, const Eigen::VectorXd& u) {
  return Policy(tree, tree.horizon(), u);
}

void check_admissible(const Problem& problem, const ScenarioTree& tree, const Policy& policy) {
  if (policy.num_stages() < problem.horizon) {
    throw Error(ErrorKind::NodeCountMismatch, "policy does not cover every stage");
  }
  for (int k = 0; k < problem.horizon; ++k) {
    if (policy.stage(k).size() != tree.num_nodes(k)) {
      std::ostringstream msg;
      msg << "stage " << k << " has " << policy.stage(k).size() << " controls, tree has "
          << tree.num_nodes(k) << " nodes";
      throw Error(ErrorKind::NodeCountMismatch, msg.str());
    }
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      if (!problem.stages[k].control.contains(policy(k, node))) {
        throw Error(ErrorKind::InadmissiblePolicy,
                    "control outside U_k at " + node_label(k, tree.path(k, node)));
      }
    }
  }
}

StageEval evaluate_stage(const Problem& p, int k, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, const Eigen::MatrixXd& history) {
  const auto& s = p.stages[k];
  const Env env = make_env(x, u, &history);
  StageEval out;
  out.drift.resize(p.n);
  out.diffusion.resize(p.n, p.d);
  for (int i = 0; i < p.n; ++i) out.drift[i] = s.drift[i].evaluate(env);
  for (int l = 0; l < p.d; ++l) {
    for (int i = 0; i < p.n; ++i) out.diffusion(i, l) = s.diffusion[l][i].evaluate(env);
  }
  out.running = s.running.evaluate(env);
  return out;
}

StageLinearization linearize_stage(const Problem& p, int k, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u, const Eigen::MatrixXd& history) {
  const auto& s = p.stages[k];
  const Env env = make_env(x, u, &history);
  const auto wrt = state_control_vars(p.n, p.m);
  StageLinearization out;
  out.drift.resize(p.n);
  out.diffusion.resize(p.n, p.d);
  out.drift_x.resize(p.n, p.n);
  out.drift_u.resize(p.n, p.m);
  out.diffusion_x.assign(p.d, Eigen::MatrixXd(p.n, p.n));
  out.diffusion_u.assign(p.d, Eigen::MatrixXd(p.n, p.m));
  for (int i = 0; i < p.n; ++i) {
    const Partials r = s.drift[i].evaluate_with_partials(env, wrt);
    out.drift[i] = r.value;
    out.drift_x.row(i) = r.gradient.head(p.n).transpose();
    out.drift_u.row(i) = r.gradient.tail(p.m).transpose();
  }
  for (int l = 0; l < p.d; ++l) {
    for (int i = 0; i < p.n; ++i) {
      const Partials r = s.diffusion[l][i].evaluate_with_partials(env, wrt);
      out.diffusion(i, l) = r.value;
      out.diffusion_x[l].row(i) = r.gradient.head(p.n).transpose();
      out.diffusion_u[l].row(i) = r.gradient.tail(p.m).transpose();
    }
  }
  const Partials f = s.running.evaluate_with_partials(env, wrt);
  out.running = f.value;
  out.running_x = f.gradient.head(p.n);
  out.running_u = f.gradient.tail(p.m);
  return out;
}

Eigen::VectorXd next_state(const StageEval& eval, const Eigen::Ref<const Eigen::VectorXd>& w) {
  Eigen::VectorXd out = eval.drift;
  for (Eigen::Index l = 0; l < w.size(); ++l) out += eval.diffusion.col(l) * w[l];
  return out;
}

Trajectory simulate(const Problem& p, const ScenarioTree& tree, const Policy& policy) {
  check_admissible(p, tree, policy);
  Trajectory traj(tree, p.horizon + 1);
  traj(0, 0) = p.x0;
  for (int k = 0; k < p.horizon; ++k) {
    const auto& stage = tree.stage(k);
    parallel_for(tree.num_nodes(k), [&](std::size_t node) {
      const Eigen::MatrixXd history = tree.noise_history(k, node);
      try {
        const StageEval e = evaluate_stage(p, k, traj(k, node), policy(k, node), history);
        for (int j = 0; j < stage.size(); ++j) {
          Eigen::VectorXd next = next_state(e, stage.point(j));
          if (!next.allFinite()) throw Error(ErrorKind::NumericalOverflow, "state is not finite");
          traj(k + 1, tree.child(k, node, j)) = std::move(next);
        }
      } catch (const Error& err) {
        throw Error(err.kind(), std::string(err.what()) + " at " + node_label(k, tree.path(k, node)));
      }
    });
  }
  return traj;
}

CostResult cost(const Problem& p, const ScenarioTree& tree, const Policy& policy, TieTolerance tol) {
  CostResult out;
  out.trajectory = simulate(p, tree, policy);
  const int N = p.horizon;
  std::vector<double> accumulated(1, 0.0);
  for (int k = 0; k < N; ++k) {
    std::vector<double> next(tree.num_nodes(k + 1));
    parallel_for(tree.num_nodes(k), [&](std::size_t node) {
      const Eigen::MatrixXd history = tree.noise_history(k, node);
      const Env env = make_env(out.trajectory(k, node), policy(k, node), &history);
      double f = 0.0;
      try {
        f = p.stages[k].running.evaluate(env);
      } catch (const Error& err) {
        throw Error(err.kind(), std::string(err.what()) + " in running cost at " +
                                    node_label(k, tree.path(k, node)));
      }
      for (int j = 0; j < tree.branching(k); ++j) next[tree.child(k, node, j)] = accumulated[node] + f;
    });
    accumulated = std::move(next);
  }
  out.leaf_payload.resize(tree.num_leaves());
  const Eigen::VectorXd no_control;
  parallel_for(tree.num_leaves(), [&](std::size_t leaf) {
    const Env env = make_env(out.trajectory(N, leaf), no_control);
    out.leaf_payload[leaf] = accumulated[leaf] + p.terminal.evaluate(env);
  });
  SublinearResult s = sublinear_backward(tree, out.leaf_payload, tol);
  out.value = s.value;
  out.conditionals = std::move(s.conditionals);
  out.argmax = std::move(s.argmax);
  return out;
}

Linearization linearize(const Problem& p, const ScenarioTree& tree, const Trajectory& traj,
                        const Policy& policy) {
  Linearization lin;
  lin.stages = NodeField<StageLinearization>(tree, p.horizon);
  for (int k = 0; k < p.horizon; ++k) {
    parallel_for(tree.num_nodes(k), [&](std::size_t node) {
      lin.stages(k, node) = linearize_stage(p, k, traj(k, node), policy(k, node),
                                            tree.noise_history(k, node));
    });
  }
  const int N = p.horizon;
  lin.terminal_grad.resize(tree.num_leaves());
  const auto wrt = state_control_vars(p.n, 0);
  const Eigen::VectorXd no_control;
  parallel_for(tree.num_leaves(), [&](std::size_t leaf) {
    lin.terminal_grad[leaf] =
        p.terminal.evaluate_with_partials(make_env(traj(N, leaf), no_control), wrt).gradient;
  });
  return lin;
}

NodeField<Eigen::VectorXd> variational_state(const ScenarioTree& tree, const Linearization& lin,
                                             const Policy& direction) {
  const int N = tree.horizon();
  const int n = static_cast<int>(lin.stages(0, 0).drift.size());
  NodeField<Eigen::VectorXd> xhat(tree, N + 1, Eigen::VectorXd::Zero(n));
  for (int k = 0; k < N; ++k) {
    const auto& stage = tree.stage(k);
    parallel_for(tree.num_nodes(k), [&](std::size_t node) {
      const auto& L = lin.stages(k, node);
      const Eigen::VectorXd& xh = xhat(k, node);
      const Eigen::VectorXd& v = direction(k, node);
      const Eigen::VectorXd base = L.drift_x * xh + L.drift_u * v;
      std::vector<Eigen::VectorXd> channel(stage.dim());
      for (int l = 0; l < stage.dim(); ++l) channel[l] = L.diffusion_x[l] * xh + L.diffusion_u[l] * v;
      for (int j = 0; j < stage.size(); ++j) {
        Eigen::VectorXd next = base;
        const auto w = stage.point(j);
        for (int l = 0; l < stage.dim(); ++l) next += channel[l] * w[l];
        xhat(k + 1, tree.child(k, node, j)) = std::move(next);
      }
    });
  }
  return xhat;
}

NodeField<Eigen::VectorXd> variational_state(const Problem& p, const ScenarioTree& tree,
                                             const Policy& u_star, const Policy& direction) {
  const Trajectory traj = simulate(p, tree, u_star);
  return variational_state(tree, linearize(p, tree, traj, u_star), direction);
}

std::vector<double> gateaux_term(const ScenarioTree& tree, const Linearization& lin,
                                 const Policy& direction) {
  const int N = tree.horizon();
  const auto xhat = variational_state(tree, lin, direction);
  std::vector<double> acc(1, 0.0);
  for (int k = 0; k < N; ++k) {
    std::vector<double> next(tree.num_nodes(k + 1));
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      const auto& L = lin.stages(k, node);
      const double term = L.running_x.dot(xhat(k, node)) + L.running_u.dot(direction(k, node));
      for (int j = 0; j < tree.branching(k); ++j) next[tree.child(k, node, j)] = acc[node] + term;
    }
    acc = std::move(next);
  }
  for (std::size_t leaf = 0; leaf < tree.num_leaves(); ++leaf) {
    acc[leaf] += lin.terminal_grad[leaf].dot(xhat(N, leaf));
  }
  return acc;
}

std::vector<double> gateaux_term(const Problem& p, const ScenarioTree& tree, const Policy& u_star,
                                 const Policy& direction) {
  const Trajectory traj = simulate(p, tree, u_star);
  return gateaux_term(tree, linearize(p, tree, traj, u_star), direction);
}

Policy add_scaled(const Policy& base, double eps, const Policy& direction) {
  Policy out = base;
  for (int k = 0; k < out.num_stages(); ++k) {
    for (std::size_t node = 0; node < out.stage(k).size(); ++node) {
      out(k, node) = base(k, node) + eps * direction(k, node);
    }
  }
  return out;
}

bool is_linear_quadratic(const Problem& p) {
  auto within = [](const Expr& e, int max_degree) {
    const int deg = e.xu_degree();
    return deg >= 0 && deg <= max_degree;
  };
  for (const auto& s : p.stages) {
    for (const auto& e : s.drift) {
      if (!within(e, 1)) return false;
    }
    for (const auto& channel : s.diffusion) {
      for (const auto& e : channel) {
        if (!within(e, 1)) return false;
      }
    }
    if (!within(s.running, 2)) return false;
  }
  return within(p.terminal, 2);
}

}  // namespace drmp
