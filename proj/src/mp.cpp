#include "drmp/mp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <functional>

#include "drmp/parallel.hpp"

namespace drmp {

namespace {

constexpr double kBoundTol = 1e-12;

Eigen::VectorXd adjoint_integrand(const StageLinearization& L, const Eigen::VectorXd& P,
                                  const Eigen::MatrixXd& Q) {
  Eigen::VectorXd out = L.drift_x.transpose() * P + L.running_x;
  for (int l = 0; l < Q.cols(); ++l) out += L.diffusion_x[l].transpose() * Q.col(l);
  return out;
}

// Conditional expectation, given the stage-k node, of the first variation
// produced by perturbing only that node's control by v.
double local_gateaux(const ScenarioTree& tree, const Linearization& lin, const Selection& sel,
                     int k, std::size_t node, const Eigen::VectorXd& v) {
  const int N = tree.horizon();
  const auto& L = lin.stages(k, node);
  const auto& stage = tree.stage(k);
  const auto& w = stage.weights(sel(k, node));
  double total = L.running_u.dot(v);

  std::function<double(int, std::size_t, const Eigen::VectorXd&)> descend =
      [&](int i, std::size_t c, const Eigen::VectorXd& xhat) -> double {
    if (i == N) return lin.terminal_grad[c].dot(xhat);
    const auto& Li = lin.stages(i, c);
    double acc = Li.running_x.dot(xhat);
    const auto& st = tree.stage(i);
    const auto& wi = st.weights(sel(i, c));
    const Eigen::VectorXd base = Li.drift_x * xhat;
    for (int j = 0; j < st.size(); ++j) {
      if (wi[j] == 0.0) continue;
      Eigen::VectorXd next = base;
      for (int l = 0; l < st.dim(); ++l) next += Li.diffusion_x[l] * xhat * st.point(j)[l];
      acc += wi[j] * descend(i + 1, tree.child(i, c, j), next);
    }
    return acc;
  };

  const Eigen::VectorXd base = L.drift_u * v;
  for (int j = 0; j < stage.size(); ++j) {
    if (w[j] == 0.0) continue;
    Eigen::VectorXd xhat = base;
    for (int l = 0; l < stage.dim(); ++l) xhat += L.diffusion_u[l] * v * stage.point(j)[l];
    total += w[j] * descend(k + 1, tree.child(k, node, j), xhat);
  }
  return total;
}

Eigen::VectorXd sampling_lo(const ControlSet& set, const Eigen::VectorXd& u, double radius) {
  Eigen::VectorXd lo = set.lo;
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!std::isfinite(lo[i])) lo[i] = u[i] - radius;
  }
  return lo;
}

Eigen::VectorXd sampling_hi(const ControlSet& set, const Eigen::VectorXd& u, double radius) {
  Eigen::VectorXd hi = set.hi;
  for (Eigen::Index i = 0; i < hi.size(); ++i) {
    if (!std::isfinite(hi[i])) hi[i] = u[i] + radius;
  }
  return hi;
}

}  // namespace

WorstCase worst_case_selection(const Problem& problem, const ScenarioTree& tree,
                               const Policy& policy, TieTolerance tol) {
  WorstCase out;
  out.cost = cost(problem, tree, policy, tol);
  out.selection = canonical_selection(tree, out.cost.argmax);
  for (int k = 0; k < tree.horizon(); ++k) {
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      const auto& tied = out.cost.argmax(k, node);
      if (tied.size() >= 2) out.ties.push_back(TieEntry{k, node, tied});
    }
  }
  return out;
}

Adjoint adjoint_recursive(const ScenarioTree& tree, const Linearization& lin,
                          const Selection& selection) {
  validate_selection(tree, selection);
  const int N = tree.horizon();
  Adjoint adj;
  adj.P = NodeField<Eigen::VectorXd>(tree, N);
  adj.Q = NodeField<Eigen::MatrixXd>(tree, N);
  std::vector<Eigen::VectorXd> integrand = lin.terminal_grad;
  for (int k = N - 1; k >= 0; --k) {
    const auto& stage = tree.stage(k);
    std::vector<Eigen::VectorXd> here(k > 0 ? tree.num_nodes(k) : 0);
    parallel_for(tree.num_nodes(k), [&](std::size_t node) {
      const auto& w = stage.weights(selection(k, node));
      const Eigen::Index n = integrand.front().size();
      Eigen::VectorXd P = Eigen::VectorXd::Zero(n);
      Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, stage.dim());
      for (int j = 0; j < stage.size(); ++j) {
        const Eigen::VectorXd& g = integrand[tree.child(k, node, j)];
        P += w[j] * g;
        Q += w[j] * g * stage.point(j).transpose();
      }
      if (k > 0) here[node] = adjoint_integrand(lin.stages(k, node), P, Q);
      adj.P(k, node) = std::move(P);
      adj.Q(k, node) = std::move(Q);
    });
    integrand = std::move(here);
  }
  return adj;
}

Adjoint adjoint_recursive(const Problem& problem, const ScenarioTree& tree, const Policy& policy,
                          const Selection& selection) {
  const Trajectory traj = simulate(problem, tree, policy);
  return adjoint_recursive(tree, linearize(problem, tree, traj, policy), selection);
}

Adjoint adjoint_explicit(const ScenarioTree& tree, const Linearization& lin,
                         const Selection& selection) {
  validate_selection(tree, selection);
  const int N = tree.horizon();
  const Eigen::Index n = lin.terminal_grad.front().size();
  const int d = tree.noise_dim();
  Adjoint adj;
  adj.P = NodeField<Eigen::VectorXd>(tree, N);
  adj.Q = NodeField<Eigen::MatrixXd>(tree, N);

  for (int k = 0; k < N; ++k) {
    parallel_for(tree.num_nodes(k), [&](std::size_t node) {
      Eigen::VectorXd P = Eigen::VectorXd::Zero(n);
      Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, d);
      // Walk every descendant path carrying prob and M = A_{k+1}^T ... A_{i-1}^T.
      struct Frame {
        int stage;
        std::size_t index;
        double prob;
        Eigen::MatrixXd M;
      };
      const auto& root_stage = tree.stage(k);
      const auto& w0 = root_stage.weights(selection(k, node));
      for (int j0 = 0; j0 < root_stage.size(); ++j0) {
        const Eigen::VectorXd w_first = root_stage.point(j0);
        std::vector<Frame> stack;
        stack.push_back(Frame{k + 1, tree.child(k, node, j0), w0[j0], Eigen::MatrixXd::Identity(n, n)});
        while (!stack.empty()) {
          Frame f = std::move(stack.back());
          stack.pop_back();
          const Eigen::VectorXd& fx =
              f.stage == N ? lin.terminal_grad[f.index] : lin.stages(f.stage, f.index).running_x;
          const Eigen::VectorXd term = f.prob * (f.M * fx);
          P += term;
          Q += term * w_first.transpose();
          if (f.stage == N) continue;
          const auto& L = lin.stages(f.stage, f.index);
          const auto& st = tree.stage(f.stage);
          const auto& w = st.weights(selection(f.stage, f.index));
          for (int j = 0; j < st.size(); ++j) {
            Eigen::MatrixXd A = L.drift_x;
            for (int l = 0; l < st.dim(); ++l) A += L.diffusion_x[l] * st.point(j)[l];
            stack.push_back(Frame{f.stage + 1, tree.child(f.stage, f.index, j), f.prob * w[j],
                                  f.M * A.transpose()});
          }
        }
      }
      adj.P(k, node) = std::move(P);
      adj.Q(k, node) = std::move(Q);
    });
  }
  return adj;
}

Adjoint adjoint_explicit(const Problem& problem, const ScenarioTree& tree, const Policy& policy,
                         const Selection& selection) {
  const Trajectory traj = simulate(problem, tree, policy);
  return adjoint_explicit(tree, linearize(problem, tree, traj, policy), selection);
}

double adjoint_discrepancy(const Adjoint& a, const Adjoint& b) {
  double worst = 0.0;
  for (int k = 0; k < a.P.num_stages(); ++k) {
    for (std::size_t node = 0; node < a.P.stage(k).size(); ++node) {
      worst = std::max(worst, (a.P(k, node) - b.P(k, node)).cwiseAbs().maxCoeff());
      worst = std::max(worst, (a.Q(k, node) - b.Q(k, node)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

double hamiltonian(const Problem& problem, int k, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& u, const Eigen::VectorXd& p, const Eigen::MatrixXd& q,
                   const Eigen::MatrixXd& history) {
  const StageEval e = evaluate_stage(problem, k, x, u, history);
  double h = p.dot(e.drift) + e.running;
  for (int l = 0; l < problem.d; ++l) h += q.col(l).dot(e.diffusion.col(l));
  return h;
}

Eigen::VectorXd hamiltonian_u(const StageLinearization& lin, const Eigen::VectorXd& p,
                              const Eigen::MatrixXd& q) {
  Eigen::VectorXd g = lin.drift_u.transpose() * p + lin.running_u;
  for (int l = 0; l < q.cols(); ++l) g += lin.diffusion_u[l].transpose() * q.col(l);
  return g;
}

Eigen::VectorXd hamiltonian_u(const Problem& problem, int k, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                              const Eigen::MatrixXd& q, const Eigen::MatrixXd& history) {
  return hamiltonian_u(linearize_stage(problem, k, x, u, history), p, q);
}

StationarityReport check_stationarity(const Problem& problem, const ScenarioTree& tree,
                                      const Linearization& lin, const Policy& policy,
                                      const Selection& selection, const Adjoint& adjoint,
                                      double tol) {
  const int N = tree.horizon();
  StationarityReport rep;
  rep.tol = tol;
  rep.residuals = NodeField<double>(tree, N);
  const NodeField<double> prob = node_probabilities(tree, selection);
  NodeField<Eigen::VectorXd> gradients(tree, N);
  for (int k = 0; k < N; ++k) {
    const auto& set = problem.stages[k].control;
    parallel_for(tree.num_nodes(k), [&](std::size_t node) {
      const Eigen::VectorXd g = hamiltonian_u(lin.stages(k, node), adjoint.P(k, node), adjoint.Q(k, node));
      const Eigen::VectorXd& u = policy(k, node);
      double r = 0.0;
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        const bool can_increase = set.kind == ControlSet::Kind::Unconstrained || u[i] < set.hi[i] - kBoundTol;
        const bool can_decrease = set.kind == ControlSet::Kind::Unconstrained || u[i] > set.lo[i] + kBoundTol;
        if (can_increase) r = std::max(r, -g[i]);
        if (can_decrease) r = std::max(r, g[i]);
      }
      rep.residuals(k, node) = r;
      gradients(k, node) = g;
    });
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      if (prob(k, node) <= kPositiveNodeProbability) {
        ++rep.null_nodes;
        continue;
      }
      ++rep.positive_nodes;
      const double r = rep.residuals(k, node);
      rep.max_residual = std::max(rep.max_residual, r);
      if (r > tol) {
        rep.witnesses.push_back(NodeResidual{k, node, tree.path(k, node), r, policy(k, node),
                                             gradients(k, node)});
      }
    }
  }
  std::stable_sort(rep.witnesses.begin(), rep.witnesses.end(),
                   [](const NodeResidual& a, const NodeResidual& b) { return a.residual > b.residual; });
  if (rep.witnesses.size() > 20) rep.witnesses.resize(20);
  rep.passed = rep.max_residual <= tol;
  return rep;
}

StationarityReport check_stationarity(const Problem& problem, const ScenarioTree& tree,
                                      const Policy& policy, const Selection& selection,
                                      const Adjoint& adjoint, double tol) {
  const Trajectory traj = simulate(problem, tree, policy);
  return check_stationarity(problem, tree, linearize(problem, tree, traj, policy), policy,
                            selection, adjoint, tol);
}

DirectionalReport directional_derivative_check(const Problem& problem, const ScenarioTree& tree,
                                               const Policy& u_star, const Policy& direction,
                                               const DirectionalOptions& options) {
  const int N = tree.horizon();
  check_admissible(problem, tree, u_star);
  if (direction.num_stages() < N) {
    throw Error(ErrorKind::NodeCountMismatch, "direction does not cover every stage");
  }
  for (int k = 0; k < N; ++k) {
    if (direction.stage(k).size() != tree.num_nodes(k)) {
      throw Error(ErrorKind::NodeCountMismatch, "direction stage size differs from node count");
    }
  }
  for (double eps : options.eps) {
    const Policy moved = add_scaled(u_star, eps, direction);
    for (int k = 0; k < N; ++k) {
      for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
        if (!problem.stages[k].control.contains(moved(k, node))) {
          throw Error(ErrorKind::InadmissiblePerturbation,
                      "u* + eps v leaves U_k at stage " + std::to_string(k) + " for eps = " +
                          std::to_string(eps));
        }
      }
    }
  }

  DirectionalReport rep;
  rep.tol = options.tol;
  const CostResult base = cost(problem, tree, u_star, options.tie);
  const Linearization lin = linearize(problem, tree, base.trajectory, u_star);
  const std::vector<double> theta = gateaux_term(tree, lin, direction);
  rep.sup_value = refine_sup_over_ties(tree, base.argmax, theta).value;
  const Selection canonical = canonical_selection(tree, base.argmax);
  rep.canonical_value = expect_under_selection(tree, canonical, theta).value;

  for (double eps : options.eps) {
    const double moved = cost(problem, tree, add_scaled(u_star, eps, direction), options.tie).value;
    EpsilonRecord rec;
    rec.eps = eps;
    rec.quotient = (moved - base.value) / eps;
    rec.error = std::abs(rec.quotient - rep.sup_value);
    rep.records.push_back(rec);
  }
  for (std::size_t i = 0; i + 1 < rep.records.size(); ++i) {
    const auto& a = rep.records[i];
    const auto& b = rep.records[i + 1];
    const double ratio = std::log(a.error / b.error) / std::log(a.eps / b.eps);
    rep.orders.push_back(ratio);
  }

  // Variational inequality over the direction family under the canonical selection.
  double smin = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  if (options.coordinate_family) {
    const NodeField<double> prob = node_probabilities(tree, canonical);
    for (int k = 0; k < N; ++k) {
      const auto& set = problem.stages[k].control;
      std::vector<double> local(tree.num_nodes(k) * problem.m);
      parallel_for(tree.num_nodes(k), [&](std::size_t node) {
        for (int i = 0; i < problem.m; ++i) {
          Eigen::VectorXd e = Eigen::VectorXd::Zero(problem.m);
          e[i] = 1.0;
          local[node * problem.m + i] =
              prob(k, node) * local_gateaux(tree, lin, canonical, k, node, e);
        }
      });
      for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
        const Eigen::VectorXd& u = u_star(k, node);
        for (int i = 0; i < problem.m; ++i) {
          const double value = local[node * problem.m + i];
          if (u[i] < set.hi[i] - kBoundTol) {
            smin = std::min(smin, value);
            ++count;
          }
          if (u[i] > set.lo[i] + kBoundTol) {
            smin = std::min(smin, -value);
            ++count;
          }
        }
      }
    }
  }
  for (const auto& extra : options.extra_directions) {
    const auto payload = gateaux_term(tree, lin, extra);
    smin = std::min(smin, expect_under_selection(tree, canonical, payload).value);
    ++count;
  }
  rep.family_size = count;
  rep.min_family_value = count ? smin : 0.0;
  rep.variational_inequality = rep.min_family_value >= -options.tol;
  return rep;
}

ConvexityVerdict convexity_sample(const Problem& problem, const ScenarioTree& tree,
                                  const Policy& policy, const Adjoint& adjoint,
                                  std::size_t samples, std::uint64_t seed) {
  ConvexityVerdict verdict;
  verdict.samples = samples;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int N = tree.horizon();
  auto draw_box = [&](const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd z(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) z[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    return z;
  };
  auto slack = [](double a, double b) { return 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); };
  const Eigen::VectorXd no_control;

  for (std::size_t s = 0; s < samples && verdict.satisfied; ++s) {
    const int k = static_cast<int>(rng() % static_cast<std::uint64_t>(N));
    const std::size_t node = rng() % tree.num_nodes(k);
    const auto& st = problem.stages[k];
    const double radius = std::max(1.0, (st.state_box.hi - st.state_box.lo).cwiseAbs().maxCoeff());
    const Eigen::VectorXd ulo = sampling_lo(st.control, policy(k, node), radius);
    const Eigen::VectorXd uhi = sampling_hi(st.control, policy(k, node), radius);
    const Eigen::MatrixXd history = tree.noise_history(k, node);

    Eigen::VectorXd z1(problem.n + problem.m), z2(problem.n + problem.m);
    z1 << draw_box(st.state_box.lo, st.state_box.hi), draw_box(ulo, uhi);
    z2 << draw_box(st.state_box.lo, st.state_box.hi), draw_box(ulo, uhi);
    const Eigen::VectorXd mid = 0.5 * (z1 + z2);
    auto H = [&](const Eigen::VectorXd& z) {
      return hamiltonian(problem, k, z.head(problem.n), z.tail(problem.m), adjoint.P(k, node),
                         adjoint.Q(k, node), history);
    };
    const double h1 = H(z1), h2 = H(z2), hm = H(mid);
    const double gap = hm - 0.5 * (h1 + h2);
    if (gap > slack(h1, h2)) {
      verdict = ConvexityVerdict{false, samples, "hamiltonian", k, node, z1, z2, gap};
      break;
    }

    const Eigen::VectorXd x1 = draw_box(problem.terminal_box.lo, problem.terminal_box.hi);
    const Eigen::VectorXd x2 = draw_box(problem.terminal_box.lo, problem.terminal_box.hi);
    const Eigen::VectorXd xm = 0.5 * (x1 + x2);
    const double p1 = problem.terminal.evaluate(make_env(x1, no_control));
    const double p2 = problem.terminal.evaluate(make_env(x2, no_control));
    const double pm = problem.terminal.evaluate(make_env(xm, no_control));
    const double tgap = pm - 0.5 * (p1 + p2);
    if (tgap > slack(p1, p2)) {
      verdict = ConvexityVerdict{false, samples, "terminal", N, 0, x1, x2, tgap};
    }
  }
  return verdict;
}

Policy random_direction(const Problem& problem, const ScenarioTree& tree, const Policy& base,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Policy dir(tree, problem.horizon, Eigen::VectorXd::Zero(problem.m));
  for (int k = 0; k < problem.horizon; ++k) {
    const auto& set = problem.stages[k].control;
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      Eigen::VectorXd v(problem.m);
      for (int i = 0; i < problem.m; ++i) {
        const double lo = std::max(-1.0, set.lo[i] - base(k, node)[i]);
        const double hi = std::min(1.0, set.hi[i] - base(k, node)[i]);
        const double t = 0.5 * (unit(rng) + 1.0);
        v[i] = lo + (hi - lo) * t;
      }
      dir(k, node) = v;
    }
  }
  return dir;
}

Certificate certify(const Problem& problem, const ScenarioTree& tree, const Policy& policy,
                    const CertificateOptions& options) {
  Certificate cert;
  WorstCase wc = worst_case_selection(problem, tree, policy, options.tie);
  cert.selection = wc.selection;
  cert.ties = wc.ties;
  cert.value = wc.cost.value;
  const Linearization lin = linearize(problem, tree, wc.cost.trajectory, policy);
  cert.adjoint = adjoint_recursive(tree, lin, cert.selection);
  const Adjoint oracle = adjoint_explicit(tree, lin, cert.selection);
  cert.adjoint_discrepancy = adjoint_discrepancy(cert.adjoint, oracle);
  cert.adjoint_agrees = cert.adjoint_discrepancy <= options.adjoint_tol;
  cert.stationarity = check_stationarity(problem, tree, lin, policy, cert.selection, cert.adjoint,
                                         options.stationarity_tol);
  for (std::size_t r = 0; r < options.random_directions; ++r) {
    DirectionalOptions dopt;
    dopt.eps = options.eps;
    dopt.tie = options.tie;
    dopt.coordinate_family = r == 0;
    const Policy v = random_direction(problem, tree, policy, options.seed + 7919 * (r + 1));
    cert.directional.push_back(directional_derivative_check(problem, tree, policy, v, dopt));
  }
  if (options.convexity_samples > 0) {
    cert.convexity = convexity_sample(problem, tree, policy, cert.adjoint,
                                      options.convexity_samples, options.seed);
  }
  return cert;
}

}  // namespace drmp
