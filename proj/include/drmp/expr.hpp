#pragma once

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "drmp/errors.hpp"

namespace drmp {

/// Identifier visibility for one expression: x1..xn, u1..um, and the noise
/// components w{k}_{j} with k <= stage and j <= d.
struct ParseContext {
  int n = 0;
  int m = 0;
  int d = 0;
  int stage = 0;
};

struct Variable {
  enum class Kind { State, Control, Noise };
  Kind kind = Kind::State;
  int index = 0;        // 0-based component
  int noise_stage = 0;  // 1-based k of W_k, Noise only

  friend bool operator==(const Variable&, const Variable&) = default;
};

Variable state_var(int i);
Variable control_var(int i);
Variable noise_var(int k, int j);

/// Bindings for one evaluation: x, u, and the observed noises W_1..W_k as
/// the columns of `noise`.
struct Env {
  std::span<const double> x;
  std::span<const double> u;
  const Eigen::MatrixXd* noise = nullptr;
};

inline Env make_env(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                    const Eigen::MatrixXd* noise = nullptr) {
  return Env{std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
             std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
             noise};
}

struct Partials {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

namespace detail {
struct Node;
struct Tape;
}  // namespace detail

/// Immutable parsed expression. Copies share the AST and its compiled tape.
class Expr {
 public:
  Expr();

  /// Parses `text` under the identifier rules of `ctx`.
  static Expr parse(const std::string& text, const ParseContext& ctx);
  static Expr constant(double value);

  const std::string& source() const { return source_; }
  /// Fully parenthesized canonical form; parsing it reproduces this AST.
  std::string print() const;

  double evaluate(const Env& env) const;
  Partials evaluate_with_partials(const Env& env, std::span<const Variable> wrt) const;

  /// Total degree in the state and control variables treating noise-only
  /// subexpressions as constants; -1 when not polynomial in (x, u).
  int xu_degree() const;
  bool is_zero_literal() const;
  std::vector<Variable> free_variables() const;

 private:
  Expr(std::shared_ptr<const detail::Node> root, std::string source);

  std::string source_;
  std::shared_ptr<const detail::Node> root_;
  std::shared_ptr<const detail::Tape> tape_;
};

inline Expr parse(const std::string& text, const ParseContext& ctx) {
  return Expr::parse(text, ctx);
}
inline double evaluate(const Expr& expr, const Env& env) { return expr.evaluate(env); }
inline Partials eval_with_partials(const Expr& expr, const Env& env,
                                   std::span<const Variable> wrt) {
  return expr.evaluate_with_partials(env, wrt);
}

/// x1..xn followed by u1..um.
std::vector<Variable> state_control_vars(int n, int m);

}  // namespace drmp
