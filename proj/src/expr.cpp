#include "drmp/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace drmp {

namespace detail {

enum class Op { Num, Pi, Var, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp };

struct Node {
  Op op = Op::Num;
  double value = 0.0;
  Variable var{};
  int exponent = 0;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

struct Instr {
  Op op = Op::Num;
  int a = -1;
  int b = -1;
  double value = 0.0;
  Variable var{};
  int exponent = 0;
};

struct Tape {
  std::vector<Instr> code;
};

}  // namespace detail

namespace {

using detail::Instr;
using detail::Node;
using detail::Op;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_node(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr make_number(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Num;
  n->value = v;
  return n;
}

std::string describe_var(const Variable& v) {
  switch (v.kind) {
    case Variable::Kind::State: return "x" + std::to_string(v.index + 1);
    case Variable::Kind::Control: return "u" + std::to_string(v.index + 1);
    case Variable::Kind::Noise:
      return "w" + std::to_string(v.noise_stage) + "_" + std::to_string(v.index + 1);
  }
  return "?";
}

class Parser {
 public:
  Parser(const std::string& text, const ParseContext& ctx) : text_(text), ctx_(ctx) {}

  NodePtr run() {
    skip_space();
    if (pos_ >= text_.size()) fail(ErrorKind::SyntaxError, "empty expression");
    NodePtr root = parse_sum();
    skip_space();
    if (pos_ < text_.size()) fail(ErrorKind::SyntaxError, "unexpected trailing input");
    return root;
  }

 private:
  [[noreturn]] void fail(ErrorKind kind, const std::string& what) const {
    std::ostringstream msg;
    msg << what << " at position " << pos_ << " in \"" << text_ << "\"";
    throw Error(kind, msg.str());
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(ErrorKind::SyntaxError, std::string("expected '") + c + "'");
  }

  NodePtr parse_sum() {
    NodePtr lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = make_node(Op::Add, lhs, parse_product());
      } else if (accept('-')) {
        lhs = make_node(Op::Sub, lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_product() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_node(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_node(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_node(Op::Neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    while (accept('^')) {
      skip_space();
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const bool has_digits = pos_ > start;
      const bool fractional =
          pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E');
      if (!has_digits || fractional) {
        pos_ = start;
        fail(ErrorKind::NonIntegerExponent, "exponent must be a nonnegative integer literal");
      }
      const std::string digits = text_.substr(start, pos_ - start);
      if (digits.size() > 6) {
        pos_ = start;
        fail(ErrorKind::NonIntegerExponent, "exponent too large");
      }
      auto n = std::make_shared<Node>();
      n->op = Op::Pow;
      n->a = base;
      n->exponent = std::stoi(digits);
      base = n;
    }
    return base;
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      const std::size_t exp_start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == exp_start) pos_ = save;
    }
    const std::string token = text_.substr(start, pos_ - start);
    if (token == ".") {
      pos_ = start;
      fail(ErrorKind::SyntaxError, "malformed number");
    }
    return make_number(std::strtod(token.c_str(), nullptr));
  }

  static bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    return true;
  }

  NodePtr parse_identifier(const std::string& name, std::size_t start) {
    auto variable = [&](Variable v) {
      auto n = std::make_shared<Node>();
      n->op = Op::Var;
      n->var = v;
      return n;
    };
    auto unknown = [&]() {
      pos_ = start;
      fail(ErrorKind::UnknownIdentifier, "unknown identifier '" + name + "'");
    };
    if (name == "pi") return make_node(Op::Pi);
    if (name == "sin" || name == "cos" || name == "exp") {
      const Op op = name == "sin" ? Op::Sin : name == "cos" ? Op::Cos : Op::Exp;
      expect('(');
      NodePtr arg = parse_sum();
      expect(')');
      return make_node(op, arg);
    }
    if ((name[0] == 'x' || name[0] == 'u') && all_digits(name.substr(1))) {
      const long idx = std::stol(name.substr(1));
      const int limit = name[0] == 'x' ? ctx_.n : ctx_.m;
      if (idx < 1 || idx > limit) unknown();
      return variable(name[0] == 'x' ? state_var(static_cast<int>(idx - 1))
                                     : control_var(static_cast<int>(idx - 1)));
    }
    if (name[0] == 'w') {
      const auto underscore = name.find('_');
      if (underscore == std::string::npos) unknown();
      const std::string k_text = name.substr(1, underscore - 1);
      const std::string j_text = name.substr(underscore + 1);
      if (!all_digits(k_text) || !all_digits(j_text) || k_text.size() > 6 || j_text.size() > 6) {
        unknown();
      }
      const long k = std::stol(k_text);
      const long j = std::stol(j_text);
      if (k < 1 || j < 1 || j > ctx_.d) unknown();
      if (k > ctx_.stage) {
        pos_ = start;
        fail(ErrorKind::FutureNoiseReference,
             "'" + name + "' is not observed at stage " + std::to_string(ctx_.stage));
      }
      return variable(noise_var(static_cast<int>(k), static_cast<int>(j - 1)));
    }
    unknown();
    return nullptr;
  }

  NodePtr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail(ErrorKind::SyntaxError, "unexpected end of input");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      return parse_identifier(text_.substr(start, pos_ - start), start);
    }
    if (accept('(')) {
      NodePtr inner = parse_sum();
      expect(')');
      return inner;
    }
    fail(ErrorKind::SyntaxError, std::string("unexpected character '") + c + "'");
  }

  const std::string& text_;
  ParseContext ctx_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_node(const Node& n, std::string& out) {
  auto binary = [&](const char* sym) {
    out += '(';
    print_node(*n.a, out);
    out += sym;
    print_node(*n.b, out);
    out += ')';
  };
  auto unary_fn = [&](const char* name) {
    out += name;
    out += '(';
    print_node(*n.a, out);
    out += ')';
  };
  switch (n.op) {
    case Op::Num: out += format_number(n.value); break;
    case Op::Pi: out += "pi"; break;
    case Op::Var: out += describe_var(n.var); break;
    case Op::Add: binary(" + "); break;
    case Op::Sub: binary(" - "); break;
    case Op::Mul: binary(" * "); break;
    case Op::Div: binary(" / "); break;
    case Op::Neg:
      out += "(-";
      print_node(*n.a, out);
      out += ')';
      break;
    case Op::Pow:
      out += '(';
      print_node(*n.a, out);
      out += '^' + std::to_string(n.exponent) + ')';
      break;
    case Op::Sin: unary_fn("sin"); break;
    case Op::Cos: unary_fn("cos"); break;
    case Op::Exp: unary_fn("exp"); break;
  }
}

int compile_node(const Node& n, std::vector<Instr>& code) {
  Instr ins;
  ins.op = n.op;
  ins.value = n.value;
  ins.var = n.var;
  ins.exponent = n.exponent;
  if (n.a) ins.a = compile_node(*n.a, code);
  if (n.b) ins.b = compile_node(*n.b, code);
  code.push_back(ins);
  return static_cast<int>(code.size()) - 1;
}

// Degree in (x, u); -1 marks non-polynomial dependence.
int degree_of(const Node& n) {
  switch (n.op) {
    case Op::Num:
    case Op::Pi: return 0;
    case Op::Var: return n.var.kind == Variable::Kind::Noise ? 0 : 1;
    case Op::Add:
    case Op::Sub: {
      const int a = degree_of(*n.a);
      const int b = degree_of(*n.b);
      return (a < 0 || b < 0) ? -1 : std::max(a, b);
    }
    case Op::Mul: {
      const int a = degree_of(*n.a);
      const int b = degree_of(*n.b);
      return (a < 0 || b < 0) ? -1 : a + b;
    }
    case Op::Div: {
      const int a = degree_of(*n.a);
      const int b = degree_of(*n.b);
      return (a < 0 || b != 0) ? -1 : a;
    }
    case Op::Neg: return degree_of(*n.a);
    case Op::Pow: {
      const int a = degree_of(*n.a);
      return a < 0 ? -1 : a * n.exponent;
    }
    case Op::Sin:
    case Op::Cos:
    case Op::Exp: return degree_of(*n.a) == 0 ? 0 : -1;
  }
  return -1;
}

void collect_vars(const Node& n, std::vector<Variable>& out) {
  if (n.op == Op::Var) {
    for (const auto& v : out) {
      if (v == n.var) return;
    }
    out.push_back(n.var);
  }
  if (n.a) collect_vars(*n.a, out);
  if (n.b) collect_vars(*n.b, out);
}

double load(const Variable& v, const Env& env) {
  switch (v.kind) {
    case Variable::Kind::State:
      if (static_cast<std::size_t>(v.index) >= env.x.size()) {
        throw Error(ErrorKind::UnboundVariable, describe_var(v) + " is unbound");
      }
      return env.x[v.index];
    case Variable::Kind::Control:
      if (static_cast<std::size_t>(v.index) >= env.u.size()) {
        throw Error(ErrorKind::UnboundVariable, describe_var(v) + " is unbound");
      }
      return env.u[v.index];
    case Variable::Kind::Noise:
      if (env.noise == nullptr || v.noise_stage > env.noise->cols() ||
          v.index >= env.noise->rows()) {
        throw Error(ErrorKind::UnboundVariable, describe_var(v) + " is unbound");
      }
      return (*env.noise)(v.index, v.noise_stage - 1);
  }
  return 0.0;
}

double ipow(double base, int e) {
  double result = 1.0;
  double b = base;
  while (e > 0) {
    if (e & 1) result *= b;
    b *= b;
    e >>= 1;
  }
  return result;
}

void check_finite(double v) {
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::NumericalOverflow, "expression evaluated to a non-finite value");
  }
}

}  // namespace

Variable state_var(int i) { return Variable{Variable::Kind::State, i, 0}; }
Variable control_var(int i) { return Variable{Variable::Kind::Control, i, 0}; }
Variable noise_var(int k, int j) { return Variable{Variable::Kind::Noise, j, k}; }

std::vector<Variable> state_control_vars(int n, int m) {
  std::vector<Variable> out;
  out.reserve(n + m);
  for (int i = 0; i < n; ++i) out.push_back(state_var(i));
  for (int i = 0; i < m; ++i) out.push_back(control_var(i));
  return out;
}

Expr::Expr(std::shared_ptr<const detail::Node> root, std::string source)
    : source_(std::move(source)), root_(std::move(root)) {
  auto tape = std::make_shared<detail::Tape>();
  compile_node(*root_, tape->code);
  tape_ = std::move(tape);
}

Expr::Expr() : Expr(make_number(0.0), "0") {}

Expr Expr::constant(double value) { return Expr(make_number(value), format_number(value)); }

Expr Expr::parse(const std::string& text, const ParseContext& ctx) {
  Parser parser(text, ctx);
  return Expr(parser.run(), text);
}

std::string Expr::print() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

int Expr::xu_degree() const { return degree_of(*root_); }

bool Expr::is_zero_literal() const { return root_->op == Op::Num && root_->value == 0.0; }

std::vector<Variable> Expr::free_variables() const {
  std::vector<Variable> out;
  collect_vars(*root_, out);
  return out;
}

double Expr::evaluate(const Env& env) const {
  const auto& code = tape_->code;
  thread_local std::vector<double> slots;
  slots.resize(code.size());
  for (std::size_t i = 0; i < code.size(); ++i) {
    const Instr& in = code[i];
    double& r = slots[i];
    switch (in.op) {
      case Op::Num: r = in.value; break;
      case Op::Pi: r = std::numbers::pi; break;
      case Op::Var: r = load(in.var, env); break;
      case Op::Add: r = slots[in.a] + slots[in.b]; break;
      case Op::Sub: r = slots[in.a] - slots[in.b]; break;
      case Op::Mul: r = slots[in.a] * slots[in.b]; break;
      case Op::Div:
        if (slots[in.b] == 0.0) throw Error(ErrorKind::DivisionByZero, "division by zero");
        r = slots[in.a] / slots[in.b];
        break;
      case Op::Neg: r = -slots[in.a]; break;
      case Op::Pow: r = ipow(slots[in.a], in.exponent); break;
      case Op::Sin: r = std::sin(slots[in.a]); break;
      case Op::Cos: r = std::cos(slots[in.a]); break;
      case Op::Exp: r = std::exp(slots[in.a]); break;
    }
  }
  const double out = slots.back();
  check_finite(out);
  return out;
}

Partials Expr::evaluate_with_partials(const Env& env, std::span<const Variable> wrt) const {
  const auto& code = tape_->code;
  const std::size_t K = wrt.size();
  thread_local std::vector<double> val;
  thread_local std::vector<double> grad;
  val.resize(code.size());
  grad.assign(code.size() * K, 0.0);

  for (std::size_t i = 0; i < code.size(); ++i) {
    const Instr& in = code[i];
    double* g = grad.data() + i * K;
    const double* ga = in.a >= 0 ? grad.data() + in.a * K : nullptr;
    const double* gb = in.b >= 0 ? grad.data() + in.b * K : nullptr;
    const double a = in.a >= 0 ? val[in.a] : 0.0;
    const double b = in.b >= 0 ? val[in.b] : 0.0;
    switch (in.op) {
      case Op::Num: val[i] = in.value; break;
      case Op::Pi: val[i] = std::numbers::pi; break;
      case Op::Var:
        val[i] = load(in.var, env);
        for (std::size_t p = 0; p < K; ++p) {
          if (wrt[p] == in.var) g[p] = 1.0;
        }
        break;
      case Op::Add:
        val[i] = a + b;
        for (std::size_t p = 0; p < K; ++p) g[p] = ga[p] + gb[p];
        break;
      case Op::Sub:
        val[i] = a - b;
        for (std::size_t p = 0; p < K; ++p) g[p] = ga[p] - gb[p];
        break;
      case Op::Mul:
        val[i] = a * b;
        for (std::size_t p = 0; p < K; ++p) g[p] = ga[p] * b + a * gb[p];
        break;
      case Op::Div: {
        if (b == 0.0) throw Error(ErrorKind::DivisionByZero, "division by zero");
        const double q = a / b;
        val[i] = q;
        for (std::size_t p = 0; p < K; ++p) g[p] = (ga[p] - q * gb[p]) / b;
        break;
      }
      case Op::Neg:
        val[i] = -a;
        for (std::size_t p = 0; p < K; ++p) g[p] = -ga[p];
        break;
      case Op::Pow: {
        const int e = in.exponent;
        val[i] = ipow(a, e);
        const double slope = e == 0 ? 0.0 : e * ipow(a, e - 1);
        for (std::size_t p = 0; p < K; ++p) g[p] = slope * ga[p];
        break;
      }
      case Op::Sin: {
        val[i] = std::sin(a);
        const double c = std::cos(a);
        for (std::size_t p = 0; p < K; ++p) g[p] = c * ga[p];
        break;
      }
      case Op::Cos: {
        val[i] = std::cos(a);
        const double s = -std::sin(a);
        for (std::size_t p = 0; p < K; ++p) g[p] = s * ga[p];
        break;
      }
      case Op::Exp: {
        const double e = std::exp(a);
        val[i] = e;
        for (std::size_t p = 0; p < K; ++p) g[p] = e * ga[p];
        break;
      }
    }
  }
  Partials out;
  out.value = val.back();
  check_finite(out.value);
  out.gradient.resize(static_cast<Eigen::Index>(K));
  const double* g = grad.data() + (code.size() - 1) * K;
  for (std::size_t p = 0; p < K; ++p) {
    check_finite(g[p]);
    out.gradient[static_cast<Eigen::Index>(p)] = g[p];
  }
  return out;
}

}  // namespace drmp
