#include "drmp/document.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace drmp {

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::DocumentError, path + ": " + what);
}

std::string strip_kind(const Error& e) {
  const std::string text = e.what();
  const std::string prefix = std::string(to_string(e.kind())) + ": ";
  return text.rfind(prefix, 0) == 0 ? text.substr(prefix.size()) : text;
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void check_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) bad(join(path, it.key()), "unknown key");
  }
}

const Json& object(const Json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  return j;
}

const Json& field(const Json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) bad(join(path, key), "missing required field");
  return *it;
}

const Json& array(const Json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array");
  return j;
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "expected a finite number");
  return v;
}

// A number, or null for an unbounded side.
double bound(const Json& j, const std::string& path, double if_null) {
  if (j.is_null()) return if_null;
  return number(j, path);
}

long long integer(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<long long>(v);
  }
  bad(path, "expected an integer");
}

int positive_int(const Json& j, const std::string& path, bool allow_zero = false) {
  const long long v = integer(j, path);
  if (v < (allow_zero ? 0 : 1) || v > 1'000'000) {
    bad(path, allow_zero ? "expected a non-negative integer" : "expected a positive integer");
  }
  return static_cast<int>(v);
}

std::string string(const Json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "expected a string");
  return j.get<std::string>();
}

Eigen::VectorXd vector(const Json& j, const std::string& path, int expected) {
  array(j, path);
  if (expected >= 0 && static_cast<int>(j.size()) != expected) {
    bad(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
  }
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = number(j[i], index(path, i));
  return v;
}

std::vector<std::string> strings(const Json& j, const std::string& path, int expected) {
  array(j, path);
  if (expected >= 0 && static_cast<int>(j.size()) != expected) {
    bad(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(string(j[i], index(path, i)));
  return out;
}

StateBox parse_box(const Json& j, const std::string& path, int n) {
  object(j, path);
  check_keys(j, path, {"lo", "hi"});
  StateBox box;
  box.lo = vector(field(j, "lo", path), join(path, "lo"), n);
  box.hi = vector(field(j, "hi", path), join(path, "hi"), n);
  for (int i = 0; i < n; ++i) {
    if (!(box.lo[i] < box.hi[i])) bad(index(join(path, "lo"), i), "state box needs lo < hi");
  }
  return box;
}

ControlSet parse_control(const Json& j, const std::string& path, int m) {
  object(j, path);
  const std::string type = string(field(j, "type", path), join(path, "type"));
  if (type == "unconstrained") {
    check_keys(j, path, {"type"});
    return ControlSet::unconstrained(m);
  }
  if (type != "box") bad(join(path, "type"), "expected \"unconstrained\" or \"box\"");
  check_keys(j, path, {"type", "lo", "hi"});
  const Json& lo = array(field(j, "lo", path), join(path, "lo"));
  const Json& hi = array(field(j, "hi", path), join(path, "hi"));
  if (static_cast<int>(lo.size()) != m) bad(join(path, "lo"), "expected " + std::to_string(m) + " entries");
  if (static_cast<int>(hi.size()) != m) bad(join(path, "hi"), "expected " + std::to_string(m) + " entries");
  Eigen::VectorXd l(m), h(m);
  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    l[i] = bound(lo[i], index(join(path, "lo"), i), -inf);
    h[i] = bound(hi[i], index(join(path, "hi"), i), inf);
    if (!(l[i] <= h[i])) bad(index(join(path, "lo"), i), "control box needs lo <= hi");
  }
  return ControlSet::box(l, h);
}

NoiseSpec parse_noise(const Json& j, const std::string& path, int d) {
  object(j, path);
  NoiseSpec spec;
  const std::string type = string(field(j, "type", path), join(path, "type"));
  if (type == "discrete") {
    check_keys(j, path, {"type", "points", "weights", "labels"});
    spec.type = NoiseSpec::Type::Discrete;
    const std::string ppath = join(path, "points");
    const Json& pts = array(field(j, "points", path), ppath);
    spec.points.resize(d, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t s = 0; s < pts.size(); ++s) {
      // Scalar points are accepted for d = 1.
      if (d == 1 && pts[s].is_number()) {
        spec.points(0, s) = number(pts[s], index(ppath, s));
      } else {
        spec.points.col(s) = vector(pts[s], index(ppath, s), d);
      }
    }
    const std::string wpath = join(path, "weights");
    const Json& ws = array(field(j, "weights", path), wpath);
    for (std::size_t c = 0; c < ws.size(); ++c) {
      spec.weights.push_back(vector(ws[c], index(wpath, c), static_cast<int>(pts.size())));
    }
  } else if (type == "gaussian_moment3") {
    check_keys(j, path, {"type", "stds", "cap", "labels"});
    spec.type = NoiseSpec::Type::GaussianMoment3;
    const std::string spath = join(path, "stds");
    const Json& stds = array(field(j, "stds", path), spath);
    for (std::size_t c = 0; c < stds.size(); ++c) {
      if (d == 1 && stds[c].is_number()) {
        spec.stds.push_back(Eigen::VectorXd::Constant(1, number(stds[c], index(spath, c))));
      } else {
        spec.stds.push_back(vector(stds[c], index(spath, c), d));
      }
    }
    spec.cap = number(field(j, "cap", path), join(path, "cap"));
  } else {
    bad(join(path, "type"), "expected \"discrete\" or \"gaussian_moment3\"");
  }
  if (j.contains("labels")) spec.labels = strings(j["labels"], join(path, "labels"), -1);
  try {
    spec.build();
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + strip_kind(e));
  }
  return spec;
}

SolverSpec parse_solver(const Json& j, const std::string& path) {
  object(j, path);
  check_keys(j, path, {"method", "degree", "points_per_axis", "tol", "seed", "multistart", "leaf_budget"});
  SolverSpec s;
  if (j.contains("method")) {
    s.method = string(j["method"], join(path, "method"));
    if (s.method != "dp" && s.method != "mp" && s.method != "both") {
      bad(join(path, "method"), "expected \"dp\", \"mp\" or \"both\"");
    }
  }
  if (j.contains("degree")) s.degree = positive_int(j["degree"], join(path, "degree"));
  if (j.contains("points_per_axis")) {
    s.points_per_axis = positive_int(j["points_per_axis"], join(path, "points_per_axis"), true);
  }
  if (j.contains("tol")) {
    s.tol = number(j["tol"], join(path, "tol"));
    if (!(s.tol > 0)) bad(join(path, "tol"), "expected a positive tolerance");
  }
  if (j.contains("seed")) s.seed = static_cast<std::uint64_t>(integer(j["seed"], join(path, "seed")));
  if (j.contains("multistart")) s.multistart = positive_int(j["multistart"], join(path, "multistart"));
  if (j.contains("leaf_budget")) {
    const long long b = integer(j["leaf_budget"], join(path, "leaf_budget"));
    if (b < 1) bad(join(path, "leaf_budget"), "expected a positive integer");
    s.leaf_budget = static_cast<std::size_t>(b);
  }
  return s;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json bound_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) out.push_back(v[i]);
    else out.push_back(nullptr);
  }
  return out;
}

Json box_json(const StateBox& box) {
  Json out = Json::object();
  out["lo"] = vector_json(box.lo);
  out["hi"] = vector_json(box.hi);
  return out;
}

Json noise_json(const NoiseSpec& spec) {
  Json out = Json::object();
  if (spec.type == NoiseSpec::Type::Discrete) {
    out["type"] = "discrete";
    Json pts = Json::array();
    for (Eigen::Index s = 0; s < spec.points.cols(); ++s) pts.push_back(vector_json(spec.points.col(s)));
    out["points"] = pts;
    Json ws = Json::array();
    for (const auto& w : spec.weights) ws.push_back(vector_json(w));
    out["weights"] = ws;
  } else {
    out["type"] = "gaussian_moment3";
    Json stds = Json::array();
    for (const auto& s : spec.stds) stds.push_back(vector_json(s));
    out["stds"] = stds;
    out["cap"] = spec.cap;
  }
  if (!spec.labels.empty()) out["labels"] = spec.labels;
  return out;
}

Json solver_json(const SolverSpec& s) {
  Json out = Json::object();
  out["method"] = s.method;
  out["degree"] = s.degree;
  out["points_per_axis"] = s.points_per_axis;
  out["tol"] = s.tol;
  out["seed"] = s.seed;
  out["multistart"] = s.multistart;
  out["leaf_budget"] = s.leaf_budget;
  return out;
}

Json parse_json_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t stop = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw Error(ErrorKind::DocumentError, "line " + std::to_string(line) + ", column " +
                                              std::to_string(column) + ": malformed document");
  }
}

}  // namespace

StageAmbiguity NoiseSpec::build() const {
  if (type == Type::Discrete) return StageAmbiguity::discrete(points, weights, labels);
  return StageAmbiguity::moment_matched_gaussian(stds, cap, labels);
}

SolveOptions SolverSpec::options() const {
  SolveOptions o;
  o.degree = degree;
  o.points_per_axis = points_per_axis;
  o.multistart = multistart;
  o.certificate.stationarity_tol = tol;
  o.certificate.seed = seed;
  return o;
}

Problem build_problem(const ProblemDocument& doc) {
  Problem p;
  p.horizon = doc.horizon;
  p.n = doc.state_dim;
  p.m = doc.control_dim;
  p.d = doc.noise_dim;
  p.x0 = doc.x0;
  auto expr = [](const std::string& text, const ParseContext& ctx, const std::string& path) {
    try {
      return Expr::parse(text, ctx);
    } catch (const Error& e) {
      throw Error(e.kind(), path + ": " + strip_kind(e));
    }
  };
  for (int k = 0; k < doc.horizon; ++k) {
    const StageSpec& s = doc.stages[k];
    const std::string path = index("stages", k);
    const ParseContext ctx{p.n, p.m, p.d, k};
    StageModel sm;
    for (int i = 0; i < p.n; ++i) sm.drift.push_back(expr(s.b[i], ctx, index(join(path, "b"), i)));
    for (int l = 0; l < p.d; ++l) {
      std::vector<Expr> channel;
      for (int i = 0; i < p.n; ++i) {
        channel.push_back(expr(s.sigma[l][i], ctx, index(index(join(path, "sigma"), l), i)));
      }
      sm.diffusion.push_back(std::move(channel));
    }
    sm.running = expr(s.f, ctx, join(path, "f"));
    sm.control = s.control;
    sm.state_box = s.state_box;
    p.stages.push_back(std::move(sm));
    p.noise.push_back(s.noise.build());
  }
  p.terminal = expr(doc.terminal, ParseContext{p.n, 0, p.d, 0}, "terminal");
  p.terminal_box = doc.terminal_box ? *doc.terminal_box : doc.stages.back().state_box;
  validate_problem(p);
  return p;
}

ProblemDocument parse_document(const std::string& text) {
  const Json j = parse_json_text(text);
  object(j, "document");
  check_keys(j, "", {"horizon", "state_dim", "control_dim", "noise_dim", "x0", "terminal", "stages",
                     "terminal_box", "solver"});
  ProblemDocument doc;
  doc.horizon = positive_int(field(j, "horizon", ""), "horizon");
  doc.state_dim = positive_int(field(j, "state_dim", ""), "state_dim");
  doc.control_dim = positive_int(field(j, "control_dim", ""), "control_dim", true);
  doc.noise_dim = positive_int(field(j, "noise_dim", ""), "noise_dim");
  const int n = doc.state_dim, m = doc.control_dim, d = doc.noise_dim;
  doc.x0 = vector(field(j, "x0", ""), "x0", n);
  doc.terminal = string(field(j, "terminal", ""), "terminal");
  const Json& stages = array(field(j, "stages", ""), "stages");
  if (static_cast<int>(stages.size()) != doc.horizon) {
    bad("stages", "expected " + std::to_string(doc.horizon) + " stages, got " +
                      std::to_string(stages.size()));
  }
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const std::string path = index("stages", k);
    const Json& sj = object(stages[k], path);
    check_keys(sj, path, {"b", "sigma", "f", "control", "noise", "state_box"});
    StageSpec s;
    s.b = strings(field(sj, "b", path), join(path, "b"), n);
    const std::string sigma_path = join(path, "sigma");
    const Json& sigma = array(field(sj, "sigma", path), sigma_path);
    if (static_cast<int>(sigma.size()) != d) {
      bad(sigma_path, "expected " + std::to_string(d) + " noise channels, got " + std::to_string(sigma.size()));
    }
    for (std::size_t l = 0; l < sigma.size(); ++l) s.sigma.push_back(strings(sigma[l], index(sigma_path, l), n));
    if (sj.contains("f")) s.f = string(sj["f"], join(path, "f"));
    s.control = parse_control(field(sj, "control", path), join(path, "control"), m);
    s.noise = parse_noise(field(sj, "noise", path), join(path, "noise"), d);
    s.state_box = parse_box(field(sj, "state_box", path), join(path, "state_box"), n);
    doc.stages.push_back(std::move(s));
  }
  if (j.contains("terminal_box")) doc.terminal_box = parse_box(j["terminal_box"], "terminal_box", n);
  if (j.contains("solver")) doc.solver = parse_solver(j["solver"], "solver");
  doc.problem = build_problem(doc);
  return doc;
}

ProblemDocument load_document(const std::string& path) { return parse_document(read_file(path)); }

Json document_to_json(const ProblemDocument& doc) {
  Json out = Json::object();
  out["horizon"] = doc.horizon;
  out["state_dim"] = doc.state_dim;
  out["control_dim"] = doc.control_dim;
  out["noise_dim"] = doc.noise_dim;
  out["x0"] = vector_json(doc.x0);
  out["terminal"] = doc.terminal;
  Json stages = Json::array();
  for (const auto& s : doc.stages) {
    Json sj = Json::object();
    sj["b"] = s.b;
    sj["sigma"] = s.sigma;
    sj["f"] = s.f;
    Json control = Json::object();
    if (s.control.kind == ControlSet::Kind::Unconstrained) {
      control["type"] = "unconstrained";
    } else {
      control["type"] = "box";
      control["lo"] = bound_json(s.control.lo);
      control["hi"] = bound_json(s.control.hi);
    }
    sj["control"] = control;
    sj["noise"] = noise_json(s.noise);
    sj["state_box"] = box_json(s.state_box);
    stages.push_back(sj);
  }
  out["stages"] = stages;
  if (doc.terminal_box) out["terminal_box"] = box_json(*doc.terminal_box);
  if (doc.solver) out["solver"] = solver_json(*doc.solver);
  return out;
}

std::string serialize_document(const ProblemDocument& doc) {
  return document_to_json(doc).dump(2) + "\n";
}

Policy parse_policy(const std::string& text, const Problem& problem, const ScenarioTree& tree) {
  const Json j = parse_json_text(text);
  object(j, "policy");
  check_keys(j, "", {"controls"});
  const Json& controls = array(field(j, "controls", ""), "controls");
  const int N = problem.horizon;
  if (static_cast<int>(controls.size()) != N) {
    throw Error(ErrorKind::NodeCountMismatch, "controls: expected " + std::to_string(N) +
                                                  " stages, got " + std::to_string(controls.size()));
  }
  Policy policy(tree, N);
  for (int k = 0; k < N; ++k) {
    const std::string path = index("controls", k);
    const Json& stage = array(controls[k], path);
    if (stage.size() != tree.num_nodes(k)) {
      throw Error(ErrorKind::NodeCountMismatch,
                  path + ": expected " + std::to_string(tree.num_nodes(k)) + " nodes, got " +
                      std::to_string(stage.size()));
    }
    for (std::size_t node = 0; node < stage.size(); ++node) {
      const std::string npath = index(path, node);
      if (problem.m == 1 && stage[node].is_number()) {
        policy(k, node) = Eigen::VectorXd::Constant(1, number(stage[node], npath));
      } else {
        policy(k, node) = vector(stage[node], npath, problem.m);
      }
    }
  }
  return policy;
}

Policy load_policy(const std::string& path, const Problem& problem, const ScenarioTree& tree) {
  return parse_policy(read_file(path), problem, tree);
}

Json policy_to_json(const Policy& policy, int m) {
  Json controls = Json::array();
  for (int k = 0; k < policy.num_stages(); ++k) {
    Json stage = Json::array();
    for (const auto& u : policy.stage(k)) {
      if (m == 1) stage.push_back(u[0]);
      else stage.push_back(vector_json(u));
    }
    controls.push_back(stage);
  }
  Json out = Json::object();
  out["controls"] = controls;
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::DocumentError, path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::DocumentError, path + ": cannot write file");
  out << text;
}

std::optional<std::string> rational_string(double x, double tol, long long max_denominator) {
  if (!std::isfinite(x)) return std::nullopt;
  const bool negative = x < 0;
  const double a = std::abs(x);
  // Convergents of the continued fraction of |x|.
  long double h_prev = 1, h = std::floor(static_cast<long double>(a));
  long double k_prev = 0, k = 1;
  long double rest = static_cast<long double>(a) - h;
  for (int iter = 0; iter < 64; ++iter) {
    if (std::abs(static_cast<double>(h / k) - a) <= tol) {
      std::ostringstream out;
      out << (negative && h != 0 ? "-" : "") << static_cast<long long>(h);
      if (k != 1) out << "/" << static_cast<long long>(k);
      return out.str();
    }
    if (rest < 1e-18L) break;
    const long double inv = 1.0L / rest;
    const long double digit = std::floor(inv);
    rest = inv - digit;
    const long double h_next = digit * h + h_prev;
    const long double k_next = digit * k + k_prev;
    if (k_next > static_cast<long double>(max_denominator)) break;
    h_prev = h;
    k_prev = k;
    h = h_next;
    k = k_next;
  }
  return std::nullopt;
}

Json value_json(double value) {
  Json out = Json::object();
  out["value"] = value;
  if (auto r = rational_string(value)) out["rational"] = *r;
  return out;
}

Json selection_table(const Problem& problem, const ScenarioTree& tree, const Selection& selection,
                     const std::vector<TieEntry>& ties) {
  const NodeField<double> prob = node_probabilities(tree, selection);
  std::map<std::pair<int, std::size_t>, const TieEntry*> tie_at;
  for (const auto& t : ties) tie_at[{t.stage, t.node}] = &t;
  Json table = Json::array();
  for (int k = 0; k < problem.horizon; ++k) {
    const auto& amb = tree.stage(k);
    std::vector<std::size_t> selected(amb.num_candidates(), 0);
    std::map<int, std::size_t> multiplicity;
    std::set<int> tied_candidates;
    std::size_t positive = 0, tied_nodes = 0;
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      if (prob(k, node) <= kPositiveNodeProbability) continue;
      ++positive;
      auto it = tie_at.find({k, node});
      if (it != tie_at.end()) {
        ++tied_nodes;
        ++multiplicity[static_cast<int>(it->second->candidates.size())];
        for (int c : it->second->candidates) tied_candidates.insert(c);
      } else {
        ++selected[selection(k, node)];
      }
    }
    Json row = Json::object();
    row["stage"] = k;
    row["noise"] = "W" + std::to_string(k + 1);
    row["nodes"] = tree.num_nodes(k);
    row["positive_nodes"] = positive;
    Json sel = Json::object();
    for (int c = 0; c < amb.num_candidates(); ++c) sel[amb.label(c)] = selected[c];
    row["selected"] = sel;
    Json tj = Json::object();
    tj["nodes"] = tied_nodes;
    Json mult = Json::object();
    for (const auto& [size, count] : multiplicity) mult[std::to_string(size)] = count;
    tj["multiplicity"] = mult;
    Json labels = Json::array();
    for (int c : tied_candidates) labels.push_back(amb.label(c));
    tj["candidates"] = labels;
    row["ties"] = tj;
    // "tie" when every positive node is tied, otherwise the canonical
    // label when all positive nodes share it.
    int canonical = -1;
    for (std::size_t node = 0; node < tree.num_nodes(k); ++node) {
      if (prob(k, node) <= kPositiveNodeProbability) continue;
      const int c = selection(k, node);
      canonical = canonical == -1 || canonical == c ? c : -2;
    }
    row["canonical"] = canonical >= 0 ? Json(amb.label(canonical)) : Json(nullptr);
    std::string verdict;
    if (tied_nodes == positive && positive > 0) verdict = "tie";
    else verdict = canonical >= 0 ? amb.label(canonical) : "mixed";
    row["summary"] = verdict;
    table.push_back(row);
  }
  return table;
}

Json stationarity_json(const StationarityReport& r) {
  Json out = Json::object();
  out["tol"] = r.tol;
  out["max_residual"] = r.max_residual;
  out["positive_nodes"] = r.positive_nodes;
  out["null_nodes"] = r.null_nodes;
  out["passed"] = r.passed;
  Json witnesses = Json::array();
  for (const auto& w : r.witnesses) {
    Json wj = Json::object();
    wj["stage"] = w.stage;
    wj["node"] = w.node;
    wj["path"] = w.path;
    wj["residual"] = w.residual;
    wj["control"] = vector_json(w.control);
    wj["gradient"] = vector_json(w.gradient);
    witnesses.push_back(wj);
  }
  out["witnesses"] = witnesses;
  return out;
}

Json directional_json(const DirectionalReport& r) {
  Json out = Json::object();
  Json records = Json::array();
  for (const auto& rec : r.records) {
    Json rj = Json::object();
    rj["eps"] = rec.eps;
    rj["quotient"] = rec.quotient;
    rj["error"] = rec.error;
    records.push_back(rj);
  }
  out["records"] = records;
  out["orders"] = r.orders;
  out["sup_value"] = r.sup_value;
  out["canonical_value"] = r.canonical_value;
  out["min_family_value"] = r.min_family_value;
  out["family_size"] = r.family_size;
  out["tol"] = r.tol;
  out["variational_inequality"] = r.variational_inequality;
  return out;
}

Json certificate_json(const Certificate& cert, double adjoint_tol) {
  Json out = Json::object();
  out["passed"] = cert.passed();
  out["stationarity"] = stationarity_json(cert.stationarity);
  Json adj = Json::object();
  adj["discrepancy"] = cert.adjoint_discrepancy;
  adj["tol"] = adjoint_tol;
  adj["agrees"] = cert.adjoint_agrees;
  out["adjoint"] = adj;
  Json dir = Json::array();
  for (const auto& d : cert.directional) dir.push_back(directional_json(d));
  out["directional"] = dir;
  if (cert.convexity) {
    Json cv = Json::object();
    cv["satisfied"] = cert.convexity->satisfied;
    cv["samples"] = cert.convexity->samples;
    if (!cert.convexity->satisfied) {
      cv["where"] = cert.convexity->where;
      cv["stage"] = cert.convexity->stage;
      cv["node"] = cert.convexity->node;
      cv["gap"] = cert.convexity->gap;
    }
    out["convexity"] = cv;
  }
  return out;
}

Json feedback_json(const Solution& solution) {
  Json stages = Json::array();
  for (int k = 0; k < static_cast<int>(solution.stages.size()); ++k) {
    const StageFunctions& fns = solution.stages[k];
    Json nodes = Json::array();
    for (std::size_t node = 0; node < fns.feedback.size(); ++node) {
      Json components = Json::array();
      for (Eigen::Index i = 0; i < fns.feedback[node].cols(); ++i) {
        const auto mono = fns.basis.to_monomials(fns.feedback[node].col(i));
        double scale = 0.0;
        for (const auto& [e, c] : mono) scale = std::max(scale, std::abs(c));
        Json terms = Json::array();
        for (const auto& [e, c] : mono) {
          if (std::abs(c) <= 1e-12 * std::max(1.0, scale)) continue;
          Json t = Json::object();
          t["exponents"] = e;
          t["coefficient"] = c;
          terms.push_back(t);
        }
        components.push_back(terms);
      }
      nodes.push_back(components);
    }
    Json sj = Json::object();
    sj["stage"] = k;
    sj["value_fit_residual"] = fns.value_residual;
    sj["feedback_fit_residual"] = fns.feedback_residual;
    sj["nodes"] = nodes;
    stages.push_back(sj);
  }
  return stages;
}

Json solution_json(const Problem& problem, const ScenarioTree& tree, const Solution& solution,
                   double adjoint_tol) {
  Json out = Json::object();
  out["method"] = solution.method;
  out["J"] = value_json(solution.value);
  Json u0 = Json::array();
  for (Eigen::Index i = 0; i < solution.policy(0, 0).size(); ++i) u0.push_back(value_json(solution.policy(0, 0)[i]));
  out["u0"] = u0;
  out["selection"] = selection_table(problem, tree, solution.selection, solution.ties);
  if (solution.certified) out["certificate"] = certificate_json(solution.certificate, adjoint_tol);
  Json diag = Json::object();
  diag["linear_quadratic"] = solution.diagnostics.linear_quadratic;
  diag["inner_solves"] = solution.diagnostics.inner_solves;
  diag["iterations"] = solution.diagnostics.iterations;
  diag["multistart_disagreements"] = solution.diagnostics.multistart_disagreements;
  diag["max_fit_residual"] = solution.diagnostics.max_fit_residual;
  out["diagnostics"] = diag;
  out["feedback"] = feedback_json(solution);
  return out;
}

}  // namespace drmp
