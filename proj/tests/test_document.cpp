#include <doctest.h>

#include <cmath>
#include <numbers>

#include "drmp/document.hpp"
#include "support.hpp"

using namespace drmp;
using namespace drmp::testing;

namespace {

Json example_json(int which) {
  return Json::parse(read_file(problems_dir() + "/ex" + std::to_string(which) + ".json"));
}

std::string document_error(const Json& j) {
  try {
    parse_document(j.dump(2));
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected the document to be rejected");
  return {};
}

bool contains(const std::string& text, const std::string& piece) { return text.find(piece) != std::string::npos; }

}  // namespace

TEST_CASE("worked example documents load") {
  for (int which = 1; which <= 3; ++which) {
    const ProblemDocument doc = load_document(problems_dir() + "/ex" + std::to_string(which) + ".json");
    CHECK(doc.horizon == 4);
    CHECK(doc.problem.stages.size() == 4);
    REQUIRE(doc.solver.has_value());
    CHECK(doc.solver->method == "both");
  }
  const auto ex1 = load_document(problems_dir() + "/ex1.json");
  CHECK(ex1.problem.noise[0].size() == 9);
  CHECK(ex1.problem.noise[0].label(0) == "F(sqrt2,1)");
  CHECK(ex1.problem.noise[0].point(8)[0] == doctest::Approx(std::sqrt(3.0)));
  // Example 1 built in code and from the document carry identical weights.
  const Problem in_code = example1_in_code();
  for (int c = 0; c < 2; ++c) CHECK(in_code.noise[3].weights(c) == ex1.problem.noise[3].weights(c));
}

TEST_CASE("serialization round trip") {
  for (int which = 1; which <= 3; ++which) {
    const ProblemDocument doc = load_document(problems_dir() + "/ex" + std::to_string(which) + ".json");
    const std::string once = serialize_document(doc);
    const ProblemDocument again = parse_document(once);
    CHECK(serialize_document(again) == once);
    CHECK(again.problem.noise[2].weights(1) == doc.problem.noise[2].weights(1));
  }
  // Infinite bounds survive as null.
  Json j = example_json(3);
  j["stages"][0]["control"] = Json::parse(R"({"type": "box", "lo": [0.0], "hi": [null]})");
  const ProblemDocument doc = parse_document(j.dump());
  CHECK(std::isinf(doc.problem.stages[0].control.hi[0]));
  const Json back = document_to_json(doc);
  CHECK(back["stages"][0]["control"]["hi"][0].is_null());
  CHECK(serialize_document(parse_document(serialize_document(doc))) == serialize_document(doc));
}

TEST_CASE("field paths in document errors") {
  Json j = example_json(1);
  j.erase("terminal");
  const std::string missing = document_error(j);
  CHECK(contains(missing, "DocumentError"));
  CHECK(contains(missing, "terminal: missing required field"));

  j = example_json(3);
  j["stages"][2]["noise"]["weights"][1][0] = -0.1;
  CHECK(contains(document_error(j), "stages[2].noise"));
  CHECK(contains(document_error(j), "NegativeWeight"));

  j = example_json(3);
  j["stages"][1]["b"][0] = "x1 + w2_1";
  const std::string future = document_error(j);
  CHECK(contains(future, "FutureNoiseReference"));
  CHECK(contains(future, "stages[1].b[0]"));

  j = example_json(3);
  j["stages"][0]["colour"] = "blue";
  CHECK(contains(document_error(j), "stages[0].colour: unknown key"));

  j = example_json(3);
  j["stages"].erase(3);
  CHECK(contains(document_error(j), "stages: expected 4 stages"));

  j = example_json(3);
  j["x0"] = Json::array({1.0, 2.0});
  CHECK(contains(document_error(j), "x0"));

  j = example_json(1);
  j["stages"][0]["noise"]["cap"] = 1.0;
  CHECK(contains(document_error(j), "CapTooSmall"));

  j = example_json(1);
  j["solver"]["method"] = "simplex";
  CHECK(contains(document_error(j), "solver.method"));
}

TEST_CASE("syntax errors report line and column") {
  const std::string text = "{\n  \"horizon\": 4,\n  \"state_dim\" 1\n}\n";
  try {
    parse_document(text);
    FAIL("expected a syntax error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DocumentError);
    CHECK(contains(e.what(), "line 3"));
    CHECK(contains(e.what(), "malformed document"));
  }
}

TEST_CASE("policy files") {
  const Problem p = load_example(3);
  const ScenarioTree t = build_tree(p);
  const Policy u = example_optimal_policy(3, p, t);
  const Json j = policy_to_json(u, 1);
  CHECK(j["controls"].size() == 4);
  CHECK(j["controls"][0][0].is_number());
  const Policy back = parse_policy(j.dump(), p, t);
  for (int k = 0; k < 4; ++k) {
    for (std::size_t node = 0; node < t.num_nodes(k); ++node) CHECK(back(k, node) == u(k, node));
  }
  // Vector form is accepted too.
  CHECK(parse_policy(R"({"controls": [[[1]], [[0],[0],[0]], [0,0,0,0,0,0,0,0,0],
        [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]]})", p, t)(0, 0)[0] == 1.0);

  Json short_stage = j;
  short_stage["controls"][1].erase(0);
  try {
    parse_policy(short_stage.dump(), p, t);
    FAIL("expected NodeCountMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NodeCountMismatch);
    CHECK(contains(e.what(), "controls[1]"));
  }
  Json short_policy = j;
  short_policy["controls"].erase(3);
  CHECK_THROWS_AS(parse_policy(short_policy.dump(), p, t), Error);
}

TEST_CASE("rational rendering") {
  CHECK(rational_string(729.0 / 1600.0) == "729/1600");
  CHECK(rational_string(64.0 / 121.0) == "64/121");
  CHECK(rational_string(8.0 / 45.0) == "8/45");
  CHECK(rational_string(-0.25) == "-1/4");
  CHECK(rational_string(3.0) == "3");
  CHECK(rational_string(0.0) == "0");
  CHECK_FALSE(rational_string(std::sqrt(2.0)).has_value());
  CHECK_FALSE(rational_string(std::numbers::pi).has_value());
  const Json v = value_json(8.0 / 45.0);
  CHECK(v["rational"] == "8/45");
}
