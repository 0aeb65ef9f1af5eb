#include <random>

#include "doctest.h"
#include "oobn/corpus.hpp"
#include "oobn/dsl.hpp"
#include "oobn/model.hpp"

using namespace oobn;

namespace {

void check_round_trip(const std::string& text) {
  dsl::ParseResult a = dsl::parse_model(text);
  REQUIRE(a.ok());
  std::string rendered = dsl::render_model(*a.model);
  dsl::ParseResult b = dsl::parse_model(rendered);
  REQUIRE(b.ok());
  CHECK(*a.model == *b.model);
  CHECK(dsl::render_model(*b.model) == rendered);
}

}  // namespace

TEST_CASE("corpus models survive render and reparse") {
  for (const auto& e : corpus::entries()) {
    CAPTURE(e.name);
    check_round_trip(e.text);
  }
}

TEST_CASE("generated models survive render and reparse") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    check_round_trip(corpus::random_model_text(seed));
    check_round_trip(corpus::random_class_text(seed));
  }
  for (int k : {1, 3}) check_round_trip(corpus::generate_family_text(k, 11));
}

TEST_CASE("probabilities print in shortest round-trip form") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    double p = u(rng);
    CHECK(std::stod(dsl::format_probability(p)) == p);
  }
  CHECK(dsl::format_probability(0.25) == "0.25");
  CHECK(dsl::format_probability(1.0) == "1");
}

TEST_CASE("names with odd characters are quoted when rendered") {
  CHECK(dsl::render_name("Max-Speed") == "Max-Speed");
  CHECK(dsl::render_name("$80K+") == "$80K+");
  std::string q = dsl::render_name("two words");
  CHECK(q.front() == '"');
  CHECK(dsl::render_name("ENGINE[icon]") != "ENGINE[icon]");
}

TEST_CASE("parse errors carry positions") {
  dsl::ParseResult r = dsl::parse_model("type A = {x, y};\nclass K {\n  output X : A {\n    () 0.5, 0.5;\n  }\n}\n");
  REQUIRE_FALSE(r.ok());
  REQUIRE_FALSE(r.diagnostics.empty());
  CHECK(r.diagnostics[0].code == codes::kParse);
  CHECK(r.diagnostics[0].line == 4);
  CHECK(r.diagnostics[0].column > 0);
  CHECK(r.diagnostics[0].format("m.oobn").rfind("m.oobn:4:", 0) == 0);
}

TEST_CASE("truncated and mangled corpus text never throws from the parser") {
  const std::string& text = corpus::accident_text();
  std::mt19937_64 rng(17);
  for (int i = 0; i < 300; ++i) {
    std::string t = text.substr(0, rng() % text.size());
    for (int j = 0; j < 3; ++j) {
      if (!t.empty()) t[rng() % t.size()] = static_cast<char>(rng() % 256);
    }
    dsl::ParseResult r;
    CHECK_NOTHROW(r = dsl::parse_model(t));
    if (!r.ok()) CHECK_FALSE(r.diagnostics.empty());
  }
}

TEST_CASE("inherited declarations keep parent annotations") {
  ModelRef m = compile_text(corpus::entry("accident_full").text);
  ClassRef sports = m->find_class("SPORTS-CAR");
  const ValueAttr* engine = sports->attr("Engine");
  REQUIRE(engine);
  CHECK(engine->cls->name == "FUEL-INJECTED-ENGINE");
  REQUIRE(engine->bindings.size() == 2);
  CHECK(engine->binding("Maintenance"));
  CHECK(engine->binding("Mileage"));
  // Untouched attributes are inherited as declared.
  CHECK(sports->attr("Max-Speed")->cpt == m->find_class("CAR")->attr("Max-Speed")->cpt);
  CHECK(sports->attr("Original-Value")->cpt != m->find_class("CAR")->attr("Original-Value")->cpt);
  CHECK(sports->attr("Acceleration")->output);
}
