#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "oobn/corpus.hpp"
#include "oobn/inference.hpp"
#include "support.hpp"

using namespace oobn;

namespace {

FlatBN random_bn(std::uint64_t seed) {
  return build_flat_bn(instantiate(*compile_text(corpus::random_model_text(seed))));
}

// Each variable's cliques form a connected subtree.
bool running_intersection(const CliqueTree& t) {
  std::set<int> vars;
  for (const auto& c : t.cliques) vars.insert(c.begin(), c.end());
  for (int v : vars) {
    std::vector<int> holders;
    for (std::size_t c = 0; c < t.cliques.size(); ++c) {
      if (std::count(t.cliques[c].begin(), t.cliques[c].end(), v)) holders.push_back(static_cast<int>(c));
    }
    std::set<int> seen = {holders[0]};
    std::vector<int> stack = {holders[0]};
    while (!stack.empty()) {
      int c = stack.back();
      stack.pop_back();
      for (int e : t.incident[c]) {
        int o = t.edges[e].first == c ? t.edges[e].second : t.edges[e].first;
        if (seen.count(o)) continue;
        if (std::count(t.cliques[o].begin(), t.cliques[o].end(), v)) {
          seen.insert(o);
          stack.push_back(o);
        }
      }
    }
    if (seen.size() != holders.size()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("factor product and marginalization by hand") {
  Factor a({0, 1}, {2, 2});
  a.table = {0.1, 0.2, 0.3, 0.4};
  Factor b({1, 2}, {2, 3});
  b.table = {1, 2, 3, 4, 5, 6};
  CostCounter cost;
  Factor p = multiply(a, b, &cost);
  CHECK(p.cells() == 12);
  CHECK(cost.cells == 12);
  // p(x0, x1, x2) = a(x0, x1) b(x1, x2)
  CHECK(p.at({1, 1, 2}) == doctest::Approx(0.4 * 6));
  CHECK(p.at({0, 1, 0}) == doctest::Approx(0.2 * 4));
  Factor m = marginalize(p, {2, 0});
  CHECK(m.vars == std::vector<int>{2, 0});
  CHECK(m.at({0, 1}) == doctest::Approx(0.3 * 1 + 0.4 * 4));
  Factor r = reorder(p, {2, 1, 0});
  CHECK(r.at({2, 1, 1}) == p.at({1, 1, 2}));
  restrict_to(p, 1, 0);
  CHECK(p.at({1, 1, 2}) == 0.0);
  Factor z({0}, {2}, 0.0);
  CHECK_THROWS_AS(z.normalize(), Error);
}

TEST_CASE("eliminate matches brute-force product and sum") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Factor> fs;
    for (int i = 0; i < 4; ++i) {
      int x = static_cast<int>(rng() % 5), y = static_cast<int>((x + 1 + rng() % 4) % 5);
      Factor f({x, y}, {2, 2});
      for (double& c : f.table) c = u(rng);
      fs.push_back(f);
    }
    Factor full;
    for (const auto& f : fs) full = multiply(full, f);
    std::vector<int> keep = {4, 1};
    std::vector<int> present;
    for (int k : keep) {
      if (full.has(k)) present.push_back(k);
    }
    Factor got = eliminate(fs, keep, {2, 2});
    Factor want = marginalize(full, present);
    for (int k : keep) {
      if (!want.has(k)) want = multiply(want, Factor({k}, {2}));
    }
    want = reorder(want, keep);
    CHECK(test::max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("clique trees satisfy running intersection and cover every family") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    FlatBN bn = random_bn(seed);
    JunctionTree jt(bn);
    const CliqueTree& t = jt.structure();
    CHECK(t.edges.size() + 1 == t.cliques.size());
    CHECK(running_intersection(t));
    for (std::size_t v = 0; v < bn.vars.size(); ++v) {
      std::vector<int> fam = bn.vars[v].parents;
      fam.push_back(static_cast<int>(v));
      CHECK(t.covering(fam) >= 0);
    }
  }
}

TEST_CASE("junction tree posteriors equal enumeration and separators agree") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    FlatBN bn = random_bn(seed);
    JunctionTree jt(bn);
    std::mt19937_64 rng(seed + 1000);
    Assignment ev;
    for (std::size_t v = 0; v < bn.vars.size(); ++v) {
      if (rng() % 5 == 0) ev.emplace_back(static_cast<int>(v), static_cast<int>(rng() % 2));
    }
    double pe = 0;
    try {
      pe = enumerate_joint(bn, {}, {}).table[0];
      enumerate_joint(bn, ev, {});
    } catch (const Error& e) {
      CHECK(e.code() == codes::kZeroProb);
      continue;
    }
    for (auto [v, x] : ev) jt.set_evidence(v, x);
    jt.calibrate();
    CHECK(jt.max_separator_discrepancy() < 1e-9);
    for (std::size_t v = 0; v < bn.vars.size(); ++v) {
      REQUIRE(test::max_abs_diff(jt.marginal({int(v)}), enumerate_joint(bn, ev, {int(v)})) < 1e-9);
    }
    CHECK(pe == doctest::Approx(1.0));
    // P(e) as the product of sequential conditionals.
    double chain = 1.0;
    Assignment prefix;
    for (auto [v, x] : ev) {
      chain *= enumerate_joint(bn, prefix, {v}).table[x];
      prefix.emplace_back(v, x);
    }
    CHECK(jt.evidence_probability() == doctest::Approx(chain).epsilon(1e-9));
  }
}

TEST_CASE("junction tree state errors") {
  FlatBN bn = build_flat_bn(instantiate(*compile_text(corpus::accident_text())));
  JunctionTree jt(bn);
  CHECK_THROWS_AS(jt.marginal({0}), Error);
  CHECK_THROWS_AS(jt.set_evidence(0, 99), Error);
  jt.calibrate();
  Factor joint = jt.marginal({bn.find("Damage"), bn.find("Accident")});
  CHECK(joint.sum() == doctest::Approx(1.0));
  // Summing the joint down gives the single marginal.
  Factor dmg = marginalize(joint, {bn.find("Damage")});
  CHECK(test::max_abs_diff(dmg, jt.marginal({bn.find("Damage")})) < 1e-12);
}

TEST_CASE("triangulation is deterministic") {
  FlatBN bn = build_flat_bn(instantiate(*compile_text(corpus::accident_text())));
  Triangulation a = triangulate(bn);
  Triangulation b = triangulate(bn);
  CHECK(a.order == b.order);
  CHECK(a.cliques == b.cliques);
  std::vector<int> sorted = a.order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> all(bn.vars.size());
  std::iota(all.begin(), all.end(), 0);
  CHECK(sorted == all);
}
