#include <benchmark/benchmark.h>

#include "oobn/corpus.hpp"
#include "oobn/msbn.hpp"
#include "oobn/session.hpp"

using namespace oobn;

namespace {

struct Family {
  std::shared_ptr<const GroundModel> gm;
  std::shared_ptr<const FlatBN> bn;
};

Family family(int k) {
  ModelRef m = compile_text(corpus::generate_family_text(k, 7));
  Family f;
  f.gm = std::make_shared<const GroundModel>(instantiate(*m));
  f.bn = std::make_shared<const FlatBN>(build_flat_bn(*f.gm));
  return f;
}

void BM_CompileAccident(benchmark::State& state) {
  const std::string& text = corpus::accident_text();
  for (auto _ : state) {
    ModelRef m = compile_text(text);
    benchmark::DoNotOptimize(build_flat_bn(instantiate(*m)));
  }
}
BENCHMARK(BM_CompileAccident);

void BM_FlatCalibrate(benchmark::State& state) {
  Family f = family(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    JunctionTree jt(*f.bn);
    jt.calibrate();
    benchmark::DoNotOptimize(jt.marginal({0}));
  }
}
BENCHMARK(BM_FlatCalibrate)->RangeMultiplier(2)->Range(1, 16);

// Cells touched go into a counter so the near-linear growth in k is visible.
void BM_HypertreeCalibrate(benchmark::State& state) {
  Family f = family(static_cast<int>(state.range(0)));
  bool cached = state.range(1) != 0;
  std::uint64_t cells = 0;
  for (auto _ : state) {
    Hypertree ht(f.gm, f.bn, cached ? std::make_shared<ClassCache>() : nullptr);
    ht.calibrate_all();
    cells = ht.cost_report().total;
  }
  state.counters["cells"] = static_cast<double>(cells);
}
BENCHMARK(BM_HypertreeCalibrate)->ArgsProduct({{1, 2, 4, 8, 16}, {0, 1}});

void BM_QueryWithEvidence(benchmark::State& state) {
  ModelRef m = compile_text(corpus::accident_text());
  Session s(m, {state.range(0) ? Engine::kMsbn : Engine::kFlat, std::make_shared<ClassCache>()});
  bool flip = false;
  for (auto _ : state) {
    s.assert_evidence("Driver.Age", flip ? "0-20yr" : "60+yr");
    flip = !flip;
    benchmark::DoNotOptimize(s.query({"Damage"}));
  }
}
BENCHMARK(BM_QueryWithEvidence)->Arg(0)->Arg(1);

void BM_SubstituteIconizedCar(benchmark::State& state) {
  ModelRef m = compile_text(corpus::entry("accident_full").text);
  Session s(m, {Engine::kMsbn, std::make_shared<ClassCache>()});
  s.apply({RefinementOp::Kind::kIconize, "Car", ""});
  bool sports = false;
  for (auto _ : state) {
    sports = !sports;
    benchmark::DoNotOptimize(s.apply({RefinementOp::Kind::kSubstitute, "Car", sports ? "SPORTS-CAR" : "CAR"}));
    benchmark::DoNotOptimize(s.query({"Damage"}));
  }
}
BENCHMARK(BM_SubstituteIconizedCar);

}  // namespace

BENCHMARK_MAIN();
