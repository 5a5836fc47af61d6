#include <benchmark/benchmark.h>

#include "proxyforge/dsl.hpp"
#include "proxyforge/forward.hpp"
#include "proxyforge/proxies.hpp"
#include "proxyforge/rank.hpp"
#include "proxyforge/stats.hpp"

namespace {

using namespace proxyforge;

struct Fixture {
    Model model;
    Batch batch;
    NetworkStatistics stats;

    Fixture() {
        ArchSpec spec{2, 16, 2, 32};
        model = build_model(spec, 7);
        MarkovTask task({16, 12, 3});
        Rng rng(11);
        batch = task.sample_batch(rng, 16);
        stats = capture(model, batch);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

void BM_Capture(benchmark::State& state) {
    Fixture& f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(capture(f.model, f.batch));
    }
}
BENCHMARK(BM_Capture);

void BM_EvaluateExpression(benchmark::State& state) {
    Fixture& f = fixture();
    const SymbolicExpression expr = parse_expression("G:f19|g03|W:f19");
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate(expr, f.stats));
    }
}
BENCHMARK(BM_EvaluateExpression);

void BM_ScoreSynflow(benchmark::State& state) {
    Fixture& f = fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(score(ProxyId::Synflow, f.model, f.stats));
    }
}
BENCHMARK(BM_ScoreSynflow);

void BM_Spearman(benchmark::State& state) {
    Rng rng(5);
    std::vector<double> x(200), y(200);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform();
        y[i] = rng.uniform();
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(spearman(x, y));
    }
}
BENCHMARK(BM_Spearman);

}  // namespace

BENCHMARK_MAIN();
