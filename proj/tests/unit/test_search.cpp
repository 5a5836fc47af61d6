#include <stdexcept>
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "proxyforge/bench.hpp"
#include "proxyforge/search.hpp"

using namespace proxyforge;

namespace {

// a tiny trained benchmark shared by the search tests
const BenchmarkFile& tiny_bench() {
    static const BenchmarkFile bench = build_benchmark(8, 30, 7);
    return bench;
}

const FitnessContext& tiny_ctx() {
    static const FitnessContext ctx(tiny_bench());
    return ctx;
}

SearchConfig tiny_config() {
    SearchConfig c;
    c.population_size = 12;
    c.generations = 40;
    c.fitness_sample_size = 8;
    return c;
}

}  // namespace

TEST_SUITE("search") {

TEST_CASE("rps rejects every predefined conflict composition with its rule id") {
    struct Row {
        std::vector<UnaryOp> chain;
        const char* rule;
    };
    const Row rows[] = {
        {{UnaryOp::Neg, UnaryOp::Log}, "neg-log"},
        {{UnaryOp::Neg, UnaryOp::Sqrt}, "neg-sqrt"},
        {{UnaryOp::Neg, UnaryOp::LogSoftmax}, "neg-logsoftmax"},
        {{UnaryOp::Neg, UnaryOp::Relu, UnaryOp::Reciprocal}, "zero-reciprocal"},
        {{UnaryOp::Log, UnaryOp::Exp}, "inverse-pair"},
        {{UnaryOp::Exp, UnaryOp::Log}, "inverse-pair"},
        {{UnaryOp::Square, UnaryOp::Sqrt}, "inverse-pair"},
        {{UnaryOp::Softmax, UnaryOp::Log}, "softmax-log"},
        {{UnaryOp::Neg, UnaryOp::Neg}, "double-neg"},
        {{UnaryOp::Reciprocal, UnaryOp::Reciprocal}, "double-reciprocal"},
        {{UnaryOp::Abs, UnaryOp::Abs}, "double-abs"},
    };
    for (const Row& row : rows) {
        SymbolicExpression e;
        e.left = {OperandKind::G, row.chain};
        e.right = {OperandKind::W, {UnaryOp::Identity}};
        const RpsVerdict v = rps_check(e);
        CHECK_FALSE(v.valid);
        CHECK(v.rule_id == row.rule);
        // same rule in the right branch
        std::swap(e.left, e.right);
        CHECK(rps_check(e).rule_id == row.rule);
    }
}

TEST_CASE("rps accepts benign compositions") {
    SymbolicExpression e;
    e.left = {OperandKind::G, {UnaryOp::NormFro, UnaryOp::Square}};  // [f10, f04]
    e.right = {OperandKind::W, {UnaryOp::Abs, UnaryOp::Log}};
    CHECK(rps_check(e).valid);
    // depth 1 has no adjacent pairs at all
    e.left = {OperandKind::G, {UnaryOp::Neg}};
    e.right = {OperandKind::W, {UnaryOp::Log}};
    CHECK(rps_check(e).valid);
}

TEST_CASE("tournament selection") {
    std::vector<Candidate> pop;
    for (int i = 0; i < 80; ++i) {
        Candidate c;
        c.fitness = static_cast<double>(i % 17) / 17.0;
        pop.push_back(c);
    }
    Rng rng(3);
    for (int round = 0; round < 200; ++round) {
        const auto [a, b] = tournament_select(pop, 0.10, rng);
        CHECK(a != b);
        // both parents must be members of the top-8 pool
        std::vector<double> fitness;
        for (const Candidate& c : pop) fitness.push_back(c.fitness);
        std::sort(fitness.rbegin(), fitness.rend());
        const double cutoff = fitness[7];
        CHECK(pop[a].fitness >= cutoff);
        CHECK(pop[b].fitness >= cutoff);
    }
    SUBCASE("pool expands to two when the ratio is tiny") {
        std::vector<Candidate> small(pop.begin(), pop.begin() + 5);
        Rng r2(4);
        const auto [a, b] = tournament_select(small, 0.01, r2);
        CHECK(a != b);
    }
    SUBCASE("fixed seed gives an identical parent sequence") {
        Rng r1(9), r2(9);
        for (int i = 0; i < 50; ++i) {
            CHECK(tournament_select(pop, 0.1, r1) == tournament_select(pop, 0.1, r2));
        }
    }
}

TEST_CASE("crossover") {
    Rng rng(5);
    const SymbolicExpression a = parse_expression("H:f08|g02|A:f10");
    const SymbolicExpression b = parse_expression("G:f19|g03|W:f19");
    SUBCASE("forced swap with distinct operands") {
        const SymbolicExpression off = crossover(a, b, 1.0, rng);
        CHECK(off.left == a.left);
        CHECK(off.right == b.right);
        CHECK(off.binary == a.binary);
    }
    SUBCASE("rate zero copies the first parent") {
        CHECK(crossover(a, b, 0.0, rng) == a);
    }
    SUBCASE("operand collision triggers a resample and keeps the invariant") {
        const SymbolicExpression c = parse_expression("H:f04|g01|G:f19");
        for (int i = 0; i < 100; ++i) {
            const SymbolicExpression off = crossover(a, c, 1.0, rng);  // both would be H
            CHECK(off.left.operand != off.right.operand);
            CHECK(off.right.unary == c.right.unary);  // only the operand is resampled
        }
    }
}

TEST_CASE("mutation") {
    Rng rng(6);
    const SymbolicExpression base = parse_expression("H:f08,f04|g01|A:f10,f13");
    SUBCASE("rate zero is the identity") {
        CHECK(mutate(base, 0.0, rng) == base);
    }
    SUBCASE("rate one changes at most one gene position") {
        for (int i = 0; i < 500; ++i) {
            const SymbolicExpression m = mutate(base, 1.0, rng);
            int diffs = 0;
            if (m.left.operand != base.left.operand) ++diffs;
            if (m.right.operand != base.right.operand) ++diffs;
            if (m.binary != base.binary) ++diffs;
            for (std::size_t s = 0; s < 2; ++s) {
                if (m.left.unary[s] != base.left.unary[s]) ++diffs;
                if (m.right.unary[s] != base.right.unary[s]) ++diffs;
            }
            CHECK(diffs <= 1);
        }
    }
    SUBCASE("10k mutations never violate genotype invariants") {
        SymbolicExpression e = base;
        for (int i = 0; i < 10000; ++i) {
            e = mutate(e, 1.0, rng);
            CHECK(e.left.operand != e.right.operand);
            CHECK(e.left.unary.size() == 2);
            CHECK(e.right.unary.size() == 2);
        }
    }
}

TEST_CASE("fitness is 1 when ground truth increases with the proxy score") {
    // rewrite the tiny benchmark's ground truth as a strictly increasing
    // transform of one expression's scores; its fitness must be exactly 1
    BenchmarkFile bench = tiny_bench();
    const SymbolicExpression expr = parse_expression("W:f10|g01|G:f20");
    {
        const FitnessContext probe_ctx(bench);
        const MarkovTask task(bench.task);
        Rng rng(capture_batch_seed(bench.task));
        const Batch batch = task.sample_batch(rng, bench.training.batch_size);
        for (std::size_t i = 0; i < bench.entries.size(); ++i) {
            const Model model = build_model(bench.entries[i].arch, entry_seed(bench.training.seed, i));
            const auto s = evaluate(expr, capture(model, batch));
            REQUIRE(s.has_value());
            bench.entries[i].ground_truth = 2.0 * *s + 5.0;
        }
    }
    const FitnessContext ctx(bench);
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < ctx.size(); ++i) all.push_back(i);
    CHECK(ctx.fitness(expr, all) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fitness") {
    const FitnessContext& ctx = tiny_ctx();
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < ctx.size(); ++i) all.push_back(i);

    SUBCASE("an all-invalid expression maps to the sentinel") {
        const SymbolicExpression e = parse_expression("W:f20|g01|G:f20");
        CHECK(ctx.fitness(e, all) == kInvalidFitness);
    }
    SUBCASE("fitness is repeatable for a fixed sample") {
        const SymbolicExpression e = parse_expression("W:f10|g01|G:f20");
        CHECK(ctx.fitness(e, all) == ctx.fitness(e, all));
    }
    SUBCASE("fitness lies in [-1, 1] or is the sentinel") {
        Rng rng(8);
        for (int i = 0; i < 50; ++i) {
            const double f = ctx.fitness(random_expr(rng, 1), all);
            CHECK(f >= -1.0);
            CHECK(f <= 1.0);
        }
    }
}

TEST_CASE("run_search") {
    const SearchConfig config = tiny_config();
    const SearchReport report = run_search(config, tiny_ctx());

    SUBCASE("history length equals the generation count") {
        CHECK(report.history.size() == config.generations);
    }
    SUBCASE("best fitness is non-decreasing under elitist truncation") {
        double prev = -2.0;
        for (const GenerationRecord& r : report.history) {
            CHECK(r.best_fitness >= prev);
            prev = r.best_fitness;
        }
        CHECK(report.best_fitness == report.history.back().best_fitness);
    }
    SUBCASE("evaluation budget is exactly p + G") {
        CHECK(report.fitness_evaluations == config.population_size + config.generations);
    }
    SUBCASE("same seed reproduces the whole report") {
        const SearchReport again = run_search(config, tiny_ctx());
        CHECK(again.best_expression == report.best_expression);
        CHECK(again.best_fitness == report.best_fitness);
        CHECK(again.total_rps_rejections == report.total_rps_rejections);
        REQUIRE(again.history.size() == report.history.size());
        for (std::size_t g = 0; g < report.history.size(); ++g) {
            CHECK(again.history[g].best_fitness == report.history[g].best_fitness);
            CHECK(again.history[g].mean_fitness == report.history[g].mean_fitness);
        }
    }
    SUBCASE("surviving genotypes contain no conflict pairs when rps is enabled") {
        SearchConfig deep = config;
        deep.unary_depth = 3;
        const SearchReport r = run_search(deep, tiny_ctx());
        CHECK(rps_check(parse_expression(r.best_expression)).valid);
    }
}

TEST_CASE("random_search budget accounting matches run()") {
    const SearchConfig config = tiny_config();
    const SearchReport evo = run_search(config, tiny_ctx());
    const SearchReport rnd = random_search(config, tiny_ctx());
    CHECK(rnd.fitness_evaluations == evo.fitness_evaluations);
    CHECK(rnd.history.size() == config.generations);
    double prev = -2.0;
    for (const GenerationRecord& r : rnd.history) {
        CHECK(r.best_fitness >= prev);
        prev = r.best_fitness;
    }
    const SearchReport rnd2 = random_search(config, tiny_ctx());
    CHECK(rnd2.best_expression == rnd.best_expression);
}

TEST_CASE("search report serializes to json") {
    SearchConfig config = tiny_config();
    config.generations = 5;
    const SearchReport report = run_search(config, tiny_ctx());
    const std::string j = to_json(report);
    CHECK(j.find("\"best_expression\"") != std::string::npos);
    CHECK(j.find("\"history\"") != std::string::npos);
    CHECK(j.find("\"rps_enabled\": true") != std::string::npos);
}

TEST_CASE("config validation") {
    SearchConfig bad;
    bad.population_size = 1;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = SearchConfig{};
    bad.selection_ratio = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = SearchConfig{};
    bad.unary_depth = 6;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

}  // TEST_SUITE
