#include <stdexcept>
#include <cmath>
#include <set>

#include "doctest.h"
#include "proxyforge/dsl.hpp"
#include "proxyforge/forward.hpp"
#include "proxyforge/proxies.hpp"

using namespace proxyforge;

namespace {

NetworkStatistics tiny_stats(std::uint64_t model_seed = 3, int layers = 2) {
    const ArchSpec spec{layers, 16, 2, 32};
    const Model model = build_model(spec, model_seed);
    const MarkovTask task({spec.vocab_size, spec.seq_len, 1});
    Rng rng(8);
    return capture(model, task.sample_batch(rng, 8));
}

EvalValue value_of(Tensor t) { return EvalValue::of(std::move(t)); }

}  // namespace

TEST_SUITE("dsl") {

TEST_CASE("unary table spot checks") {
    SUBCASE("f04 square of 3 is 9") {
        const EvalValue v = eval_unary(UnaryOp::Square, value_of(Tensor::scalar(3.0)));
        CHECK(v.tensor().item() == 9.0);
    }
    SUBCASE("f16 min-max maps endpoints to 0 and 1") {
        const EvalValue v = eval_unary(UnaryOp::MinMaxScale, value_of(Tensor({3}, {2, 4, 6})));
        CHECK(v.tensor()[0] == 0.0);
        CHECK(v.tensor()[1] == 0.5);
        CHECK(v.tensor()[2] == 1.0);
    }
    SUBCASE("f11 norm_sum is the sum over numel") {
        const EvalValue v = eval_unary(UnaryOp::NormSum, value_of(Tensor({2, 2}, {1, 2, 3, 4})));
        CHECK(v.tensor().item() == doctest::Approx((1.0 + 2.0 + 3.0 + 4.0) / 4.0));  // 2.5
    }
    SUBCASE("f10 f12 f17 f18 reductions") {
        const Tensor m({2, 2}, {1, -2, 3, -4});
        CHECK(eval_unary(UnaryOp::NormFro, value_of(m)).tensor().item() ==
              doctest::Approx(std::sqrt(30.0)));
        CHECK(eval_unary(UnaryOp::NormL1, value_of(m)).tensor().item() == 10.0);
        CHECK(eval_unary(UnaryOp::Average, value_of(m)).tensor().item() == -0.5);
        CHECK(eval_unary(UnaryOp::Std, value_of(m)).tensor().item() ==
              doctest::Approx(stddev(m)));
    }
    SUBCASE("f02 abs-log and f14 sigmoid") {
        CHECK(eval_unary(UnaryOp::AbsLog, value_of(Tensor::scalar(0.5))).tensor().item() ==
              doctest::Approx(std::log(2.0)));
        const EvalValue s = eval_unary(UnaryOp::Sigmoid, value_of(Tensor({2}, {0.0, 100.0})));
        CHECK(s.tensor()[0] == doctest::Approx(0.5));
        CHECK(s.tensor()[1] == doctest::Approx(1.0));
    }
    SUBCASE("reductions reject scalars as a kind mismatch") {
        CHECK(eval_unary(UnaryOp::NormFro, value_of(Tensor::scalar(2.0))).is_invalid());
        CHECK(eval_unary(UnaryOp::MinMaxScale, value_of(Tensor::scalar(2.0))).is_invalid());
        CHECK(eval_unary(UnaryOp::Sigmoid, value_of(Tensor::scalar(2.0))).is_invalid());
    }
    SUBCASE("softmax of a scalar is 1 by the literal formula, log-softmax 0") {
        CHECK(eval_unary(UnaryOp::Softmax, value_of(Tensor::scalar(4.2))).tensor().item() == 1.0);
        CHECK(eval_unary(UnaryOp::LogSoftmax, value_of(Tensor::scalar(4.2))).tensor().item() == 0.0);
    }
    SUBCASE("domain violations become the invalid signal") {
        CHECK(eval_unary(UnaryOp::Log, value_of(Tensor({2}, {-1.0, 1.0}))).is_invalid());
        CHECK(eval_unary(UnaryOp::Reciprocal, value_of(Tensor({2}, {0.0, 1.0}))).is_invalid());
        // min-max of a constant vector divides by zero
        CHECK(eval_unary(UnaryOp::MinMaxScale, value_of(Tensor({3}, {2, 2, 2}))).is_invalid());
    }
    SUBCASE("prune eliminates the branch") {
        CHECK(eval_unary(UnaryOp::Prune, value_of(Tensor({2}, {1, 2}))).is_empty());
    }
}

TEST_CASE("inverse-pair cancellation properties") {
    Rng rng(4);
    Tensor x({50});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(0.1, 5.0);

    SUBCASE("log then exp returns the input") {
        Branch b{OperandKind::A, {UnaryOp::Log, UnaryOp::Exp}};
        const EvalValue v = eval_branch(b, x);
        for (std::size_t i = 0; i < x.numel(); ++i) {
            CHECK(v.tensor()[i] == doctest::Approx(x[i]).epsilon(1e-10));
        }
    }
    SUBCASE("square then sqrt returns the input") {
        Branch b{OperandKind::A, {UnaryOp::Square, UnaryOp::Sqrt}};
        const EvalValue v = eval_branch(b, x);
        for (std::size_t i = 0; i < x.numel(); ++i) {
            CHECK(v.tensor()[i] == doctest::Approx(x[i]).epsilon(1e-10));
        }
    }
    SUBCASE("log_softmax equals log after softmax") {
        Tensor m({4, 6});
        for (std::size_t i = 0; i < m.numel(); ++i) m[i] = rng.uniform(-3, 3);
        const EvalValue direct = eval_unary(UnaryOp::LogSoftmax, value_of(m));
        const EvalValue composed = eval_unary(UnaryOp::Log, eval_unary(UnaryOp::Softmax, value_of(m)));
        for (std::size_t i = 0; i < m.numel(); ++i) {
            CHECK(direct.tensor()[i] == doctest::Approx(composed.tensor()[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("binary combine") {
    SUBCASE("a pruned branch passes the other side through") {
        const EvalValue x = value_of(Tensor({3}, {1, 2, 3}));
        const EvalValue combined = eval_binary(BinaryOp::Add, EvalValue::empty(), x);
        REQUIRE(combined.has_value());
        for (std::size_t i = 0; i < 3; ++i) CHECK(combined.tensor()[i] == x.tensor()[i]);
    }
    SUBCASE("division by zero propagates to invalid") {
        const EvalValue v =
            eval_binary(BinaryOp::Div, value_of(Tensor({2}, {1, 1})), value_of(Tensor::scalar(0.0)));
        CHECK(v.is_invalid());
    }
    SUBCASE("scalar broadcast") {
        const EvalValue v = eval_binary(BinaryOp::Mul, value_of(Tensor::scalar(2.0)),
                                        value_of(Tensor({3}, {1, 2, 3})));
        CHECK(v.tensor()[2] == 6.0);
    }
    SUBCASE("mismatched non-scalar shapes are invalid") {
        const EvalValue v =
            eval_binary(BinaryOp::Add, value_of(Tensor({3})), value_of(Tensor({4})));
        CHECK(v.is_invalid());
    }
    SUBCASE("both branches empty stays empty") {
        CHECK(eval_binary(BinaryOp::Add, EvalValue::empty(), EvalValue::empty()).is_empty());
    }
}

TEST_CASE("evaluate against network statistics") {
    const NetworkStatistics stats = tiny_stats();

    SUBCASE("(G identity) mul (W identity) equals native synaptic saliency") {
        const SymbolicExpression expr = parse_expression("G:f19|g03|W:f19");
        const std::optional<double> dsl_score = evaluate(expr, stats);
        REQUIRE(dsl_score.has_value());
        double native = 0.0;
        for (const BlockStats& bs : stats.blocks) {
            for (std::size_t t = 0; t < bs.weights.size(); ++t) {
                for (std::size_t i = 0; i < bs.weights[t].numel(); ++i) {
                    native += bs.weight_grads[t][i] * bs.weights[t][i];
                }
            }
        }
        CHECK(*dsl_score == doctest::Approx(native).epsilon(1e-10));
    }
    SUBCASE("log of a strictly negative branch is invalid") {
        // neg makes W strictly negative somewhere; log then yields NaN
        const SymbolicExpression expr = parse_expression("W:f03,f09,f01|g01|G:f20");
        CHECK_FALSE(evaluate(expr, stats).has_value());
    }
    SUBCASE("both branches pruned is invalid") {
        const SymbolicExpression expr = parse_expression("W:f20|g01|G:f20");
        CHECK_FALSE(evaluate(expr, stats).has_value());
    }
    SUBCASE("evaluate is bitwise repeatable") {
        const SymbolicExpression expr = parse_expression("H:f13|g04|A:f10");
        const auto a = evaluate(expr, stats);
        const auto b = evaluate(expr, stats);
        REQUIRE(a.has_value());
        CHECK(*a == *b);
    }
}

TEST_CASE("serialization") {
    SUBCASE("the documented searched-proxy genotype parses") {
        const SymbolicExpression expr = parse_expression("H:f08,f04|g01|A:f10,f13,f01");
        CHECK(expr.left.operand == OperandKind::H);
        CHECK(expr.left.unary == std::vector<UnaryOp>{UnaryOp::Reciprocal, UnaryOp::Square});
        CHECK(expr.binary == BinaryOp::Add);
        CHECK(expr.right.operand == OperandKind::A);
        CHECK(expr.right.unary ==
              std::vector<UnaryOp>{UnaryOp::NormFro, UnaryOp::Softmax, UnaryOp::Log});
        CHECK(serialize(expr) == "H:f08,f04|g01|A:f10,f13,f01");
    }
    SUBCASE("round-trip on 1000 random expressions") {
        Rng rng(6);
        for (int i = 0; i < 1000; ++i) {
            const std::size_t depth = 1 + rng.index(5);
            const SymbolicExpression expr = random_expr(rng, depth);
            const std::string s = serialize(expr);
            CHECK(parse_expression(s) == expr);
        }
    }
    SUBCASE("unknown op id is a parse error with position") {
        try {
            parse_expression("H:f99|g01|A:f10");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.position() == 2);
        }
        CHECK_THROWS_AS(parse_expression("H:f08|g09|A:f10"), ParseError);
        CHECK_THROWS_AS(parse_expression("Q:f08|g01|A:f10"), ParseError);
        CHECK_THROWS_AS(parse_expression("H:f08|g01|A:f10,"), ParseError);
        CHECK_THROWS_AS(parse_expression("H:f08|g01|A:f10|junk"), ParseError);
    }
}

TEST_CASE("search space") {
    SUBCASE("depth 1 counts 24000") {
        CHECK(space_size(1) == 24000);
        CHECK(space_size(2) == 15ULL * 20 * 20 * 20 * 20 * 4);
    }
    SUBCASE("sampled expressions respect the distinct-operand invariant") {
        Rng rng(9);
        for (int i = 0; i < 3000; ++i) {
            const SymbolicExpression e = random_expr(rng, 1 + rng.index(3));
            CHECK(e.left.operand != e.right.operand);
        }
    }
    SUBCASE("fixed seed reproduces the expression stream") {
        Rng a(10), b(10);
        for (int i = 0; i < 100; ++i) CHECK(random_expr(a, 2) == random_expr(b, 2));
    }
    SUBCASE("depth-1 enumeration yields 24000 distinct serialized genotypes") {
        const std::vector<SymbolicExpression> space = enumerate_space(1);
        CHECK(space.size() == 24000);
        std::set<std::string> distinct;
        for (const SymbolicExpression& e : space) distinct.insert(serialize(e));
        CHECK(distinct.size() == 24000);
    }
}

}  // TEST_SUITE
