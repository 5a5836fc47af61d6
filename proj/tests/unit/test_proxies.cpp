#include <stdexcept>
#include <cmath>

#include "doctest.h"
#include "proxyforge/autograd.hpp"
#include "proxyforge/dsl.hpp"
#include "proxyforge/forward.hpp"
#include "proxyforge/proxies.hpp"

using namespace proxyforge;

namespace {

struct Scene {
    Model model;
    NetworkStatistics stats;
};

Scene make_scene(const ArchSpec& spec, std::uint64_t model_seed, std::size_t batch_n = 8) {
    Scene s;
    s.model = build_model(spec, model_seed);
    const MarkovTask task({spec.vocab_size, spec.seq_len, 11});
    Rng rng(5);
    s.stats = capture(s.model, task.sample_batch(rng, batch_n));
    return s;
}

}  // namespace

TEST_SUITE("proxies") {

TEST_CASE("singular values match known matrices") {
    SUBCASE("diagonal") {
        const Tensor m({3, 3}, {3, 0, 0, 0, 2, 0, 0, 0, 1});
        std::vector<double> sv = singular_values(m);
        std::sort(sv.begin(), sv.end());
        CHECK(sv[0] == doctest::Approx(1.0));
        CHECK(sv[1] == doctest::Approx(2.0));
        CHECK(sv[2] == doctest::Approx(3.0));
    }
    SUBCASE("rank-1 outer product") {
        // [1,2]^T [3,4]: single nonzero singular value sqrt(5)*5
        const Tensor m({2, 2}, {3, 4, 6, 8});
        std::vector<double> sv = singular_values(m);
        std::sort(sv.begin(), sv.end());
        CHECK(sv[0] == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(sv[1] == doctest::Approx(std::sqrt(5.0) * 5.0));
    }
    SUBCASE("squared singular values sum to the squared Frobenius norm") {
        Rng rng(13);
        Tensor m({6, 4});
        for (std::size_t i = 0; i < m.numel(); ++i) m[i] = rng.uniform(-2, 2);
        double sq = 0.0;
        for (double sv : singular_values(m)) sq += sv * sv;
        CHECK(sq == doctest::Approx(frobenius_norm(m) * frobenius_norm(m)));
    }
}

TEST_CASE("logdet of a known PSD matrix") {
    const Tensor k({2, 2}, {4, 2, 2, 3});  // det = 8
    CHECK(logdet_psd(k, 0.0) == doctest::Approx(std::log(8.0)));
    // duplicate rows are singular; the ridge keeps the result finite
    const Tensor dup({2, 2}, {1, 1, 1, 1});
    CHECK(std::isfinite(logdet_psd(dup, 1e-6)));
}

TEST_CASE("synflow on a hand-traced 2x2 linear chain") {
    // y = W2 (W1 x), all-ones 2x2 weights, x = [1,1], loss = sum(y).
    // Chain rule by hand: dL/dW2 = [[2,2],[2,2]], dL/dW1 = [[2,2],[2,2]],
    // so sum(dL/dW . W) = 8 + 8 = 16.
    Tape tape;
    const NodeId w1 = tape.leaf(Tensor::ones({2, 2}));
    const NodeId w2 = tape.leaf(Tensor::ones({2, 2}));
    const NodeId x = tape.leaf(Tensor::ones({2, 1}));
    const NodeId y = tape.matmul(w2, tape.matmul(w1, x));
    const NodeId loss = tape.sum(y);
    const std::vector<Tensor> grads = tape.backward(loss);
    double score = 0.0;
    for (NodeId w : {w1, w2}) {
        for (std::size_t i = 0; i < 4; ++i) score += grads[w][i] * tape.value(w)[i];
    }
    CHECK(score == doctest::Approx(16.0));
}

TEST_CASE("gradnorm is zero when gradients vanish") {
    Scene s = make_scene({1, 8, 1, 16}, 2);
    for (BlockStats& bs : s.stats.blocks) {
        for (Tensor& g : bs.weight_grads) g = Tensor(g.shape());
    }
    CHECK(*score(ProxyId::GradNorm, s.model, s.stats) == 0.0);
}

TEST_CASE("snip is zero when all weights are zero") {
    Scene s = make_scene({1, 8, 1, 16}, 2);
    for (BlockStats& bs : s.stats.blocks) {
        for (Tensor& w : bs.weights) w = Tensor(w.shape());
    }
    CHECK(*score(ProxyId::Snip, s.model, s.stats) == 0.0);
}

TEST_CASE("attention confidence of uniform attention over length L is 1/L") {
    Scene s = make_scene({1, 8, 1, 16}, 4);
    BlockStats& bs = s.stats.blocks[0];
    const std::size_t L = bs.attn_probs.dim(3);
    bs.attn_probs = Tensor(bs.attn_probs.shape(), 1.0 / static_cast<double>(L));
    CHECK(*score(ProxyId::AttentionConfidence, s.model, s.stats) ==
          doctest::Approx(1.0 / static_cast<double>(L)).epsilon(1e-12));
}

TEST_CASE("softmax confidence of a uniform output distribution is 1/vocab") {
    Scene s = make_scene({1, 8, 1, 16}, 4);
    s.stats.output_probs = Tensor(s.stats.output_probs.shape(), 1.0 / 16.0);
    CHECK(*score(ProxyId::SoftmaxConfidence, s.model, s.stats) == doctest::Approx(1.0 / 16.0));
}

TEST_CASE("activation distance is invariant to sample permutation") {
    Scene s = make_scene({2, 16, 2, 32}, 6);
    const double base = *score(ProxyId::ActivationDistance, s.model, s.stats);
    // swap two samples in every per-sample tensor the proxy reads
    for (BlockStats& bs : s.stats.blocks) {
        Tensor& signs = bs.preact_signs;
        const std::size_t stride = signs.dim(1) * signs.dim(2);
        for (std::size_t t = 0; t < stride; ++t) std::swap(signs[t], signs[3 * stride + t]);
    }
    CHECK(*score(ProxyId::ActivationDistance, s.model, s.stats) ==
          doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("n_params grows when a layer is added") {
    const Scene small = make_scene({1, 16, 2, 32}, 3);
    const Scene large = make_scene({2, 16, 2, 32}, 3);
    CHECK(*score(ProxyId::NParams, large.model, large.stats) >
          *score(ProxyId::NParams, small.model, small.stats));
}

TEST_CASE("score_all covers all 17 proxies deterministically") {
    Scene s = make_scene({2, 16, 2, 32}, 8);
    const auto first = score_all(s.model, s.stats);
    const auto second = score_all(s.model, s.stats);
    CHECK(first.size() == 17);
    for (const auto& [id, value] : first) {
        REQUIRE(value.has_value());
        CHECK(std::isfinite(*value));
        CHECK(*second.at(id) == *value);
    }
}

TEST_CASE("lpzero proxies evaluate through their documented genotypes") {
    Scene s = make_scene({2, 16, 2, 32}, 9);
    const SymbolicExpression flexibert = parse_expression(kLpzeroFlexibertGenotype);
    CHECK(*score(ProxyId::LpzeroFlexibert, s.model, s.stats) ==
          doctest::Approx(*evaluate(flexibert, s.stats)).epsilon(1e-12));

    // the FlexiBERT right branch hits softmax of a scalar: constant 1, log 0
    const EvalValue right =
        eval_branch(flexibert.right, operand(s.stats, OperandKind::A, 0));
    REQUIRE(right.has_value());
    CHECK(right.tensor().item() == 0.0);
}

TEST_CASE("dsl encodings match native scorers") {
    Scene s = make_scene({3, 16, 2, 32}, 10);
    SUBCASE("synaptic saliency") {
        const double native = *score(ProxyId::SynapticSaliency, s.model, s.stats);
        const double dsl = *evaluate(parse_expression("G:f19|g03|W:f19"), s.stats);
        CHECK(std::fabs(native - dsl) <= 1e-8 * std::max(std::fabs(native), std::fabs(dsl)));
    }
    SUBCASE("gradnorm via the pruned second branch") {
        const double native = *score(ProxyId::GradNorm, s.model, s.stats);
        const double dsl = *evaluate(parse_expression("G:f10|g01|W:f20"), s.stats);
        CHECK(std::fabs(native - dsl) <= 1e-8 * std::max(std::fabs(native), std::fabs(dsl)));
    }
}

TEST_CASE("grasp produces a finite score on a toy model") {
    Scene s = make_scene({1, 8, 2, 16}, 12, 4);
    const auto v = score(ProxyId::Grasp, s.model, s.stats);
    REQUIRE(v.has_value());
    CHECK(std::isfinite(*v));
}

TEST_CASE("proxy names round-trip") {
    for (ProxyId id : all_proxies()) {
        CHECK(proxy_from_name(proxy_name(id)) == id);
    }
    CHECK_FALSE(proxy_from_name("no_such_proxy").has_value());
}

}  // TEST_SUITE
