#include <stdexcept>
#include <cmath>

#include "doctest.h"
#include "proxyforge/rng.hpp"
#include "proxyforge/tensor.hpp"

using namespace proxyforge;

TEST_SUITE("tensor") {

TEST_CASE("construction validates shape against data") {
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>{1, 2}), std::invalid_argument);
    const Tensor t({2, 2}, {1, 2, 3, 4});
    CHECK(t.numel() == 4);
    CHECK(t.at(1, 0) == 3);
    CHECK(Tensor::scalar(5.0).is_scalar());
}

TEST_CASE("identity times X is X") {
    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    const Tensor x({3, 2}, {1, 2, 3, 4, 5, 6});
    const Tensor y = matmul(eye, x);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("hand matmul") {
    const Tensor a({2, 2}, {1, 2, 3, 4});
    const Tensor b({2, 1}, {1, 1});
    const Tensor c = matmul(a, b);
    CHECK(c[0] == 3);
    CHECK(c[1] == 7);
}

TEST_CASE("random matmul matches triple-loop oracle") {
    Rng rng(99);
    Tensor a({4, 5});
    Tensor b({5, 2});
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < b.numel(); ++i) b[i] = rng.uniform(-1, 1);
    const Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            double expect = 0.0;
            for (std::size_t p = 0; p < 5; ++p) expect += a.at(i, p) * b.at(p, j);
            CHECK(std::fabs(c.at(i, j) - expect) < 1e-12);
        }
    }
}

TEST_CASE("matmul shape mismatch is a dimension error") {
    CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 2})), std::invalid_argument);
    CHECK_THROWS_AS(matmul(Tensor({4}), Tensor({4, 1})), std::invalid_argument);
}

TEST_CASE("elementwise basics") {
    const Tensor x({3}, {-1, 0, 2});
    const Tensor r = relu(x);
    CHECK(r[0] == 0);
    CHECK(r[1] == 0);
    CHECK(r[2] == 2);
    CHECK_THROWS_AS(add(Tensor({2}), Tensor({3})), std::invalid_argument);
}

TEST_CASE("log of exp is identity on (-5,5)") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const double x = rng.uniform(-5, 5);
        CHECK(std::fabs(log(exp(Tensor::scalar(x)))[0] - x) < 1e-12);
    }
}

TEST_CASE("reciprocal of zero gives inf which propagates") {
    const Tensor y = reciprocal(Tensor::scalar(0.0));
    CHECK(std::isinf(y[0]));
    CHECK(std::isinf(add(y, Tensor::scalar(1.0))[0]));
    CHECK_FALSE(y.all_finite());
}

TEST_CASE("relu keeps NaN visible") {
    const Tensor y = relu(log(Tensor::scalar(-1.0)));
    CHECK(std::isnan(y[0]));
}

TEST_CASE("scalar broadcast") {
    const Tensor v = mul(Tensor::scalar(2.0), Tensor({3}, {1, 2, 3}));
    CHECK(v[0] == 2);
    CHECK(v[1] == 4);
    CHECK(v[2] == 6);
}

TEST_CASE("softmax rows") {
    SUBCASE("symmetry") {
        const Tensor y = softmax_lastaxis(Tensor({2}, {0, 0}));
        CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("single element") {
        const Tensor y = softmax_lastaxis(Tensor({1}, {3.7}));
        CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("matches the naive exp/sum formula") {
        const Tensor x({3}, {1, 2, 3});
        const Tensor y = softmax_lastaxis(x);
        double denom = 0.0;
        for (std::size_t i = 0; i < 3; ++i) denom += std::exp(x[i]);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(std::fabs(y[i] - std::exp(x[i]) / denom) < 1e-12);
        }
    }
    SUBCASE("rows sum to one and shifting a row changes nothing") {
        Rng rng(17);
        Tensor x({5, 7});
        for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-40, 40);
        const Tensor y = softmax_lastaxis(x);
        const Tensor y_shifted = softmax_lastaxis(add(x, Tensor::scalar(13.25)));
        for (std::size_t r = 0; r < 5; ++r) {
            double row = 0.0;
            for (std::size_t j = 0; j < 7; ++j) row += y[r * 7 + j];
            CHECK(std::fabs(row - 1.0) <= 1e-12);
        }
        for (std::size_t i = 0; i < y.numel(); ++i) {
            CHECK(y[i] == doctest::Approx(y_shifted[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("reductions") {
    const Tensor m({2, 2}, {1, 2, 3, 4});
    CHECK(sum(m) == 10);
    CHECK(mean(m) == 2.5);
    CHECK(min_value(m) == 1);
    CHECK(max_value(m) == 4);
    CHECK(frobenius_norm(m) == doctest::Approx(std::sqrt(30.0)));
    CHECK(l1_norm(Tensor({3}, {-1, 2, -3})) == 6);
    CHECK(stddev(Tensor({4}, {2, 2, 2, 2})) == 0.0);
}

}  // TEST_SUITE
