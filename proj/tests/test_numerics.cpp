// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <doctest.h>

#include "rolecast/errors.hpp"
#include "rolecast/numerics.hpp"
#include "rolecast/rng.hpp"

using namespace rolecast;

TEST_CASE("softmax of equal entries is uniform") {
    const std::vector<double> two = {0.0, 0.0};
    const ProbVector p = softmax(two);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-15));

    for (double c : {-3.5, 0.0, 1e6, -123.25}) {
        const std::vector<double> four(4, c);
        const ProbVector q = softmax(four);
        for (std::size_t i = 0; i < 4; ++i) CHECK(q[i] == doctest::Approx(0.25).epsilon(1e-13));
    }
}

TEST_CASE("softmax closed form on log inputs") {
    const std::vector<double> v = {std::log(1.0), std::log(2.0), std::log(3.0)};
    const ProbVector p = softmax(v);
    CHECK(std::abs(p[0] - 1.0 / 6.0) < 1e-12);
    CHECK(std::abs(p[1] - 2.0 / 6.0) < 1e-12);
    CHECK(std::abs(p[2] - 3.0 / 6.0) < 1e-12);
}

TEST_CASE("softmax shift invariance over random vectors") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        RandomStream rng(derive_seed(7, "softmax-shift", seed));
        std::vector<double> v(1 + rng.uniform_index(12));
        for (double& x : v) x = rng.normal(0.0, 3.0);
        const double c = (rng.uniform01() * 2.0 - 1.0) * 100.0;
        std::vector<double> shifted = v;
        for (double& x : shifted) x += c;
        const ProbVector a = softmax(v);
        const ProbVector b = softmax(shifted);
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
    }
}

TEST_CASE("softmax sums to one and rejects bad input") {
    RandomStream rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> v(1 + rng.uniform_index(20));
        for (double& x : v) x = rng.normal(0.0, 10.0);
        const ProbVector p = softmax(v);
        double sum = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) sum += p[i];
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    CHECK_THROWS_AS(softmax(std::vector<double>{}), InvalidArgument);
    CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::nan("")}), InvalidArgument);
}

TEST_CASE("cross entropy closed forms") {
    const ProbVector onehot = ProbVector::from_raw({0.0, 1.0, 0.0});
    CHECK(cross_entropy(onehot, 1) == 0.0);

    const ProbVector uniform = ProbVector::from_raw({0.25, 0.25, 0.25, 0.25});
    for (std::size_t t = 0; t < 4; ++t)
        CHECK(cross_entropy(uniform, t) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    const ProbVector skew = ProbVector::from_raw({0.1, 0.9});
    CHECK(std::abs(cross_entropy(skew, 0) - 2.302585092994046) < 1e-9);

    // zero probability clamps to the 1e-300 floor
    CHECK(cross_entropy(onehot, 0) == doctest::Approx(-std::log(1e-300)));
    CHECK_THROWS_AS(cross_entropy(onehot, 3), InvalidArgument);
}

TEST_CASE("cross entropy is non-negative") {
    RandomStream rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(2 + rng.uniform_index(10));
        for (double& x : v) x = rng.normal(0.0, 4.0);
        const ProbVector p = softmax(v);
        CHECK(cross_entropy(p, rng.uniform_index(p.size())) >= 0.0);
    }
}

TEST_CASE("finite differences recover simple gradients") {
    Matrix x(2, 3);
    RandomStream rng(3);
    for (double& v : x.data) v = rng.normal(0.0, 1.0);

    const Matrix ones = finite_diff_grad(
        [](const Matrix& m) {
            double s = 0.0;
            for (double v : m.data) s += v;
            return s;
        },
        x, 1e-5);
    for (double v : ones.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

    Matrix point(1, 2);
    point.at(0, 0) = 1.0;
    point.at(0, 1) = 2.0;
    const Matrix grad = finite_diff_grad(
        [](const Matrix& m) {
            double s = 0.0;
            for (double v : m.data) s += v * v;
            return 0.5 * s;
        },
        point, 1e-5);
    CHECK(std::abs(grad.at(0, 0) - 1.0) < 1e-6);
    CHECK(std::abs(grad.at(0, 1) - 2.0) < 1e-6);
}

TEST_CASE("finite differences match softmax cross-entropy backprop") {
    // loss(W) = cross_entropy(softmax(W x), t); analytic dW = (p - onehot) x^T
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RandomStream rng(derive_seed(13, "fd-ce", seed));
        const std::size_t out = 3 + rng.uniform_index(4);
        const std::size_t in = 2 + rng.uniform_index(4);
        Matrix w = gaussian_matrix(out, in, 0.8, rng);
        std::vector<double> x(in);
        for (double& v : x) v = rng.normal(0.0, 1.0);
        const std::size_t target = rng.uniform_index(out);

        auto loss = [&](const Matrix& m) {
            return cross_entropy(softmax(matvec(m, x)), target);
        };
        std::vector<double> g = softmax(matvec(w, x)).values();
        g[target] -= 1.0;
        Matrix analytic(out, in);
        add_outer(analytic, g, x, 1.0);

        const Matrix fd = finite_diff_grad(loss, w, 1e-5);
        CHECK(max_relative_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("finite difference oracle reports non-finite evaluations") {
    Matrix x(1, 1, 2.0);
    CHECK_THROWS_AS(finite_diff_grad([](const Matrix&) { return std::nan(""); }, x, 1e-5),
                    OracleFailure);
}

TEST_CASE("sgd step") {
    Matrix p(1, 1, 1.0);
    Matrix zero(1, 1, 0.0);
    CHECK(sgd_step(p, zero, 123.0).at(0, 0) == 1.0);

    Matrix g(1, 1, 10.0);
    CHECK(sgd_step(p, g, 0.1).at(0, 0) == doctest::Approx(0.0));

    Matrix wrong(2, 1, 0.0);
    CHECK_THROWS_AS(sgd_step(p, wrong, 0.1), InvalidArgument);
    CHECK_THROWS_AS(sgd_step(p, g, 0.0), InvalidArgument);
}

TEST_CASE("operations are deterministic") {
    RandomStream rng(99);
    std::vector<double> v(16);
    for (double& x : v) x = rng.normal(0.0, 2.0);
    const ProbVector a = softmax(v);
    const ProbVector b = softmax(v);
    CHECK(a.values() == b.values());

    RandomStream r1(1234), r2(1234);
    const Matrix m1 = gaussian_matrix(4, 4, 0.5, r1);
    const Matrix m2 = gaussian_matrix(4, 4, 0.5, r2);
    CHECK(bit_identical(m1, m2));
}

TEST_CASE("bit identity distinguishes signed zero") {
    Matrix a(1, 1, 0.0);
    Matrix b(1, 1, -0.0);
    CHECK(a.at(0, 0) == b.at(0, 0));
    CHECK_FALSE(bit_identical(a, b));
}

TEST_CASE("prob vector validation") {
    CHECK_THROWS_AS(ProbVector::from_raw({0.5, 0.6}), InvalidArgument);
    CHECK_THROWS_AS(ProbVector::from_raw({-0.1, 1.1}), InvalidArgument);
    CHECK_THROWS_AS(ProbVector::from_raw({}), InvalidArgument);
}
