#include <gtest/gtest.h>

#include <cmath>

#include "mfnet/calculus.hpp"
#include "mfnet/norms.hpp"
#include "support.hpp"

using namespace mfnet;
using mfnet::test::Engine;

namespace {

double at(const MeanFieldNet& f, const std::vector<double>& x) { return forward_net(f, x); }

MeanFieldNet zero_net(std::size_t d, std::size_t depth) { return constant_net(0.0, d, depth); }

}  // namespace

TEST(ConstantNet, ValueAndProxy) {
    const auto c = constant_net(-2.5, 3, 3);
    EXPECT_EQ(c.depth(), 3u);
    EXPECT_DOUBLE_EQ(at(c, {0.1, 0.2, 0.3}), -2.5);
    EXPECT_DOUBLE_EQ(path_norm_proxy(c), 2.5);
}

TEST(Add, PointwiseSumAndProxy) {
    Engine rng(1);
    const auto f = test::random_test_net(rng, 2, {3, 4});
    const auto g = test::random_test_net(rng, 2, {5, 2});
    const auto s = add(f, g);
    EXPECT_EQ(s.widths(), (std::vector<std::size_t>{8, 6}));
    EXPECT_LE(path_norm_proxy(s), path_norm_proxy(f) + path_norm_proxy(g) + 1e-9);
    for (int p = 0; p < 100; ++p) {
        const auto x = test::random_point(rng, 2);
        EXPECT_TRUE(test::rel_close(at(s, x), at(f, x) + at(g, x), 1e-12));
    }
}

TEST(Add, ZeroAndCancellation) {
    Engine rng(2);
    const auto f = test::random_test_net(rng, 2, {3, 3});
    const auto fz = add(f, zero_net(2, 2));
    const auto cancel = add(f, negate(f));
    for (int p = 0; p < 50; ++p) {
        const auto x = test::random_point(rng, 2);
        EXPECT_TRUE(test::rel_close(at(fz, x), at(f, x), 1e-12));
        EXPECT_NEAR(at(cancel, x), 0.0, 1e-12 * (1.0 + std::abs(at(f, x))));
    }
}

TEST(Add, DepthMismatch) {
    Engine rng(3);
    EXPECT_THROW(add(test::random_test_net(rng, 2, {3}), test::random_test_net(rng, 2, {3, 3})), DepthMismatch);
}

TEST(LiftDepth, SameFunctionProxyAtMostDouble) {
    Engine rng(4);
    const auto f = test::random_test_net(rng, 3, {4, 2});
    for (std::size_t extra : {1u, 2u, 3u}) {
        const auto g = lift_depth(f, extra);
        EXPECT_EQ(g.depth(), f.depth() + extra);
        EXPECT_LE(path_norm_proxy(g), 2.0 * path_norm_proxy(f) + 1e-9);
        for (int p = 0; p < 100; ++p) {
            const auto x = test::random_point(rng, 3);
            EXPECT_TRUE(test::rel_close(at(g, x), at(f, x), 1e-12));
        }
    }
}

TEST(LiftDepth, TwiceEqualsTwo) {
    Engine rng(5);
    const auto f = test::random_test_net(rng, 2, {3});
    const auto a = lift_depth(lift_depth(f, 1), 1);
    const auto b = lift_depth(f, 2);
    EXPECT_EQ(a.depth(), b.depth());
    for (int p = 0; p < 50; ++p) {
        const auto x = test::random_point(rng, 2);
        EXPECT_TRUE(test::rel_close(at(a, x), at(b, x), 1e-12));
    }
}

TEST(LiftDepth, ExactFactorTwoForSingleNeuron) {
    const MeanFieldNet f(1, {Matrix(1, 2, {3, 1}), Matrix(1, 1, {2})});
    EXPECT_NEAR(path_norm_proxy(lift_depth(f, 1)), 2.0 * path_norm_proxy(f), 1e-12);
    EXPECT_NEAR(path_norm_proxy(lift_depth(f, 4)), 2.0 * path_norm_proxy(f), 1e-12);
}

TEST(Compose, IdentityOuterNet) {
    Engine rng(6);
    const auto f = test::random_test_net(rng, 2, {4, 3});
    const auto c = compose(identity_net(), {f});
    EXPECT_EQ(c.depth(), 3u);
    for (int p = 0; p < 100; ++p) {
        const auto x = test::random_point(rng, 2);
        EXPECT_TRUE(test::rel_close(at(c, x), at(f, x), 1e-12));
    }
}

TEST(Compose, PositivePartAndMax) {
    Engine rng(7);
    const auto f = test::random_test_net(rng, 2, {5});
    const auto g = test::random_test_net(rng, 2, {5});
    const auto pos = compose(positive_part_net(), {f});
    const auto mx = compose(max_net(), {f, g});
    for (int p = 0; p < 100; ++p) {
        const auto x = test::random_point(rng, 2);
        EXPECT_TRUE(test::rel_close(at(pos, x), std::max(at(f, x), 0.0), 1e-12));
        EXPECT_TRUE(test::rel_close(at(mx, x), std::max(at(f, x), at(g, x)), 1e-12));
    }
}

TEST(Compose, GeneralOuterNetAndBound) {
    Engine rng(8);
    const VectorNet fs{test::random_test_net(rng, 3, {4, 2}), test::random_test_net(rng, 3, {3, 3}),
                       test::random_test_net(rng, 3, {2, 5})};
    const auto g = test::random_test_net(rng, 3, {6, 4});
    const auto c = compose(g, fs);
    EXPECT_EQ(c.depth(), 4u);
    EXPECT_LE(path_norm_proxy(c), compose_proxy_bound(g, fs) * (1.0 + 1e-9));
    for (int p = 0; p < 100; ++p) {
        const auto x = test::random_point(rng, 3);
        const std::vector<double> y{at(fs[0], x), at(fs[1], x), at(fs[2], x)};
        EXPECT_TRUE(test::rel_close(at(c, x), at(g, y), 1e-12));
    }
}

TEST(Compose, SumFormHoldsForBiasFreeOuterNet) {
    Engine rng(9);
    const VectorNet fs{test::random_test_net(rng, 2, {3}), test::random_test_net(rng, 2, {4})};
    auto layers = test::random_test_net(rng, 2, {5}).layers();
    for (std::size_t i = 0; i < layers[0].rows(); ++i) layers[0](i, 2) = 0.0;
    const MeanFieldNet g(2, layers);
    double sum = 0.0;
    for (const auto& f : fs) sum += path_norm_proxy(f);
    EXPECT_LE(path_norm_proxy(compose(g, fs)), path_norm_proxy(g) * sum * (1.0 + 1e-9));
}

TEST(Compose, Associative) {
    Engine rng(10);
    const auto f = test::random_test_net(rng, 2, {3, 3});
    const auto g = test::random_test_net(rng, 1, {4});
    const auto h = test::random_test_net(rng, 1, {3, 2});
    const auto inner_first = compose(h, {compose(g, {f})});
    const auto outer_first = compose(compose(h, {g}), {f});
    for (int p = 0; p < 50; ++p) {
        const auto x = test::random_point(rng, 2);
        const double direct = at(h, {at(g, {at(f, x)})});
        EXPECT_TRUE(test::rel_close(at(inner_first, x), direct, 1e-10));
        EXPECT_TRUE(test::rel_close(at(outer_first, x), direct, 1e-10));
    }
}

TEST(Compose, Errors) {
    Engine rng(11);
    const auto f = test::random_test_net(rng, 2, {3});
    EXPECT_THROW(compose(max_net(), {f}), ArityMismatch);
    EXPECT_THROW(compose(identity_net(), {}), ArityMismatch);
    EXPECT_THROW(compose(max_net(), {f, test::random_test_net(rng, 2, {3, 3})}), DepthMismatch);
}

TEST(AbsMaxMin, Semantics) {
    Engine rng(12);
    const auto f = test::random_test_net(rng, 2, {4, 4});
    const auto g = test::random_test_net(rng, 2, {3, 5});
    const auto a = abs_of(f), mx = max_of(f, g), mn = min_of(f, g), self = max_of(f, f);
    const auto dual = negate(max_of(negate(f), negate(g)));
    for (int p = 0; p < 100; ++p) {
        const auto x = test::random_point(rng, 2);
        const double fx = at(f, x), gx = at(g, x);
        EXPECT_TRUE(test::rel_close(at(a, x), std::abs(fx), 1e-12));
        EXPECT_TRUE(test::rel_close(at(mx, x), std::max(fx, gx), 1e-12));
        EXPECT_TRUE(test::rel_close(at(mn, x), std::min(fx, gx), 1e-12));
        EXPECT_TRUE(test::rel_close(at(self, x), fx, 1e-12));
        EXPECT_TRUE(test::rel_close(at(mn, x), at(dual, x), 1e-12));
    }
}

TEST(AbsMaxMin, AbsOfMinusThree) {
    const auto f = constant_net(-3.0, 1, 1);
    EXPECT_DOUBLE_EQ(at(abs_of(f), {0.4}), 3.0);
}

TEST(SquareBarron, NonpositiveInputsGiveZero) {
    const auto s = square_barron(1.0, 16);
    for (double z : {-1.0, -0.5, -1e-9, 0.0}) EXPECT_EQ(at(s, {z}), 0.0);
}

TEST(SquareBarron, GridErrorWithinBudget) {
    for (auto [m, n] : {std::pair{1.0, 64u}, std::pair{3.0, 10u}, std::pair{0.5, 2u}}) {
        const auto s = square_barron(m, n);
        double worst = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            const double z = -m + 2.0 * m * i / 1000.0;
            worst = std::max(worst, std::abs(at(s, {z}) - std::pow(std::max(z, 0.0), 2)));
        }
        EXPECT_LE(worst, square_error_budget(m, n));
        EXPECT_LE(worst, square_error_bound(m, n) * (1.0 + 1e-9) + 1e-14);
    }
    EXPECT_LE(square_error_budget(1.0, 64), 1.0 / 256.0);
}

TEST(SquareBarron, EndpointValue) {
    const double m = 2.0;
    EXPECT_NEAR(at(square_barron(m, 32), {m}), m * m, square_error_budget(m, 32));
}

TEST(ProductOf, Constants) {
    const auto p = product_of(constant_net(2.0, 1, 1), constant_net(3.0, 1, 1), 5.0, 256);
    for (double x : {-1.0, 0.0, 0.7}) EXPECT_NEAR(at(p, {x}), 6.0, 0.1);
}

TEST(ProductOf, ZeroFactorIsExactlyZero) {
    Engine rng(13);
    const auto f = test::random_test_net(rng, 2, {4});
    const auto p = product_of(f, zero_net(2, 1), 2.0, 16);
    for (int k = 0; k < 50; ++k) EXPECT_EQ(at(p, test::random_point(rng, 2)), 0.0);
}

TEST(ProductOf, RandomFactorsWithinDerivedBound) {
    Engine rng(14);
    const auto f = test::random_test_net(rng, 2, {4, 3});
    const auto g = test::random_test_net(rng, 2, {3, 3});
    const double bound = std::max(path_norm_proxy(f), path_norm_proxy(g));
    const std::size_t n = 20;
    const auto p = product_of(f, g, bound, n);
    for (int k = 0; k < 200; ++k) {
        const auto x = test::random_point(rng, 2);
        const double err = std::abs(at(p, x) - at(f, x) * at(g, x));
        EXPECT_LE(err, product_error_bound(bound, n) * (1.0 + 1e-9) + 1e-13);
        EXPECT_LE(err, product_error_budget(bound, n));
    }
}

TEST(ProductOf, SquareCrossCheck) {
    Engine rng(15);
    const auto f = test::random_test_net(rng, 1, {3});
    const double b = path_norm_proxy(f);
    const std::size_t n = 32;
    const auto sq = product_of(f, f, b, n);
    // f^2 = s(f) + s(-f) with s = square_barron on [0, 2B] applied to y1 + y2 = 2f, divided by 4.
    const auto s = square_barron(2.0 * b, n);
    for (int k = 0; k < 50; ++k) {
        const auto x = test::random_point(rng, 1);
        const double fx = at(f, x);
        const double via_square = 0.25 * (at(s, {2.0 * fx}) + at(s, {-2.0 * fx}));
        EXPECT_NEAR(at(sq, x), via_square, 1e-12 * (1.0 + b * b));
        EXPECT_NEAR(at(sq, x), fx * fx, product_error_bound(b, n) + 1e-13);
    }
}

TEST(Calculus, CommutesWithInputTranslation) {
    Engine rng(16);
    const auto f = test::random_test_net(rng, 2, {3, 3});
    const auto g = test::random_test_net(rng, 2, {2, 4});
    const std::vector<double> t{0.3, -0.2};
    const auto ft = translate_input(f, t), gt = translate_input(g, t);
    const std::pair<MeanFieldNet, MeanFieldNet> cases[] = {
        {add(f, g), add(ft, gt)},
        {lift_depth(f, 2), lift_depth(ft, 2)},
        {abs_of(f), abs_of(ft)},
        {max_of(f, g), max_of(ft, gt)},
        {min_of(f, g), min_of(ft, gt)},
        {product_of(f, g, 3.0, 8), product_of(ft, gt, 3.0, 8)},
    };
    for (const auto& [built, from_shifted] : cases) {
        const auto shifted_after = translate_input(built, t);
        for (int k = 0; k < 20; ++k) {
            const auto x = test::random_point(rng, 2);
            EXPECT_TRUE(test::rel_close(at(shifted_after, x), at(from_shifted, x), 1e-10));
        }
    }
}
