#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mfnet/datagen.hpp"
#include "mfnet/norms.hpp"
#include "support.hpp"

using namespace mfnet;
using mfnet::test::Engine;

namespace {

MeanFieldNet single_neuron() { return MeanFieldNet(1, {Matrix(1, 2, {3, 1}), Matrix(1, 1, {2})}); }

}  // namespace

TEST(PathNormProxy, SingleNeuron) { EXPECT_DOUBLE_EQ(path_norm_proxy(single_neuron()), 4.0); }

TEST(PathNormProxy, ZeroLayerAnnihilates) {
    Engine rng(1);
    auto net = test::random_test_net(rng, 2, {3, 4});
    net = scale_layer(net, 1, 0.0);
    EXPECT_EQ(path_norm_proxy(net), 0.0);
}

TEST(PathNormProxy, MatchesEighteenPathEnumeration) {
    Engine rng(2);
    const auto net = test::random_test_net(rng, 2, {3, 2});
    EXPECT_EQ(test::path_count(net), 18u);
    EXPECT_TRUE(test::rel_close(path_norm_proxy(net), test::brute_force_proxy(net), 1e-12));
}

TEST(PathNormProxy, MatchesBruteForceOnRandomNets) {
    Engine rng(3);
    for (int k = 0; k < 25; ++k) {
        const auto net = test::random_shape_net(rng, 3, 6, 3);
        EXPECT_TRUE(test::rel_close(path_norm_proxy(net), test::brute_force_proxy(net), 1e-12));
    }
}

TEST(PathNormProxy, InvariantUnderUnitProductRescaling) {
    Engine rng(4);
    const auto net = test::random_test_net(rng, 2, {3, 3});
    const auto scaled = scale_layer(scale_layer(net, 0, 3.0), 2, 1.0 / 3.0);
    EXPECT_TRUE(test::rel_close(path_norm_proxy(scaled), path_norm_proxy(net), 1e-12));
}

TEST(PathNormProxyTree, Examples) {
    EXPECT_EQ(path_norm_proxy_tree(NeuralTree(1, {1}, {{3, 1}, {1}})), 4.0);
    const NeuralTree ones(1, {2, 2}, {std::vector<double>(8, 1.0), std::vector<double>(4, 1.0), std::vector<double>(2, 1.0)});
    EXPECT_EQ(path_norm_proxy_tree(ones), 8.0);
}

TEST(HilbertComplexity, SingleNeuronByHand) {
    const auto r = hilbert_complexity(single_neuron());
    EXPECT_DOUBLE_EQ(r.proxy, 4.0);
    ASSERT_EQ(r.per_layer_l2.size(), 2u);
    EXPECT_DOUBLE_EQ(r.per_layer_l2[0], std::sqrt(5.0));
    EXPECT_DOUBLE_EQ(r.per_layer_l2[1], 2.0);
    EXPECT_DOUBLE_EQ(r.hilbert_Q, 2.0 * std::sqrt(5.0));
    EXPECT_LE(r.proxy, r.hilbert_Q);
}

TEST(HilbertComplexity, ConstantWeightsAttainEquality) {
    const double c = 1.7;
    const MeanFieldNet net(2, {Matrix(4, 3, c), Matrix(3, 4, c), Matrix(1, 3, c)});
    const auto r = hilbert_complexity(net);
    EXPECT_TRUE(test::rel_close(r.proxy, std::pow(c, 3), 1e-12));
    EXPECT_TRUE(test::rel_close(r.hilbert_Q, std::pow(c, 3), 1e-12));
}

TEST(HilbertComplexity, ProxyNeverExceedsQ) {
    Engine rng(5);
    for (int k = 0; k < 100; ++k) {
        const auto r = hilbert_complexity(test::random_shape_net(rng, 4, 8, 5));
        EXPECT_LE(r.proxy, r.hilbert_Q * (1.0 + 1e-9));
    }
}

TEST(HilbertComplexity, CsvRow) {
    std::ostringstream os;
    write_report_header(os, 1);
    write_report_row(os, hilbert_complexity(single_neuron()));
    EXPECT_EQ(os.str(), "proxy,Q,norm_l0,norm_l1\n4,4.47213595499958,2.23606797749979,2\n");
}

TEST(Balance, EqualNormsSameFunction) {
    Engine rng(6);
    const auto net = test::random_test_net(rng, 2, {4, 3});
    const auto b = balance(net);
    const auto r0 = hilbert_complexity(net);
    const auto r1 = hilbert_complexity(b);
    const double target = std::pow(r0.hilbert_Q, 1.0 / 3.0);
    for (double n : r1.per_layer_l2) EXPECT_TRUE(test::rel_close(n, target, 1e-12));
    EXPECT_TRUE(test::rel_close(r1.hilbert_Q, r0.hilbert_Q, 1e-12));
    for (int p = 0; p < 50; ++p) {
        const auto x = test::random_point(rng, 2);
        EXPECT_TRUE(test::rel_close(forward_net(b, x), forward_net(net, x), 1e-12));
    }
}

TEST(Balance, SingleNeuronByHand) {
    const auto b = balance(single_neuron());
    const double target = std::sqrt(2.0 * std::sqrt(5.0));
    EXPECT_NEAR(target, 2.115, 5e-4);
    for (double n : hilbert_complexity(b).per_layer_l2) EXPECT_TRUE(test::rel_close(n, target, 1e-12));
    EXPECT_TRUE(test::rel_close(forward_net(b, std::vector<double>{1.0}), 4.0, 1e-12));
}

TEST(Balance, FixedPointAndOrbitInvariance) {
    Engine rng(7);
    const auto net = test::random_test_net(rng, 2, {3, 3});
    const auto b = balance(net);
    const auto bb = balance(b);
    for (std::size_t l = 0; l < b.num_layers(); ++l)
        for (std::size_t k = 0; k < b.layer(l).size(); ++k)
            EXPECT_TRUE(test::rel_close(bb.layer(l).values()[k], b.layer(l).values()[k], 1e-12));
    const auto moved = scale_layer(scale_layer(net, 0, 5.0), 1, 0.2);
    const auto bm = balance(moved);
    for (std::size_t l = 0; l < b.num_layers(); ++l)
        for (std::size_t k = 0; k < b.layer(l).size(); ++k)
            EXPECT_TRUE(test::rel_close(bm.layer(l).values()[k], b.layer(l).values()[k], 1e-12));
}

TEST(Balance, ZeroLayerIsAnError) {
    Engine rng(8);
    EXPECT_THROW(balance(scale_layer(test::random_test_net(rng, 2, {3}), 0, 0.0)), ZeroLayer);
}

TEST(Balance, ArgmaxOnGridUnchanged) {
    Engine rng(9);
    const auto net = test::random_test_net(rng, 1, {6, 4});
    const auto b = balance(net);
    std::size_t a0 = 0, a1 = 0;
    double m0 = -INFINITY, m1 = -INFINITY;
    for (std::size_t i = 0; i <= 200; ++i) {
        const std::vector<double> x{-1.0 + 0.01 * static_cast<double>(i)};
        const double f0 = forward_net(net, x), f1 = forward_net(b, x);
        if (f0 > m0) m0 = f0, a0 = i;
        if (f1 > m1) m1 = f1, a1 = i;
    }
    EXPECT_EQ(a0, a1);
}

TEST(DhwUpper, IdentitySymmetryMismatch) {
    Engine rng(10);
    const auto f = test::random_test_net(rng, 2, {3, 2});
    const auto g = test::random_test_net(rng, 2, {3, 2});
    EXPECT_EQ(d_hw_upper(f, f), 0.0);
    EXPECT_DOUBLE_EQ(d_hw_upper(f, g), d_hw_upper(g, f));
    EXPECT_THROW(d_hw_upper(f, test::random_test_net(rng, 2, {3, 3})), ArchitectureMismatch);
    EXPECT_THROW(d_hw_upper(f, scale_layer(g, 0, 0.0)), ZeroLayer);
}

TEST(DhwUpper, LinearInSmallOuterPerturbation) {
    Engine rng(11);
    const auto f = test::random_test_net(rng, 2, {1, 1}, 0.5, 1.5);
    std::vector<double> ratios;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        auto layers = f.layers();
        layers.back()(0, 0) += eps;
        const MeanFieldNet g(2, layers);
        ratios.push_back(d_hw_upper(f, g) / eps);
    }
    EXPECT_NEAR(ratios[1] / ratios[2], 1.0, 1e-2);
    EXPECT_NEAR(ratios[0] / ratios[2], 1.0, 5e-2);
}

TEST(DhwUpper, DisjointSupportsMatchDirectFormula) {
    // f uses only neuron 0 of each layer, g only neuron 1.
    const MeanFieldNet f(1, {Matrix(2, 2, {1, 2, 0, 0}), Matrix(1, 2, {3, 0})});
    const MeanFieldNet g(1, {Matrix(2, 2, {0, 0, 2, 1}), Matrix(1, 2, {0, 1})});
    const auto bf = balance(f), bg = balance(g);
    double expected = 0.0;
    for (std::size_t l = 0; l < 2; ++l) {
        double s = 0.0;
        for (std::size_t k = 0; k < bf.layer(l).size(); ++k) {
            const double a = bf.layer(l).values()[k], b = bg.layer(l).values()[k];
            s += a * a + b * b;  // supports are disjoint
        }
        expected += std::sqrt(s / static_cast<double>(bf.layer(l).size()));
    }
    EXPECT_TRUE(test::rel_close(d_hw_upper(f, g), expected, 1e-12));
}

TEST(Lipschitz, ZeroNetAndSingleNeuron) {
    const MeanFieldNet zero(1, {Matrix(1, 2, 0.0), Matrix(1, 1, 0.0)});
    const DataDistribution cube{DistributionKind::uniform_cube, 1, 1.0};
    EXPECT_TRUE(lipschitz_bound_check(zero, cube, 100, 1));
    EXPECT_TRUE(lipschitz_bound_check(single_neuron(), cube, 1000, 2));
    // Exhaustive grid: the true constant is 3, below the proxy 4.
    const auto f = single_neuron();
    double worst = 0.0;
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j < i; ++j) {
            const double x = -1 + 0.02 * i, y = -1 + 0.02 * j;
            const double q = std::abs(forward_net(f, std::vector<double>{x}) - forward_net(f, std::vector<double>{y})) / (x - y);
            worst = std::max(worst, q);
        }
    EXPECT_NEAR(worst, 3.0, 1e-9);
    EXPECT_LE(worst, path_norm_proxy(f));
}

TEST(Lipschitz, RandomNets) {
    Engine rng(12);
    for (int k = 0; k < 20; ++k) {
        const auto net = test::random_shape_net(rng, 3, 6, 4);
        const DataDistribution cube{DistributionKind::uniform_cube, net.input_dim(), 1.0};
        EXPECT_TRUE(lipschitz_bound_check(net, cube, 1000, static_cast<std::uint64_t>(k)));
    }
}
