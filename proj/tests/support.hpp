#pragma once

// Independent oracles and random instances shared by the test suites.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mfnet/matrix.hpp"
#include "mfnet/net.hpp"

namespace mfnet::test {

using Engine = std::mt19937_64;

inline Matrix random_matrix(Engine& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = u(rng);
    return m;
}

/// Stored-convention net with U[lo, hi] weights.
inline MeanFieldNet random_test_net(Engine& rng, std::size_t d, const std::vector<std::size_t>& widths,
                                    double lo = -1.0, double hi = 1.0) {
    std::vector<Matrix> layers;
    std::size_t cols = d + 1;
    for (std::size_t w : widths) {
        layers.push_back(random_matrix(rng, w, cols, lo, hi));
        cols = w;
    }
    layers.push_back(random_matrix(rng, 1, cols, lo, hi));
    return MeanFieldNet(d, std::move(layers));
}

/// Random depth in [1, max_depth], widths in [1, max_width], d in [1, max_d].
inline MeanFieldNet random_shape_net(Engine& rng, std::size_t max_depth, std::size_t max_width, std::size_t max_d) {
    std::uniform_int_distribution<std::size_t> depth(1, max_depth), width(1, max_width), dim(1, max_d);
    std::vector<std::size_t> widths(depth(rng));
    for (auto& w : widths) w = width(rng);
    return random_test_net(rng, dim(rng), widths);
}

inline std::vector<double> random_point(Engine& rng, std::size_t d, double radius = 1.0) {
    std::uniform_real_distribution<double> u(-radius, radius);
    std::vector<double> x(d);
    for (double& v : x) v = u(rng);
    return x;
}

/// Neuron-by-neuron recursion straight from the nested-average definition,
/// with no shared intermediate state: the value of hidden neuron i at layer
/// l is recomputed from scratch every time it is needed.
inline double oracle_neuron(const MeanFieldNet& net, std::size_t l, std::size_t i, const std::vector<double>& x) {
    // l indexes hidden layers 1..L; neuron i at layer l reads layer l-1's matrix.
    const Matrix& a = net.layer(l - 1);
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        const double in = (l == 1) ? (j < x.size() ? x[j] : 1.0) : oracle_neuron(net, l - 1, j, x);
        s += a(i, j) * in;
    }
    s /= static_cast<double>(a.cols());
    return s > 0.0 ? s : 0.0;
}

inline double oracle_forward(const MeanFieldNet& net, const std::vector<double>& x) {
    const std::size_t depth = net.depth();
    const Matrix& outer = net.layer(depth);
    double s = 0.0;
    for (std::size_t j = 0; j < outer.cols(); ++j) s += outer(0, j) * oracle_neuron(net, depth, j, x);
    return s / static_cast<double>(outer.cols());
}

/// Sum over every input-to-output index path of prod |a^l| / cols_l,
/// enumerated with an odometer over (i_0, i_1, ..., i_L).
inline double brute_force_proxy(const MeanFieldNet& net) {
    const std::size_t nl = net.num_layers();
    std::vector<std::size_t> extent(nl + 1);  // extent[l] = size of index i_l
    extent[0] = net.input_dim() + 1;
    for (std::size_t l = 0; l < nl; ++l) extent[l + 1] = net.layer(l).rows();
    std::vector<std::size_t> idx(nl + 1, 0);
    double total = 0.0;
    while (true) {
        double prod = 1.0;
        for (std::size_t l = 0; l < nl; ++l) {
            const Matrix& a = net.layer(l);
            prod *= std::abs(a(idx[l + 1], idx[l])) / static_cast<double>(a.cols());
        }
        total += prod;
        std::size_t k = 0;
        while (k <= nl && ++idx[k] == extent[k]) idx[k++] = 0;
        if (k > nl) break;
    }
    return total;
}

inline std::size_t path_count(const MeanFieldNet& net) {
    std::size_t n = net.input_dim() + 1;
    for (auto w : net.widths()) n *= w;
    return n;
}

inline bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * (1.0 + std::abs(b)); }

}  // namespace mfnet::test
