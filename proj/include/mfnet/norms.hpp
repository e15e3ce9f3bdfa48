#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "mfnet/errors.hpp"
#include "mfnet/format.hpp"
#include "mfnet/net.hpp"
#include "mfnet/tree.hpp"

namespace mfnet {

/// Forward DP on absolute weights: v^0 = 1 on the augmented input,
/// v^{l+1} = (1/cols) |A^l| v^l. Returns v^{L+1}, the averaged sum of
/// |a^L ... a^0| over all input-to-output paths.
///
/// Because the stored weights divided by their fan-in are the raw weights,
/// the same number is the raw-sum path proxy of the realized function.
inline double path_norm_proxy(const MeanFieldNet& net) {
    std::vector<double> v(net.input_dim() + 1, 1.0);
    std::vector<double> next;
    for (const Matrix& a : net.layers()) {
        next.assign(a.rows(), 0.0);
        const double fan_in = static_cast<double>(a.cols());
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            auto row = a.row(i);
            for (std::size_t j = 0; j < a.cols(); ++j) s += std::abs(row[j]) * v[j];
            next[i] = s / fan_in;
        }
        std::swap(v, next);
    }
    return v[0];
}

/// Bottom-up DP over a tree; equals the raw sum over all root-to-leaf paths.
inline double path_norm_proxy_tree(const NeuralTree& tree) {
    const std::size_t cols = tree.input_dim() + 1;
    const auto w0 = tree.level(0);
    std::vector<double> u(tree.nodes_at(1));
    for (std::size_t p = 0; p < u.size(); ++p) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += std::abs(w0[p * cols + j]);
        u[p] = s;
    }
    std::vector<double> up;
    for (std::size_t l = 1; l <= tree.depth(); ++l) {
        const std::size_t b = tree.branch(l);
        const auto w = tree.level(l);
        up.assign(u.size() / b, 0.0);
        for (std::size_t p = 0; p < up.size(); ++p) {
            double s = 0.0;
            for (std::size_t c = 0; c < b; ++c) s += std::abs(w[p * b + c]) * u[p * b + c];
            up[p] = s;
        }
        std::swap(u, up);
    }
    return u[0];
}

/// Probability-normalized L2 norm of a layer: sqrt(sum a^2 / (rows * cols)).
inline double layer_l2(const Matrix& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s / static_cast<double>(a.rows() * a.cols()));
}

struct PathNormReport {
    double proxy = 0.0;
    std::vector<double> per_layer_l2;  // index l = 0..L
    double hilbert_Q = 0.0;
};

/// Path proxy together with the Hilbert-weight complexity Q = prod_l ||a^l||.
/// Cauchy-Schwarz across alternating layers gives proxy <= Q.
inline PathNormReport hilbert_complexity(const MeanFieldNet& net) {
    PathNormReport r;
    r.proxy = path_norm_proxy(net);
    r.hilbert_Q = 1.0;
    for (const Matrix& a : net.layers()) {
        r.per_layer_l2.push_back(layer_l2(a));
        r.hilbert_Q *= r.per_layer_l2.back();
    }
    return r;
}

inline void write_report_header(std::ostream& os, std::size_t depth) {
    os << "proxy,Q";
    for (std::size_t l = 0; l <= depth; ++l) os << ",norm_l" << l;
    os << '\n';
}

inline void write_report_row(std::ostream& os, const PathNormReport& r) {
    os << format_double(r.proxy) << ',' << format_double(r.hilbert_Q);
    for (double n : r.per_layer_l2) os << ',' << format_double(n);
    os << '\n';
}

/// Rescales every layer to L2 norm Q^{1/(L+1)}. The product of the scale
/// factors is one, so the realized function and Q are unchanged.
inline MeanFieldNet balance(const MeanFieldNet& net) {
    const PathNormReport r = hilbert_complexity(net);
    for (std::size_t l = 0; l < r.per_layer_l2.size(); ++l)
        if (r.per_layer_l2[l] == 0.0)
            throw ZeroLayer("layer " + std::to_string(l) + " is identically zero; balancing is undefined");
    // Geometric mean in log space avoids overflow of the product for deep nets.
    double log_target = 0.0;
    for (double n : r.per_layer_l2) log_target += std::log(n);
    log_target /= static_cast<double>(r.per_layer_l2.size());
    const double target = std::exp(log_target);
    std::vector<Matrix> layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const double s = target / r.per_layer_l2[l];
        for (double& v : layers[l].values()) v *= s;
    }
    return MeanFieldNet(net.input_dim(), std::move(layers));
}

/// Upper bound on the Hilbert-weight distance: both nets are balanced at
/// their given representation and layer differences are summed. No search
/// over other representations of the same functions is attempted.
inline double d_hw_upper(const MeanFieldNet& f, const MeanFieldNet& g) {
    if (f.input_dim() != g.input_dim() || f.widths() != g.widths())
        throw ArchitectureMismatch("d_hw_upper needs identical depth, widths and input dimension");
    const MeanFieldNet bf = balance(f);
    const MeanFieldNet bg = balance(g);
    double total = 0.0;
    for (std::size_t l = 0; l < bf.num_layers(); ++l) {
        const auto& a = bf.layer(l).values();
        const auto& b = bg.layer(l).values();
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        total += std::sqrt(s / static_cast<double>(a.size()));
    }
    return total;
}

/// Samples n_pairs pairs from `sample_point` and checks
/// |f(x) - f(y)| <= proxy * |x - y|_inf + 1e-9 for each.
template <class PointSampler>
bool lipschitz_bound_check(const MeanFieldNet& net, PointSampler&& sample_point, std::size_t n_pairs) {
    const double proxy = path_norm_proxy(net);
    for (std::size_t k = 0; k < n_pairs; ++k) {
        const std::vector<double> x = sample_point();
        const std::vector<double> y = sample_point();
        double dist = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) dist = std::max(dist, std::abs(x[j] - y[j]));
        if (std::abs(forward_net(net, x) - forward_net(net, y)) > proxy * dist + 1e-9) return false;
    }
    return true;
}

}  // namespace mfnet
