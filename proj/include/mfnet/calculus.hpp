#pragma once

// Constructive closure properties of network functions: sums, depth lifts,
// compositions, |f|, max/min, and products through a quadrature of x^2.
// All constructions are carried out on raw-sum weights with explicit zero
// padding and converted back to the mean-field convention at the end.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mfnet/errors.hpp"
#include "mfnet/net.hpp"
#include "mfnet/norms.hpp"

namespace mfnet {

/// Vector-valued network f = (f_1, ..., f_k); components share depth and input dimension.
using VectorNet = std::vector<MeanFieldNet>;

/// Depth-L net computing the constant c: a bias-only neuron carried through
/// single-neuron identity layers.
inline MeanFieldNet constant_net(double c, std::size_t input_dim, std::size_t depth = 1) {
    std::vector<Matrix> raw;
    Matrix first(1, input_dim + 1);
    first(0, input_dim) = 1.0;
    raw.push_back(std::move(first));
    for (std::size_t l = 1; l < depth; ++l) raw.emplace_back(1, 1, 1.0);
    raw.emplace_back(1, 1, c);
    return MeanFieldNet::from_raw(input_dim, std::move(raw));
}

/// Depth-1 net on R^{in_dim} from raw rows (w, b) and raw outer weights.
inline MeanFieldNet shallow_net(std::size_t in_dim, const std::vector<std::vector<double>>& rows,
                                const std::vector<double>& outer) {
    Matrix inner(rows.size(), in_dim + 1);
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), inner.row(i).begin());
    return MeanFieldNet::from_raw(in_dim, {std::move(inner), Matrix(1, outer.size(), outer)});
}

/// z -> sigma(z) - sigma(-z) = z on R.
inline MeanFieldNet identity_net() { return shallow_net(1, {{1, 0}, {-1, 0}}, {1, -1}); }
inline MeanFieldNet abs_net() { return shallow_net(1, {{1, 0}, {-1, 0}}, {1, 1}); }
inline MeanFieldNet positive_part_net() { return shallow_net(1, {{1, 0}}, {1}); }
/// max(y1, y2) = y1 + sigma(y2 - y1), with y1 = sigma(y1) - sigma(-y1).
inline MeanFieldNet max_net() { return shallow_net(2, {{1, 0, 0}, {-1, 0, 0}, {-1, 1, 0}}, {1, -1, 1}); }
/// min(y1, y2) = y1 - sigma(y1 - y2).
inline MeanFieldNet min_net() { return shallow_net(2, {{1, 0, 0}, {-1, 0, 0}, {1, -1, 0}}, {1, -1, -1}); }

namespace detail {

inline Matrix block_diag(const std::vector<const Matrix*>& blocks) {
    std::size_t r = 0, c = 0;
    for (auto* b : blocks) {
        r += b->rows();
        c += b->cols();
    }
    Matrix out(r, c);
    std::size_t r0 = 0, c0 = 0;
    for (auto* b : blocks) {
        for (std::size_t i = 0; i < b->rows(); ++i)
            for (std::size_t j = 0; j < b->cols(); ++j) out(r0 + i, c0 + j) = (*b)(i, j);
        r0 += b->rows();
        c0 += b->cols();
    }
    return out;
}

inline Matrix stack_rows(const std::vector<const Matrix*>& blocks) {
    std::size_t r = 0;
    for (auto* b : blocks) r += b->rows();
    Matrix out(r, blocks.front()->cols());
    std::size_t r0 = 0;
    for (auto* b : blocks) {
        for (std::size_t i = 0; i < b->rows(); ++i) std::copy(b->row(i).begin(), b->row(i).end(), out.row(r0 + i).begin());
        r0 += b->rows();
    }
    return out;
}

}  // namespace detail

/// f + g as two parallel networks joined in the output layer.
inline MeanFieldNet add(const MeanFieldNet& f, const MeanFieldNet& g) {
    if (f.depth() != g.depth())
        throw DepthMismatch("add needs equal depths, got " + std::to_string(f.depth()) + " and " +
                            std::to_string(g.depth()));
    if (f.input_dim() != g.input_dim()) throw DimensionMismatch("add needs equal input dimensions");
    const auto rf = f.raw_layers();
    const auto rg = g.raw_layers();
    const std::size_t last = f.depth();
    std::vector<Matrix> raw;
    raw.push_back(detail::stack_rows({&rf[0], &rg[0]}));
    for (std::size_t l = 1; l < last; ++l) raw.push_back(detail::block_diag({&rf[l], &rg[l]}));
    Matrix outer(1, rf[last].cols() + rg[last].cols());
    std::copy(rf[last].values().begin(), rf[last].values().end(), outer.values().begin());
    std::copy(rg[last].values().begin(), rg[last].values().end(), outer.values().begin() + rf[last].cols());
    raw.push_back(std::move(outer));
    return MeanFieldNet::from_raw(f.input_dim(), std::move(raw));
}

/// Same function at depth L + extra via f = sigma(f) - sigma(-f); the two
/// nonnegative channels pass through identity layers unchanged. The raw
/// proxy exactly doubles.
inline MeanFieldNet lift_depth(const MeanFieldNet& f, std::size_t extra) {
    if (extra < 1) throw ShapeError("lift_depth needs extra >= 1");
    auto raw = f.raw_layers();
    const Matrix outer = raw.back();
    raw.pop_back();
    Matrix split(2, outer.cols());
    for (std::size_t j = 0; j < outer.cols(); ++j) {
        split(0, j) = outer(0, j);
        split(1, j) = -outer(0, j);
    }
    raw.push_back(std::move(split));
    for (std::size_t k = 1; k < extra; ++k) raw.emplace_back(2, 2, std::vector<double>{1, 0, 0, 1});
    raw.emplace_back(1, 2, std::vector<double>{1, -1});
    return MeanFieldNet::from_raw(f.input_dim(), std::move(raw));
}

/// g o (f_1, ..., f_k). The components run in parallel next to a constant-one
/// channel (for g's bias); g's first layer is merged with their output layers.
inline MeanFieldNet compose(const MeanFieldNet& g, const VectorNet& fs) {
    if (fs.empty()) throw ArityMismatch("compose needs at least one inner component");
    if (g.input_dim() != fs.size())
        throw ArityMismatch("outer net takes " + std::to_string(g.input_dim()) + " inputs, got " +
                            std::to_string(fs.size()) + " components");
    const std::size_t depth = fs.front().depth();
    const std::size_t d = fs.front().input_dim();
    for (const auto& f : fs) {
        if (f.depth() != depth) throw DepthMismatch("compose components must share depth");
        if (f.input_dim() != d) throw DimensionMismatch("compose components must share input dimension");
    }
    const std::size_t k = fs.size();
    std::vector<std::vector<Matrix>> rf;
    for (const auto& f : fs) rf.push_back(f.raw_layers());
    const MeanFieldNet one = constant_net(1.0, d, depth);
    const auto rone = one.raw_layers();

    std::vector<Matrix> raw;
    {
        std::vector<const Matrix*> parts;
        for (const auto& r : rf) parts.push_back(&r[0]);
        parts.push_back(&rone[0]);
        raw.push_back(detail::stack_rows(parts));
    }
    for (std::size_t l = 1; l < depth; ++l) {
        std::vector<const Matrix*> parts;
        for (const auto& r : rf) parts.push_back(&r[l]);
        parts.push_back(&rone[l]);
        raw.push_back(detail::block_diag(parts));
    }

    const auto rg = g.raw_layers();
    const Matrix& gin = rg[0];  // m^g_1 x (k + 1)
    std::size_t width = 1;
    for (const auto& r : rf) width += r[depth].cols();
    Matrix merged(gin.rows(), width);
    for (std::size_t t = 0; t < gin.rows(); ++t) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const Matrix& outer = rf[i][depth];
            for (std::size_t s = 0; s < outer.cols(); ++s) merged(t, off + s) = gin(t, i) * outer(0, s);
            off += outer.cols();
        }
        merged(t, off) = gin(t, k);
    }
    raw.push_back(std::move(merged));
    for (std::size_t l = 1; l < rg.size(); ++l) raw.push_back(rg[l]);
    return MeanFieldNet::from_raw(d, std::move(raw));
}

/// Path-proxy bound for compose(g, fs): proxy(g) * max(1, sum_i proxy(f_i)).
/// The max with one accounts for the constant channel feeding g's bias.
inline double compose_proxy_bound(const MeanFieldNet& g, const VectorNet& fs) {
    double s = 0.0;
    for (const auto& f : fs) s += path_norm_proxy(f);
    return path_norm_proxy(g) * std::max(1.0, s);
}

inline MeanFieldNet abs_of(const MeanFieldNet& f) { return compose(abs_net(), {f}); }
inline MeanFieldNet positive_part_of(const MeanFieldNet& f) { return compose(positive_part_net(), {f}); }
inline MeanFieldNet max_of(const MeanFieldNet& f, const MeanFieldNet& g) { return compose(max_net(), {f, g}); }
inline MeanFieldNet min_of(const MeanFieldNet& f, const MeanFieldNet& g) { return compose(min_net(), {f, g}); }

/// Midpoint nodes of the uniform grid on [0, M].
inline std::vector<double> midpoint_nodes(double bound, std::size_t n) {
    std::vector<double> xi(n);
    for (std::size_t j = 0; j < n; ++j) xi[j] = (static_cast<double>(j) + 0.5) * bound / static_cast<double>(n);
    return xi;
}

/// sigma(z)^2 = int_0^M 2 sigma(z - xi) dxi for z <= M, by the midpoint rule.
/// The integrand is linear in xi except for one kink, so only the cell
/// containing z contributes error; it is at most M^2 / (4 n^2).
inline MeanFieldNet square_barron(double bound, std::size_t n) {
    if (!(bound > 0.0)) throw Error("square_barron needs a positive bound");
    if (n < 2) throw Error("square_barron needs at least two quadrature points");
    std::vector<std::vector<double>> rows;
    for (double xi : midpoint_nodes(bound, n)) rows.push_back({1.0, -xi});
    return shallow_net(1, rows, std::vector<double>(n, 2.0 * bound / static_cast<double>(n)));
}

/// Tight sup error of square_barron on [-M, M].
inline double square_error_bound(double bound, std::size_t n) {
    const double nn = static_cast<double>(n);
    return bound * bound / (4.0 * nn * nn);
}

/// Error budget stated for square_barron: M^2 / (4n).
inline double square_error_budget(double bound, std::size_t n) {
    return bound * bound / (4.0 * static_cast<double>(n));
}

/// Depth-1 net on R^2 approximating y1*y2 = ((y1+y2)^2 - (y1-y2)^2) / 4 for
/// |y1|, |y2| <= bound. z^2 = sigma(z)^2 + sigma(-z)^2 with each square
/// realized by the midpoint quadrature on [0, 2*bound].
inline MeanFieldNet product_net(double bound, std::size_t n) {
    if (!(bound > 0.0)) throw Error("product_net needs a positive bound");
    if (n < 2) throw Error("product_net needs at least two quadrature points");
    const double m = 2.0 * bound;
    const double c = 0.25 * 2.0 * m / static_cast<double>(n);
    std::vector<std::vector<double>> rows;
    std::vector<double> outer;
    // Paired rows share preactivations when y2 == 0, so the output cancels exactly.
    for (double xi : midpoint_nodes(m, n)) {
        rows.push_back({1, 1, -xi});
        outer.push_back(c);
        rows.push_back({1, -1, -xi});
        outer.push_back(-c);
        rows.push_back({-1, -1, -xi});
        outer.push_back(c);
        rows.push_back({-1, 1, -xi});
        outer.push_back(-c);
    }
    return shallow_net(2, rows, outer);
}

inline MeanFieldNet product_of(const MeanFieldNet& f, const MeanFieldNet& g, double bound, std::size_t n) {
    return compose(product_net(bound, n), {f, g});
}

/// Tight sup error of product_of when |f|, |g| <= bound: (2B)^2 / (8 n^2).
inline double product_error_bound(double bound, std::size_t n) {
    const double nn = static_cast<double>(n);
    return 4.0 * bound * bound / (8.0 * nn * nn);
}

/// Error budget stated for product_of: 2 (2B)^2 / (4n).
inline double product_error_budget(double bound, std::size_t n) {
    return 2.0 * 4.0 * bound * bound / (4.0 * static_cast<double>(n));
}

}  // namespace mfnet
