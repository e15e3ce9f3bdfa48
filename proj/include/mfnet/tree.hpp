#pragma once

// Neural trees: networks in which every node owns its descendants' weights.
//
// Level l (1 <= l <= L-1) stores one weight per index tuple (i_L, ..., i_l),
// flattened row-major with i_L most significant; level L stores a^L_{i_L};
// level 0 stores a^0_{i_L ... i_1 i_0} with i_0 running over the d+1
// augmented input coordinates. Evaluation uses raw sums.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfnet/errors.hpp"
#include "mfnet/matrix.hpp"
#include "mfnet/net.hpp"

namespace mfnet {

class NeuralTree {
public:
    NeuralTree() = default;

    /// `branching` is (b_1, ..., b_L); `levels[l]` holds level-l weights.
    NeuralTree(std::size_t input_dim, std::vector<std::size_t> branching,
               std::vector<std::vector<double>> levels)
        : input_dim_(input_dim), branching_(std::move(branching)), levels_(std::move(levels)) {
        if (input_dim_ < 1) throw ShapeError("input_dim must be >= 1");
        if (branching_.empty()) throw ShapeError("tree depth must be >= 1");
        if (levels_.size() != branching_.size() + 1) throw ShapeError("tree needs depth + 1 weight levels");
        for (std::size_t b : branching_)
            if (b == 0) throw ShapeError("branching factors must be >= 1");
        for (std::size_t l = 0; l < levels_.size(); ++l)
            if (levels_[l].size() != level_size(l))
                throw ShapeError("tree level " + std::to_string(l) + " has " + std::to_string(levels_[l].size()) +
                                 " weights, expected " + std::to_string(level_size(l)));
    }

    std::size_t depth() const { return branching_.size(); }
    std::size_t input_dim() const { return input_dim_; }
    const std::vector<std::size_t>& branching() const { return branching_; }
    std::size_t branch(std::size_t l) const { return branching_.at(l - 1); }

    /// Number of index tuples (i_L, ..., i_l) for 1 <= l <= L + 1 (1 for l = L + 1).
    std::size_t nodes_at(std::size_t l) const {
        std::size_t n = 1;
        for (std::size_t k = l; k <= depth(); ++k) n *= branch(k);
        return n;
    }

    std::size_t level_size(std::size_t l) const {
        return l == 0 ? nodes_at(1) * (input_dim_ + 1) : nodes_at(l);
    }

    std::span<const double> level(std::size_t l) const { return levels_.at(l); }
    const std::vector<std::vector<double>>& levels() const { return levels_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& lv : levels_) n += lv.size();
        return n;
    }

    friend bool operator==(const NeuralTree&, const NeuralTree&) = default;

private:
    std::size_t input_dim_ = 0;
    std::vector<std::size_t> branching_;
    std::vector<std::vector<double>> levels_;
};

/// Raw-sum evaluation. Cost is linear in the number of stored weights.
inline double forward_tree(const NeuralTree& tree, std::span<const double> x) {
    if (x.size() != tree.input_dim())
        throw DimensionMismatch("point has dimension " + std::to_string(x.size()) + ", tree expects " +
                                std::to_string(tree.input_dim()));
    const std::size_t cols = tree.input_dim() + 1;
    const auto w0 = tree.level(0);
    std::vector<double> z(tree.nodes_at(1));
    for (std::size_t p = 0; p < z.size(); ++p) {
        double s = 0.0;
        for (std::size_t j = 0; j < tree.input_dim(); ++j) s += w0[p * cols + j] * x[j];
        z[p] = s + w0[p * cols + tree.input_dim()];
    }
    std::vector<double> up;
    for (std::size_t l = 1; l <= tree.depth(); ++l) {
        const std::size_t b = tree.branch(l);
        const auto w = tree.level(l);
        up.assign(z.size() / b, 0.0);
        for (std::size_t p = 0; p < up.size(); ++p) {
            double s = 0.0;
            for (std::size_t c = 0; c < b; ++c) s += w[p * b + c] * relu(z[p * b + c]);
            up[p] = s;
        }
        std::swap(z, up);
    }
    return z[0];
}

/// Removes parameter sharing: each weight is copied under every ancestor index,
/// with the mean-field normalizers folded in.
inline NeuralTree net_to_tree(const MeanFieldNet& net) {
    const std::size_t depth = net.depth();
    const std::vector<std::size_t> branching = net.widths();
    std::vector<std::vector<double>> levels(depth + 1);
    const std::vector<Matrix> raw = net.raw_layers();

    auto nodes_at = [&](std::size_t l) {
        std::size_t n = 1;
        for (std::size_t k = l; k <= depth; ++k) n *= branching[k - 1];
        return n;
    };

    const std::size_t cols = net.input_dim() + 1;
    levels[0].resize(nodes_at(1) * cols);
    for (std::size_t q = 0; q < levels[0].size(); ++q) {
        const std::size_t i0 = q % cols;
        const std::size_t i1 = (q / cols) % branching[0];
        levels[0][q] = raw[0](i1, i0);
    }
    for (std::size_t l = 1; l < depth; ++l) {
        levels[l].resize(nodes_at(l));
        const std::size_t bl = branching[l - 1];
        const std::size_t bl1 = branching[l];
        for (std::size_t q = 0; q < levels[l].size(); ++q) levels[l][q] = raw[l](q / bl % bl1, q % bl);
    }
    auto outer = raw[depth].row(0);
    levels[depth].assign(outer.begin(), outer.end());
    return NeuralTree(net.input_dim(), branching, std::move(levels));
}

/// Flattens a tree into a network of widths m_l = b_l * ... * b_L. Unshared
/// connections are listed as explicit zeros, giving block-diagonal layers.
inline MeanFieldNet tree_to_net(const NeuralTree& tree) {
    const std::size_t depth = tree.depth();
    const std::size_t cols = tree.input_dim() + 1;
    std::vector<Matrix> raw;
    raw.emplace_back(tree.nodes_at(1), cols,
                     std::vector<double>(tree.level(0).begin(), tree.level(0).end()));
    for (std::size_t l = 1; l < depth; ++l) {
        const std::size_t b = tree.branch(l);
        Matrix m(tree.nodes_at(l + 1), tree.nodes_at(l));
        const auto w = tree.level(l);
        for (std::size_t p = 0; p < m.rows(); ++p)
            for (std::size_t c = 0; c < b; ++c) m(p, p * b + c) = w[p * b + c];
        raw.push_back(std::move(m));
    }
    raw.emplace_back(1, tree.nodes_at(depth),
                     std::vector<double>(tree.level(depth).begin(), tree.level(depth).end()));
    return MeanFieldNet::from_raw(tree.input_dim(), std::move(raw));
}

}  // namespace mfnet
