#pragma once

// Finite-width mean-field ReLU networks.
//
// A depth-L network on R^d stores L+1 layer matrices. Layer 0 maps the
// augmented input (x, 1) to the first hidden layer, layers 1..L-1 connect
// hidden layers, and layer L is a 1 x m_L row holding the output weights.
// Every layer sum is an average: the preactivation of layer l+1 is
// (1/cols) * A^l h^l, so a net with all weights equal to c computes
// c^(L+1) * (mean of x, 1) patterns rather than sums that grow with width.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfnet/errors.hpp"
#include "mfnet/matrix.hpp"

namespace mfnet {

class MeanFieldNet {
public:
    MeanFieldNet() = default;

    /// `layers[l]` is stored in the mean-field convention. Throws ShapeError
    /// on inconsistent shapes or non-finite entries.
    MeanFieldNet(std::size_t input_dim, std::vector<Matrix> layers)
        : input_dim_(input_dim), layers_(std::move(layers)) {
        validate();
    }

    /// Builds a net from raw-sum weights (no 1/m division at evaluation).
    static MeanFieldNet from_raw(std::size_t input_dim, std::vector<Matrix> raw_layers) {
        for (auto& layer : raw_layers) {
            const double c = static_cast<double>(layer.cols());
            for (double& v : layer.values()) v *= c;
        }
        return MeanFieldNet(input_dim, std::move(raw_layers));
    }

    std::size_t depth() const { return layers_.size() - 1; }
    std::size_t input_dim() const { return input_dim_; }

    /// Hidden widths (m_1, ..., m_L).
    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w;
        for (std::size_t l = 0; l + 1 < layers_.size(); ++l) w.push_back(layers_[l].rows());
        return w;
    }

    std::size_t num_layers() const { return layers_.size(); }
    const Matrix& layer(std::size_t l) const { return layers_.at(l); }
    const std::vector<Matrix>& layers() const { return layers_; }
    std::span<const double> outer() const { return layers_.back().row(0); }

    /// Raw-sum view of layer l: stored weights divided by the layer's fan-in.
    Matrix raw_layer(std::size_t l) const {
        Matrix m = layers_.at(l);
        const double c = static_cast<double>(m.cols());
        for (double& v : m.values()) v /= c;
        return m;
    }

    std::vector<Matrix> raw_layers() const {
        std::vector<Matrix> out;
        out.reserve(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) out.push_back(raw_layer(l));
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& m : layers_) n += m.size();
        return n;
    }

    friend bool operator==(const MeanFieldNet&, const MeanFieldNet&) = default;

private:
    void validate() const {
        if (input_dim_ < 1) throw ShapeError("input_dim must be >= 1");
        if (layers_.size() < 2) throw ShapeError("a net needs depth >= 1 (at least two layers)");
        if (layers_.front().cols() != input_dim_ + 1)
            throw ShapeError("layer 0 must have input_dim + 1 columns");
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const Matrix& m = layers_[l];
            if (m.rows() == 0 || m.cols() == 0) throw ShapeError("empty layer " + std::to_string(l));
            if (m.values().size() != m.rows() * m.cols())
                throw ShapeError("layer " + std::to_string(l) + " storage does not match its shape");
            if (l > 0 && m.cols() != layers_[l - 1].rows())
                throw ShapeError("layer " + std::to_string(l) + " fan-in does not match previous width");
            for (double v : m.values())
                if (!std::isfinite(v)) throw ShapeError("non-finite weight in layer " + std::to_string(l));
        }
        if (layers_.back().rows() != 1) throw ShapeError("outer layer must be a single row");
    }

    std::size_t input_dim_ = 0;
    std::vector<Matrix> layers_;
};

/// Returns (x, 1).
inline std::vector<double> augment(std::span<const double> x) {
    std::vector<double> h(x.begin(), x.end());
    h.push_back(1.0);
    return h;
}

/// Mean-field forward pass. Cost is linear in the number of weights.
inline double forward_net(const MeanFieldNet& net, std::span<const double> x) {
    if (x.size() != net.input_dim())
        throw DimensionMismatch("point has dimension " + std::to_string(x.size()) + ", net expects " +
                                std::to_string(net.input_dim()));
    std::vector<double> h = augment(x);
    std::vector<double> next;
    const std::size_t last = net.num_layers() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
        const Matrix& a = net.layer(l);
        const double fan_in = static_cast<double>(a.cols());
        next.assign(a.rows(), 0.0);
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            auto row = a.row(i);
            for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * h[j];
            s /= fan_in;
            next[i] = (l == last) ? s : relu(s);
        }
        std::swap(h, next);
    }
    return h[0];
}

/// Multiplies layer l by `factor`.
inline MeanFieldNet scale_layer(const MeanFieldNet& net, std::size_t l, double factor) {
    std::vector<Matrix> layers = net.layers();
    for (double& v : layers.at(l).values()) v *= factor;
    return MeanFieldNet(net.input_dim(), std::move(layers));
}

inline MeanFieldNet negate(const MeanFieldNet& net) { return scale_layer(net, net.depth(), -1.0); }

/// Returns g with g(x) = net(x + shift); only the layer-0 bias column changes.
inline MeanFieldNet translate_input(const MeanFieldNet& net, std::span<const double> shift) {
    if (shift.size() != net.input_dim()) throw DimensionMismatch("shift dimension mismatch");
    std::vector<Matrix> layers = net.layers();
    Matrix& a0 = layers[0];
    const std::size_t d = net.input_dim();
    for (std::size_t i = 0; i < a0.rows(); ++i) {
        double b = a0(i, d);
        for (std::size_t j = 0; j < d; ++j) b += a0(i, j) * shift[j];
        a0(i, d) = b;
    }
    return MeanFieldNet(net.input_dim(), std::move(layers));
}

/// Copies every hidden neuron `factor` times. Under mean-field averaging the
/// realized function is unchanged and the weight step functions are identical.
inline MeanFieldNet replicate_neurons(const MeanFieldNet& net, std::size_t factor) {
    if (factor < 1) throw ShapeError("replication factor must be >= 1");
    std::vector<Matrix> layers;
    const std::size_t last = net.num_layers() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
        const Matrix& a = net.layer(l);
        const std::size_t rf = (l == last) ? 1 : factor;
        const std::size_t cf = (l == 0) ? 1 : factor;
        Matrix b(a.rows() * rf, a.cols() * cf);
        for (std::size_t i = 0; i < b.rows(); ++i)
            for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) = a(i / rf, j / cf);
        layers.push_back(std::move(b));
    }
    return MeanFieldNet(net.input_dim(), std::move(layers));
}

}  // namespace mfnet
