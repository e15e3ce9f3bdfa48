#pragma once

// Text serialization of nets and trees ("mfnet-v1").
//
//   mfnet-v1
//   convention meanfield          # meanfield | raw | tree
//   depth 2
//   input_dim 3
//   widths 4 2                    # "branching" for trees
//   layer 0 4 4                   # index rows cols, then rows*cols values
//   ...
//   level 0 32                    # trees: index count, then count values
//
// Values are written in shortest round-trip form, so save/load is exact.
// Text after '#' on a line is a comment.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include "mfnet/errors.hpp"
#include "mfnet/format.hpp"
#include "mfnet/net.hpp"
#include "mfnet/tree.hpp"

namespace mfnet {

inline constexpr const char* kFormatVersion = "mfnet-v1";

enum class Convention { meanfield, raw };

namespace detail {

inline void write_values(std::ostream& os, std::span<const double> values, std::size_t per_line) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        os << format_double(values[i]);
        os << ((i + 1) % per_line == 0 || i + 1 == values.size() ? '\n' : ' ');
    }
}

class TokenReader {
public:
    explicit TokenReader(std::istream& is) {
        std::string line;
        while (std::getline(is, line)) {
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            std::string tok;
            while (ls >> tok) tokens_.push_back(tok);
        }
    }

    bool done() const { return pos_ >= tokens_.size(); }

    std::string word() {
        if (done()) throw FormatError("unexpected end of model file");
        return tokens_[pos_++];
    }

    void expect(const std::string& w) {
        std::string got = word();
        if (got != w) throw FormatError("expected '" + w + "', found '" + got + "'");
    }

    std::size_t count() {
        std::string t = word();
        std::size_t v = 0;
        auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size())
            throw FormatError("expected a non-negative integer, found '" + t + "'");
        return v;
    }

    double real() {
        std::string t = word();
        double v = 0.0;
        auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size())
            throw FormatError("expected a real number, found '" + t + "'");
        return v;
    }

    std::vector<std::size_t> counts(std::size_t n) {
        std::vector<std::size_t> out(n);
        for (auto& v : out) v = count();
        return out;
    }

    std::vector<double> reals(std::size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = real();
        return out;
    }

private:
    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline void write_net(std::ostream& os, const MeanFieldNet& net, Convention conv = Convention::meanfield) {
    os << kFormatVersion << '\n';
    os << "convention " << (conv == Convention::meanfield ? "meanfield" : "raw") << '\n';
    os << "depth " << net.depth() << '\n';
    os << "input_dim " << net.input_dim() << '\n';
    os << "widths";
    for (auto w : net.widths()) os << ' ' << w;
    os << '\n';
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const Matrix m = conv == Convention::meanfield ? net.layer(l) : net.raw_layer(l);
        os << "layer " << l << ' ' << m.rows() << ' ' << m.cols() << '\n';
        detail::write_values(os, m.values(), m.cols());
    }
}

inline void write_tree(std::ostream& os, const NeuralTree& tree) {
    os << kFormatVersion << '\n';
    os << "convention tree\n";
    os << "depth " << tree.depth() << '\n';
    os << "input_dim " << tree.input_dim() << '\n';
    os << "branching";
    for (auto b : tree.branching()) os << ' ' << b;
    os << '\n';
    for (std::size_t l = 0; l <= tree.depth(); ++l) {
        os << "level " << l << ' ' << tree.level_size(l) << '\n';
        detail::write_values(os, tree.level(l), l == 0 ? tree.input_dim() + 1 : tree.branch(l));
    }
}

using Model = std::variant<MeanFieldNet, NeuralTree>;

inline Model read_model(std::istream& is) {
    detail::TokenReader in(is);
    in.expect(kFormatVersion);
    in.expect("convention");
    const std::string conv = in.word();
    if (conv != "meanfield" && conv != "raw" && conv != "tree")
        throw FormatError("unknown convention '" + conv + "'");
    in.expect("depth");
    const std::size_t depth = in.count();
    if (depth < 1) throw FormatError("depth must be >= 1");
    in.expect("input_dim");
    const std::size_t d = in.count();

    if (conv == "tree") {
        in.expect("branching");
        auto branching = in.counts(depth);
        std::vector<std::vector<double>> levels;
        for (std::size_t l = 0; l <= depth; ++l) {
            in.expect("level");
            if (in.count() != l) throw FormatError("tree levels out of order");
            levels.push_back(in.reals(in.count()));
        }
        if (!in.done()) throw FormatError("trailing content after last tree level");
        try {
            return NeuralTree(d, std::move(branching), std::move(levels));
        } catch (const ShapeError& e) {
            throw FormatError(e.what());
        }
    }

    in.expect("widths");
    auto widths = in.counts(depth);
    std::vector<Matrix> layers;
    for (std::size_t l = 0; l <= depth; ++l) {
        in.expect("layer");
        if (in.count() != l) throw FormatError("layers out of order");
        const std::size_t rows = in.count();
        const std::size_t cols = in.count();
        const std::size_t want_rows = l == depth ? 1 : widths[l];
        const std::size_t want_cols = l == 0 ? d + 1 : widths[l - 1];
        if (rows != want_rows || cols != want_cols)
            throw FormatError("layer " + std::to_string(l) + " shape does not match widths");
        layers.emplace_back(rows, cols, in.reals(rows * cols));
    }
    if (!in.done()) throw FormatError("trailing content after last layer");
    try {
        if (conv == "raw") return MeanFieldNet::from_raw(d, std::move(layers));
        return MeanFieldNet(d, std::move(layers));
    } catch (const ShapeError& e) {
        throw FormatError(e.what());
    }
}

inline Model load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open model file '" + path + "'");
    return read_model(is);
}

inline MeanFieldNet load_net(const std::string& path) {
    Model m = load_model(path);
    if (auto* net = std::get_if<MeanFieldNet>(&m)) return *net;
    throw FormatError("'" + path + "' holds a tree, a network was expected");
}

inline void save_net(const std::string& path, const MeanFieldNet& net, Convention conv = Convention::meanfield) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write '" + path + "'");
    write_net(os, net, conv);
}

inline void save_tree(const std::string& path, const NeuralTree& tree) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write '" + path + "'");
    write_tree(os, tree);
}

}  // namespace mfnet
