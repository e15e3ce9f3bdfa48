#pragma once

// Direct approximation by Maurey subsampling: a net with path proxy Q is
// written as Q times a signed mixture of unit-proxy atoms, m atoms are drawn
// i.i.d., and each selected atom is subsampled recursively. The result is a
// tree of branching (m, ..., m) with proxy exactly Q and L2 error
// O(L (2 + R) Q / sqrt(m)).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "mfnet/datagen.hpp"
#include "mfnet/errors.hpp"
#include "mfnet/format.hpp"
#include "mfnet/net.hpp"
#include "mfnet/norms.hpp"
#include "mfnet/parallel.hpp"
#include "mfnet/tree.hpp"

namespace mfnet {

inline double evaluate(const MeanFieldNet& f, std::span<const double> x) { return forward_net(f, x); }
inline double evaluate(const NeuralTree& f, std::span<const double> x) { return forward_tree(f, x); }
template <class F>
    requires std::invocable<const F&, std::span<const double>>
double evaluate(const F& f, std::span<const double> x) {
    return f(x);
}

/// Fixed Monte-Carlo sample with the reference function's values cached, so
/// many candidates can be compared against the same f.
class MonteCarloL2 {
public:
    template <class F>
    MonteCarloL2(const F& f, const DataDistribution& dist, std::size_t n, std::uint64_t seed)
        : xs_(sample(dist, n, seed)), ref_(n) {
        if (n < 1) throw Error("Monte-Carlo L2 estimate needs n >= 1");
        for (std::size_t i = 0; i < n; ++i) ref_[i] = evaluate(f, xs_.row(i));
    }

    template <class G>
    double distance(const G& g) const {
        double s = 0.0;
        for (std::size_t i = 0; i < ref_.size(); ++i) {
            const double e = evaluate(g, xs_.row(i)) - ref_[i];
            s += e * e;
        }
        return std::sqrt(s / static_cast<double>(ref_.size()));
    }

    const Matrix& points() const { return xs_; }

private:
    Matrix xs_;
    std::vector<double> ref_;
};

/// sqrt of the sample mean of (f - g)^2 over n i.i.d. draws.
template <class F, class G>
double l2_distance(const F& f, const G& g, const DataDistribution& dist, std::size_t n, std::uint64_t seed) {
    return MonteCarloL2(f, dist, n, seed).distance(g);
}

struct MaureyResult {
    NeuralTree tree;
    double target_proxy = 0.0;
    double l2_error = 0.0;
    std::size_t m = 0;
    double bound = 0.0;
};

/// L (2 + R) Q / sqrt(m).
inline double maurey_bound(std::size_t depth, double radius, double proxy, std::size_t m) {
    return static_cast<double>(depth) * (2.0 + radius) * proxy / std::sqrt(static_cast<double>(m));
}

/// Weights of the flattened tree with branching (m, ..., m) and input
/// dimension d: sum_{k<L} m^{2k+1} + m^L (d+1). Grows like m^{2L-1}.
inline std::size_t tree_param_count(std::size_t depth, std::size_t m, std::size_t input_dim) {
    std::size_t total = 0;
    std::size_t pow_l = 1;
    for (std::size_t k = 0; k < depth; ++k) {
        total += pow_l * pow_l * m;  // m^{2k+1}
        pow_l *= m;
    }
    return total + pow_l * (input_dim + 1);
}

/// Evaluation data used when no distribution is given: uniform on [-1, 1]^d.
inline constexpr std::size_t kDefaultEvalPoints = 4096;
inline constexpr std::uint64_t kDefaultEvalSeed = 0x9e3779b97f4a7c15ULL;

/// The tree only, without error estimation.
inline NeuralTree maurey_tree(const MeanFieldNet& net, std::size_t m, std::uint64_t seed) {
    if (m < 1) throw Error("maurey_subsample needs m >= 1");
    const std::size_t depth = net.depth();
    const auto raw = net.raw_layers();

    // p[l][i]: proxy of the preactivation feeding hidden neuron i of layer l (1-based l).
    std::vector<std::vector<double>> p(depth + 1);
    p[0].assign(net.input_dim() + 1, 1.0);
    for (std::size_t l = 0; l < depth; ++l) {
        const Matrix& a = raw[l];
        p[l + 1].assign(a.rows(), 0.0);
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j) p[l + 1][i] += std::abs(a(i, j)) * p[l][j];
    }
    double q = 0.0;
    for (std::size_t j = 0; j < raw[depth].cols(); ++j) q += std::abs(raw[depth](0, j)) * p[depth][j];
    if (!(q > 0.0)) throw DegenerateNet("Maurey sampling needs a source with positive path proxy");

    Rng rng = make_rng(seed);
    const double inv_m = 1.0 / static_cast<double>(m);
    auto mixture = [&](std::span<const double> row, const std::vector<double>& child_proxy) {
        std::vector<double> w(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) w[j] = std::abs(row[j]) * child_proxy[j];
        return std::discrete_distribution<std::size_t>(w.begin(), w.end());
    };
    auto sign = [](double v) { return v > 0.0 ? 1.0 : -1.0; };

    std::vector<std::size_t> branching(depth, m);
    std::vector<std::vector<double>> levels(depth + 1);

    // Outer mixture over hidden neurons of layer L.
    std::vector<std::size_t> nodes(m);
    {
        auto pick = mixture(raw[depth].row(0), p[depth]);
        levels[depth].resize(m);
        for (std::size_t k = 0; k < m; ++k) {
            nodes[k] = pick(rng);
            levels[depth][k] = sign(raw[depth](0, nodes[k])) * q * inv_m;
        }
    }
    // Each node at hidden layer l + 1 is a unit-proxy mixture over layer l.
    for (std::size_t l = depth - 1; l >= 1; --l) {
        const Matrix& a = raw[l];
        std::vector<std::discrete_distribution<std::size_t>> picks;
        picks.reserve(a.rows());
        for (std::size_t i = 0; i < a.rows(); ++i) picks.push_back(mixture(a.row(i), p[l]));
        std::vector<std::size_t> children(nodes.size() * m);
        levels[l].resize(children.size());
        for (std::size_t pos = 0; pos < nodes.size(); ++pos) {
            for (std::size_t c = 0; c < m; ++c) {
                const std::size_t j = picks[nodes[pos]](rng);
                children[pos * m + c] = j;
                levels[l][pos * m + c] = sign(a(nodes[pos], j)) * inv_m;
            }
        }
        nodes = std::move(children);
    }
    // Layer-1 atoms are affine maps normalized to unit l1 norm, kept exactly.
    const std::size_t cols = net.input_dim() + 1;
    levels[0].resize(nodes.size() * cols);
    for (std::size_t pos = 0; pos < nodes.size(); ++pos) {
        const std::size_t s = nodes[pos];
        for (std::size_t j = 0; j < cols; ++j) levels[0][pos * cols + j] = raw[0](s, j) / p[1][s];
    }
    return NeuralTree(net.input_dim(), std::move(branching), std::move(levels));
}

inline MaureyResult maurey_subsample(const MeanFieldNet& net, std::size_t m, std::uint64_t seed,
                                     const MonteCarloL2& eval, double radius) {
    MaureyResult r;
    r.tree = maurey_tree(net, m, seed);
    r.target_proxy = path_norm_proxy(net);
    r.l2_error = eval.distance(r.tree);
    r.m = m;
    r.bound = maurey_bound(net.depth(), radius, r.target_proxy, m);
    return r;
}

inline MaureyResult maurey_subsample(const MeanFieldNet& net, std::size_t m, std::uint64_t seed,
                                     const DataDistribution& dist, std::size_t n_eval = kDefaultEvalPoints) {
    return maurey_subsample(net, m, seed, MonteCarloL2(net, dist, n_eval, kDefaultEvalSeed), dist.radius);
}

inline MaureyResult maurey_subsample(const MeanFieldNet& net, std::size_t m, std::uint64_t seed) {
    return maurey_subsample(net, m, seed, DataDistribution{DistributionKind::uniform_cube, net.input_dim(), 1.0});
}

struct RateRow {
    std::size_t m = 0;
    double mean_error = 0.0;
    double std_error = 0.0;  // standard error of mean_error across seeds
    double mean_sq_error = 0.0;
    double bound = 0.0;
    std::size_t tree_param_count = 0;
    std::size_t seeds = 0;
    std::vector<double> errors;  // per seed, in seed order
};

struct RateSweep {
    std::vector<RateRow> rows;
    double proxy = 0.0;
    /// Least-squares slope of log(mean_error) against log(m); NaN when the
    /// errors vanish (e.g. a constant source) or fewer than two m values.
    double slope = std::numeric_limits<double>::quiet_NaN();
};

/// Seed used for draw k of a sweep with base seed `seed`.
inline std::uint64_t sweep_seed(std::uint64_t seed, std::size_t k) {
    return make_rng(seed, k + 1)();
}

inline double loglog_slope(const std::vector<RateRow>& rows, double scale) {
    if (rows.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : rows) {
        if (!(r.mean_error > 1e-12 * (1.0 + scale))) return std::numeric_limits<double>::quiet_NaN();
        const double x = std::log(static_cast<double>(r.m));
        const double y = std::log(r.mean_error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(rows.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline RateSweep rate_sweep(const MeanFieldNet& net, const std::vector<std::size_t>& ms, const DataDistribution& dist,
                            std::size_t seeds, std::uint64_t seed = 0, std::size_t threads = 1,
                            std::size_t n_eval = kDefaultEvalPoints) {
    if (ms.empty()) throw Error("rate_sweep needs at least one m");
    for (std::size_t k = 0; k < ms.size(); ++k)
        if (ms[k] < 1 || (k > 0 && ms[k] <= ms[k - 1])) throw Error("rate_sweep needs increasing m values >= 1");
    if (seeds < 1) throw Error("rate_sweep needs seeds >= 1");
    const MonteCarloL2 eval(net, dist, n_eval, kDefaultEvalSeed);
    RateSweep out;
    out.proxy = path_norm_proxy(net);
    for (std::size_t m : ms) {
        RateRow row;
        row.m = m;
        row.seeds = seeds;
        row.bound = maurey_bound(net.depth(), dist.radius, out.proxy, m);
        row.tree_param_count = tree_param_count(net.depth(), m, net.input_dim());
        row.errors.resize(seeds);
        parallel_for(seeds, threads,
                     [&](std::size_t k) { row.errors[k] = eval.distance(maurey_tree(net, m, sweep_seed(seed, k))); });
        double s = 0.0, s2 = 0.0;
        for (double e : row.errors) {
            s += e;
            s2 += e * e;
        }
        const double n = static_cast<double>(seeds);
        row.mean_error = s / n;
        row.mean_sq_error = s2 / n;
        if (seeds > 1) {
            const double var = std::max(0.0, (s2 - n * row.mean_error * row.mean_error) / (n - 1.0));
            row.std_error = std::sqrt(var / n);
        }
        out.rows.push_back(std::move(row));
    }
    out.slope = loglog_slope(out.rows, out.proxy);
    return out;
}

inline void write_rate_sweep_csv(std::ostream& os, const RateSweep& sweep) {
    os << "m,mean_error,std_error,bound,tree_param_count,seeds\n";
    for (const auto& r : sweep.rows)
        os << r.m << ',' << format_double(r.mean_error) << ',' << format_double(r.std_error) << ','
           << format_double(r.bound) << ',' << r.tree_param_count << ',' << r.seeds << '\n';
}

/// Bookkeeping for sequences f_k -> f in L2(P): the proxies along the
/// sequence must stay bounded, and the proxy of the limit representation
/// must not exceed their liminf (estimated by the minimum over the tail).
class ProxyMonitor {
public:
    void record(double proxy) { proxies_.push_back(proxy); }

    const std::vector<double>& proxies() const { return proxies_; }

    bool bounded_by(double cap) const {
        for (double p : proxies_)
            if (!(p <= cap)) return false;
        return true;
    }

    double tail_liminf() const {
        if (proxies_.empty()) return std::numeric_limits<double>::infinity();
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t k = proxies_.size() / 2; k < proxies_.size(); ++k) lo = std::min(lo, proxies_[k]);
        return lo;
    }

    bool limit_consistent(double limit_proxy, double rel_tol = 1e-9) const {
        return limit_proxy <= tail_liminf() * (1.0 + rel_tol);
    }

private:
    std::vector<double> proxies_;
};

}  // namespace mfnet
