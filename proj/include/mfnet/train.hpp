#pragma once

// Layer-scaled explicit-Euler gradient descent. With step functions standing
// in for the weights, the L2 gradient of the risk with respect to layer l is
// rows * cols * dR/dA^l, so the update
//
//   A^l <- A^l - h * rows_l * cols_l * dR/dA^l
//
// is one Euler step of the width-independent gradient flow. Monitors along
// the way: energy dissipation, layer-norm growth and path-proxy growth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfnet/datagen.hpp"
#include "mfnet/errors.hpp"
#include "mfnet/format.hpp"
#include "mfnet/net.hpp"
#include "mfnet/norms.hpp"
#include "mfnet/parallel.hpp"

namespace mfnet {

enum class LossKind { squared, clipped_squared };

/// l(f, y) = (f - y)^2, optionally capped at c.
struct Loss {
    LossKind kind = LossKind::squared;
    double cap = std::numeric_limits<double>::infinity();

    static Loss squared() { return {}; }
    static Loss clipped(double cap) {
        if (!(cap > 0.0)) throw Error("clipped loss needs a positive cap");
        return {LossKind::clipped_squared, cap};
    }

    double value(double f, double y) const {
        const double r = (f - y) * (f - y);
        return kind == LossKind::clipped_squared ? std::min(cap, r) : r;
    }

    /// d/df; zero on the clipped plateau.
    double derivative(double f, double y) const {
        const double r = f - y;
        if (kind == LossKind::clipped_squared && r * r >= cap) return 0.0;
        return 2.0 * r;
    }
};

/// Either a fixed sample (empirical risk) or a target net with a sampling
/// distribution (population risk via fresh minibatches).
struct RiskSpec {
    Loss loss;
    std::optional<Dataset> data;
    std::optional<MeanFieldNet> target;
    DataDistribution dist;
    std::size_t batch_size = 256;
    std::size_t eval_points = 10000;

    static RiskSpec empirical(Dataset data, Loss loss = Loss::squared()) {
        RiskSpec s;
        s.loss = loss;
        s.data = std::move(data);
        return s;
    }

    static RiskSpec population(MeanFieldNet target, DataDistribution dist, std::size_t batch_size,
                               Loss loss = Loss::squared()) {
        RiskSpec s;
        s.loss = loss;
        s.target = std::move(target);
        s.dist = dist;
        s.batch_size = batch_size;
        return s;
    }

    bool is_empirical() const { return data.has_value(); }
};

struct TrainConfig {
    double step_size = 1e-3;
    std::size_t steps = 1000;
    /// Per-layer factors; empty means rows * cols of each layer.
    std::vector<double> lr_scaling;
    double penalty = 0.0;
    int sigma_prime_at_zero = 0;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 100;
    std::size_t threads = 1;
    /// Stop early once sum_l factor_l * |grad_l|^2 < grad_tol^2 (0: never).
    double grad_tol = 0.0;
    /// Probe the largest monotone step size before training.
    bool probe_stability = false;
};

inline constexpr std::size_t kChunkSize = 64;

struct TrajectoryRow {
    std::size_t step = 0;
    double t = 0.0;
    double risk = 0.0;
    std::vector<double> norms;
    double proxy = 0.0;
    double Q = 0.0;
    double dissipation_residual = 0.0;
    double moment_slack = 0.0;
    double proxy_slack = 0.0;
};

struct TrajectoryLog {
    std::vector<TrajectoryRow> rows;
    int sigma_prime_at_zero = 0;
    double step_size = 0.0;
    double penalty = 0.0;
    std::uint64_t seed = 0;
    bool empirical = true;
    /// Objective (risk + penalty) at t = 0 used by the growth bounds.
    double initial_objective = 0.0;
    /// Largest initial layer norm, C_0.
    double initial_max_norm = 0.0;
    /// Stability threshold found by the probe, if it ran.
    std::optional<double> stable_step;
    /// Objective never increased between consecutive steps (empirical mode).
    bool monotone = true;
    bool converged = false;
    std::size_t steps_taken = 0;
    MeanFieldNet final_net;

    double max_moment_slack() const {
        double s = 0.0;
        for (const auto& r : rows) s = std::max(s, r.moment_slack);
        return s;
    }
    double max_proxy_slack() const {
        double s = 0.0;
        for (const auto& r : rows) s = std::max(s, r.proxy_slack);
        return s;
    }
    bool growth_bounds_hold(double slack = 1.05) const {
        return max_moment_slack() <= slack && max_proxy_slack() <= slack;
    }
};

class Diverged : public Error {
public:
    Diverged(const std::string& what, TrajectoryLog partial) : Error(what), log_(std::move(partial)) {}
    const TrajectoryLog& partial_log() const { return log_; }

private:
    TrajectoryLog log_;
};

/// Per-layer gradient arrays in the stored convention, plus the mean loss.
struct BatchGradient {
    double loss = 0.0;
    std::vector<Matrix> grad;
};

namespace detail {

inline std::vector<Matrix> zeros_like(const MeanFieldNet& net) {
    std::vector<Matrix> g;
    for (const auto& a : net.layers()) g.emplace_back(a.rows(), a.cols());
    return g;
}

inline void accumulate(BatchGradient& into, const BatchGradient& from) {
    into.loss += from.loss;
    for (std::size_t l = 0; l < into.grad.size(); ++l) {
        auto& a = into.grad[l].values();
        const auto& b = from.grad[l].values();
        for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
    }
}

inline double sigma_prime(double z, int at_zero) {
    return z > 0.0 ? 1.0 : (z < 0.0 ? 0.0 : static_cast<double>(at_zero));
}

}  // namespace detail

/// Mean over the batch of loss_fn(i, f(x_i)) = (loss, dloss/df) and its
/// gradient with respect to the stored weights. Samples are processed in
/// fixed chunks whose sums are combined by a pairwise tree, so the result
/// is the same for every thread count.
template <class LossFn>
BatchGradient backprop_batch(const MeanFieldNet& net, const Matrix& xs, LossFn&& loss_fn, int sigma_prime_at_zero = 0,
                             std::size_t threads = 1) {
    const std::size_t n = xs.rows();
    if (n == 0) throw Error("gradient needs a nonempty batch");
    if (xs.cols() != net.input_dim()) throw DimensionMismatch("batch dimension does not match the net");
    const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
    std::vector<BatchGradient> parts(chunks);
    const std::size_t last = net.depth();

    parallel_for(chunks, threads, [&](std::size_t c) {
        BatchGradient part{0.0, detail::zeros_like(net)};
        std::vector<std::vector<double>> h(last + 1), z(last + 1);
        std::vector<double> delta, prev;
        for (std::size_t s = c * kChunkSize; s < std::min(n, (c + 1) * kChunkSize); ++s) {
            h[0] = augment(xs.row(s));
            double f = 0.0;
            for (std::size_t l = 0; l <= last; ++l) {
                const Matrix& a = net.layer(l);
                const double fan_in = static_cast<double>(a.cols());
                std::vector<double> out(a.rows());
                for (std::size_t i = 0; i < a.rows(); ++i) {
                    double acc = 0.0;
                    auto row = a.row(i);
                    for (std::size_t j = 0; j < a.cols(); ++j) acc += row[j] * h[l][j];
                    out[i] = acc / fan_in;
                }
                if (l == last) {
                    f = out[0];
                } else {
                    z[l + 1] = out;
                    for (double& v : out) v = relu(v);
                    h[l + 1] = std::move(out);
                }
            }
            const auto [value, dloss] = loss_fn(s, f);
            part.loss += value;
            delta.assign(1, dloss);
            for (std::size_t l = last + 1; l-- > 0;) {
                const Matrix& a = net.layer(l);
                const double fan_in = static_cast<double>(a.cols());
                Matrix& g = part.grad[l];
                for (std::size_t i = 0; i < a.rows(); ++i) {
                    const double di = delta[i] / fan_in;
                    if (di == 0.0) continue;
                    auto grow = g.row(i);
                    for (std::size_t j = 0; j < a.cols(); ++j) grow[j] += di * h[l][j];
                }
                if (l == 0) break;
                prev.assign(a.cols(), 0.0);
                for (std::size_t i = 0; i < a.rows(); ++i) {
                    const double di = delta[i] / fan_in;
                    if (di == 0.0) continue;
                    auto row = a.row(i);
                    for (std::size_t j = 0; j < a.cols(); ++j) prev[j] += di * row[j];
                }
                for (std::size_t j = 0; j < prev.size(); ++j) prev[j] *= detail::sigma_prime(z[l][j], sigma_prime_at_zero);
                std::swap(delta, prev);
            }
        }
        parts[c] = std::move(part);
    });

    for (std::size_t stride = 1; stride < chunks; stride *= 2)
        for (std::size_t i = 0; i + stride < chunks; i += 2 * stride) detail::accumulate(parts[i], parts[i + stride]);

    BatchGradient out = std::move(parts[0]);
    const double inv_n = 1.0 / static_cast<double>(n);
    out.loss *= inv_n;
    for (auto& g : out.grad)
        for (double& v : g.values()) v *= inv_n;
    return out;
}

/// Empirical risk (1/N) sum l(f(x_i), y_i) and its gradient.
inline BatchGradient gradients(const MeanFieldNet& net, const Matrix& xs, std::span<const double> ys, const Loss& loss,
                               int sigma_prime_at_zero = 0, std::size_t threads = 1) {
    if (ys.size() != xs.rows()) throw DimensionMismatch("labels and points differ in count");
    return backprop_batch(
        net, xs,
        [&](std::size_t i, double f) { return std::pair{loss.value(f, ys[i]), loss.derivative(f, ys[i])}; },
        sigma_prime_at_zero, threads);
}

/// Risk without the gradient, with the same chunked pairwise reduction.
inline double risk(const MeanFieldNet& net, const Matrix& xs, std::span<const double> ys, const Loss& loss,
                   std::size_t threads = 1) {
    const std::size_t n = xs.rows();
    if (n == 0) throw Error("risk needs a nonempty batch");
    const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
    std::vector<double> parts(chunks, 0.0);
    parallel_for(chunks, threads, [&](std::size_t c) {
        double s = 0.0;
        for (std::size_t i = c * kChunkSize; i < std::min(n, (c + 1) * kChunkSize); ++i)
            s += loss.value(forward_net(net, xs.row(i)), ys[i]);
        parts[c] = s;
    });
    for (std::size_t stride = 1; stride < chunks; stride *= 2)
        for (std::size_t i = 0; i + stride < chunks; i += 2 * stride) parts[i] += parts[i + stride];
    return parts[0] / static_cast<double>(n);
}

/// Path proxy P and dP/dA^l in the stored convention:
/// dP/dA^l_ij = sign(A^l_ij) w^{l+1}_i v^l_j / cols_l, with the forward DP v
/// and the backward DP w (w at the output is 1). sign(0) = 0.
inline std::pair<double, std::vector<Matrix>> proxy_gradient(const MeanFieldNet& net) {
    const std::size_t nl = net.num_layers();
    std::vector<std::vector<double>> v(nl + 1), w(nl + 1);
    v[0].assign(net.input_dim() + 1, 1.0);
    for (std::size_t l = 0; l < nl; ++l) {
        const Matrix& a = net.layer(l);
        v[l + 1].assign(a.rows(), 0.0);
        for (std::size_t i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < a.cols(); ++j) s += std::abs(a(i, j)) * v[l][j];
            v[l + 1][i] = s / static_cast<double>(a.cols());
        }
    }
    w[nl].assign(1, 1.0);
    for (std::size_t l = nl; l-- > 0;) {
        const Matrix& a = net.layer(l);
        w[l].assign(a.cols(), 0.0);
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j) w[l][j] += w[l + 1][i] * std::abs(a(i, j));
        for (double& x : w[l]) x /= static_cast<double>(a.cols());
    }
    std::vector<Matrix> g = detail::zeros_like(net);
    for (std::size_t l = 0; l < nl; ++l) {
        const Matrix& a = net.layer(l);
        const double fan_in = static_cast<double>(a.cols());
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j) {
                const double s = a(i, j) > 0.0 ? 1.0 : (a(i, j) < 0.0 ? -1.0 : 0.0);
                g[l](i, j) = s * w[l + 1][i] * v[l][j] / fan_in;
            }
    }
    return {v[nl][0], std::move(g)};
}

/// lambda * P^2.
inline double penalty_value(const MeanFieldNet& net, double lambda) {
    const double p = path_norm_proxy(net);
    return lambda * p * p;
}

/// 9 L^2 / m.
inline double regularization_weight(std::size_t depth, std::size_t m) {
    const double l = static_cast<double>(depth);
    return 9.0 * l * l / static_cast<double>(m);
}

/// rows * cols per layer.
inline std::vector<double> lr_factors(const MeanFieldNet& net) {
    std::vector<double> f;
    for (const auto& a : net.layers()) f.push_back(static_cast<double>(a.rows() * a.cols()));
    return f;
}

inline std::vector<double> resolve_lr_factors(const MeanFieldNet& net, const TrainConfig& config) {
    std::vector<double> f = lr_factors(net);
    if (config.lr_scaling.empty()) return f;
    if (config.lr_scaling != f)
        throw ArchitectureMismatch("lr_scaling does not match the net's widths (expected rows * cols per layer)");
    return f;
}

/// Objective value, its gradient (risk plus optional penalty) and the
/// scaled squared gradient norm sum_l factor_l |grad_l|^2.
struct Objective {
    double risk = 0.0;
    double penalty = 0.0;
    std::vector<Matrix> grad;
    double scaled_grad_sq = 0.0;

    double value() const { return risk + penalty; }
};

inline Objective objective(const MeanFieldNet& net, const Matrix& xs, std::span<const double> ys, const Loss& loss,
                           double lambda, const std::vector<double>& factors, int sigma_prime_at_zero = 0,
                           std::size_t threads = 1) {
    BatchGradient bg = gradients(net, xs, ys, loss, sigma_prime_at_zero, threads);
    Objective o{bg.loss, 0.0, std::move(bg.grad), 0.0};
    if (lambda > 0.0) {
        auto [p, pg] = proxy_gradient(net);
        o.penalty = lambda * p * p;
        for (std::size_t l = 0; l < o.grad.size(); ++l) {
            auto& g = o.grad[l].values();
            const auto& q = pg[l].values();
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += 2.0 * lambda * p * q[k];
        }
    }
    for (std::size_t l = 0; l < o.grad.size(); ++l) {
        double s = 0.0;
        for (double v : o.grad[l].values()) s += v * v;
        o.scaled_grad_sq += factors[l] * s;
    }
    return o;
}

/// A^l - h * factor_l * grad_l; nullopt if any weight becomes non-finite.
inline std::optional<MeanFieldNet> apply_step(const MeanFieldNet& net, const std::vector<Matrix>& grad, double h,
                                              const std::vector<double>& factors) {
    std::vector<Matrix> layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto& a = layers[l].values();
        const auto& g = grad[l].values();
        const double s = h * factors[l];
        for (std::size_t k = 0; k < a.size(); ++k) {
            a[k] -= s * g[k];
            if (!std::isfinite(a[k])) return std::nullopt;
        }
    }
    return MeanFieldNet(net.input_dim(), std::move(layers));
}

/// One scaled gradient step on the empirical risk (plus penalty).
inline MeanFieldNet gd_step(const MeanFieldNet& net, const Matrix& xs, std::span<const double> ys, const Loss& loss,
                            const TrainConfig& config) {
    const auto factors = resolve_lr_factors(net, config);
    const Objective o = objective(net, xs, ys, loss, config.penalty, factors, config.sigma_prime_at_zero, config.threads);
    auto next = apply_step(net, o.grad, config.step_size, factors);
    if (!next) throw Diverged("gradient step produced non-finite weights", {});
    return *next;
}

/// |(R(after) - R(before)) / h + sum_l factor_l |grad_l|^2| for one step
/// from `net`; first order in h along the flow.
inline double dissipation_residual(const MeanFieldNet& net, const Matrix& xs, std::span<const double> ys,
                                   const Loss& loss, double lambda, double h, int sigma_prime_at_zero = 0) {
    const auto factors = lr_factors(net);
    const Objective o = objective(net, xs, ys, loss, lambda, factors, sigma_prime_at_zero);
    auto next = apply_step(net, o.grad, h, factors);
    if (!next) return std::numeric_limits<double>::infinity();
    const double after = risk(*next, xs, ys, loss) + (lambda > 0.0 ? penalty_value(*next, lambda) : 0.0);
    return std::abs((after - o.value()) / h + o.scaled_grad_sq);
}

namespace detail {

struct Batch {
    Matrix xs;
    std::vector<double> ys;
};

inline Batch draw_batch(const RiskSpec& spec, std::size_t n, std::uint64_t seed) {
    Dataset ds = label(*spec.target, sample(spec.dist, n, seed));
    return {std::move(ds.xs), std::move(ds.ys)};
}

inline std::uint64_t step_seed(std::uint64_t seed, std::size_t step) { return make_rng(seed, step + 1)(); }
inline std::uint64_t eval_seed(std::uint64_t seed) { return make_rng(seed, 0)(); }

/// True if `steps` steps at size h never increase the objective.
inline bool monotone_epoch(const MeanFieldNet& net, const Matrix& xs, std::span<const double> ys, const Loss& loss,
                           double lambda, const std::vector<double>& factors, double h, std::size_t steps,
                           int sigma_prime_at_zero) {
    MeanFieldNet cur = net;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= steps; ++k) {
        const Objective o = objective(cur, xs, ys, loss, lambda, factors, sigma_prime_at_zero);
        if (!std::isfinite(o.value()) || o.value() > prev * (1.0 + 1e-12) + 1e-300) return false;
        prev = o.value();
        if (k == steps) break;
        auto next = apply_step(cur, o.grad, h, factors);
        if (!next) return false;
        cur = std::move(*next);
    }
    return true;
}

}  // namespace detail

/// Largest step size (within a factor of two) for which one epoch of
/// `epoch` steps decreases the objective monotonically, searched by
/// doubling from `start` while stable and halving while unstable.
inline double probe_stable_step(const MeanFieldNet& net, const RiskSpec& spec, const TrainConfig& config,
                                std::size_t epoch = 20) {
    const auto factors = resolve_lr_factors(net, config);
    detail::Batch b = spec.is_empirical() ? detail::Batch{spec.data->xs, spec.data->ys}
                                          : detail::draw_batch(spec, spec.batch_size, detail::step_seed(config.seed, 0));
    auto ok = [&](double h) {
        return detail::monotone_epoch(net, b.xs, b.ys, spec.loss, config.penalty, factors, h, epoch,
                                      config.sigma_prime_at_zero);
    };
    double h = config.step_size;
    if (ok(h)) {
        for (int k = 0; k < 20 && ok(2.0 * h); ++k) h *= 2.0;
        return h;
    }
    for (int k = 0; k < 60; ++k) {
        h *= 0.5;
        if (ok(h)) return h;
    }
    return h;
}

/// Runs config.steps scaled gradient steps and logs a row every
/// checkpoint_every steps (and at the last state). Throws Diverged, with the
/// rows logged so far, once the risk exceeds 1e6 times its initial value.
inline TrajectoryLog train(const MeanFieldNet& initial, const RiskSpec& spec, const TrainConfig& config) {
    if (!(config.step_size > 0.0)) throw Error("step_size must be positive");
    if (config.checkpoint_every < 1) throw Error("checkpoint_every must be >= 1");
    if (config.penalty < 0.0) throw Error("penalty must be nonnegative");
    if (config.sigma_prime_at_zero != 0 && config.sigma_prime_at_zero != 1)
        throw Error("sigma_prime_at_zero must be 0 or 1");
    if (spec.is_empirical()) {
        if (spec.data->size() == 0) throw Error("empirical risk needs a nonempty dataset");
        if (spec.data->dim() != initial.input_dim()) throw DimensionMismatch("dataset dimension does not match the net");
    } else if (!spec.target) {
        throw Error("risk spec needs a dataset or a target net");
    }
    const auto factors = resolve_lr_factors(initial, config);
    const double h = config.step_size;
    const double lambda = config.penalty;

    TrajectoryLog log;
    log.sigma_prime_at_zero = config.sigma_prime_at_zero;
    log.step_size = h;
    log.penalty = lambda;
    log.seed = config.seed;
    log.empirical = spec.is_empirical();
    if (config.probe_stability) log.stable_step = probe_stable_step(initial, spec, config);

    // Risk reported at checkpoints: the training risk, or a held-out estimate
    // of the population risk.
    std::optional<detail::Batch> heldout;
    if (!spec.is_empirical()) heldout = detail::draw_batch(spec, spec.eval_points, detail::eval_seed(config.seed));
    auto report_risk = [&](const MeanFieldNet& net, double batch_risk) {
        return heldout ? risk(net, heldout->xs, heldout->ys, spec.loss, config.threads) : batch_risk;
    };

    std::vector<double> norms0;
    for (const auto& a : initial.layers()) norms0.push_back(layer_l2(a));
    log.initial_max_norm = *std::max_element(norms0.begin(), norms0.end());

    MeanFieldNet net = initial;
    double initial_risk = 0.0;
    double prev_value = std::numeric_limits<double>::infinity();
    const std::size_t depth = initial.depth();

    for (std::size_t k = 0; k <= config.steps; ++k) {
        detail::Batch pop;
        const Matrix* xs = nullptr;
        std::span<const double> ys;
        if (spec.is_empirical()) {
            xs = &spec.data->xs;
            ys = spec.data->ys;
        } else {
            pop = detail::draw_batch(spec, spec.batch_size, detail::step_seed(config.seed, k));
            xs = &pop.xs;
            ys = pop.ys;
        }
        const Objective o = objective(net, *xs, ys, spec.loss, lambda, factors, config.sigma_prime_at_zero, config.threads);

        if (k == 0) {
            initial_risk = o.risk;
            log.initial_objective = heldout ? report_risk(net, o.risk) + o.penalty : o.value();
        }
        const bool diverged = !std::isfinite(o.risk) || (o.risk > 1e6 * initial_risk && o.risk > 0.0 && k > 0);
        if (diverged) {
            log.steps_taken = k;
            log.final_net = net;
            throw Diverged("risk exceeded 1e6 times its initial value at step " + std::to_string(k), std::move(log));
        }
        if (spec.is_empirical() && o.value() > prev_value * (1.0 + 1e-12) + 1e-300) log.monotone = false;
        prev_value = o.value();

        const bool converged = config.grad_tol > 0.0 && o.scaled_grad_sq < config.grad_tol * config.grad_tol;
        const bool checkpoint = k % config.checkpoint_every == 0 || k == config.steps || converged;
        auto next = apply_step(net, o.grad, h, factors);

        if (checkpoint) {
            TrajectoryRow row;
            row.step = k;
            row.t = static_cast<double>(k) * h;
            row.risk = report_risk(net, o.risk);
            const PathNormReport rep = hilbert_complexity(net);
            row.norms = rep.per_layer_l2;
            row.proxy = rep.proxy;
            row.Q = rep.hilbert_Q;
            if (next) {
                const double after = risk(*next, *xs, ys, spec.loss, config.threads) +
                                     (lambda > 0.0 ? penalty_value(*next, lambda) : 0.0);
                row.dissipation_residual = std::abs((after - o.value()) / h + o.scaled_grad_sq);
            } else {
                row.dissipation_residual = std::numeric_limits<double>::infinity();
            }
            const double growth = std::sqrt(std::max(0.0, log.initial_objective) * row.t);
            for (std::size_t l = 0; l < row.norms.size(); ++l) {
                const double cap = norms0[l] + growth;
                const double s = cap > 0.0 ? row.norms[l] / cap : (row.norms[l] > 0.0 ? INFINITY : 0.0);
                row.moment_slack = std::max(row.moment_slack, s);
            }
            const double pcap = std::pow(log.initial_max_norm + growth, static_cast<double>(depth + 1));
            row.proxy_slack = pcap > 0.0 ? row.proxy / pcap : (row.proxy > 0.0 ? INFINITY : 0.0);
            log.rows.push_back(std::move(row));
        }
        if (converged) {
            log.converged = true;
            log.steps_taken = k;
            break;
        }
        if (k == config.steps) {
            log.steps_taken = k;
            break;
        }
        if (!next) {
            log.steps_taken = k;
            log.final_net = net;
            throw Diverged("weights became non-finite at step " + std::to_string(k + 1), std::move(log));
        }
        net = std::move(*next);
    }
    log.final_net = std::move(net);
    return log;
}

/// train with the penalty lambda * P^2 switched on; lambda defaults to 9 L^2 / m
/// where m is the smallest hidden width.
inline TrajectoryLog train_regularized(const MeanFieldNet& initial, const RiskSpec& spec, TrainConfig config,
                                       std::optional<double> lambda = std::nullopt) {
    const auto w = initial.widths();
    config.penalty = lambda ? *lambda : regularization_weight(initial.depth(), *std::min_element(w.begin(), w.end()));
    if (config.penalty < 0.0) throw Error("penalty must be nonnegative");
    return train(initial, spec, config);
}

inline void write_trajectory_csv(std::ostream& os, const TrajectoryLog& log) {
    const std::size_t depth = log.rows.empty() ? 0 : log.rows.front().norms.size() - 1;
    os << "# sigma_prime_at_zero=" << log.sigma_prime_at_zero << '\n';
    os << "# reduction=pairwise chunk=" << kChunkSize << '\n';
    os << "# step_size=" << format_double(log.step_size) << " penalty=" << format_double(log.penalty)
       << " seed=" << log.seed << " mode=" << (log.empirical ? "empirical" : "population") << '\n';
    os << "step,t,risk";
    for (std::size_t l = 0; l <= depth; ++l) os << ",norm_l" << l;
    os << ",proxy,Q,dissipation_residual,moment_slack,proxy_slack\n";
    for (const auto& r : log.rows) {
        os << r.step << ',' << format_double(r.t) << ',' << format_double(r.risk);
        for (double n : r.norms) os << ',' << format_double(n);
        os << ',' << format_double(r.proxy) << ',' << format_double(r.Q) << ',' << format_double(r.dissipation_residual)
           << ',' << format_double(r.moment_slack) << ',' << format_double(r.proxy_slack) << '\n';
    }
}

}  // namespace mfnet
