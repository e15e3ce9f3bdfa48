#pragma once

// Empirical Rademacher complexity of path-norm balls and the a priori
// generalization experiment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "mfnet/datagen.hpp"
#include "mfnet/errors.hpp"
#include "mfnet/format.hpp"
#include "mfnet/net.hpp"
#include "mfnet/norms.hpp"
#include "mfnet/parallel.hpp"
#include "mfnet/train.hpp"

namespace mfnet {

/// Points in [-1, 1]^d, one per row.
class SampleSet {
public:
    explicit SampleSet(Matrix points) : points_(std::move(points)) {
        for (double v : points_.values())
            if (!(v >= -1.0 && v <= 1.0)) throw Error("sample set entries must lie in [-1, 1]");
    }

    std::size_t size() const { return points_.rows(); }
    std::size_t dim() const { return points_.cols(); }
    const Matrix& points() const { return points_; }

private:
    Matrix points_;
};

struct RademacherEstimate {
    double value = 0.0;
    double std_error = 0.0;  // zero when exact
    bool exact = false;
    std::size_t draws = 0;
};

/// sqrt(2 log(2d + 2) / N).
inline double affine_rademacher_bound(std::size_t d, std::size_t n) {
    return std::sqrt(2.0 * std::log(2.0 * static_cast<double>(d) + 2.0) / static_cast<double>(n));
}

/// Sign vector for draw k; shared by every estimator so draws can be replayed.
inline std::vector<double> rademacher_signs(std::size_t n, std::uint64_t seed, std::size_t draw) {
    Rng rng = make_rng(seed, draw);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> xi(n);
    for (double& v : xi) v = coin(rng) ? 1.0 : -1.0;
    return xi;
}

namespace detail {

inline RademacherEstimate summarize(const std::vector<double>& values, bool exact) {
    RademacherEstimate r;
    r.exact = exact;
    r.draws = values.size();
    double s = 0.0, s2 = 0.0;
    for (double v : values) {
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(values.size());
    r.value = s / n;
    if (!exact && values.size() > 1) {
        const double var = std::max(0.0, (s2 - n * r.value * r.value) / (n - 1.0));
        r.std_error = std::sqrt(var / n);
    }
    return r;
}

/// max_j |(1/N) sum_i xi_i (x_i, 1)_j|, scaled by the ball radius.
inline double affine_sup(const Matrix& xs, const std::vector<double>& xi, double radius) {
    const std::size_t n = xs.rows();
    const std::size_t d = xs.cols();
    double best = 0.0;
    double bias = 0.0;
    for (double v : xi) bias += v;
    best = std::abs(bias);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += xi[i] * xs(i, j);
        best = std::max(best, std::abs(s));
    }
    return radius * (best / static_cast<double>(n));
}

}  // namespace detail

inline constexpr std::size_t kExhaustiveAffineLimit = 20;

/// Rademacher complexity of the affine class {x -> w.x + b : |w|_1 + |b| <= radius}.
/// The inner supremum is attained at a signed coordinate vector, so it is
/// computed exactly; the expectation over signs is exhaustive when N <= 20
/// and `exhaustive` is set, otherwise Monte-Carlo over n_draws draws.
inline RademacherEstimate rademacher_affine_exact(const SampleSet& s, std::size_t n_draws, std::uint64_t seed,
                                                  bool exhaustive = true, double radius = 1.0) {
    const std::size_t n = s.size();
    if (n == 0) throw Error("Rademacher estimate needs a nonempty sample");
    if (exhaustive && n <= kExhaustiveAffineLimit) {
        const std::size_t patterns = std::size_t{1} << n;
        std::vector<double> vals(patterns);
        std::vector<double> xi(n);
        for (std::size_t p = 0; p < patterns; ++p) {
            for (std::size_t i = 0; i < n; ++i) xi[i] = (p >> i) & 1U ? 1.0 : -1.0;
            vals[p] = detail::affine_sup(s.points(), xi, radius);
        }
        return detail::summarize(vals, true);
    }
    if (n_draws < 1) throw Error("Monte-Carlo Rademacher estimate needs n_draws >= 1");
    std::vector<double> vals(n_draws);
    for (std::size_t k = 0; k < n_draws; ++k)
        vals[k] = detail::affine_sup(s.points(), rademacher_signs(n, seed, k), radius);
    return detail::summarize(vals, false);
}

inline constexpr std::size_t kExhaustiveConstantsLimit = 30;

/// E|sum xi_i| / N, the Rademacher complexity of the class {-1, +1}. Exact by
/// binomial enumeration for N <= 30, Monte-Carlo otherwise.
inline RademacherEstimate rademacher_constants(std::size_t n, std::size_t n_draws = 10000, std::uint64_t seed = 0) {
    if (n == 0) throw Error("Rademacher estimate needs N >= 1");
    if (n <= kExhaustiveConstantsLimit) {
        // C(N, k) / 2^N via lgamma keeps every term finite.
        double total = 0.0;
        const double nn = static_cast<double>(n);
        for (std::size_t k = 0; k <= n; ++k) {
            const double kk = static_cast<double>(k);
            const double logp = std::lgamma(nn + 1) - std::lgamma(kk + 1) - std::lgamma(nn - kk + 1) - nn * std::log(2.0);
            total += std::exp(logp) * std::abs(2.0 * kk - nn);
        }
        RademacherEstimate r;
        r.value = total / nn;
        r.exact = true;
        r.draws = 0;
        return r;
    }
    std::vector<double> vals(n_draws);
    for (std::size_t k = 0; k < n_draws; ++k) {
        double s = 0.0;
        for (double v : rademacher_signs(n, seed, k)) s += v;
        vals[k] = std::abs(s) / static_cast<double>(n);
    }
    return detail::summarize(vals, false);
}

struct DeepRademacherOptions {
    std::size_t draws = 20;
    std::size_t width = 8;
    std::size_t iterations = 150;
    double step_size = 0.5;
    std::size_t threads = 1;
};

struct DeepRademacherEstimate {
    RademacherEstimate estimate;
    std::vector<double> draw_maxima;
    double upper_bound = 0.0;  // 2^L sqrt(2 log(2d + 2) / N)
};

namespace detail {

/// Best correlation (1/N) sum xi_i h(x_i) found by one projected ascent run.
inline double ascend(const Matrix& xs, const std::vector<double>& xi, std::size_t depth,
                     const DeepRademacherOptions& opt, std::uint64_t seed) {
    MeanFieldNet h = random_net(std::vector<std::size_t>(depth, opt.width), xs.cols(), 1.0, WeightLaw::gaussian, seed);
    const auto factors = lr_factors(h);
    auto corr = [&](std::size_t i, double f) { return std::pair{xi[i] * f, xi[i]}; };
    double best = 0.0;
    for (std::size_t it = 0; it <= opt.iterations; ++it) {
        BatchGradient g = backprop_batch(h, xs, corr);
        best = std::max(best, std::abs(g.loss));
        if (it == opt.iterations) break;
        // Ascend on |correlation| / P at P = 1. The -corr * dP term brings in
        // the l1 geometry of the ball; plain gradient steps followed by
        // rescaling stall at l2-aligned weights.
        const double dir = g.loss >= 0.0 ? 1.0 : -1.0;
        const auto [p0, pg] = proxy_gradient(h);
        for (std::size_t l = 0; l < g.grad.size(); ++l) {
            auto& a = g.grad[l].values();
            const auto& q = pg[l].values();
            for (std::size_t k = 0; k < a.size(); ++k) a[k] = (a[k] - g.loss * q[k]) / p0;
        }
        auto next = apply_step(h, g.grad, -dir * opt.step_size, factors);
        if (!next) break;
        const double p = path_norm_proxy(*next);
        if (!(p > 0.0)) break;
        h = scale_layer(*next, next->depth(), 1.0 / p);
    }
    return best;
}

}  // namespace detail

/// Lower estimate of the Rademacher complexity of the unit path-proxy ball
/// of depth-L nets: for each sign draw, the best of `budget` projected
/// gradient-ascent restarts on a width-(8, ..., 8) net rescaled to proxy 1.
/// Restart r of draw k is seeded by (seed, k, r) alone, so a larger budget
/// never lowers any draw's maximum. The zero function is always admissible.
inline DeepRademacherEstimate rademacher_deep_lower(const SampleSet& s, std::size_t depth, std::size_t budget,
                                                    std::uint64_t seed, const DeepRademacherOptions& opt = {}) {
    if (depth < 1) throw Error("depth must be >= 1");
    if (s.size() == 0) throw Error("Rademacher estimate needs a nonempty sample");
    DeepRademacherEstimate out;
    out.upper_bound = std::pow(2.0, static_cast<double>(depth)) * affine_rademacher_bound(s.dim(), s.size());
    out.draw_maxima.assign(opt.draws, 0.0);
    parallel_for(opt.draws, opt.threads, [&](std::size_t k) {
        const auto xi = rademacher_signs(s.size(), seed, k);
        double best = 0.0;
        for (std::size_t r = 0; r < budget; ++r) {
            const std::uint64_t rs = make_rng(seed ^ 0xd1b54a32d192ed03ULL, (static_cast<std::uint64_t>(k) << 20) + r)();
            best = std::max(best, detail::ascend(s.points(), xi, depth, opt, rs));
        }
        out.draw_maxima[k] = best;
    });
    out.estimate = detail::summarize(out.draw_maxima, false);
    return out;
}

struct GenGapOptions {
    double radius = 1.0;
    double delta = 0.1;
    std::size_t test_points = 100000;
    std::size_t steps = 3000;
    double step_size = 0.05;
    double grad_tol = 1e-5;
    double init_proxy = 1.0;
    std::size_t threads = 1;
};

struct GenGapRow {
    std::uint64_t seed = 0;
    double train_risk = 0.0;
    double test_risk = 0.0;           // clipped loss, the quantity the bound controls
    double test_risk_squared = 0.0;   // unclipped squared loss
    double proxy = 0.0;               // of the trained net
    double term_approx = 0.0;         // 18 L^2 P*^2 / m
    double term_complexity = 0.0;     // 2^{L+3/2} P* sqrt(2 log(2d+2) / N)
    double term_confidence = 0.0;     // c sqrt(2 log(2/delta) / N)
    double bound = 0.0;
    bool bound_holds = false;
    bool proxy_ok = false;            // proxy <= sqrt(2) * P* * 1.5
    bool converged = false;
    std::size_t steps = 0;
};

struct GenGapReport {
    double target_proxy = 0.0;
    double cap = 0.0;
    double lambda = 0.0;
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<GenGapRow> rows;

    std::size_t bound_hits() const {
        return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](auto& r) { return r.bound_holds; }));
    }
    std::size_t proxy_hits() const {
        return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](auto& r) { return r.proxy_ok; }));
    }
};

/// The three terms of the a priori risk bound for a target with proxy P*.
inline void fill_bound_terms(GenGapRow& row, std::size_t depth, std::size_t d, double p_star, std::size_t n,
                             std::size_t m, double cap, double delta) {
    const double l = static_cast<double>(depth);
    const double nn = static_cast<double>(n);
    row.term_approx = 18.0 * l * l * p_star * p_star / static_cast<double>(m);
    row.term_complexity = std::pow(2.0, l + 1.5) * p_star * affine_rademacher_bound(d, n);
    row.term_confidence = cap * std::sqrt(2.0 * std::log(2.0 / delta) / nn);
    row.bound = row.term_approx + row.term_complexity + row.term_confidence;
}

/// For each seed: N uniform samples labelled by f*, a width-(m, ..., m)
/// student trained on the clipped empirical risk plus (9 L^2 / m) P^2, and
/// its risk on fresh test points compared with the three-term bound.
inline GenGapReport generalization_gap_experiment(const MeanFieldNet& f_star, std::size_t n, std::size_t m,
                                                  const std::vector<std::uint64_t>& seeds,
                                                  const GenGapOptions& opt = {}) {
    if (n < 1 || m < 1) throw Error("generalization experiment needs N >= 1 and m >= 1");
    const std::size_t depth = f_star.depth();
    const std::size_t d = f_star.input_dim();
    GenGapReport rep;
    rep.target_proxy = path_norm_proxy(f_star);
    rep.cap = 4.0 * (1.0 + opt.radius) * (1.0 + opt.radius) * rep.target_proxy * rep.target_proxy;
    rep.lambda = regularization_weight(depth, m);
    rep.n = n;
    rep.m = m;
    const Loss loss = rep.cap > 0.0 ? Loss::clipped(rep.cap) : Loss::squared();
    const DataDistribution dist{DistributionKind::uniform_cube, d, opt.radius};
    rep.rows.resize(seeds.size());

    parallel_for(seeds.size(), opt.threads, [&](std::size_t k) {
        const std::uint64_t seed = seeds[k];
        GenGapRow row;
        row.seed = seed;
        const Dataset train_set = label(f_star, sample(dist, n, make_rng(seed, 1)()));
        const Dataset test_set = label(f_star, sample(dist, opt.test_points, make_rng(seed, 2)()));
        const MeanFieldNet student = random_net(std::vector<std::size_t>(depth, m), d, opt.init_proxy,
                                                WeightLaw::gaussian, make_rng(seed, 3)());
        TrainConfig cfg;
        cfg.step_size = opt.step_size;
        cfg.steps = opt.steps;
        cfg.grad_tol = opt.grad_tol;
        cfg.seed = seed;
        cfg.checkpoint_every = opt.steps + 1;
        const TrajectoryLog log = train_regularized(student, RiskSpec::empirical(train_set, loss), cfg, rep.lambda);
        const MeanFieldNet& fm = log.final_net;
        row.train_risk = risk(fm, train_set.xs, train_set.ys, loss);
        row.test_risk = risk(fm, test_set.xs, test_set.ys, loss);
        row.test_risk_squared = risk(fm, test_set.xs, test_set.ys, Loss::squared());
        row.proxy = path_norm_proxy(fm);
        row.converged = log.converged;
        row.steps = log.steps_taken;
        fill_bound_terms(row, depth, d, rep.target_proxy, n, m, rep.cap, opt.delta);
        row.bound_holds = row.test_risk <= row.bound;
        row.proxy_ok = row.proxy <= std::sqrt(2.0) * rep.target_proxy * 1.5;
        rep.rows[k] = row;
    });
    return rep;
}

inline void write_gen_gap_csv(std::ostream& os, const GenGapReport& rep) {
    os << "# target_proxy=" << format_double(rep.target_proxy) << " cap=" << format_double(rep.cap)
       << " lambda=" << format_double(rep.lambda) << " N=" << rep.n << " m=" << rep.m << '\n';
    os << "seed,train_risk,test_risk,test_risk_squared,proxy,term_approx,term_complexity,term_confidence,bound,"
          "bound_holds,proxy_ok,converged,steps\n";
    for (const auto& r : rep.rows)
        os << r.seed << ',' << format_double(r.train_risk) << ',' << format_double(r.test_risk) << ','
           << format_double(r.test_risk_squared) << ',' << format_double(r.proxy) << ','
           << format_double(r.term_approx) << ',' << format_double(r.term_complexity) << ','
           << format_double(r.term_confidence) << ',' << format_double(r.bound) << ',' << r.bound_holds << ','
           << r.proxy_ok << ',' << r.converged << ',' << r.steps << '\n';
}

}  // namespace mfnet
