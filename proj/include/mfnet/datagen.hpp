#pragma once

// Sampling distributions on [-R, R]^d, random target networks and datasets.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "mfnet/errors.hpp"
#include "mfnet/format.hpp"
#include "mfnet/net.hpp"
#include "mfnet/norms.hpp"

namespace mfnet {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream) pairs, e.g. one per worker or per draw.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

enum class DistributionKind { uniform_cube, sphere_surface, gaussian_clipped };

/// Data distribution with support inside the l-infinity ball of radius R.
struct DataDistribution {
    DistributionKind kind = DistributionKind::uniform_cube;
    std::size_t dim = 1;
    double radius = 1.0;

    std::vector<double> draw(Rng& rng) const {
        std::vector<double> x(dim);
        switch (kind) {
            case DistributionKind::uniform_cube: {
                std::uniform_real_distribution<double> u(-radius, radius);
                for (double& v : x) v = u(rng);
                break;
            }
            case DistributionKind::sphere_surface: {
                // Euclidean sphere of radius R, contained in the cube.
                std::normal_distribution<double> g(0.0, 1.0);
                double n2 = 0.0;
                do {
                    n2 = 0.0;
                    for (double& v : x) {
                        v = g(rng);
                        n2 += v * v;
                    }
                } while (n2 == 0.0);
                const double s = radius / std::sqrt(n2);
                for (double& v : x) v *= s;
                break;
            }
            case DistributionKind::gaussian_clipped: {
                std::normal_distribution<double> g(0.0, radius / 2.0);
                for (double& v : x) v = std::clamp(g(rng), -radius, radius);
                break;
            }
        }
        return x;
    }
};

inline std::string to_string(DistributionKind k) {
    switch (k) {
        case DistributionKind::uniform_cube: return "uniform_cube";
        case DistributionKind::sphere_surface: return "sphere_surface";
        case DistributionKind::gaussian_clipped: return "gaussian_clipped";
    }
    return "unknown";
}

inline DistributionKind parse_distribution_kind(const std::string& s) {
    if (s == "uniform_cube" || s == "uniform") return DistributionKind::uniform_cube;
    if (s == "sphere_surface" || s == "sphere") return DistributionKind::sphere_surface;
    if (s == "gaussian_clipped" || s == "gaussian") return DistributionKind::gaussian_clipped;
    throw Error("unknown distribution '" + s + "'");
}

/// n x d matrix of i.i.d. draws; deterministic in the seed.
inline Matrix sample(const DataDistribution& dist, std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    Matrix xs(n, dist.dim);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = dist.draw(rng);
        std::copy(x.begin(), x.end(), xs.row(i).begin());
    }
    return xs;
}

struct Dataset {
    Matrix xs;
    std::vector<double> ys;
    std::string provenance;

    std::size_t size() const { return ys.size(); }
    std::size_t dim() const { return xs.cols(); }
};

inline Dataset label(const MeanFieldNet& target, const Matrix& xs, std::string provenance = {}) {
    Dataset ds{xs, std::vector<double>(xs.rows()), std::move(provenance)};
    for (std::size_t i = 0; i < xs.rows(); ++i) ds.ys[i] = forward_net(target, xs.row(i));
    return ds;
}

/// Optional additive N(0, sigma^2) label noise; labels are noise-free unless this is called.
inline void add_label_noise(Dataset& ds, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw Error("noise level must be nonnegative");
    Rng rng = make_rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& y : ds.ys) y += sigma * g(rng);
}

enum class WeightLaw { uniform, gaussian };

/// Random net with unit-variance weights in the stored (mean-field)
/// convention, so every layer has L2 norm close to one; the outer layer is
/// then rescaled so that the path proxy equals `proxy_target`.
inline MeanFieldNet random_net(const std::vector<std::size_t>& widths, std::size_t input_dim, double proxy_target,
                               WeightLaw law, std::uint64_t seed) {
    if (widths.empty()) throw ShapeError("random_net needs at least one hidden layer");
    if (!(proxy_target > 0.0)) throw Error("proxy_target must be positive");
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> uni(-std::sqrt(3.0), std::sqrt(3.0));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Matrix> layers;
    std::size_t fan_in = input_dim + 1;
    for (std::size_t l = 0; l <= widths.size(); ++l) {
        const std::size_t rows = l < widths.size() ? widths[l] : 1;
        Matrix m(rows, fan_in);
        for (double& v : m.values()) v = law == WeightLaw::uniform ? uni(rng) : gauss(rng);
        layers.push_back(std::move(m));
        fan_in = rows;
    }
    MeanFieldNet net(input_dim, std::move(layers));
    const double p = path_norm_proxy(net);
    if (p == 0.0) throw DegenerateNet("random draw has zero path proxy");
    return scale_layer(net, net.depth(), proxy_target / p);
}

/// Lipschitz check with pairs drawn from `dist`.
inline bool lipschitz_bound_check(const MeanFieldNet& net, const DataDistribution& dist, std::size_t n_pairs,
                                  std::uint64_t seed = 0) {
    Rng rng = make_rng(seed);
    return lipschitz_bound_check(net, [&] { return dist.draw(rng); }, n_pairs);
}

// Dataset CSV: "# provenance" comment line, header x1..xd,y, one row per sample.
inline void write_dataset_csv(std::ostream& os, const Dataset& ds) {
    if (!ds.provenance.empty()) os << "# " << ds.provenance << '\n';
    for (std::size_t j = 0; j < ds.dim(); ++j) os << 'x' << j + 1 << ',';
    os << "y\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) os << format_double(ds.xs(i, j)) << ',';
        os << format_double(ds.ys[i]) << '\n';
    }
}

inline Dataset read_dataset_csv(std::istream& is) {
    Dataset ds;
    std::string line;
    std::vector<double> flat;
    std::size_t dim = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            ds.provenance = line.substr(line.find_first_not_of("# "));
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
            continue;
        }
        std::istringstream ls(line);
        std::string cell;
        std::size_t k = 0;
        while (std::getline(ls, cell, ',')) {
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc()) throw FormatError("bad number '" + cell + "' in dataset");
            if (k < dim)
                flat.push_back(v);
            else
                ds.ys.push_back(v);
            ++k;
        }
        if (k != dim + 1) throw FormatError("dataset row has " + std::to_string(k) + " cells");
    }
    if (!header_seen || dim == 0) throw FormatError("dataset has no header");
    ds.xs = Matrix(ds.ys.size(), dim, std::move(flat));
    return ds;
}

}  // namespace mfnet
