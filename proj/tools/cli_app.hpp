#pragma once

// The `mfnet` experiment runner. run_cli() is the whole program; main() only
// forwards argv and the standard streams, so tests can drive it in-process.
//
// Exit codes: 0 success, 2 invalid input (bad flags, config, files or
// shapes), 3 training diverged, 4 a --check invariant failed, 1 anything else.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mfnet/mfnet.hpp"

namespace mfnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitCheckFailed = 4;

class InvalidInput : public Error {
public:
    using Error::Error;
};

class CheckFailed : public Error {
public:
    using Error::Error;
};

/// Output sink: a file when a path is given, the provided stream otherwise.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw InvalidInput("cannot write '" + path + "'");
            os_ = file_.get();
        }
    }
    std::ostream& operator*() { return *os_; }
    bool to_file() const { return file_ != nullptr; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

/// Points from a CSV with a header row; a trailing "y" column is ignored.
inline Matrix read_points_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("cannot open points file '" + path + "'");
    std::string line;
    std::vector<double> flat;
    std::size_t cols = 0, keep = 0, rows = 0;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!header) {
            header = true;
            cols = cells.size();
            keep = (!cells.empty() && cells.back() == "y") ? cols - 1 : cols;
            if (keep == 0) throw FormatError("points file has no coordinate columns");
            continue;
        }
        if (cells.size() != cols) throw FormatError("points row has " + std::to_string(cells.size()) + " cells");
        for (std::size_t j = 0; j < keep; ++j) {
            double v = 0.0;
            auto res = std::from_chars(cells[j].data(), cells[j].data() + cells[j].size(), v);
            if (res.ec != std::errc()) throw FormatError("bad number '" + cells[j] + "' in points file");
            flat.push_back(v);
        }
        ++rows;
    }
    if (!header) throw FormatError("points file has no header");
    return Matrix(rows, keep, std::move(flat));
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("cannot open dataset '" + path + "'");
    return read_dataset_csv(is);
}

/// Expands `--config FILE` (flat key=value lines, lists as a,b,c) into
/// `--key=value` arguments placed before the command-line flags. Keys given
/// explicitly on the command line win.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw InvalidInput("--config needs a file");
            config_path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        } else {
            out.push_back(args[i]);
        }
    }
    if (config_path.empty()) return out;
    std::ifstream is(config_path);
    if (!is) throw InvalidInput("cannot open config '" + config_path + "'");
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(is);
    } catch (const CLI::Error& e) {
        throw InvalidInput("malformed config '" + config_path + "': " + e.what());
    }
    auto given = [&](const std::string& key) {
        for (const auto& a : out)
            if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
        return false;
    };
    std::vector<std::string> injected;
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        if (!item.parents.empty()) throw InvalidInput("config '" + config_path + "' must be flat (no sections)");
        if (item.name.empty() || item.name.find_first_of(" \t") != std::string::npos)
            throw InvalidInput("malformed key in config '" + config_path + "'");
        if (given(item.name)) continue;
        std::string value;
        for (std::size_t k = 0; k < item.inputs.size(); ++k) value += (k ? "," : "") + item.inputs[k];
        injected.push_back("--" + item.name + "=" + value);
    }
    // Subcommand name first, then config values, then explicit flags.
    if (out.empty()) return injected;
    std::vector<std::string> merged{out.front()};
    merged.insert(merged.end(), injected.begin(), injected.end());
    merged.insert(merged.end(), out.begin() + 1, out.end());
    return merged;
}

struct DistOptions {
    std::string kind = "uniform_cube";
    double radius = 1.0;

    void add_to(CLI::App* app) {
        app->add_option("--dist", kind, "uniform_cube | sphere_surface | gaussian_clipped")->capture_default_str();
        app->add_option("--radius", radius, "support radius R")->capture_default_str();
    }
    DataDistribution make(std::size_t dim) const {
        if (!(radius > 0.0)) throw InvalidInput("--radius must be positive");
        try {
            return DataDistribution{parse_distribution_kind(kind), dim, radius};
        } catch (const Error& e) {
            throw InvalidInput(e.what());
        }
    }
};

struct TrainOptions {
    std::string model;
    std::string data;
    std::string target;
    std::string reference;
    DistOptions dist;
    std::size_t batch = 256;
    double h = 1e-3;
    std::size_t steps = 1000;
    std::size_t checkpoint_every = 100;
    int sigma_prime = 0;
    std::string loss = "squared";
    double cap = 0.0;
    double grad_tol = 0.0;
    std::optional<double> lambda;
    std::optional<std::uint64_t> seed;
    bool probe = false;
    bool check = false;
    std::string csv;
    std::string out_net;
};

inline void add_train_options(CLI::App* sub, TrainOptions& o, bool regularized) {
    sub->add_option("model,--model", o.model, "initial net")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", o.data, "dataset CSV (empirical risk)")->check(CLI::ExistingFile);
    sub->add_option("--target", o.target, "target net (population risk with fresh minibatches)")
        ->check(CLI::ExistingFile);
    o.dist.add_to(sub);
    sub->add_option("--batch", o.batch, "minibatch size in population mode")->capture_default_str();
    sub->add_option("--step-size", o.h, "step size h")->capture_default_str();
    sub->add_option("--steps", o.steps, "number of steps")->capture_default_str();
    sub->add_option("--checkpoint-every", o.checkpoint_every, "log period")->capture_default_str();
    sub->add_option("--sigma-prime-at-zero", o.sigma_prime, "ReLU derivative at 0")
        ->check(CLI::IsMember({0, 1}))
        ->capture_default_str();
    sub->add_option("--loss", o.loss, "squared | clipped")->check(CLI::IsMember({"squared", "clipped"}));
    sub->add_option("--cap", o.cap, "cap for the clipped loss");
    sub->add_option("--grad-tol", o.grad_tol, "stop when the scaled gradient norm falls below this");
    sub->add_option("--seed", o.seed, "seed (minibatches in population mode)");
    sub->add_flag("--probe", o.probe, "probe the largest monotone step size first");
    sub->add_flag("--check", o.check, "verify the trajectory invariants; exit 4 on violation");
    sub->add_option("--csv", o.csv, "trajectory CSV (default: stdout)");
    sub->add_option("--out-net", o.out_net, "write the final net here");
    if (regularized) {
        sub->add_option("--lambda", o.lambda, "penalty weight (default 9 L^2 / m)");
        sub->add_option("--reference", o.reference, "target net whose proxy bounds the minimizer's")
            ->check(CLI::ExistingFile);
    }
}

inline int run_train(const TrainOptions& o, bool regularized, std::ostream& out, std::ostream& err) {
    const MeanFieldNet net = load_net(o.model);
    if (o.data.empty() == o.target.empty()) throw InvalidInput("give exactly one of --data and --target");
    Loss loss;
    if (o.loss == "clipped") {
        if (!(o.cap > 0.0)) throw InvalidInput("--loss clipped needs --cap > 0");
        loss = Loss::clipped(o.cap);
    }
    RiskSpec spec;
    std::optional<MeanFieldNet> target;
    if (!o.data.empty()) {
        spec = RiskSpec::empirical(read_dataset(o.data), loss);
        if (spec.data->dim() != net.input_dim()) throw InvalidInput("dataset dimension does not match the net");
        if (spec.data->size() == 0) throw InvalidInput("dataset is empty");
    } else {
        if (!o.seed) throw InvalidInput("population training is stochastic: --seed is required");
        target = load_net(o.target);
        if (target->input_dim() != net.input_dim()) throw InvalidInput("target dimension does not match the net");
        if (o.batch < 1) throw InvalidInput("--batch must be >= 1");
        spec = RiskSpec::population(*target, o.dist.make(net.input_dim()), o.batch, loss);
    }
    if (!(o.h > 0.0)) throw InvalidInput("--step-size must be positive");
    if (o.checkpoint_every < 1) throw InvalidInput("--checkpoint-every must be >= 1");
    TrainConfig cfg;
    cfg.step_size = o.h;
    cfg.steps = o.steps;
    cfg.checkpoint_every = o.checkpoint_every;
    cfg.sigma_prime_at_zero = o.sigma_prime;
    cfg.seed = o.seed.value_or(0);
    cfg.grad_tol = o.grad_tol;
    cfg.probe_stability = o.probe || o.check;
    if (o.seed) out << "seed=" << *o.seed << '\n';

    TrajectoryLog log;
    int code = kExitOk;
    std::string diverged;
    try {
        if (regularized) {
            if (o.lambda && *o.lambda < 0.0) throw InvalidInput("--lambda must be nonnegative");
            log = train_regularized(net, spec, cfg, o.lambda);
        } else {
            log = train(net, spec, cfg);
        }
    } catch (const Diverged& e) {
        log = e.partial_log();
        diverged = e.what();
        code = kExitDiverged;
    }
    {
        Sink sink(o.csv, out);
        write_trajectory_csv(*sink, log);
    }
    if (!o.out_net.empty() && code == kExitOk) save_net(o.out_net, log.final_net);
    if (code == kExitDiverged) {
        err << "mfnet: diverged: " << diverged << '\n';
        return code;
    }
    if (!o.check) return kExitOk;

    std::vector<std::string> failures;
    if (!log.growth_bounds_hold(1.05))
        failures.push_back("growth bound slack " + format_double(std::max(log.max_moment_slack(), log.max_proxy_slack())) +
                           " exceeds 1.05");
    for (std::size_t k = 0; k < log.rows.size(); ++k) {
        const auto& r = log.rows[k];
        bool finite = std::isfinite(r.risk) && std::isfinite(r.proxy) && std::isfinite(r.Q) &&
                      std::isfinite(r.dissipation_residual);
        for (double v : r.norms) finite = finite && std::isfinite(v);
        if (!finite) failures.push_back("non-finite entry at step " + std::to_string(r.step));
        if (k > 0 && !(r.t > log.rows[k - 1].t)) failures.push_back("flow time not increasing");
    }
    if (log.empirical && log.stable_step && cfg.step_size <= *log.stable_step && !log.monotone)
        failures.push_back("risk increased although h is below the probed stability threshold");
    if (regularized && log.converged) {
        std::optional<MeanFieldNet> ref = target;
        if (!o.reference.empty()) ref = load_net(o.reference);
        if (ref) {
            const double p = path_norm_proxy(log.final_net);
            const double cap = std::sqrt(2.0) * path_norm_proxy(*ref) * 1.5;
            if (p > cap) failures.push_back("minimizer proxy " + format_double(p) + " exceeds " + format_double(cap));
        }
    }
    if (!failures.empty()) throw CheckFailed(failures.front());
    err << "check ok\n";
    return kExitOk;
}

inline std::vector<double> parse_point(const std::vector<double>& x, std::size_t dim) {
    if (x.size() != dim)
        throw InvalidInput("--x has " + std::to_string(x.size()) + " coordinates, model expects " + std::to_string(dim));
    return x;
}

inline int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-field ReLU networks: path norms, Maurey sampling, layer-scaled training, Rademacher estimates",
                 "mfnet"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");
    std::size_t threads = 1;
    app.add_option("--threads", threads, "worker threads (results do not depend on it)")->capture_default_str();
    app.option_defaults()->always_capture_default();

    // eval
    std::string eval_model, eval_points;
    std::vector<double> eval_x;
    auto* eval = app.add_subcommand("eval", "evaluate a net or tree");
    eval->add_option("model,--model", eval_model, "model file")->required()->check(CLI::ExistingFile);
    eval->add_option("--x", eval_x, "one point, comma separated")->delimiter(',')->allow_extra_args(false);
    eval->add_option("--points", eval_points, "CSV of points (header x1..xd, optional y)")->check(CLI::ExistingFile);

    // pathnorm
    std::string pn_model, pn_csv;
    auto* pathnorm = app.add_subcommand("pathnorm", "path proxy, layer norms and Q");
    pathnorm->add_option("model,--model", pn_model, "model file")->required()->check(CLI::ExistingFile);
    pathnorm->add_option("--csv", pn_csv, "also write the report as CSV");

    // balance / to-tree / flatten
    std::string bal_model, bal_out, tt_model, tt_out, fl_model, fl_out;
    auto* bal = app.add_subcommand("balance", "rescale layers to equal L2 norms");
    bal->add_option("model,--model", bal_model, "net file")->required()->check(CLI::ExistingFile);
    bal->add_option("-o,--out", bal_out, "output net")->required();
    auto* to_tree = app.add_subcommand("to-tree", "remove parameter sharing");
    to_tree->add_option("model,--model", tt_model, "net file")->required()->check(CLI::ExistingFile);
    to_tree->add_option("-o,--out", tt_out, "output tree")->required();
    auto* flatten = app.add_subcommand("flatten", "tree to block-sparse net");
    flatten->add_option("model,--model", fl_model, "tree file")->required()->check(CLI::ExistingFile);
    flatten->add_option("-o,--out", fl_out, "output net")->required();

    // maurey
    std::string mr_model, mr_csv, mr_tree;
    std::size_t mr_m = 0, mr_eval = kDefaultEvalPoints;
    std::uint64_t mr_seed = 0;
    bool mr_check = false;
    DistOptions mr_dist;
    auto* maurey = app.add_subcommand("maurey", "subsample a net into a width-(m,...,m) tree");
    maurey->add_option("model,--model", mr_model, "source net")->required()->check(CLI::ExistingFile);
    maurey->add_option("--m", mr_m, "branching")->required()->check(CLI::PositiveNumber);
    maurey->add_option("--seed", mr_seed, "sampling seed")->required();
    maurey->add_option("--eval-points", mr_eval, "Monte-Carlo points for the L2 error")->check(CLI::PositiveNumber);
    mr_dist.add_to(maurey);
    maurey->add_option("--csv", mr_csv, "result CSV (default: stdout)");
    maurey->add_option("--tree-out", mr_tree, "write the sampled tree here");
    maurey->add_flag("--check", mr_check, "verify the construction's invariants; exit 4 on violation");

    // rate-sweep
    std::string rs_model, rs_csv;
    std::vector<std::size_t> rs_ms;
    std::size_t rs_seeds = 20, rs_eval = kDefaultEvalPoints;
    std::uint64_t rs_seed = 0;
    DistOptions rs_dist;
    auto* sweep = app.add_subcommand("rate-sweep", "Maurey error against m over many seeds");
    sweep->add_option("model,--model", rs_model, "source net")->required()->check(CLI::ExistingFile);
    sweep->add_option("--ms", rs_ms, "increasing m values, comma separated")->required()->delimiter(',');
    sweep->add_option("--seeds", rs_seeds, "draws per m")->check(CLI::PositiveNumber);
    sweep->add_option("--seed", rs_seed, "base seed")->required();
    sweep->add_option("--eval-points", rs_eval, "Monte-Carlo points for the L2 error")->check(CLI::PositiveNumber);
    rs_dist.add_to(sweep);
    sweep->add_option("--csv", rs_csv, "sweep CSV (default: stdout)");

    // train / train-reg
    TrainOptions tr, trr;
    auto* train_cmd = app.add_subcommand("train", "layer-scaled gradient descent with monitors");
    add_train_options(train_cmd, tr, false);
    auto* train_reg = app.add_subcommand("train-reg", "training with the penalty lambda * proxy^2");
    add_train_options(train_reg, trr, true);

    // rademacher
    std::string rd_class = "affine", rd_points;
    std::size_t rd_n = 100, rd_d = 2, rd_draws = 1000, rd_depth = 1, rd_budget = 3;
    std::uint64_t rd_seed = 0;
    bool rd_mc = false;
    auto* rad = app.add_subcommand("rademacher", "empirical Rademacher complexity estimates");
    rad->add_option("--class", rd_class, "affine | constants | deep")
        ->check(CLI::IsMember({"affine", "constants", "deep"}));
    rad->add_option("--points", rd_points, "sample CSV with entries in [-1,1]")->check(CLI::ExistingFile);
    rad->add_option("--n", rd_n, "sample size when no points file is given")->check(CLI::PositiveNumber);
    rad->add_option("--d", rd_d, "dimension when no points file is given")->check(CLI::PositiveNumber);
    rad->add_option("--draws", rd_draws, "sign draws");
    rad->add_option("--depth", rd_depth, "depth for the deep class")->check(CLI::PositiveNumber);
    rad->add_option("--budget", rd_budget, "ascent restarts per draw for the deep class");
    rad->add_option("--seed", rd_seed, "seed for points and sign draws")->required();
    rad->add_flag("--monte-carlo", rd_mc, "never enumerate sign patterns exhaustively");

    // gen-gap
    std::string gg_model, gg_csv;
    std::size_t gg_n = 2000, gg_m = 32, gg_seeds = 10;
    std::uint64_t gg_seed = 0;
    GenGapOptions gg_opt;
    auto* gen = app.add_subcommand("gen-gap", "regularized training against the a priori risk bound");
    gen->add_option("model,--model", gg_model, "target net f*")->required()->check(CLI::ExistingFile);
    gen->add_option("--n", gg_n, "training sample size")->check(CLI::PositiveNumber);
    gen->add_option("--m", gg_m, "student width")->check(CLI::PositiveNumber);
    gen->add_option("--seeds", gg_seeds, "number of seeds")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gg_seed, "base seed")->required();
    gen->add_option("--steps", gg_opt.steps, "maximum training steps");
    gen->add_option("--step-size", gg_opt.step_size, "step size h");
    gen->add_option("--grad-tol", gg_opt.grad_tol, "convergence tolerance");
    gen->add_option("--test-points", gg_opt.test_points, "fresh points for the test risk")->check(CLI::PositiveNumber);
    gen->add_option("--init-proxy", gg_opt.init_proxy, "path proxy of the student at initialization");
    gen->add_option("--csv", gg_csv, "report CSV (default: stdout)");

    // compose
    std::string cp_op, cp_outer, cp_out;
    std::vector<std::string> cp_inputs;
    double cp_bound = 1.0;
    std::size_t cp_n = 16, cp_extra = 1;
    auto* comp = app.add_subcommand("compose", "network calculus: sums, |f|, max, min, products, compositions");
    comp->add_option("--op", cp_op, "add | negate | abs | pos | max | min | lift | product | compose")
        ->required()
        ->check(CLI::IsMember({"add", "negate", "abs", "pos", "max", "min", "lift", "product", "compose"}));
    comp->add_option("--inputs", cp_inputs, "input nets, comma separated")->required()->delimiter(',');
    comp->add_option("--outer", cp_outer, "outer net g for --op compose")->check(CLI::ExistingFile);
    comp->add_option("--bound", cp_bound, "sup bound B on the factors for --op product");
    comp->add_option("--n", cp_n, "quadrature points for --op product");
    comp->add_option("--extra", cp_extra, "added depth for --op lift");
    comp->add_option("-o,--out", cp_out, "output net")->required();

    // make-target
    std::vector<std::size_t> mt_widths;
    std::size_t mt_d = 2, mt_n = 0;
    double mt_proxy = 1.0;
    std::string mt_law = "uniform", mt_out, mt_data;
    std::uint64_t mt_seed = 0;
    std::optional<std::uint64_t> mt_data_seed;
    DistOptions mt_dist;
    auto* make = app.add_subcommand("make-target", "random target net, optionally with a labelled sample");
    make->add_option("--widths", mt_widths, "hidden widths, comma separated")->required()->delimiter(',');
    make->add_option("--d", mt_d, "input dimension")->check(CLI::PositiveNumber);
    make->add_option("--proxy", mt_proxy, "path proxy of the result");
    make->add_option("--law", mt_law, "uniform | gaussian")->check(CLI::IsMember({"uniform", "gaussian"}));
    make->add_option("--seed", mt_seed, "weight seed")->required();
    make->add_option("-o,--out", mt_out, "output net")->required();
    make->add_option("--n", mt_n, "also sample this many labelled points");
    make->add_option("--data", mt_data, "dataset CSV for --n points");
    make->add_option("--data-seed", mt_data_seed, "seed for the points (default: --seed + 1)");
    mt_dist.add_to(make);

    std::vector<std::string> args = expand_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        if (const auto nl = msg.find('\n'); nl != std::string::npos) msg.erase(nl);
        err << "mfnet: " << msg << '\n';
        return kExitInvalid;
    }
    if (threads < 1) throw InvalidInput("--threads must be >= 1");

    if (eval->parsed()) {
        const Model model = load_model(eval_model);
        const std::size_t dim = std::visit([](const auto& m) { return m.input_dim(); }, model);
        auto value = [&](std::span<const double> x) {
            return std::visit([&](const auto& m) { return evaluate(m, x); }, model);
        };
        if (eval_x.empty() == eval_points.empty()) throw InvalidInput("give exactly one of --x and --points");
        if (!eval_x.empty()) {
            out << format_double(value(parse_point(eval_x, dim))) << '\n';
        } else {
            const Matrix xs = read_points_csv(eval_points);
            if (xs.cols() != dim) throw InvalidInput("points file dimension does not match the model");
            out << "f\n";
            for (std::size_t i = 0; i < xs.rows(); ++i) out << format_double(value(xs.row(i))) << '\n';
        }
        return kExitOk;
    }
    if (pathnorm->parsed()) {
        const Model model = load_model(pn_model);
        if (const auto* tree = std::get_if<NeuralTree>(&model)) {
            out << "proxy=" << format_double(path_norm_proxy_tree(*tree)) << '\n';
            return kExitOk;
        }
        const auto& net = std::get<MeanFieldNet>(model);
        const PathNormReport rep = hilbert_complexity(net);
        out << "proxy=" << format_double(rep.proxy) << '\n' << "Q=" << format_double(rep.hilbert_Q) << '\n';
        for (std::size_t l = 0; l < rep.per_layer_l2.size(); ++l)
            out << "norm_l" << l << '=' << format_double(rep.per_layer_l2[l]) << '\n';
        if (!pn_csv.empty()) {
            Sink sink(pn_csv, out);
            write_report_header(*sink, net.depth());
            write_report_row(*sink, rep);
        }
        return kExitOk;
    }
    if (bal->parsed()) {
        save_net(bal_out, balance(load_net(bal_model)));
        return kExitOk;
    }
    if (to_tree->parsed()) {
        save_tree(tt_out, net_to_tree(load_net(tt_model)));
        return kExitOk;
    }
    if (flatten->parsed()) {
        const Model model = load_model(fl_model);
        const auto* tree = std::get_if<NeuralTree>(&model);
        if (!tree) throw InvalidInput("'" + fl_model + "' holds a network, a tree was expected");
        save_net(fl_out, tree_to_net(*tree));
        return kExitOk;
    }
    if (maurey->parsed()) {
        const MeanFieldNet net = load_net(mr_model);
        const DataDistribution dist = mr_dist.make(net.input_dim());
        const MaureyResult r = maurey_subsample(net, mr_m, mr_seed, dist, mr_eval);
        const double tree_proxy = path_norm_proxy_tree(r.tree);
        {
            Sink sink(mr_csv, out);
            *sink << "# seed=" << mr_seed << '\n';
            *sink << "m,seed,target_proxy,tree_proxy,l2_error,bound\n";
            *sink << r.m << ',' << mr_seed << ',' << format_double(r.target_proxy) << ',' << format_double(tree_proxy)
                  << ',' << format_double(r.l2_error) << ',' << format_double(r.bound) << '\n';
            if (sink.to_file()) out << "seed=" << mr_seed << '\n';
        }
        if (!mr_tree.empty()) save_tree(mr_tree, r.tree);
        if (mr_check) {
            for (std::size_t b : r.tree.branching())
                if (b != mr_m) throw CheckFailed("tree branching differs from m");
            if (!(tree_proxy <= r.target_proxy * (1.0 + 1e-9)))
                throw CheckFailed("tree proxy " + format_double(tree_proxy) + " exceeds source proxy " +
                                  format_double(r.target_proxy));
            if (!std::isfinite(r.l2_error)) throw CheckFailed("non-finite L2 error");
            const MeanFieldNet flat = tree_to_net(r.tree);
            const NeuralTree unshared = net_to_tree(net);
            const Matrix xs = sample(dist, 50, make_rng(mr_seed, 99)());
            for (std::size_t i = 0; i < xs.rows(); ++i) {
                const double a = forward_tree(r.tree, xs.row(i));
                const double b = forward_net(flat, xs.row(i));
                if (std::abs(a - b) > 1e-12 * (1.0 + std::abs(a))) throw CheckFailed("flattened tree differs from tree");
                const double c = forward_net(net, xs.row(i));
                const double e = forward_tree(unshared, xs.row(i));
                if (std::abs(c - e) > 1e-12 * (1.0 + std::abs(c))) throw CheckFailed("net and its tree differ");
            }
            err << "check ok\n";
        }
        return kExitOk;
    }
    if (sweep->parsed()) {
        const MeanFieldNet net = load_net(rs_model);
        const RateSweep s = rate_sweep(net, rs_ms, rs_dist.make(net.input_dim()), rs_seeds, rs_seed, threads, rs_eval);
        Sink sink(rs_csv, out);
        *sink << "# seed=" << rs_seed << '\n';
        write_rate_sweep_csv(*sink, s);
        if (sink.to_file()) out << "seed=" << rs_seed << '\n';
        out << "slope=" << (std::isnan(s.slope) ? std::string("nan") : format_double(s.slope)) << '\n';
        return kExitOk;
    }
    if (train_cmd->parsed()) return run_train(tr, false, out, err);
    if (train_reg->parsed()) return run_train(trr, true, out, err);
    if (rad->parsed()) {
        Matrix pts = rd_points.empty()
                         ? sample(DataDistribution{DistributionKind::uniform_cube, rd_d, 1.0}, rd_n, make_rng(rd_seed, 7)())
                         : read_points_csv(rd_points);
        SampleSet s(std::move(pts));
        out << "seed=" << rd_seed << '\n';
        out << "N=" << s.size() << "\nd=" << s.dim() << '\n';
        if (rd_class == "affine") {
            const auto r = rademacher_affine_exact(s, rd_draws, rd_seed, !rd_mc);
            out << "estimate=" << format_double(r.value) << "\nstd_error=" << format_double(r.std_error)
                << "\nexact=" << (r.exact ? 1 : 0) << "\nupper_bound=" << format_double(affine_rademacher_bound(s.dim(), s.size()))
                << '\n';
        } else if (rd_class == "constants") {
            const auto r = rademacher_constants(s.size(), rd_draws, rd_seed);
            out << "estimate=" << format_double(r.value) << "\nstd_error=" << format_double(r.std_error)
                << "\nexact=" << (r.exact ? 1 : 0) << '\n';
        } else {
            DeepRademacherOptions opt;
            opt.draws = rd_draws;
            opt.threads = threads;
            const auto r = rademacher_deep_lower(s, rd_depth, rd_budget, rd_seed, opt);
            out << "lower_estimate=" << format_double(r.estimate.value)
                << "\nstd_error=" << format_double(r.estimate.std_error)
                << "\nupper_bound=" << format_double(r.upper_bound) << '\n';
        }
        return kExitOk;
    }
    if (gen->parsed()) {
        const MeanFieldNet f_star = load_net(gg_model);
        std::vector<std::uint64_t> seeds;
        for (std::size_t k = 0; k < gg_seeds; ++k) seeds.push_back(gg_seed + k);
        gg_opt.threads = threads;
        const GenGapReport rep = generalization_gap_experiment(f_star, gg_n, gg_m, seeds, gg_opt);
        Sink sink(gg_csv, out);
        *sink << "# seed=" << gg_seed << '\n';
        write_gen_gap_csv(*sink, rep);
        if (sink.to_file()) out << "seed=" << gg_seed << '\n';
        out << "bound_holds=" << rep.bound_hits() << '/' << rep.rows.size() << '\n';
        out << "proxy_ok=" << rep.proxy_hits() << '/' << rep.rows.size() << '\n';
        return kExitOk;
    }
    if (comp->parsed()) {
        std::vector<MeanFieldNet> nets;
        for (const auto& p : cp_inputs) nets.push_back(load_net(p));
        auto need = [&](std::size_t k) {
            if (nets.size() != k)
                throw InvalidInput("--op " + cp_op + " takes " + std::to_string(k) + " input net(s), got " +
                                   std::to_string(nets.size()));
        };
        MeanFieldNet result;
        if (cp_op == "add") {
            need(2);
            result = add(nets[0], nets[1]);
        } else if (cp_op == "negate") {
            need(1);
            result = negate(nets[0]);
        } else if (cp_op == "abs") {
            need(1);
            result = abs_of(nets[0]);
        } else if (cp_op == "pos") {
            need(1);
            result = positive_part_of(nets[0]);
        } else if (cp_op == "max") {
            need(2);
            result = max_of(nets[0], nets[1]);
        } else if (cp_op == "min") {
            need(2);
            result = min_of(nets[0], nets[1]);
        } else if (cp_op == "lift") {
            need(1);
            result = lift_depth(nets[0], cp_extra);
        } else if (cp_op == "product") {
            need(2);
            result = product_of(nets[0], nets[1], cp_bound, cp_n);
        } else {
            if (cp_outer.empty()) throw InvalidInput("--op compose needs --outer");
            result = compose(load_net(cp_outer), nets);
        }
        save_net(cp_out, result);
        out << "proxy=" << format_double(path_norm_proxy(result)) << '\n';
        return kExitOk;
    }
    if (make->parsed()) {
        if (!(mt_proxy > 0.0)) throw InvalidInput("--proxy must be positive");
        const MeanFieldNet net =
            random_net(mt_widths, mt_d, mt_proxy, mt_law == "uniform" ? WeightLaw::uniform : WeightLaw::gaussian, mt_seed);
        save_net(mt_out, net);
        out << "seed=" << mt_seed << '\n';
        if (mt_n > 0 || !mt_data.empty()) {
            if (mt_data.empty()) throw InvalidInput("--n needs --data");
            const std::uint64_t ds = mt_data_seed.value_or(mt_seed + 1);
            const DataDistribution dist = mt_dist.make(mt_d);
            Dataset data = label(net, sample(dist, mt_n, ds),
                                 "dist=" + to_string(dist.kind) + " radius=" + format_double(dist.radius) +
                                     " target=" + mt_out + " seed=" + std::to_string(ds));
            Sink sink(mt_data, out);
            write_dataset_csv(*sink, data);
        }
        return kExitOk;
    }
    return kExitInvalid;
}

/// run_cli with every library error mapped to its exit code.
inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return run_cli(args, out, err);
    } catch (const Diverged& e) {
        err << "mfnet: diverged: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const CheckFailed& e) {
        err << "mfnet: check failed: " << e.what() << '\n';
        return kExitCheckFailed;
    } catch (const Error& e) {
        err << "mfnet: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "mfnet: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace mfnet::cli
