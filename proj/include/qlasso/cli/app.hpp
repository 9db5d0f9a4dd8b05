#pragma once

#include "qlasso/cli/config.hpp"
#include "qlasso/cli/csv.hpp"
#include "qlasso/cli/hash.hpp"
#include "qlasso/cli/svg.hpp"
#include "qlasso/experiment.hpp"
#include "qlasso/geometry.hpp"
#include "qlasso/quantizer.hpp"
#include "qlasso/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qlasso::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_verification_failed = 1,
    exit_config_error = 2,
    exit_runtime_error = 3,
};

/// Output directory could not be created or written (exit code 3).
struct OutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::string subcommand;
    std::string config_path;
    std::optional<unsigned> jobs;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<long> trials;
    std::optional<double> delta;
    std::optional<std::string> estimators;
};

/// Everything a subcommand needs after flags and config are merged.
struct Context {
    Flags flags;
    RawConfig raw;
    std::string config_text;
    std::string config_hash;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::filesystem::path out_dir;
    std::ostream *out = &std::cout;

    [[nodiscard]] std::string provenance() const {
        return provenance_line(flags.subcommand, seed, config_hash);
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty())
                out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty())
        out.push_back(cur);
    return out;
}

inline void ensure_dir(const std::filesystem::path &dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw OutputError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline std::ofstream open_output(const std::filesystem::path &path) {
    ensure_dir(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw OutputError("cannot write '" + path.string() + "'");
    return f;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_manifest(const Context &ctx, const ExperimentConfig &cfg) {
    nlohmann::json j;
    j["command"] = ctx.flags.subcommand;
    j["config_path"] = ctx.flags.config_path;
    j["config_hash"] = ctx.config_hash;
    j["master_seed"] = ctx.seed;
    j["out_dir"] = ctx.out_dir.string();
    j["timestamp"] = utc_timestamp();
    j["resolved_config"] = to_json(cfg);
    auto f = open_output(ctx.out_dir / "manifest.json");
    f << j.dump(2) << '\n';
}

/// Merges flags over the config for experiment subcommands.
inline ExperimentConfig experiment_config(const Context &ctx, ExperimentConfig defaults) {
    RawConfig raw = ctx.raw;
    if (ctx.flags.trials)
        raw.trials = ctx.flags.trials;
    if (ctx.flags.delta)
        raw.delta = ctx.flags.delta;
    if (ctx.flags.estimators)
        raw.estimators = split_list(*ctx.flags.estimators);
    ExperimentConfig cfg = to_experiment(raw, std::move(defaults));
    cfg.master_seed = ctx.seed;
    return cfg;
}

inline PlotSpec curve_plot(const std::string &title, const std::vector<ErrorCurve> &curves) {
    PlotSpec plot{title, "number of measurements m", "mean ||x_hat - x0||_2", {}, {}};
    for (const auto &c : curves) {
        Series s{c.estimator, {}, {}};
        for (const auto &p : c.points) {
            s.x.push_back(static_cast<double>(p.m));
            s.y.push_back(p.mean);
        }
        plot.series.push_back(std::move(s));
    }
    if (!curves.empty() && !curves.front().points.empty()) {
        const auto &p0 = curves.front().points.front();
        plot.guides.push_back({"c/sqrt(m)", p0.mean * std::sqrt(static_cast<double>(p0.m)), -0.5});
    }
    return plot;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline int cmd_curves(const Context &ctx, bool one_bit) {
    ExperimentConfig defaults;
    if (one_bit) {
        defaults.quantizer = {QuantizerKind::one_bit, 1.0};
        defaults.m_grid = default_onebit_m_grid;
        defaults.ensemble = EnsembleKind::gaussian();
        defaults.structure = Sparse{10};
    } else {
        defaults.quantizer = {QuantizerKind::uniform, 3.0};
        defaults.m_grid = default_uniform_m_grid;
    }
    const ExperimentConfig cfg = detail::experiment_config(ctx, defaults);
    if ((cfg.quantizer.kind == QuantizerKind::one_bit) != one_bit)
        throw ConfigError(std::string("config quantizer does not match ") +
                          (one_bit ? "run-onebit" : "run-uniform"));

    const auto curves = run_curves(cfg, ctx.jobs);
    const std::string stem = one_bit ? "onebit" : "uniform";
    {
        auto f = detail::open_output(ctx.out_dir / (stem + "_curves.csv"));
        write_curves_csv(f, curves, ctx.provenance());
    }
    std::vector<std::pair<std::string, RateFit>> fits;
    for (const auto &c : curves) {
        auto f = detail::open_output(ctx.out_dir / (stem + "_" + c.estimator + ".csv"));
        write_curves_csv(f, {c}, ctx.provenance());
        auto svg = detail::open_output(ctx.out_dir / (stem + "_" + c.estimator + ".svg"));
        write_loglog_svg(svg, detail::curve_plot(stem + " quantization: " + c.estimator, {c}));
        if (c.points.size() >= 3) {
            fits.emplace_back(c.estimator, fit_rate(c, RateModel::inv_sqrt_m));
            fits.emplace_back(c.estimator, fit_rate(c, RateModel::sqrtlog_m_over_sqrt_m));
        }
    }
    {
        auto f = detail::open_output(ctx.out_dir / (stem + "_rates.csv"));
        write_rates_csv(f, fits, ctx.provenance());
    }
    detail::write_manifest(ctx, cfg);

    auto &os = *ctx.out;
    os << curve_header << '\n';
    for (const auto &c : curves)
        for (const auto &p : c.points)
            os << c.estimator << ',' << p.m << ',' << format_double(p.mean) << ','
               << format_double(p.std) << ',' << p.trials << ','
               << seed_hash(cfg.master_seed, p.m) << '\n';
    for (const auto &[label, fit] : fits)
        os << "fit " << label << ' ' << to_string(fit.model) << ": slope=" << fit.slope
           << " coefficient=" << fit.coefficient << " residual_rms=" << fit.residual_rms << '\n';
    return exit_ok;
}

inline int cmd_compare(const Context &ctx) {
    ExperimentConfig defaults;
    defaults.quantizer = {QuantizerKind::uniform, 3.0};
    defaults.m_grid = {1000};
    defaults.estimators = {Estimator::glasso, Estimator::pbp, Estimator::dm};
    const ExperimentConfig cfg = detail::experiment_config(ctx, defaults);
    const auto table = run_table(cfg, ctx.jobs);
    const auto curves = curves_from_table(cfg, table);

    auto f = detail::open_output(ctx.out_dir / "compare.csv");
    f << ctx.provenance() << '\n' << curve_header << ",win_rate\n";
    auto &os = *ctx.out;
    os << curve_header << ",win_rate\n";
    for (std::size_t e = 0; e < curves.size(); ++e)
        for (std::size_t mi = 0; mi < cfg.m_grid.size(); ++mi) {
            // Fraction of paired trials where this estimator is strictly best.
            long wins = 0;
            for (long t = 0; t < cfg.trials; ++t) {
                const double mine = table.errors[e][mi][static_cast<std::size_t>(t)];
                bool best = true;
                for (std::size_t o = 0; o < curves.size(); ++o)
                    if (o != e && table.errors[o][mi][static_cast<std::size_t>(t)] <= mine)
                        best = false;
                wins += best ? 1 : 0;
            }
            const auto &p = curves[e].points[mi];
            std::ostringstream row;
            row << curves[e].estimator << ',' << p.m << ',' << format_double(p.mean) << ','
                << format_double(p.std) << ',' << p.trials << ','
                << seed_hash(cfg.master_seed, p.m) << ','
                << format_double(static_cast<double>(wins) / static_cast<double>(cfg.trials));
            f << row.str() << '\n';
            os << row.str() << '\n';
        }
    detail::write_manifest(ctx, cfg);
    return exit_ok;
}

inline int cmd_delta_sweep(const Context &ctx) {
    ExperimentConfig defaults;
    defaults.quantizer = {QuantizerKind::uniform, 1.0};
    defaults.estimators = {Estimator::glasso, Estimator::pbp};
    RawConfig raw = ctx.raw;
    if (raw.m && !raw.m_grid) {
        raw.m_grid = std::vector<long>{*raw.m};
        raw.m.reset();
    } else if (!raw.m_grid)
        raw.m_grid = std::vector<long>{1000};
    Context local = ctx;
    local.raw = raw;
    const ExperimentConfig cfg = detail::experiment_config(local, defaults);
    if (cfg.m_grid.size() != 1)
        throw ConfigError("delta-sweep: give a single measurement count via 'm'");
    const std::vector<double> deltas =
        ctx.raw.deltas.value_or(std::vector<double>{4, 2, 1, 0.5, 0.25, 0.125});
    for (double d : deltas)
        if (!(d > 0))
            throw ConfigError("config field 'deltas': every entry must be positive");

    const auto curves = delta_sweep(cfg, deltas, ctx.jobs);
    {
        auto f = detail::open_output(ctx.out_dir / "delta_sweep.csv");
        write_delta_csv(f, curves, cfg.master_seed, ctx.provenance());
    }
    PlotSpec plot{"error vs resolution at m = " + std::to_string(cfg.m_grid.front()),
                  "quantizer resolution delta", "mean ||x_hat - x0||_2", {}, {}};
    for (const auto &c : curves) {
        Series s{c.estimator, {}, {}};
        for (const auto &p : c.points) {
            s.x.push_back(p.delta);
            s.y.push_back(p.mean);
        }
        plot.series.push_back(std::move(s));
    }
    if (!curves.empty() && !curves.front().points.empty()) {
        const auto &p0 = curves.front().points.front();
        plot.guides.push_back({"c*delta", p0.mean / p0.delta, 1.0});
    }
    {
        auto f = detail::open_output(ctx.out_dir / "delta_sweep.svg");
        write_loglog_svg(f, plot);
    }
    detail::write_manifest(ctx, cfg);
    write_delta_csv(*ctx.out, curves, cfg.master_seed, ctx.provenance());
    return exit_ok;
}

inline int cmd_verify(const Context &ctx) {
    VerifyOptions opt;
    opt.seed = ctx.seed;
    const auto results = run_verification(opt);
    write_report(*ctx.out, results);
    const bool ok = all_passed(results);
    *ctx.out << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
    auto f = detail::open_output(ctx.out_dir / "verify_report.txt");
    f << ctx.provenance() << '\n';
    write_report(f, results);
    return ok ? exit_ok : exit_verification_failed;
}

inline int cmd_widths(const Context &ctx) {
    auto sparse = ctx.raw.widths_sparse.value_or(std::vector<std::pair<long, long>>{});
    auto lowrank = ctx.raw.widths_lowrank.value_or(std::vector<std::pair<long, long>>{});
    if (ctx.raw.n && ctx.raw.s)
        sparse.emplace_back(*ctx.raw.n, *ctx.raw.s);
    if (ctx.raw.d && ctx.raw.r)
        lowrank.emplace_back(*ctx.raw.d, *ctx.raw.r);
    if (sparse.empty() && lowrank.empty()) {
        sparse = {{100, 5}, {100, 10}, {100, 25}, {100, 50}, {100, 100}};
        lowrank = {{10, 1}, {10, 2}, {100, 5}};
    }
    std::ostringstream table;
    char buf[32];
    if (!sparse.empty()) {
        table << "n,s,width\n";
        for (auto [n, s] : sparse) {
            try {
                std::snprintf(buf, sizeof buf, "%.3f", gw_bound_sparse(n, s));
            } catch (const InvalidSpec &e) {
                throw ConfigError(std::string("widths_sparse: ") + e.what());
            }
            table << n << ',' << s << ',' << buf << '\n';
        }
    }
    if (!lowrank.empty()) {
        table << "d,r,width\n";
        for (auto [d, r] : lowrank) {
            try {
                std::snprintf(buf, sizeof buf, "%.3f", gw_bound_lowrank(d, r));
            } catch (const InvalidSpec &e) {
                throw ConfigError(std::string("widths_lowrank: ") + e.what());
            }
            table << d << ',' << r << ',' << buf << '\n';
        }
    }
    *ctx.out << table.str();
    auto f = detail::open_output(ctx.out_dir / "widths.csv");
    f << ctx.provenance() << '\n' << table.str();
    return exit_ok;
}

inline int cmd_quantize_demo(const Context &ctx) {
    const double delta = ctx.flags.delta.value_or(ctx.raw.delta.value_or(2.0));
    if (!(delta > 0))
        throw ConfigError("quantize-demo: delta must be positive");
    std::vector<double> xs;
    if (ctx.raw.demo_points)
        xs = *ctx.raw.demo_points;
    else
        for (int k = -12; k <= 12; ++k)
            xs.push_back(k * delta / 4.0);
    std::ostringstream table;
    table << "x,uniform_q,one_bit_q\n";
    for (double x : xs)
        table << format_double(x) << ',' << format_double(uniform_quantize(x, delta)) << ','
              << format_double(one_bit_quantize(x)) << '\n';
    *ctx.out << "# delta=" << format_double(delta) << '\n' << table.str();
    auto f = detail::open_output(ctx.out_dir / "quantize_demo.csv");
    f << ctx.provenance() << '\n' << "# delta=" << format_double(delta) << '\n' << table.str();
    return exit_ok;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline const std::vector<std::string> &subcommands() {
    static const std::vector<std::string> names{"run-uniform", "run-onebit", "compare",
                                                "delta-sweep", "verify", "widths",
                                                "quantize-demo"};
    return names;
}

/// Runs the CLI and returns the process exit code. Never throws.
inline int run(int argc, const char *const *argv, std::ostream &out = std::cout,
               std::ostream &err = std::cerr) {
    CLI::App app{"qlasso: recovery from dithered quantized measurements via the generalized "
                 "lasso.\nPrecedence for every setting: flag > config file > default "
                 "(seed: flag > config > $QLASSO_SEED > 0)."};
    app.set_help_all_flag("--help-all");
    app.require_subcommand(1, 1);
    Flags flags;
    const std::vector<std::pair<std::string, std::string>> descriptions{
        {"run-uniform", "error curves under uniform quantization (CSV + SVG per estimator)"},
        {"run-onebit", "error curves under one-bit quantization with T = R sqrt(ln m)"},
        {"compare", "paired glasso/pbp/dm errors with win rates"},
        {"delta-sweep", "error versus quantizer resolution at fixed m"},
        {"verify", "dither, projection, gradient and moment checks; exit 1 on failure"},
        {"widths", "Gaussian width bounds for sparse and low-rank signals"},
        {"quantize-demo", "table of Q(x) for the uniform and one-bit quantizers"},
    };
    for (const auto &[name, desc] : descriptions) {
        auto *sub = app.add_subcommand(name, desc);
        sub->add_option("--config", flags.config_path, "JSON configuration file");
        sub->add_option("--jobs", flags.jobs, "maximum number of concurrent trials")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", flags.seed, "master seed (overrides config and $QLASSO_SEED)");
        sub->add_option("--out", flags.out, "output directory (overrides config out_dir)");
        sub->add_option("--trials", flags.trials, "Monte Carlo trials per point")
            ->check(CLI::PositiveNumber);
        sub->add_option("--delta", flags.delta, "uniform quantizer resolution")
            ->check(CLI::PositiveNumber);
        sub->add_option("--estimators", flags.estimators, "comma list of glasso,pbp,dm");
        sub->callback([&flags, sub] { flags.subcommand = sub->get_name(); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        app.exit(e, out, err);
        return exit_ok;
    } catch (const CLI::CallForAllHelp &e) {
        app.exit(e, out, err);
        return exit_ok;
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return exit_config_error;
    }

    Context ctx;
    ctx.flags = flags;
    ctx.out = &out;
    try {
        if (!flags.config_path.empty()) {
            ctx.config_text = read_file(flags.config_path);
            ctx.raw = parse_config_text(ctx.config_text);
        } else {
            ctx.config_text = "{}";
        }
        ctx.config_hash = git_blob_hash(ctx.config_text);
        ctx.seed = resolve_seed(flags.seed, ctx.raw.seed);
        ctx.jobs = flags.jobs.value_or(qlasso::detail::default_jobs());
        ctx.out_dir = flags.out.value_or(ctx.raw.out_dir.value_or("qlasso_out"));

        const auto &cmd = flags.subcommand;
        if (cmd == "run-uniform")
            return cmd_curves(ctx, false);
        if (cmd == "run-onebit")
            return cmd_curves(ctx, true);
        if (cmd == "compare")
            return cmd_compare(ctx);
        if (cmd == "delta-sweep")
            return cmd_delta_sweep(ctx);
        if (cmd == "verify")
            return cmd_verify(ctx);
        if (cmd == "widths")
            return cmd_widths(ctx);
        if (cmd == "quantize-demo")
            return cmd_quantize_demo(ctx);
        err << "unknown subcommand '" << cmd << "'\n";
        return exit_config_error;
    } catch (const ConfigError &e) {
        err << "configuration error: " << e.what() << '\n';
        return exit_config_error;
    } catch (const OutputError &e) {
        err << "I/O error: " << e.what() << '\n';
        return exit_runtime_error;
    } catch (const std::exception &e) {
        err << "runtime error: " << e.what() << '\n';
        return exit_runtime_error;
    }
}

} // namespace qlasso::cli
