#pragma once

#include "qlasso/ensemble.hpp"
#include "qlasso/error.hpp"
#include "qlasso/geometry.hpp"
#include "qlasso/quantizer.hpp"
#include "qlasso/random.hpp"
#include "qlasso/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

namespace qlasso {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Estimator { glasso, pbp, dm };

inline std::string_view to_string(Estimator e) {
    switch (e) {
    case Estimator::glasso: return "glasso";
    case Estimator::pbp: return "pbp";
    case Estimator::dm: return "dm";
    }
    return "?";
}

inline Estimator parse_estimator(std::string_view name) {
    if (name == "glasso")
        return Estimator::glasso;
    if (name == "pbp")
        return Estimator::pbp;
    if (name == "dm")
        return Estimator::dm;
    throw InvalidSpec("unknown estimator '" + std::string(name) + "'");
}

enum class QuantizerKind { uniform, one_bit };

/// Which quantizer an experiment uses. For one-bit the range is not fixed:
/// it follows T = R sqrt(ln m) per measurement count.
struct QuantizerSpec {
    QuantizerKind kind = QuantizerKind::uniform;
    double delta = 1.0;
};

struct ExperimentConfig {
    long n = 100;
    std::variant<Sparse, LowRank> structure = Sparse{25};
    double norm_target = 8.0;
    double R = 10.0;
    EnsembleKind ensemble = EnsembleKind::rademacher();
    QuantizerSpec quantizer{};
    std::vector<long> m_grid{200, 400, 700, 1000, 1400, 2000};
    long trials = 200;
    std::uint64_t master_seed = 0;
    std::vector<Estimator> estimators{Estimator::glasso};
    SolverOptions solver{};

    [[nodiscard]] SignalSpec signal_spec() const { return {n, structure, norm_target, 0}; }
};

inline const std::vector<long> default_uniform_m_grid{200, 400, 700, 1000, 1400, 2000};
inline const std::vector<long> default_onebit_m_grid{500, 1000, 2000, 4000, 8000};

inline void validate(const ExperimentConfig &cfg) {
    if (cfg.n < 1)
        throw InvalidSpec("config: n must be positive");
    if (const auto *sp = std::get_if<Sparse>(&cfg.structure)) {
        if (sp->s < 1 || sp->s > cfg.n)
            throw InvalidSpec("config: need 1 <= s <= n");
    } else {
        const auto &lr = std::get<LowRank>(cfg.structure);
        if (lr.r < 1 || lr.r > lr.d || lr.d * lr.d != cfg.n)
            throw InvalidSpec("config: low-rank needs 1 <= r <= d and n = d*d");
    }
    if (!(cfg.norm_target > 0))
        throw InvalidSpec("config: norm must be positive");
    if (!(cfg.R >= cfg.norm_target))
        throw InvalidSpec("config: need R >= norm");
    if (cfg.trials < 1)
        throw InvalidSpec("config: trials must be >= 1");
    if (cfg.m_grid.empty())
        throw InvalidSpec("config: m_grid is empty");
    for (std::size_t i = 0; i < cfg.m_grid.size(); ++i) {
        if (cfg.m_grid[i] < 2)
            throw InvalidSpec("config: every m must be >= 2");
        if (i > 0 && cfg.m_grid[i] <= cfg.m_grid[i - 1])
            throw InvalidSpec("config: m_grid must be strictly increasing");
    }
    if (cfg.quantizer.kind == QuantizerKind::uniform && !(cfg.quantizer.delta > 0))
        throw InvalidSpec("config: delta must be positive");
    if (cfg.estimators.empty())
        throw InvalidSpec("config: no estimators selected");
}

/// T = R sqrt(ln m).
inline double one_bit_range(double R, long m) {
    return R * std::sqrt(std::log(static_cast<double>(m)));
}

/// Quantizer and scale μ_Q used at measurement count m.
struct ChannelParams {
    QuantizerConfig quantizer;
    DitherKind dither;
    double mu;
};

inline ChannelParams channel_for(const ExperimentConfig &cfg, long m) {
    if (cfg.quantizer.kind == QuantizerKind::uniform) {
        const double delta = cfg.quantizer.delta;
        return {UniformQuantizer{delta}, UniformHalfOpenDither{delta}, 1.0};
    }
    const double T = one_bit_range(cfg.R, m);
    return {OneBitQuantizer{T}, UniformSymmetricDither{T}, T};
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

/// Failure of one Monte Carlo trial, tagged with where it happened.
struct TrialFailure : std::runtime_error {
    long m;
    long trial_id;
    std::uint64_t seed;

    TrialFailure(const std::string &what, long m, long trial_id, std::uint64_t seed)
        : std::runtime_error("trial failed (m=" + std::to_string(m) +
                             ", trial=" + std::to_string(trial_id) +
                             ", seed=" + std::to_string(seed) + "): " + what),
          m{m}, trial_id{trial_id}, seed{seed} {}
};

/// Substream of one trial. The key excludes the estimator so that estimators
/// compared on the same (m, trial) see identical data.
inline Stream trial_stream(std::uint64_t master_seed, long m, long trial_id) {
    return master_stream(master_seed)
        .substream({static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(trial_id)});
}

/// Everything drawn for one trial.
struct TrialData {
    Vector x0;
    MeasurementMatrix A;
    ConstraintSet K;
    Stream dither_stream;
};

inline TrialData draw_trial(const ExperimentConfig &cfg, long m, long trial_id) {
    const Stream root = trial_stream(cfg.master_seed, m, trial_id);
    Stream sig = root.substream(StreamTag::signal);
    Stream mat = root.substream(StreamTag::matrix);
    Vector x0 = gen_signal(cfg.signal_spec(), sig);
    MeasurementMatrix A = sample_measurements(cfg.ensemble, m, cfg.n, mat);
    ConstraintSet K = Unconstrained{};
    if (std::holds_alternative<Sparse>(cfg.structure))
        K = L1Ball{x0.lpNorm<1>()};
    else {
        const long d = std::get<LowRank>(cfg.structure).d;
        K = NuclearBall{nuclear_norm(x0, d), d};
    }
    return {std::move(x0), std::move(A), std::move(K), root.substream(StreamTag::dither)};
}

inline Vector run_estimator(Estimator e, const MeasurementMatrix &A, const Vector &y,
                            const ConstraintSet &K, double mu, const SolverOptions &opts) {
    switch (e) {
    case Estimator::glasso: return glasso_solve(GLassoProblem(A, y, mu, K), opts).x_hat;
    case Estimator::pbp: return pbp_estimate(A, y, K, mu);
    case Estimator::dm: return dm_estimate(A, y, K, mu);
    }
    throw InvalidSpec("unknown estimator");
}

/// ‖x̂ − x0‖₂ for each requested estimator on one shared trial.
inline std::vector<double> run_trial_all(const ExperimentConfig &cfg, long m, long trial_id,
                                         const std::vector<Estimator> &estimators) {
    const std::uint64_t seed = trial_stream(cfg.master_seed, m, trial_id).key();
    try {
        TrialData data = draw_trial(cfg, m, trial_id);
        const ChannelParams ch = channel_for(cfg, m);
        const auto obs = measure(data.A, data.x0, ch.quantizer, ch.dither, data.dither_stream);
        std::vector<double> errors;
        errors.reserve(estimators.size());
        for (auto e : estimators)
            errors.push_back(
                (run_estimator(e, data.A, obs.y, data.K, ch.mu, cfg.solver) - data.x0).norm());
        return errors;
    } catch (const std::exception &ex) {
        throw TrialFailure(ex.what(), m, trial_id, seed);
    }
}

inline double run_trial(const ExperimentConfig &cfg, long m, long trial_id, Estimator e) {
    return run_trial_all(cfg, m, trial_id, {e}).front();
}

// ---------------------------------------------------------------------------
// Parallel execution
// ---------------------------------------------------------------------------

namespace detail {

/// Runs task(0..count-1) on up to `jobs` threads; the first exception is
/// rethrown after all workers stop.
inline void parallel_for(long count, unsigned jobs, const std::function<void(long)> &task) {
    if (jobs <= 1 || count <= 1) {
        for (long i = 0; i < count; ++i)
            task(i);
        return;
    }
    std::atomic<long> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (long i = next++; i < count && !failed; i = next++) {
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::jthread> pool;
    const auto threads = std::min<long>(jobs, count);
    for (long t = 0; t < threads; ++t)
        pool.emplace_back(worker);
    pool.clear();
    if (error)
        std::rethrow_exception(error);
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

} // namespace detail

// ---------------------------------------------------------------------------
// Error curves
// ---------------------------------------------------------------------------

struct CurvePoint {
    long m = 0;
    double mean = 0.0;
    double std = 0.0;
    long trials = 0;
};

struct ErrorCurve {
    std::string estimator;
    std::vector<CurvePoint> points;
    ExperimentConfig config{};
};

/// Raw per-trial errors, indexed [estimator][m index][trial].
struct TrialTable {
    std::vector<Estimator> estimators;
    std::vector<long> m_grid;
    std::vector<std::vector<std::vector<double>>> errors;
};

inline TrialTable run_table(const ExperimentConfig &cfg, unsigned jobs = detail::default_jobs()) {
    validate(cfg);
    TrialTable table{cfg.estimators, cfg.m_grid, {}};
    const long n_m = static_cast<long>(cfg.m_grid.size());
    table.errors.assign(cfg.estimators.size(),
                        std::vector<std::vector<double>>(
                            static_cast<std::size_t>(n_m),
                            std::vector<double>(static_cast<std::size_t>(cfg.trials))));
    detail::parallel_for(n_m * cfg.trials, jobs, [&](long task) {
        const auto mi = static_cast<std::size_t>(task / cfg.trials);
        const auto t = static_cast<std::size_t>(task % cfg.trials);
        const auto errs =
            run_trial_all(cfg, cfg.m_grid[mi], static_cast<long>(t), cfg.estimators);
        for (std::size_t e = 0; e < errs.size(); ++e)
            table.errors[e][mi][t] = errs[e];
    });
    return table;
}

inline CurvePoint aggregate(long m, const std::vector<double> &errs) {
    CurvePoint p{m, 0.0, 0.0, static_cast<long>(errs.size())};
    if (errs.empty())
        return p;
    p.mean = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
    if (errs.size() > 1) {
        double ss = 0.0;
        for (double e : errs)
            ss += (e - p.mean) * (e - p.mean);
        p.std = std::sqrt(ss / static_cast<double>(errs.size() - 1));
    }
    return p;
}

inline std::vector<ErrorCurve> curves_from_table(const ExperimentConfig &cfg,
                                                 const TrialTable &table) {
    std::vector<ErrorCurve> out;
    for (std::size_t e = 0; e < table.estimators.size(); ++e) {
        ErrorCurve c{std::string(to_string(table.estimators[e])), {}, cfg};
        for (std::size_t mi = 0; mi < table.m_grid.size(); ++mi)
            c.points.push_back(aggregate(table.m_grid[mi], table.errors[e][mi]));
        out.push_back(std::move(c));
    }
    return out;
}

/// One error curve per configured estimator, sharing trial data.
inline std::vector<ErrorCurve> run_curves(const ExperimentConfig &cfg,
                                          unsigned jobs = detail::default_jobs()) {
    return curves_from_table(cfg, run_table(cfg, jobs));
}

inline ErrorCurve run_curve(const ExperimentConfig &cfg, Estimator e,
                            unsigned jobs = detail::default_jobs()) {
    ExperimentConfig one = cfg;
    one.estimators = {e};
    return run_curves(one, jobs).front();
}

/// Fraction of paired trials at each m where estimator `a` beats `b`.
inline std::vector<double> win_rates(const TrialTable &table, std::size_t a, std::size_t b) {
    std::vector<double> rates;
    for (std::size_t mi = 0; mi < table.m_grid.size(); ++mi) {
        const auto &ea = table.errors[a][mi];
        const auto &eb = table.errors[b][mi];
        long wins = 0;
        for (std::size_t t = 0; t < ea.size(); ++t)
            wins += ea[t] < eb[t] ? 1 : 0;
        rates.push_back(static_cast<double>(wins) / static_cast<double>(ea.size()));
    }
    return rates;
}

// ---------------------------------------------------------------------------
// Rate fitting
// ---------------------------------------------------------------------------

enum class RateModel { inv_sqrt_m, sqrtlog_m_over_sqrt_m };

inline std::string_view to_string(RateModel r) {
    return r == RateModel::inv_sqrt_m ? "inv_sqrt_m" : "sqrtlog_m_over_sqrt_m";
}

struct RateFit {
    RateModel model = RateModel::inv_sqrt_m;
    double coefficient = 0.0;
    double slope = 0.0;
    double residual_rms = 0.0;
};

inline double rate_shape(RateModel model, double m) {
    return model == RateModel::inv_sqrt_m ? 1.0 / std::sqrt(m) : std::sqrt(std::log(m) / m);
}

/// Fits err ≈ c·f(m) in log space: ln c is the mean of ln err − ln f(m) and
/// the residual RMS is taken over those log residuals, so it compares models
/// independently of the error scale. The slope is the least-squares slope of
/// ln err on ln m.
inline RateFit fit_rate(const ErrorCurve &curve, RateModel model) {
    const auto &pts = curve.points;
    if (pts.size() < 3)
        throw InvalidSpec("fit_rate: need at least 3 curve points");
    for (const auto &p : pts)
        if (!(p.mean > 0) || p.m < 2)
            throw InvalidSpec("fit_rate: every mean must be positive and m >= 2");
    const double k = static_cast<double>(pts.size());

    double mx = 0, my = 0;
    for (const auto &p : pts) {
        mx += std::log(static_cast<double>(p.m));
        my += std::log(p.mean);
    }
    mx /= k;
    my /= k;
    double sxy = 0, sxx = 0;
    for (const auto &p : pts) {
        const double dx = std::log(static_cast<double>(p.m)) - mx;
        sxy += dx * (std::log(p.mean) - my);
        sxx += dx * dx;
    }

    RateFit fit{model, 0.0, sxx > 0 ? sxy / sxx : 0.0, 0.0};
    double log_c = 0.0;
    for (const auto &p : pts)
        log_c += std::log(p.mean) - std::log(rate_shape(model, static_cast<double>(p.m)));
    log_c /= k;
    double ss = 0.0;
    for (const auto &p : pts) {
        const double r =
            std::log(p.mean) - log_c - std::log(rate_shape(model, static_cast<double>(p.m)));
        ss += r * r;
    }
    fit.coefficient = std::exp(log_c);
    fit.residual_rms = std::sqrt(ss / k);
    return fit;
}

// ---------------------------------------------------------------------------
// Resolution sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
    double delta = 0.0;
    double mean = 0.0;
    double std = 0.0;
    long trials = 0;
};

struct DeltaCurve {
    std::string estimator;
    long m = 0;
    std::vector<SweepPoint> points;
};

/// Per-Δ errors at the single m in cfg.m_grid. Trials reuse the same
/// (x0, A, dither draws) across Δ and estimators.
inline std::vector<DeltaCurve> delta_sweep(const ExperimentConfig &cfg,
                                           const std::vector<double> &deltas,
                                           unsigned jobs = detail::default_jobs()) {
    if (cfg.quantizer.kind != QuantizerKind::uniform)
        throw InvalidSpec("delta_sweep: requires the uniform quantizer");
    if (cfg.m_grid.size() != 1)
        throw InvalidSpec("delta_sweep: m_grid must hold exactly one m");
    if (deltas.empty())
        throw InvalidSpec("delta_sweep: empty delta grid");
    std::vector<DeltaCurve> out;
    for (auto e : cfg.estimators)
        out.push_back({std::string(to_string(e)), cfg.m_grid.front(), {}});
    for (double delta : deltas) {
        ExperimentConfig c = cfg;
        c.quantizer.delta = delta;
        const auto table = run_table(c, jobs);
        for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
            const auto p = aggregate(cfg.m_grid.front(), table.errors[e][0]);
            out[e].points.push_back({delta, p.mean, p.std, p.trials});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// One-bit Gaussian moments
// ---------------------------------------------------------------------------

/// Standard normal upper tail Q(x) = P(N(0,1) > x).
inline double normal_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

struct MomentComparison {
    std::string name;
    double mc_mean = 0.0;
    double mc_std_error = 0.0;
    double closed_form = 0.0;
    bool agrees = false; ///< |mc − closed form| ≤ 5 standard errors
    bool required = true;

    [[nodiscard]] double mean_gap() const { return mc_mean - closed_form; }
    [[nodiscard]] double z_score() const {
        return mc_std_error > 0 ? (mc_mean - closed_form) / mc_std_error
                                : (mc_mean == closed_form ? 0.0 : INFINITY);
    }
};

struct MomentReport {
    double norm_x0 = 0.0;
    double T = 0.0;
    double mu = 0.0;
    long samples = 0;
    std::vector<MomentComparison> rows;

    [[nodiscard]] bool required_agree() const {
        return std::all_of(rows.begin(), rows.end(),
                           [](const auto &r) { return !r.required || r.agrees; });
    }
};

/// Closed forms for the scalar model ζ ~ N(0,1), τ ~ Unif[−T, T],
/// s = sign(σζ + τ), ξ = (μs − σζ)ζ, η = μs − σζ with σ = ‖x0‖₂.
namespace moments {

/// Variant of E[ξ] whose tail term omits the σ factor. Dimensionally
/// inconsistent; kept for side-by-side reporting.
inline double xi_mean_literal(double sigma, double T, double mu) {
    return sigma * (mu / T - 1.0) - 2.0 * (mu / T) * normal_tail(T / sigma);
}

/// E[ξ] = μ E[ζs] − σ with E[ζs] = (σ/T)(1 − 2Q(T/σ)).
inline double xi_mean(double sigma, double T, double mu) {
    return sigma * (mu / T - 1.0) - 2.0 * sigma * (mu / T) * normal_tail(T / sigma);
}

inline double xi_second(double sigma, double T, double mu) {
    const double s2 = sigma * sigma;
    return 3.0 * s2 + mu * mu - 6.0 * s2 * mu / T + 12.0 * s2 * (mu / T) * normal_tail(T / sigma) +
           2.0 * mu * std::sqrt(2.0 / M_PI) * sigma * std::exp(-T * T / (2.0 * s2));
}

inline double eta_second(double sigma, double T, double mu) {
    const double s2 = sigma * sigma;
    return mu * mu + s2 - 2.0 * (mu / T) * s2 * (1.0 - 2.0 * normal_tail(T / sigma));
}

} // namespace moments

inline MomentReport onebit_moment_check(double norm_x0, double T, double mu, long N,
                                        Stream &rng) {
    if (N < 10000)
        throw InvalidSpec("onebit_moment_check: N must be at least 1e4");
    if (!(T > 0) || !(norm_x0 >= 0))
        throw InvalidSpec("onebit_moment_check: need T > 0 and norm >= 0");
    struct Acc {
        double mean = 0, m2 = 0;
        long n = 0;
        void add(double v) {
            ++n;
            const double d = v - mean;
            mean += d / static_cast<double>(n);
            m2 += d * (v - mean);
        }
        [[nodiscard]] double se() const {
            return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
        }
    } xi, xi2, eta2;
    for (long i = 0; i < N; ++i) {
        const double zeta = rng.normal();
        const double tau = T * (2.0 * rng.uniform() - 1.0);
        const double s = one_bit_quantize(norm_x0 * zeta + tau);
        const double eta = mu * s - norm_x0 * zeta;
        const double x = eta * zeta;
        xi.add(x);
        xi2.add(x * x);
        eta2.add(eta * eta);
    }
    auto row = [](std::string name, const Acc &a, double cf, bool required) {
        MomentComparison c{std::move(name), a.mean, a.se(), cf, false, required};
        c.agrees = std::abs(c.mean_gap()) <= 5.0 * c.mc_std_error;
        return c;
    };
    MomentReport rep{norm_x0, T, mu, N, {}};
    rep.rows.push_back(row("E[xi] (unscaled tail)", xi,
                           moments::xi_mean_literal(norm_x0, T, mu), false));
    rep.rows.push_back(row("E[xi]", xi, moments::xi_mean(norm_x0, T, mu), true));
    rep.rows.push_back(row("E[xi^2]", xi2, moments::xi_second(norm_x0, T, mu), true));
    rep.rows.push_back(row("E[eta^2]", eta2, moments::eta_second(norm_x0, T, mu), true));
    return rep;
}

} // namespace qlasso
