// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
#include "qlasso/experiment.hpp"
#include "qlasso/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

using namespace qlasso;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string &detail) {
    std::printf("[criterion %d] %s %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok)
        ++failures;
}

std::string fmt(const char *f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool monotone(const SolverResult &r) {
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
        if (r.objective_trace[k] > r.objective_trace[k - 1] + 1e-12 * std::abs(r.objective_trace[k - 1]))
            return false;
    return true;
}

ExperimentConfig uniform_base(long s) {
    ExperimentConfig cfg;
    cfg.n = 100;
    cfg.structure = Sparse{s};
    cfg.norm_target = 8.0;
    cfg.R = 10.0;
    cfg.ensemble = EnsembleKind::rademacher();
    cfg.quantizer = {QuantizerKind::uniform, 3.0};
    cfg.m_grid = default_uniform_m_grid;
    cfg.trials = 200;
    cfg.master_seed = 2024;
    return cfg;
}

void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    Stream root = master_stream(101);
    const long N = 1'000'000;
    double worst = 0.0;
    for (double x : {-3.3, -1.0, 0.0, 0.25, 0.5, 7.9})
        for (double delta : {0.5, 1.0, 3.0}) {
            const auto est = dither_mean_residual(x, UniformQuantizer{delta},
                                                  UniformHalfOpenDither{delta}, 1.0, N, root);
            worst = std::max(worst, std::abs(est.mean) / (delta / std::sqrt(static_cast<double>(N))));
        }
    const double secs = seconds_since(t0);
    report(1, worst < 5.0 && secs < 10.0,
           "max |residual|/(delta/sqrt(N)) = " + fmt("%.3f", worst) + " (< 5), runtime " +
               fmt("%.2f", secs) + " s (< 10)");
}

void criterion2() {
    Stream root = master_stream(102);
    const double T = 4.0;
    double worst = 0.0;
    for (double x : {0.0, 0.5 * T, 2 * T, -2 * T, 3 * T, -3 * T}) {
        const auto est = dither_mean_residual(x, OneBitQuantizer{T}, UniformSymmetricDither{T}, T,
                                              1'000'000, root);
        const double gap = std::abs(est.mean - one_bit_mean_formula(x, T, T));
        // Outside [-T, T] the residual is deterministic and the gap must be exactly zero.
        worst = std::max(worst, est.std_error > 0 ? gap / est.std_error : (gap == 0 ? 0.0 : INFINITY));
    }
    report(2, worst < 5.0, "max |mc - closed form|/SE = " + fmt("%.3f", worst) + " (< 5)");
}

void criterion3() {
    bool ok = true;
    std::string detail;
    for (long s : {25L, 50L, 100L}) {
        const auto cfg = uniform_base(s);
        const auto curve = run_curve(cfg, Estimator::glasso);
        // The rate governs the regime past the sample-size threshold m >= 4 w^2.
        const double threshold = 4.0 * std::pow(gw_bound_sparse(cfg.n, s), 2);
        ErrorCurve tail{curve.estimator, {}, cfg};
        for (const auto &p : curve.points)
            if (static_cast<double>(p.m) >= threshold)
                tail.points.push_back(p);
        const double slope = fit_rate(tail, RateModel::inv_sqrt_m).slope;
        const double full = fit_rate(curve, RateModel::inv_sqrt_m).slope;
        ok = ok && slope >= -0.6 && slope <= -0.4;
        detail += " s=" + std::to_string(s) + ": slope " + fmt("%.3f", slope) + " over m>=" +
                  std::to_string(tail.points.front().m) + " (full grid " + fmt("%.3f", full) + ");";
    }
    report(3, ok, "target [-0.6, -0.4];" + detail);
}

void criterion4() {
    auto cfg = uniform_base(25);
    cfg.m_grid = {1000};
    cfg.estimators = {Estimator::glasso, Estimator::pbp};
    const auto table = run_table(cfg);
    const double rate = win_rates(table, 0, 1).front();
    report(4, rate >= 0.95, "glasso beats pbp in " + fmt("%.1f", 100 * rate) + "% of 200 pairs (>= 95%)");
}

void criterion5() {
    auto cfg = uniform_base(25);
    cfg.m_grid = {1000};
    cfg.estimators = {Estimator::glasso, Estimator::pbp};
    const auto sweep = delta_sweep(cfg, {4, 2, 1, 0.5, 0.25, 0.125});
    const double g = sweep[0].points.back().mean / sweep[0].points.front().mean;
    const double p = sweep[1].points.back().mean / sweep[1].points.front().mean;
    report(5, g < 0.15 && p > 0.5,
           "glasso err(0.125)/err(4) = " + fmt("%.4f", g) + " (< 0.15), pbp ratio = " +
               fmt("%.4f", p) + " (> 0.5)");
}

void criterion6() {
    bool ok = true;
    std::string detail;
    for (auto kind : {EnsembleKind::gaussian(), EnsembleKind::rademacher()})
        for (long s : {5L, 10L, 25L}) {
            ExperimentConfig cfg;
            cfg.n = 100;
            cfg.structure = Sparse{s};
            cfg.norm_target = 8.0;
            cfg.R = 10.0;
            cfg.ensemble = kind;
            cfg.quantizer.kind = QuantizerKind::one_bit;
            cfg.m_grid = default_onebit_m_grid;
            cfg.trials = 200;
            cfg.master_seed = 2025;
            const auto curve = run_curve(cfg, Estimator::glasso);
            const double log_rms = fit_rate(curve, RateModel::sqrtlog_m_over_sqrt_m).residual_rms;
            const double inv_rms = fit_rate(curve, RateModel::inv_sqrt_m).residual_rms;
            bool decreasing = true;
            for (std::size_t i = 1; i < curve.points.size(); ++i)
                decreasing = decreasing && curve.points[i].mean < curve.points[i - 1].mean;
            ok = ok && log_rms <= 1.1 * inv_rms && decreasing;
            detail += " " + std::string(to_string(kind.kind)) + " s=" + std::to_string(s) +
                      ": rms " + fmt("%.4f", log_rms) + " vs " + fmt("%.4f", inv_rms) +
                      (decreasing ? " decreasing;" : " NOT decreasing;");
        }
    report(6, ok, "sqrt(ln m/m) rms <= 1.1 x 1/sqrt(m) rms;" + detail);
}

void criterion7() {
    Stream rng = master_stream(107);
    double worst_ls = 0.0, worst_grad = 0.0;
    bool mono = true;
    for (int t = 0; t < 20; ++t) {
        const long m = 300, n = 50;
        const auto A = sample_measurements(EnsembleKind::gaussian(), m, n, rng);
        Vector x(n), y(m);
        for (long i = 0; i < n; ++i)
            x[i] = rng.normal();
        for (long i = 0; i < m; ++i)
            y[i] = rng.normal();
        y += A.entries * x;
        const GLassoProblem p(A, y, 1.0, Unconstrained{});
        const auto res = glasso_solve(p);
        const Vector ls = oracle::normal_equations(A, y, 1.0);
        worst_ls = std::max(worst_ls, (res.x_hat - ls).norm() / ls.norm());
        mono = mono && monotone(res);
        const Vector g = gradient(p, x);
        const Vector fd = oracle::central_difference([&](const Vector &z) { return objective(p, z); }, x);
        worst_grad = std::max(worst_grad, (g - fd).norm() / g.norm());
        // Constrained run on the same instance.
        mono = mono && monotone(glasso_solve(GLassoProblem(A, y, 1.0, L1Ball{0.5 * x.lpNorm<1>()})));
    }
    report(7, worst_ls <= 1e-6 && worst_grad <= 1e-5 && mono,
           "normal-equations rel gap " + fmt("%.2e", worst_ls) + " (<= 1e-6), gradient rel gap " +
               fmt("%.2e", worst_grad) + " (<= 1e-5), traces monotone: " + (mono ? "yes" : "no"));
}

void criterion8() {
    VerifyOptions opt;
    opt.seed = 108;
    opt.nuclear_candidates = 100'000;
    opt.nonexpansive_pairs = 10'000;
    const auto l1 = check_l1_projection(opt);
    const auto nuc = check_nuclear_projection(opt);
    const auto ne = check_nonexpansive(opt);
    report(8, l1.passed && nuc.passed && ne.passed,
           l1.detail + "; " + nuc.detail + "; " + ne.detail);
}

void criterion9() {
    ExperimentConfig cfg;
    cfg.n = 100;
    cfg.structure = Sparse{10};
    cfg.quantizer = {QuantizerKind::uniform, 1e-6};
    cfg.m_grid = {500};
    cfg.trials = 100;
    cfg.master_seed = 109;
    const auto table = run_table(cfg);
    long good = 0;
    double worst = 0.0;
    for (double e : table.errors[0][0]) {
        good += e < 1e-3 ? 1 : 0;
        worst = std::max(worst, e);
    }
    report(9, good >= 99,
           std::to_string(good) + "/100 trials below 1e-3 (>= 99), max error " + fmt("%.2e", worst));
}

void criterion10() {
    Stream root = master_stream(110);
    double worst = 0.0;
    std::string xi;
    for (double sigma : {1.0, 4.0, 8.0})
        for (double T : {2.0, 10.0, one_bit_range(10.0, 1000)}) {
            const auto rep = onebit_moment_check(sigma, T, T, 1'000'000, root);
            for (const auto &row : rep.rows) {
                if (row.name == "E[eta^2]")
                    worst = std::max(worst, std::abs(row.z_score()));
                if (row.name == "E[xi] (unscaled tail)")
                    xi += "\n    norm=" + fmt("%g", sigma) + " T=" + fmt("%.3f", T) +
                          " mc=" + fmt("%.5f", row.mc_mean) + " (se " + fmt("%.1e", row.mc_std_error) +
                          ") unscaled=" + fmt("%.5f", row.closed_form) +
                          " with-sigma=" + fmt("%.5f", moments::xi_mean(sigma, T, T));
            }
        }
    report(10, worst < 5.0, "E[eta^2] max |z| = " + fmt("%.3f", worst) + " (< 5); E[xi] report:" + xi);
}

void criterion11() {
    const double a = gw_bound_sparse(100, 25), b = gw_bound_lowrank(100, 5);
    report(11, std::abs(a - 10.335) <= 1e-3 && std::abs(b - 54.772) <= 1e-3,
           "gw_sparse(100,25) = " + fmt("%.5f", a) + ", gw_lowrank(100,5) = " + fmt("%.5f", b));
}

} // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    for (auto *c : {criterion1, criterion2, criterion3, criterion4, criterion5, criterion6,
                    criterion7, criterion8, criterion9, criterion10, criterion11}) {
        try {
            c();
        } catch (const std::exception &e) {
            std::printf("error: %s\n", e.what());
            ++failures;
        }
    }
    std::printf("acceptance: %d failure(s), %.1f s\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
