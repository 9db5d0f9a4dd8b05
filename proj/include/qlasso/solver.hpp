#pragma once

#include "qlasso/ensemble.hpp"
#include "qlasso/error.hpp"
#include "qlasso/geometry.hpp"
#include "qlasso/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace qlasso {

/// argmin_{x ∈ K} (1/2m) Σ (μ y_i − a_iᵀx)².
struct GLassoProblem {
    const MeasurementMatrix &A;
    const Vector &y;
    double mu = 1.0;
    ConstraintSet K = Unconstrained{};

    GLassoProblem(const MeasurementMatrix &A, const Vector &y, double mu, ConstraintSet K)
        : A{A}, y{y}, mu{mu}, K{std::move(K)} {
        detail::require_same(A.rows(), y.size(), "GLassoProblem: rows(A) vs len(y)");
        if (!std::isfinite(mu))
            throw InvalidSpec("GLassoProblem: mu must be finite");
    }
    GLassoProblem(const MeasurementMatrix &A, const QuantizedObservations &obs, double mu,
                  ConstraintSet K)
        : GLassoProblem(A, obs.y, mu, std::move(K)) {}

    [[nodiscard]] long m() const { return A.rows(); }
    [[nodiscard]] long n() const { return A.cols(); }
};

enum class StepRule { fixed_inverse_lipschitz, backtracking };

struct SolverOptions {
    long max_iters = 10000;
    double rel_tol = 1e-10;
    /// Iterate displacement bound, relative to max(1, ‖x‖).
    double step_tol = 1e-10;
    StepRule step_rule = StepRule::fixed_inverse_lipschitz;
};

struct SolverResult {
    Vector x_hat;
    std::vector<double> objective_trace;
    long iterations = 0;
    bool converged = false;
    double step_size = 0.0;
};

inline double objective(const GLassoProblem &p, const Vector &x) {
    detail::require_same(p.n(), x.size(), "objective: cols(A) vs dim(x)");
    return (p.mu * p.y - p.A.entries * x).squaredNorm() / (2.0 * static_cast<double>(p.m()));
}

/// ∇ℒ(x) = (1/m) Aᵀ(Ax − μy).
inline Vector gradient(const GLassoProblem &p, const Vector &x) {
    detail::require_same(p.n(), x.size(), "gradient: cols(A) vs dim(x)");
    return p.A.entries.transpose() * (p.A.entries * x - p.mu * p.y) /
           static_cast<double>(p.m());
}

/// λ_max(AᵀA)/m by power iteration, inflated by 1%.
inline double estimate_lipschitz(const MeasurementMatrix &A) {
    if (A.rows() < 1 || A.cols() < 1)
        throw InvalidSpec("estimate_lipschitz: empty matrix");
    const double m = static_cast<double>(A.rows());
    const auto &M = A.entries;
    // Deterministic start with components in every direction.
    Vector v = Vector::Ones(A.cols()) + Vector::LinSpaced(A.cols(), 0.0, 0.5);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        Vector w = M.transpose() * (M * v);
        const double next = v.dot(w) / m;
        const double wn = w.norm();
        if (wn == 0.0)
            return 0.0;
        v = w / wn;
        const bool done = it > 0 && std::abs(next - lambda) <= 1e-8 * std::abs(next);
        lambda = next;
        if (done)
            break;
    }
    return 1.01 * lambda;
}

namespace detail {

/// Quadratic model of the G-Lasso objective with the data folded into
/// G = AᵀA/m, b = μAᵀy/m and c = μ²‖y‖²/2m, so every iteration costs O(n²)
/// instead of O(mn).
struct GramForm {
    Eigen::MatrixXd G;
    Vector b;
    double c;

    explicit GramForm(const GLassoProblem &p) {
        const double m = static_cast<double>(p.m());
        const auto &M = p.A.entries;
        G = Eigen::MatrixXd::Zero(p.n(), p.n());
        G.selfadjointView<Eigen::Lower>().rankUpdate(M.transpose(), 1.0 / m);
        G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
        b = (p.mu / m) * (M.transpose() * p.y);
        c = p.mu * p.mu * p.y.squaredNorm() / (2.0 * m);
    }

    [[nodiscard]] Vector gradient(const Vector &x) const { return G * x - b; }

    /// Objective given Gx, clamped at zero against cancellation.
    [[nodiscard]] double objective(const Vector &x, const Vector &Gx) const {
        return std::max(0.5 * x.dot(Gx) - b.dot(x) + c, 0.0);
    }
};

} // namespace detail

/// Projected gradient descent for the G-Lasso, started at x = 0.
inline SolverResult glasso_solve(const GLassoProblem &p, const SolverOptions &opts = {}) {
    if (opts.max_iters < 1 || !(opts.rel_tol > 0) || !(opts.step_tol > 0))
        throw InvalidSpec("glasso_solve: need max_iters >= 1 and positive tolerances");
    const detail::GramForm form(p);
    const double lip = estimate_lipschitz(p.A);

    SolverResult res;
    Vector x = Vector::Zero(p.n());
    if (lip == 0.0) {
        // A = 0: the objective is constant and the start point is optimal.
        res.x_hat = std::move(x);
        res.objective_trace.push_back(form.c);
        res.converged = true;
        return res;
    }
    const double eta0 = 1.0 / lip;
    res.step_size = eta0;
    Vector Gx = Vector::Zero(p.n());
    double f = form.objective(x, Gx);
    res.objective_trace.push_back(f);

    for (long it = 0; it < opts.max_iters; ++it) {
        const Vector grad = Gx - form.b;
        double eta = eta0;
        Vector x_next = project(p.K, x - eta * grad);
        Vector Gx_next = form.G * x_next;
        double f_next = form.objective(x_next, Gx_next);
        if (opts.step_rule == StepRule::backtracking) {
            // Sufficient decrease for the proximal-gradient quadratic model.
            for (int halvings = 0; halvings < 60; ++halvings) {
                const Vector dx = x_next - x;
                if (f_next <= f + grad.dot(dx) + dx.squaredNorm() / (2.0 * eta) + 1e-15)
                    break;
                eta *= 0.5;
                x_next = project(p.K, x - eta * grad);
                Gx_next = form.G * x_next;
                f_next = form.objective(x_next, Gx_next);
            }
            res.step_size = eta;
        }
        if (!std::isfinite(f_next))
            throw Divergence("glasso_solve: non-finite objective at iteration " +
                             std::to_string(it + 1));
        const double change = std::abs(f - f_next);
        const double moved = (x_next - x).norm();
        x = std::move(x_next);
        Gx = std::move(Gx_next);
        f = f_next;
        res.objective_trace.push_back(f);
        res.iterations = it + 1;
        const bool flat = change <= opts.rel_tol * std::max(f, std::numeric_limits<double>::min());
        if ((flat && moved <= opts.step_tol * std::max(1.0, x.norm())) || f == 0.0) {
            res.converged = true;
            break;
        }
    }
    res.x_hat = std::move(x);
    return res;
}

/// Projected back projection: P_K((μ/m) Aᵀy).
inline Vector pbp_estimate(const MeasurementMatrix &A, const Vector &y,
                           const ConstraintSet &K, double mu) {
    detail::require_same(A.rows(), y.size(), "pbp_estimate: rows(A) vs len(y)");
    const Vector back = (mu / static_cast<double>(A.rows())) * (A.entries.transpose() * y);
    return project(K, back);
}

/// argmax_{x ∈ K} (1/m) Σ y_i a_iᵀx − ‖x‖²/(2λ), which equals
/// P_K((λ/m) Aᵀy) by completing the square.
inline Vector dm_estimate(const MeasurementMatrix &A, const Vector &y, const ConstraintSet &K,
                          double lambda) {
    if (!(lambda > 0) || !std::isfinite(lambda))
        throw InvalidSpec("dm_estimate: lambda must be positive");
    return pbp_estimate(A, y, K, lambda);
}

/// Objective maximized by dm_estimate.
inline double dm_objective(const MeasurementMatrix &A, const Vector &y, double lambda,
                           const Vector &x) {
    return y.dot(A.entries * x) / static_cast<double>(A.rows()) -
           x.squaredNorm() / (2.0 * lambda);
}

} // namespace qlasso
