#pragma once

#include "qlasso/ensemble.hpp"
#include "qlasso/error.hpp"
#include "qlasso/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <variant>
#include <vector>

namespace qlasso {

// ---------------------------------------------------------------------------
// Constraint sets
// ---------------------------------------------------------------------------

struct L1Ball {
    double radius;
};

/// Nuclear-norm ball over d x d matrices stored row-major in length-d² vectors.
struct NuclearBall {
    double radius;
    long d;
};

struct Unconstrained {};

using ConstraintSet = std::variant<L1Ball, NuclearBall, Unconstrained>;

/// Euclidean projection onto {x : ‖x‖₁ ≤ radius}.
///
/// Sorts magnitudes in decreasing order (ties broken by index), finds the
/// soft threshold θ with Σ max(|v_i| − θ, 0) = radius and shrinks. O(n log n).
inline Vector project_l1_ball(const Vector &v, double radius) {
    if (!(radius > 0) || !std::isfinite(radius))
        throw InvalidSpec("project_l1_ball: radius must be positive");
    const long n = v.size();
    if (v.lpNorm<1>() <= radius)
        return v;

    std::vector<long> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0L);
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
        return std::abs(v[a]) > std::abs(v[b]);
    });

    double cumsum = 0.0, theta = 0.0;
    for (long k = 0; k < n; ++k) {
        const double mag = std::abs(v[order[static_cast<std::size_t>(k)]]);
        cumsum += mag;
        const double t = (cumsum - radius) / static_cast<double>(k + 1);
        const bool last = k + 1 == n;
        const double next =
            last ? 0.0 : std::abs(v[order[static_cast<std::size_t>(k + 1)]]);
        if (t >= next || last) {
            theta = t;
            break;
        }
    }

    Vector x(n);
    for (long i = 0; i < n; ++i) {
        const double mag = std::max(std::abs(v[i]) - theta, 0.0);
        x[i] = std::copysign(mag, v[i]);
    }
    return x;
}

/// Euclidean (Frobenius) projection onto {X : ‖X‖_* ≤ radius}: SVD, then
/// ℓ1-ball projection of the singular values.
inline Vector project_nuclear_ball(const Vector &v, double radius, long d) {
    if (!(radius > 0) || !std::isfinite(radius))
        throw InvalidSpec("project_nuclear_ball: radius must be positive");
    if (d < 1 || v.size() != d * d)
        throw DimensionMismatch("project_nuclear_ball: length is not d*d");
    const Eigen::Map<const Matrix> X(v.data(), d, d);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector &sv = svd.singularValues();
    if (sv.sum() <= radius)
        return v;
    const Vector shrunk = project_l1_ball(sv, radius);
    const Matrix P = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
    return Eigen::Map<const Vector>(P.data(), P.size());
}

inline Vector project(const ConstraintSet &K, const Vector &v) {
    struct Visitor {
        const Vector &v;
        Vector operator()(const L1Ball &b) const { return project_l1_ball(v, b.radius); }
        Vector operator()(const NuclearBall &b) const {
            return project_nuclear_ball(v, b.radius, b.d);
        }
        Vector operator()(const Unconstrained &) const { return v; }
    };
    return std::visit(Visitor{v}, K);
}

inline double nuclear_norm(const Vector &v, long d) {
    if (d < 1 || v.size() != d * d)
        throw DimensionMismatch("nuclear_norm: length is not d*d");
    const Eigen::Map<const Matrix> X(v.data(), d, d);
    return Eigen::JacobiSVD<Eigen::MatrixXd>(X).singularValues().sum();
}

/// Gauge value whose sublevel set at `radius` is K (0 for the whole space).
inline double constraint_norm(const ConstraintSet &K, const Vector &x) {
    if (std::holds_alternative<L1Ball>(K))
        return x.lpNorm<1>();
    if (const auto *b = std::get_if<NuclearBall>(&K))
        return nuclear_norm(x, b->d);
    return 0.0;
}

/// True when x lies in K up to an absolute slack on the gauge.
inline bool contains(const ConstraintSet &K, const Vector &x, double tol = 1e-9) {
    if (const auto *b = std::get_if<L1Ball>(&K))
        return x.lpNorm<1>() <= b->radius + tol;
    if (const auto *b = std::get_if<NuclearBall>(&K))
        return nuclear_norm(x, b->d) <= b->radius + tol;
    return true;
}

// ---------------------------------------------------------------------------
// Gaussian width bounds
// ---------------------------------------------------------------------------

/// Upper bound on the Gaussian width of the tangent-cone section of the ℓ1
/// ball at an s-sparse point: sqrt(2 s ln(n/s) + 1.5 s).
inline double gw_bound_sparse(long n, long s) {
    if (s < 1 || s > n)
        throw InvalidSpec("gw_bound_sparse: need 1 <= s <= n");
    const double sd = static_cast<double>(s);
    return std::sqrt(2.0 * sd * std::log(static_cast<double>(n) / sd) + 1.5 * sd);
}

/// Upper bound for a rank-r d x d matrix under the nuclear ball: sqrt(6 d r).
inline double gw_bound_lowrank(long d, long r) {
    if (r < 1 || r > d)
        throw InvalidSpec("gw_bound_lowrank: need 1 <= r <= d");
    return std::sqrt(6.0 * static_cast<double>(d) * static_cast<double>(r));
}

// ---------------------------------------------------------------------------
// Tangent-cone diagnostics
// ---------------------------------------------------------------------------

struct ConeDiagnostics {
    double width_bound = 0.0;
    double smallball_inf = 0.0;
    long num_directions = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline Vector gaussian_vector(long n, Stream &rng) {
    Vector g(n);
    for (long i = 0; i < n; ++i)
        g[i] = rng.normal();
    return g;
}

} // namespace detail

/// Unit vectors w ∝ P_K(x0 + δg) − x0 with g ~ N(0, I) and δ = 0.01‖x0‖₂
/// (0.01 at the origin). Each is a feasible direction, so it lies in the
/// descent cone of K at x0.
inline std::vector<Vector> sample_descent_directions(const ConstraintSet &K, const Vector &x0,
                                                     long count, Stream &rng) {
    if (!contains(K, x0, 1e-9))
        throw InvalidSpec("sample_descent_directions: anchor x0 is not in K");
    const double x0_norm = x0.norm();
    const double step = x0_norm > 0 ? 0.01 * x0_norm : 0.01;
    std::vector<Vector> dirs;
    dirs.reserve(static_cast<std::size_t>(std::max(count, 0L)));
    while (static_cast<long>(dirs.size()) < count) {
        const Vector g = detail::gaussian_vector(x0.size(), rng);
        Vector w = project(K, x0 + step * g) - x0;
        const double len = w.norm();
        if (len < 1e-12)
            continue;
        dirs.push_back(w / len);
    }
    return dirs;
}

/// min over sampled descent directions of (1/m)‖Aw‖₂²; an upper estimate of
/// the restricted minimum eigenvalue over the cone.
inline double estimate_smallball_inf(const MeasurementMatrix &A, const ConstraintSet &K,
                                     const Vector &x0, long num_directions, Stream &rng) {
    detail::require_same(A.cols(), x0.size(), "estimate_smallball_inf: cols(A) vs dim(x0)");
    if (num_directions < 1)
        throw InvalidSpec("estimate_smallball_inf: need at least one direction");
    const auto dirs = sample_descent_directions(K, x0, num_directions, rng);
    const double m = static_cast<double>(A.rows());
    double best = std::numeric_limits<double>::infinity();
    for (const auto &w : dirs)
        best = std::min(best, (A.entries * w).squaredNorm() / m);
    return best;
}

/// Lower estimate of ω(T_{K,x0}): mean over Gaussian draws g of the max of
/// gᵀw over a fixed set of sampled unit descent directions.
inline double estimate_width_lower(const ConstraintSet &K, const Vector &x0,
                                   long num_directions, long num_gaussians, Stream &rng) {
    if (num_gaussians < 1)
        throw InvalidSpec("estimate_width_lower: need at least one Gaussian draw");
    const auto dirs = sample_descent_directions(K, x0, num_directions, rng);
    Matrix W(static_cast<long>(dirs.size()), x0.size());
    for (std::size_t i = 0; i < dirs.size(); ++i)
        W.row(static_cast<long>(i)) = dirs[i].transpose();
    double total = 0.0;
    for (long j = 0; j < num_gaussians; ++j) {
        const Vector g = detail::gaussian_vector(x0.size(), rng);
        total += (W * g).maxCoeff();
    }
    return total / static_cast<double>(num_gaussians);
}

/// Closed-form width bound plus small-ball estimate for a structured signal.
inline ConeDiagnostics cone_diagnostics(const MeasurementMatrix &A, const ConstraintSet &K,
                                        const Vector &x0, const SignalSpec &spec,
                                        long num_directions, Stream &rng) {
    ConeDiagnostics out;
    if (const auto *sp = std::get_if<Sparse>(&spec.structure))
        out.width_bound = gw_bound_sparse(spec.n, sp->s);
    else {
        const auto &lr = std::get<LowRank>(spec.structure);
        out.width_bound = gw_bound_lowrank(lr.d, lr.r);
    }
    out.seed = rng.key();
    out.num_directions = num_directions;
    out.smallball_inf = estimate_smallball_inf(A, K, x0, num_directions, rng);
    return out;
}

} // namespace qlasso
