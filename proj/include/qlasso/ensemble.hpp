#pragma once

#include "qlasso/error.hpp"
#include "qlasso/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qlasso {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Sparse {
    long s;
};

/// Vectorized d x d matrix of rank r; the ambient dimension is d².
struct LowRank {
    long d;
    long r;
};

struct SignalSpec {
    long n = 0;
    std::variant<Sparse, LowRank> structure = Sparse{1};
    double norm_target = 1.0;
    std::uint64_t seed = 0;

    static SignalSpec sparse(long n, long s, double norm, std::uint64_t seed = 0) {
        return {n, Sparse{s}, norm, seed};
    }
    static SignalSpec lowrank(long d, long r, double norm, std::uint64_t seed = 0) {
        return {d * d, LowRank{d, r}, norm, seed};
    }
};

enum class Ensemble { gaussian, rademacher };

/// Measurement distribution plus the sub-gaussian constants reported
/// alongside it. L and alpha never enter an estimator.
struct EnsembleKind {
    Ensemble kind = Ensemble::gaussian;
    double L = 1.0;
    double alpha = 0.7978845608028654; // sqrt(2/pi)

    static EnsembleKind gaussian() { return {Ensemble::gaussian, 1.0, std::sqrt(2.0 / M_PI)}; }
    static EnsembleKind rademacher() { return {Ensemble::rademacher, 1.0, 1.0}; }
};

inline std::string_view to_string(Ensemble e) {
    return e == Ensemble::gaussian ? "gaussian" : "rademacher";
}

inline EnsembleKind parse_ensemble(std::string_view name) {
    if (name == "gaussian")
        return EnsembleKind::gaussian();
    if (name == "rademacher")
        return EnsembleKind::rademacher();
    throw InvalidSpec("unknown ensemble kind '" + std::string(name) + "'");
}

/// Rows are the measurement vectors a_i.
struct MeasurementMatrix {
    Matrix entries;
    EnsembleKind kind;
    std::uint64_t seed = 0;

    [[nodiscard]] long rows() const { return entries.rows(); }
    [[nodiscard]] long cols() const { return entries.cols(); }
};

namespace detail {

inline void rescale_to(Vector &v, double norm_target) {
    const double nrm = v.norm();
    v *= norm_target / nrm;
}

inline void check_norm_target(double norm_target) {
    if (!(norm_target > 0) || !std::isfinite(norm_target))
        throw InvalidSpec("norm_target must be positive and finite");
}

} // namespace detail

/// s-sparse signal: uniform random support, iid N(0,1) nonzeros, rescaled to
/// the target norm.
inline Vector gen_sparse_signal(const SignalSpec &spec, Stream &rng) {
    const auto *sp = std::get_if<Sparse>(&spec.structure);
    if (!sp)
        throw InvalidSpec("gen_sparse_signal: structure is not sparse");
    const long n = spec.n, s = sp->s;
    if (n < 1 || s < 1 || s > n)
        throw InvalidSpec("gen_sparse_signal: need 1 <= s <= n (s=" + std::to_string(s) +
                          ", n=" + std::to_string(n) + ")");
    detail::check_norm_target(spec.norm_target);

    // Partial Fisher-Yates: the first s slots are a uniform s-subset.
    std::vector<long> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0L);
    for (long i = 0; i < s; ++i) {
        std::uniform_int_distribution<long> pick(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }

    Vector x = Vector::Zero(n);
    do {
        for (long i = 0; i < s; ++i)
            x[idx[static_cast<std::size_t>(i)]] = rng.normal();
    } while (x.squaredNorm() == 0.0);
    detail::rescale_to(x, spec.norm_target);
    return x;
}

/// X0 = U Vᵀ with iid N(0,1) factors of width r, rescaled to the target
/// Frobenius norm, returned row-major vectorized.
inline Vector gen_lowrank_signal(const SignalSpec &spec, Stream &rng) {
    const auto *lr = std::get_if<LowRank>(&spec.structure);
    if (!lr)
        throw InvalidSpec("gen_lowrank_signal: structure is not low-rank");
    const long d = lr->d, r = lr->r;
    if (d < 1 || r < 1 || r > d)
        throw InvalidSpec("gen_lowrank_signal: need 1 <= r <= d");
    if (spec.n != d * d)
        throw InvalidSpec("gen_lowrank_signal: n must equal d*d");
    detail::check_norm_target(spec.norm_target);

    Matrix U(d, r), V(d, r);
    Matrix X;
    do {
        for (long i = 0; i < U.size(); ++i)
            U.data()[i] = rng.normal();
        for (long i = 0; i < V.size(); ++i)
            V.data()[i] = rng.normal();
        X = U * V.transpose();
    } while (X.squaredNorm() == 0.0);
    Vector x = Eigen::Map<const Vector>(X.data(), X.size());
    detail::rescale_to(x, spec.norm_target);
    return x;
}

inline Vector gen_signal(const SignalSpec &spec, Stream &rng) {
    return std::holds_alternative<Sparse>(spec.structure) ? gen_sparse_signal(spec, rng)
                                                          : gen_lowrank_signal(spec, rng);
}

/// m x n matrix with iid N(0,1) or Rademacher entries, filled row-major in
/// stream order.
inline MeasurementMatrix sample_measurements(const EnsembleKind &kind, long m, long n,
                                             Stream &rng) {
    if (m < 1 || n < 1)
        throw InvalidSpec("sample_measurements: need m >= 1 and n >= 1");
    MeasurementMatrix A{Matrix(m, n), kind, rng.key()};
    double *p = A.entries.data();
    const long count = m * n;
    switch (kind.kind) {
    case Ensemble::gaussian:
        for (long i = 0; i < count; ++i)
            p[i] = rng.normal();
        break;
    case Ensemble::rademacher:
        for (long i = 0; i < count; ++i)
            p[i] = rng.sign();
        break;
    default:
        throw InvalidSpec("sample_measurements: unknown ensemble kind");
    }
    return A;
}

} // namespace qlasso
