#pragma once

#include "qlasso/ensemble.hpp"
#include "qlasso/error.hpp"
#include "qlasso/random.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>

namespace qlasso {

// ---------------------------------------------------------------------------
// Quantizers
// ---------------------------------------------------------------------------

/// Mid-riser uniform quantizer with resolution delta.
struct UniformQuantizer {
    double delta;
};

/// sign(.) quantizer; T is the range of the matching uniform dither.
struct OneBitQuantizer {
    double T;
};

using QuantizerConfig = std::variant<UniformQuantizer, OneBitQuantizer>;

/// Q(x) = Δ(⌊x/Δ⌋ + 1/2). Outputs are odd multiples of Δ/2.
inline double uniform_quantize(double x, double delta) {
    if (!std::isfinite(x))
        throw DomainError("uniform_quantize: non-finite input");
    if (!(delta > 0))
        throw InvalidSpec("uniform_quantize: delta must be positive");
    return delta * (std::floor(x / delta) + 0.5);
}

/// sign(x) with sign(0) = +1.
inline double one_bit_quantize(double x) {
    if (!std::isfinite(x))
        throw DomainError("one_bit_quantize: non-finite input");
    return x < 0.0 ? -1.0 : 1.0;
}

inline double quantize(const QuantizerConfig &q, double x) {
    if (const auto *u = std::get_if<UniformQuantizer>(&q))
        return uniform_quantize(x, u->delta);
    return one_bit_quantize(x);
}

inline void validate(const QuantizerConfig &q) {
    if (const auto *u = std::get_if<UniformQuantizer>(&q)) {
        if (!(u->delta > 0) || !std::isfinite(u->delta))
            throw InvalidSpec("uniform quantizer: delta must be positive");
    } else if (const auto *o = std::get_if<OneBitQuantizer>(&q)) {
        if (!(o->T > 0) || !std::isfinite(o->T))
            throw InvalidSpec("one-bit quantizer: T must be positive");
    }
}

// ---------------------------------------------------------------------------
// Dither laws
// ---------------------------------------------------------------------------

/// Uniform on (−Δ/2, Δ/2]; sampled as Δ(u − 1/2) with u ∈ [0, 1), so the
/// realized support is [−Δ/2, Δ/2). The endpoints differ on a null set.
struct UniformHalfOpenDither {
    double delta;
};

/// Uniform on [−T, T].
struct UniformSymmetricDither {
    double T;
};

/// Sum of k independent UniformHalfOpenDither(Δ) draws.
struct KFoldUniformDither {
    int k;
    double delta;
};

struct NoDither {};

using DitherKind =
    std::variant<UniformHalfOpenDither, UniformSymmetricDither, KFoldUniformDither, NoDither>;

inline double sample_dither(const DitherKind &d, Stream &rng) {
    struct Visitor {
        Stream &rng;
        double operator()(const UniformHalfOpenDither &u) const {
            return u.delta * (rng.uniform() - 0.5);
        }
        double operator()(const UniformSymmetricDither &u) const {
            return u.T * (2.0 * rng.uniform() - 1.0);
        }
        double operator()(const KFoldUniformDither &u) const {
            double sum = 0.0;
            for (int i = 0; i < u.k; ++i)
                sum += u.delta * (rng.uniform() - 0.5);
            return sum;
        }
        double operator()(const NoDither &) const { return 0.0; }
    };
    return std::visit(Visitor{rng}, d);
}

/// Half-width of the dither support.
inline double dither_half_width(const DitherKind &d) {
    struct Visitor {
        double operator()(const UniformHalfOpenDither &u) const { return u.delta / 2; }
        double operator()(const UniformSymmetricDither &u) const { return u.T; }
        double operator()(const KFoldUniformDither &u) const { return u.k * u.delta / 2; }
        double operator()(const NoDither &) const { return 0.0; }
    };
    return std::visit(Visitor{}, d);
}

/// Throws unless the (quantizer, dither) pair is one of the measurement
/// models: uniform with (k-fold) uniform dither, or one-bit with [−T, T].
inline void require_compatible(const QuantizerConfig &q, const DitherKind &d) {
    validate(q);
    if (std::holds_alternative<UniformQuantizer>(q)) {
        if (const auto *k = std::get_if<KFoldUniformDither>(&d)) {
            if (k->k < 1 || !(k->delta > 0))
                throw InvalidSpec("k-fold dither: need k >= 1 and delta > 0");
            return;
        }
        if (const auto *u = std::get_if<UniformHalfOpenDither>(&d)) {
            if (!(u->delta > 0))
                throw InvalidSpec("uniform dither: delta must be positive");
            return;
        }
        throw InvalidSpec("uniform quantizer requires a uniform or k-fold uniform dither");
    }
    const auto *u = std::get_if<UniformSymmetricDither>(&d);
    if (!u)
        throw InvalidSpec("one-bit quantizer requires a uniform [-T, T] dither");
    if (!(u->T > 0))
        throw InvalidSpec("one-bit dither: T must be positive");
}

/// The dither the measurement model pairs with a quantizer.
inline DitherKind matching_dither(const QuantizerConfig &q) {
    if (const auto *u = std::get_if<UniformQuantizer>(&q))
        return UniformHalfOpenDither{u->delta};
    return UniformSymmetricDither{std::get<OneBitQuantizer>(q).T};
}

// ---------------------------------------------------------------------------
// Measurement channel
// ---------------------------------------------------------------------------

struct QuantizedObservations {
    Vector y;
    QuantizerConfig quantizer;
    DitherKind dither;
    std::uint64_t dither_seed = 0;

    [[nodiscard]] long size() const { return y.size(); }
};

/// y_i = Q(a_iᵀx0 + τ_i) with a fresh τ_i per row, drawn in row order.
inline QuantizedObservations measure(const MeasurementMatrix &A, const Vector &x0,
                                     const QuantizerConfig &q, const DitherKind &d,
                                     Stream &rng) {
    detail::require_same(A.cols(), x0.size(), "measure: cols(A) vs dim(x0)");
    require_compatible(q, d);
    QuantizedObservations obs{Vector(A.rows()), q, d, rng.key()};
    const Vector clean = A.entries * x0;
    for (long i = 0; i < clean.size(); ++i)
        obs.y[i] = quantize(q, clean[i] + sample_dither(d, rng));
    return obs;
}

/// e_i = μ y_i − a_iᵀx0.
inline Vector quantization_noise(const QuantizedObservations &y, const MeasurementMatrix &A,
                                 const Vector &x0, double mu) {
    detail::require_same(A.rows(), y.size(), "quantization_noise: rows(A) vs len(y)");
    detail::require_same(A.cols(), x0.size(), "quantization_noise: cols(A) vs dim(x0)");
    return mu * y.y - A.entries * x0;
}

// ---------------------------------------------------------------------------
// Dither-mean identities
// ---------------------------------------------------------------------------

struct MeanEstimate {
    double mean;
    double std_error;
    long samples;
};

/// Monte Carlo estimate of E_τ[μ Q(x + τ)] − x.
inline MeanEstimate dither_mean_residual(double x, const QuantizerConfig &q,
                                         const DitherKind &d, double mu, long N,
                                         Stream &rng) {
    if (N < 1)
        throw InvalidSpec("dither_mean_residual: N must be >= 1");
    require_compatible(q, d);
    // Welford keeps the variance accurate when |x| dominates the spread.
    double mean = 0.0, m2 = 0.0;
    for (long i = 1; i <= N; ++i) {
        const double r = mu * quantize(q, x + sample_dither(d, rng)) - x;
        const double dlt = r - mean;
        mean += dlt / static_cast<double>(i);
        m2 += dlt * (r - mean);
    }
    const double var = N > 1 ? m2 / static_cast<double>(N - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(N)), N};
}

/// Exact E_τ[μ sign(x + τ)] − x for τ ~ Unif[−T, T], valid only for μ = T.
inline double one_bit_mean_formula(double x, double T, double mu) {
    if (!(T > 0))
        throw InvalidSpec("one_bit_mean_formula: T must be positive");
    if (mu != T)
        throw UnsupportedParameters("one_bit_mean_formula: closed form holds only for mu == T");
    double r = 0.0;
    if (std::abs(x) > T)
        r -= x;
    if (x > T)
        r += T;
    if (x < -T)
        r -= T;
    return r;
}

} // namespace qlasso
