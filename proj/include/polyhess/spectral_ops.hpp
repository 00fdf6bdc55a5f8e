#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>
#include <vector>

#include "polyhess/grid.hpp"

namespace polyhess::spectral {

// Symbol conventions, fixed once for the whole library:
//   -Delta       <->  (4 pi^2 |xi|^2)         with xi = kappa / (2L)
//   Lambda       <->  (2 pi |xi|)
//   d/dx_j       <->  (2 pi i xi_j)
//   R_j (Riesz)  <->  (pi i xi_j / |xi|),  R_j(0) = 0
// so that sum_j R_j^2 = -pi^2 (Id - mean). All inverse multipliers annihilate
// the zero mode and demand near-mean-zero input. Odd-order factors are zeroed
// on the Nyquist plane of their axis: the lattice has no +n/2 partner there,
// and any other choice breaks Hermitian symmetry of real fields.

inline constexpr int kMaxDerivativeOrder = 12; // 2 m_max with m_max = 6
inline constexpr double kZeroModeTol = 1e-8;

/// Multi-index of one partial derivative per axis.
struct MultiIndex {
    std::array<int, kMaxDim> components{};
    int dimension = 0;

    static MultiIndex create(std::initializer_list<int> orders) {
        MultiIndex alpha;
        alpha.dimension = static_cast<int>(orders.size());
        if (alpha.dimension < 1 || alpha.dimension > kMaxDim)
            throw Error("MultiIndex: dimension out of range");
        int d = 0;
        for (int o : orders) {
            if (o < 0) throw Error("MultiIndex: negative order");
            alpha.components[d++] = o;
        }
        if (alpha.order() > kMaxDerivativeOrder)
            throw Error("MultiIndex: total order exceeds the configured cap");
        return alpha;
    }

    int order() const {
        return std::accumulate(components.begin(), components.begin() + dimension, 0);
    }
};

namespace detail {

inline double pow_int(double base, int exponent) {
    double r = 1.0;
    for (int i = 0; i < exponent; ++i) r *= base;
    return r;
}

inline double mode_magnitude(const GridSpec& spec, const polyhess::Index& idx) {
    double s2 = 0.0;
    for (int d = 0; d < spec.dimension; ++d) {
        const double xi = spec.physical_frequency(spec.signed_frequency(idx[d]));
        s2 += xi * xi;
    }
    return 2.0 * std::acos(-1.0) * std::sqrt(s2); // 2 pi |xi|
}

inline void require_near_zero_mean(const RealField& f, double tol, const char* who) {
    double sum = 0.0, sq = 0.0;
    for (double v : f.values) {
        sum += v;
        sq += v * v;
    }
    const double mean = sum / static_cast<double>(f.size());
    const double rms = std::sqrt(sq / static_cast<double>(f.size()));
    if (std::abs(mean) > tol * std::max(rms, 1e-300)) {
        std::ostringstream msg;
        msg << who << ": |mean|/rms = " << std::scientific << std::abs(mean) / std::max(rms, 1e-300)
            << " exceeds the zero-mode tolerance " << tol;
        throw NonZeroMean(msg.str());
    }
}

inline double lp_quadrature(const RealField& f, double p) {
    if (std::isinf(p)) return field_max_abs(f);
    const double hN = detail::pow_int(f.spec.spacing(), f.spec.dimension);
    double sum = 0.0;
    for (double v : f.values) sum += std::pow(std::abs(v), p);
    return std::pow(sum * hN, 1.0 / p);
}

} // namespace detail

// --- spectral-side primitives (used heavily by the solver) ---

/// Multiply by (2 pi |xi|)^order; the zero mode maps to zero.
inline SpectralField radial_power_multiply(const SpectralField& F, int order) {
    SpectralField out = F;
    polyhess::detail::for_each_index(F.spec, [&](std::size_t flat, const polyhess::Index& idx) {
        const double t = detail::mode_magnitude(F.spec, idx);
        out.coefficients[flat] *= (t == 0.0) ? 0.0 : detail::pow_int(t, order);
    });
    return out;
}

/// Divide by (2 pi |xi|)^order; the zero mode is set to zero.
inline SpectralField radial_power_divide(const SpectralField& F, int order) {
    SpectralField out = F;
    polyhess::detail::for_each_index(F.spec, [&](std::size_t flat, const polyhess::Index& idx) {
        const double t = detail::mode_magnitude(F.spec, idx);
        if (t == 0.0)
            out.coefficients[flat] = 0.0;
        else
            out.coefficients[flat] /= detail::pow_int(t, order);
    });
    return out;
}

// --- the operator suite on real fields ---

/// Lambda^n u with Lambda = sqrt(-Delta), n >= 1.
inline RealField lambda_apply(const RealField& u, int n) {
    if (n < 1) throw Error("lambda_apply: order must be >= 1");
    return inverse_transform(radial_power_multiply(forward_transform(u), n));
}

/// (-Delta)^m u realized through the identical code path as Lambda^{2m}.
inline RealField laplacian_power_apply(const RealField& u, int m) {
    if (m < 1) throw Error("laplacian_power_apply: order must be >= 1");
    return lambda_apply(u, 2 * m);
}

/// Lambda^{-n} f for near-mean-zero f; the output has zero mean.
inline RealField lambda_invert(const RealField& f, int n, double zero_mode_tol = kZeroModeTol) {
    if (n < 1) throw Error("lambda_invert: order must be >= 1");
    detail::require_near_zero_mean(f, zero_mode_tol, "lambda_invert");
    return inverse_transform(radial_power_divide(forward_transform(f), n));
}

inline RealField laplacian_power_invert(const RealField& f, int m, double zero_mode_tol = kZeroModeTol) {
    if (m < 1) throw Error("laplacian_power_invert: order must be >= 1");
    detail::require_near_zero_mean(f, zero_mode_tol, "laplacian_power_invert");
    return inverse_transform(radial_power_divide(forward_transform(f), 2 * m));
}

/// Fractional Lambda^s, s >= 0, via the exact radial symbol (no regularization).
inline RealField lambda_fractional_apply(const RealField& u, double s) {
    if (s < 0) throw Error("lambda_fractional_apply: s must be >= 0");
    if (s == 0) return u;
    SpectralField F = forward_transform(u);
    polyhess::detail::for_each_index(F.spec, [&](std::size_t flat, const polyhess::Index& idx) {
        const double t = detail::mode_magnitude(F.spec, idx);
        F.coefficients[flat] *= (t == 0.0) ? 0.0 : std::pow(t, s);
    });
    return inverse_transform(F);
}

namespace detail {

/// i^k for k mod 4.
inline std::complex<double> imaginary_unit_power(int k) {
    switch (((k % 4) + 4) % 4) {
        case 0: return {1.0, 0.0};
        case 1: return {0.0, 1.0};
        case 2: return {-1.0, 0.0};
        default: return {0.0, -1.0};
    }
}

} // namespace detail

/// Spectral-side partial derivative multiplier for multi-index alpha.
inline SpectralField derivative_multiply(const SpectralField& F, const MultiIndex& alpha) {
    if (alpha.dimension != F.spec.dimension)
        throw Error("derivative: multi-index dimension mismatch");
    SpectralField out = F;
    const double two_pi = 2.0 * std::acos(-1.0);
    const int nyquist = -F.spec.points_per_axis / 2;
    const std::complex<double> rot = detail::imaginary_unit_power(alpha.order());
    polyhess::detail::for_each_index(F.spec, [&](std::size_t flat, const polyhess::Index& idx) {
        double magnitude = 1.0;
        bool zeroed = false;
        for (int d = 0; d < F.spec.dimension; ++d) {
            const int a = alpha.components[d];
            if (a == 0) continue;
            const int kappa = F.spec.signed_frequency(idx[d]);
            if (kappa == nyquist && a % 2 == 1) {
                zeroed = true;
                break;
            }
            magnitude *= detail::pow_int(two_pi * F.spec.physical_frequency(kappa), a);
        }
        out.coefficients[flat] = zeroed ? 0.0 : rot * magnitude * out.coefficients[flat];
    });
    return out;
}

/// Partial derivative d^alpha u via the symbol (2 pi i xi)^alpha.
inline RealField derivative(const RealField& u, const MultiIndex& alpha) {
    if (alpha.order() == 0) return u;
    return inverse_transform(derivative_multiply(forward_transform(u), alpha));
}

/// Spectral-side Riesz multiplier along one axis: pi i xi_j / |xi|.
inline SpectralField riesz_multiply(const SpectralField& F, int axis) {
    if (axis < 0 || axis >= F.spec.dimension) throw Error("riesz: axis out of range");
    SpectralField out = F;
    const double pi = std::acos(-1.0);
    const int nyquist = -F.spec.points_per_axis / 2;
    polyhess::detail::for_each_index(F.spec, [&](std::size_t flat, const polyhess::Index& idx) {
        const int kappa = F.spec.signed_frequency(idx[axis]);
        double s2 = 0.0;
        for (int d = 0; d < F.spec.dimension; ++d) {
            const double xi = F.spec.physical_frequency(F.spec.signed_frequency(idx[d]));
            s2 += xi * xi;
        }
        if (s2 == 0.0 || kappa == nyquist) {
            out.coefficients[flat] = 0.0;
        } else {
            const double xi_j = F.spec.physical_frequency(kappa);
            out.coefficients[flat] *= std::complex<double>(0.0, pi * xi_j / std::sqrt(s2));
        }
    });
    return out;
}

/// Riesz transform along one axis, normalized so F[R_j f] = pi i xi_j/|xi| F[f].
inline RealField riesz(const RealField& f, int axis) {
    return inverse_transform(riesz_multiply(forward_transform(f), axis));
}

/// Homogeneous Sobolev seminorm ||Lambda^s u||_p with grid quadrature.
inline double sobolev_seminorm(const RealField& u, double s, double p) {
    if (p < 1.0) throw BadP("sobolev_seminorm: p must be >= 1");
    if (s < 0.0) throw Error("sobolev_seminorm: s must be >= 0");
    if (s == 0.0) return detail::lp_quadrature(u, p);
    return detail::lp_quadrature(lambda_fractional_apply(u, s), p);
}

/// Empirical check that d^alpha Lambda^{-n} f = A R^alpha f with A constant.
struct RieszFactorization {
    double median_ratio = 0.0;
    double max_deviation = 0.0; // max |pointwise ratio - median| over the mask
    std::size_t mask_size = 0;
};

inline RieszFactorization riesz_factorization_check(const RealField& f, int n, const MultiIndex& alpha,
                                                    double zero_mode_tol = kZeroModeTol) {
    if (alpha.order() != n) throw Error("riesz_factorization_check: |alpha| must equal n");
    if (n > f.spec.dimension) throw Error("riesz_factorization_check: n must be <= N");
    detail::require_near_zero_mean(f, zero_mode_tol, "riesz_factorization_check");

    SpectralField F = forward_transform(f);
    RealField lhs = inverse_transform(derivative_multiply(radial_power_divide(F, n), alpha));
    SpectralField R = F;
    for (int d = 0; d < f.spec.dimension; ++d)
        for (int rep = 0; rep < alpha.components[d]; ++rep) R = riesz_multiply(R, d);
    RealField rhs = inverse_transform(R);

    const double rhs_peak = field_max_abs(rhs);
    if (rhs_peak == 0.0) throw DegenerateRatio("riesz_factorization_check: R^alpha(f) vanishes");

    std::vector<double> ratios;
    ratios.reserve(lhs.size());
    for (std::size_t i = 0; i < lhs.size(); ++i)
        if (std::abs(rhs.values[i]) >= 0.05 * rhs_peak)
            ratios.push_back(lhs.values[i] / rhs.values[i]);
    if (ratios.empty()) throw DegenerateRatio("riesz_factorization_check: empty ratio mask");

    std::sort(ratios.begin(), ratios.end());
    RieszFactorization result;
    result.mask_size = ratios.size();
    result.median_ratio = ratios[ratios.size() / 2];
    for (double r : ratios)
        result.max_deviation = std::max(result.max_deviation, std::abs(r - result.median_ratio));
    return result;
}

} // namespace polyhess::spectral
