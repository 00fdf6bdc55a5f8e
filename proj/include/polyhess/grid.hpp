#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <vector>

#include <fftw3.h>

#include "polyhess/errors.hpp"

namespace polyhess {

inline constexpr int kMaxDim = 6;

using Index = std::array<int, kMaxDim>;

/**
 * Periodic-box discretization of R^N.
 *
 * The domain is the box [-L, L)^N sampled with n points per axis at spacing
 * h = 2L/n, node coordinates x_j = -L + h*j. The dual lattice carries integer
 * frequencies kappa in [-n/2, n/2)^N with physical frequency
 * xi_j = kappa_j / (2L).
 *
 * Storage is row-major with axis 0 slowest and axis N-1 contiguous, so dumps
 * of the flat value table are bit-stable across runs.
 */
struct GridSpec {
    int dimension = 0;       // N
    int points_per_axis = 0; // n, even
    double half_length = 0;  // L

    static GridSpec create(int dimension, int points_per_axis, double half_length) {
        if (dimension < 2 || dimension > kMaxDim)
            throw BadGrid("grid dimension must lie in [2, 6]");
        if (points_per_axis < 8 || points_per_axis % 2 != 0)
            throw BadGrid("points_per_axis must be even and >= 8");
        if (!(half_length > 0) || !std::isfinite(half_length))
            throw BadGrid("half_length must be positive and finite");
        // n^N must fit comfortably in a size_t (and in memory).
        std::size_t count = 1;
        for (int d = 0; d < dimension; ++d) {
            if (count > (std::size_t{1} << 40) / static_cast<std::size_t>(points_per_axis))
                throw BadGrid("total point count n^N overflows the configured cap");
            count *= static_cast<std::size_t>(points_per_axis);
        }
        return GridSpec{dimension, points_per_axis, half_length};
    }

    double spacing() const { return 2.0 * half_length / points_per_axis; }

    std::size_t point_count() const {
        std::size_t count = 1;
        for (int d = 0; d < dimension; ++d) count *= static_cast<std::size_t>(points_per_axis);
        return count;
    }

    /// Signed integer frequency for a storage index along one axis.
    int signed_frequency(int axis_index) const {
        return axis_index < points_per_axis / 2 ? axis_index : axis_index - points_per_axis;
    }

    /// Physical frequency xi = kappa / (2L).
    double physical_frequency(int kappa) const { return kappa / (2.0 * half_length); }

    /// Node coordinate along one axis.
    double coordinate(int axis_index) const { return -half_length + spacing() * axis_index; }

    bool operator==(const GridSpec& other) const {
        return dimension == other.dimension && points_per_axis == other.points_per_axis &&
               half_length == other.half_length;
    }
};

namespace detail {

/// Row-major odometer walk over the full lattice; f(flat_index, index_vector).
template <class F>
inline void for_each_index(const GridSpec& spec, F&& f) {
    Index idx{};
    const std::size_t total = spec.point_count();
    const int n = spec.points_per_axis;
    const int N = spec.dimension;
    for (std::size_t flat = 0; flat < total; ++flat) {
        f(flat, idx);
        for (int d = N - 1; d >= 0; --d) {
            if (++idx[d] < n) break;
            idx[d] = 0;
        }
    }
}

} // namespace detail

/// Real scalar field sampled on a GridSpec lattice.
struct RealField {
    GridSpec spec;
    std::vector<double> values;

    RealField() = default;
    explicit RealField(const GridSpec& s) : spec(s), values(s.point_count(), 0.0) {}
    RealField(const GridSpec& s, std::vector<double> v) : spec(s), values(std::move(v)) {}

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }
};

/// Complex Fourier coefficients indexed by kappa in [-n/2, n/2)^N.
struct SpectralField {
    GridSpec spec;
    std::vector<std::complex<double>> coefficients;

    SpectralField() = default;
    explicit SpectralField(const GridSpec& s) : spec(s), coefficients(s.point_count()) {}

    /// Storage slot of a signed frequency vector.
    std::size_t slot(const Index& kappa) const {
        std::size_t flat = 0;
        const int n = spec.points_per_axis;
        for (int d = 0; d < spec.dimension; ++d) {
            int i = kappa[d] < 0 ? kappa[d] + n : kappa[d];
            flat = flat * static_cast<std::size_t>(n) + static_cast<std::size_t>(i);
        }
        return flat;
    }

    std::complex<double> at(const Index& kappa) const { return coefficients[slot(kappa)]; }
    std::complex<double>& at(const Index& kappa) { return coefficients[slot(kappa)]; }
};

namespace detail {

// FFTW plans are cached per (dims, direction); creation is serialized, execution
// via fftw_execute_dft is reentrant. Plans are created FFTW_UNALIGNED so they
// run on plain std::vector storage.
class FftPlanCache {
public:
    static FftPlanCache& instance() {
        static FftPlanCache cache;
        return cache;
    }

    void execute(const GridSpec& spec, int sign, std::complex<double>* in, std::complex<double>* out) {
        fftw_plan plan = get(spec, sign);
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in), reinterpret_cast<fftw_complex*>(out));
    }

private:
    fftw_plan get(const GridSpec& spec, int sign) {
        std::scoped_lock lock(mutex_);
        std::array<int, kMaxDim + 2> key{};
        key[0] = spec.dimension;
        key[1] = sign;
        for (int d = 0; d < spec.dimension; ++d) key[2 + d] = spec.points_per_axis;
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;

        std::vector<int> dims(static_cast<std::size_t>(spec.dimension), spec.points_per_axis);
        std::vector<std::complex<double>> scratch(spec.point_count());
        fftw_plan plan = fftw_plan_dft(spec.dimension, dims.data(),
                                       reinterpret_cast<fftw_complex*>(scratch.data()),
                                       reinterpret_cast<fftw_complex*>(scratch.data()),
                                       sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
        return plan;
    }

    std::mutex mutex_;
    std::map<std::array<int, kMaxDim + 2>, fftw_plan> plans_;
};

/// Parity sign (-1)^{sum kappa_d}: the phase of the box origin at x = -L.
inline double origin_phase(const GridSpec& spec, const Index& idx) {
    int parity = 0;
    for (int d = 0; d < spec.dimension; ++d) parity += idx[d];
    return (parity % 2 == 0) ? 1.0 : -1.0;
}

} // namespace detail

/**
 * Forward DFT normalized so the kappa = 0 coefficient is the mean of f over
 * the box. Coefficients are taken with respect to the physical coordinates,
 * i.e. f(x) = sum_kappa F(kappa) exp(2 pi i kappa . x / (2L)).
 */
inline SpectralField forward_transform(const RealField& f) {
    SpectralField out(f.spec);
    std::vector<std::complex<double>> buffer(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) buffer[i] = f.values[i];
    detail::FftPlanCache::instance().execute(f.spec, FFTW_FORWARD, buffer.data(), out.coefficients.data());
    const double scale = 1.0 / static_cast<double>(f.spec.point_count());
    detail::for_each_index(f.spec, [&](std::size_t flat, const Index& idx) {
        out.coefficients[flat] *= scale * detail::origin_phase(f.spec, idx);
    });
    return out;
}

/**
 * Inverse DFT. Requires a Hermitian-symmetric input (the output of
 * forward_transform on a real field); an imaginary residue above 1e-10
 * relative to the field scale raises NonHermitianInput.
 */
inline RealField inverse_transform(const SpectralField& F) {
    std::vector<std::complex<double>> buffer(F.coefficients.size());
    detail::for_each_index(F.spec, [&](std::size_t flat, const Index& idx) {
        buffer[flat] = F.coefficients[flat] * detail::origin_phase(F.spec, idx);
    });
    std::vector<std::complex<double>> transformed(buffer.size());
    detail::FftPlanCache::instance().execute(F.spec, FFTW_BACKWARD, buffer.data(), transformed.data());

    double max_imag = 0.0, max_real = 0.0;
    for (const auto& z : transformed) {
        max_imag = std::max(max_imag, std::abs(z.imag()));
        max_real = std::max(max_real, std::abs(z.real()));
    }
    if (max_imag > 1e-10 * std::max(1.0, max_real))
        throw NonHermitianInput("inverse_transform: imaginary residue " + std::to_string(max_imag));

    RealField out(F.spec);
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = transformed[i].real();
    return out;
}

/// Pointwise sampling of g at the grid nodes x = -L + h * index. Unused
/// trailing components of the position array are zero.
template <class G>
inline RealField sample(G&& g, const GridSpec& spec) {
    RealField out(spec);
    std::array<double, kMaxDim> x{};
    detail::for_each_index(spec, [&](std::size_t flat, const Index& idx) {
        for (int d = 0; d < spec.dimension; ++d) x[d] = spec.coordinate(idx[d]);
        const double v = g(x);
        if (!std::isfinite(v)) throw NonFiniteSample("sample: non-finite value at a grid node");
        out.values[flat] = v;
    });
    return out;
}

/// Exact rational padding factor p/q.
struct Rational {
    long num = 1;
    long den = 1;
};

namespace detail {

// One-axis spectral resize. Growing splits the source Nyquist plane into two
// half-weighted planes at +-n/2; shrinking folds the +n'/2 plane back onto
// -n'/2. The two operations compose to the identity.
inline std::vector<std::complex<double>> resize_axis(const std::vector<std::complex<double>>& in,
                                                     int axes, int axis,
                                                     const std::vector<int>& dims_in, int n_out) {
    const int n_in = dims_in[static_cast<std::size_t>(axis)];
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(dims_in[static_cast<std::size_t>(d)]);
    for (int d = axis + 1; d < axes; ++d) inner *= static_cast<std::size_t>(dims_in[static_cast<std::size_t>(d)]);

    std::vector<std::complex<double>> out(outer * static_cast<std::size_t>(n_out) * inner);
    auto src = [&](std::size_t o, int i, std::size_t r) {
        return in[(o * static_cast<std::size_t>(n_in) + static_cast<std::size_t>(i)) * inner + r];
    };
    auto dst = [&](std::size_t o, int i, std::size_t r) -> std::complex<double>& {
        return out[(o * static_cast<std::size_t>(n_out) + static_cast<std::size_t>(i)) * inner + r];
    };

    if (n_out >= n_in) {
        const int half = n_in / 2;
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t r = 0; r < inner; ++r) {
                for (int k = 0; k < half; ++k) dst(o, k, r) = src(o, k, r);
                for (int k = -half + 1; k < 0; ++k) dst(o, k + n_out, r) = src(o, k + n_in, r);
                if (n_out > n_in) {
                    const std::complex<double> nyq = 0.5 * src(o, half, r);
                    dst(o, n_out - half, r) = nyq; // kappa = -n_in/2
                    dst(o, half, r) = nyq;         // kappa = +n_in/2 exists on the larger lattice
                } else {
                    dst(o, half, r) = src(o, half, r); // factor 1: plain copy
                }
            }
    } else {
        const int half = n_out / 2;
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t r = 0; r < inner; ++r) {
                for (int k = 0; k < half; ++k) dst(o, k, r) = src(o, k, r);
                for (int k = -half + 1; k < 0; ++k) dst(o, k + n_out, r) = src(o, k + n_in, r);
                dst(o, half, r) = src(o, n_in - half, r) + src(o, half, r); // fold +n_out/2 into -n_out/2
            }
    }
    return out;
}

inline SpectralField resize_spectrum(const SpectralField& F, int n_out) {
    GridSpec target = GridSpec::create(F.spec.dimension, n_out, F.spec.half_length);
    std::vector<std::complex<double>> data = F.coefficients;
    std::vector<int> dims(static_cast<std::size_t>(F.spec.dimension), F.spec.points_per_axis);
    for (int axis = 0; axis < F.spec.dimension; ++axis) {
        data = resize_axis(data, F.spec.dimension, axis, dims, n_out);
        dims[static_cast<std::size_t>(axis)] = n_out;
    }
    SpectralField out(target);
    out.coefficients = std::move(data);
    return out;
}

inline int checked_target_size(const GridSpec& spec, const Rational& factor, bool growing) {
    if (factor.den <= 0 || factor.num <= 0) throw BadFactor("factor must be a positive rational");
    const long scaled = static_cast<long>(spec.points_per_axis) * factor.num;
    if (scaled % factor.den != 0) throw BadFactor("factor * n is not an integer");
    const long n_out = scaled / factor.den;
    if (n_out % 2 != 0) throw BadFactor("factor * n is not even");
    if (growing && n_out < spec.points_per_axis) throw BadFactor("pad factor must be >= 1");
    if (!growing && n_out > spec.points_per_axis) throw BadFactor("truncate factor must be <= 1");
    return static_cast<int>(n_out);
}

} // namespace detail

/// Zero-fill high frequencies onto the lattice of size factor * n per axis.
inline SpectralField pad_spectrum(const SpectralField& F, const Rational& factor) {
    return detail::resize_spectrum(F, detail::checked_target_size(F.spec, factor, true));
}

/// Drop high frequencies down to the lattice of size factor * n per axis.
inline SpectralField truncate_spectrum(const SpectralField& F, const Rational& factor) {
    return detail::resize_spectrum(F, detail::checked_target_size(F.spec, factor, false));
}

// --- small field utilities shared across modules ---

inline double field_mean(const RealField& f) {
    double sum = 0.0;
    for (double v : f.values) sum += v;
    return sum / static_cast<double>(f.size());
}

inline double field_max_abs(const RealField& f) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
}

inline bool field_finite(const RealField& f) {
    for (double v : f.values)
        if (!std::isfinite(v)) return false;
    return true;
}

/// Largest |f| over nodes within one cell of the box boundary. The whole-space
/// decay condition has no grid realization, so callers report this value
/// instead of gating on it.
inline double boundary_sup(const RealField& f) {
    const double L = f.spec.half_length;
    const double h = f.spec.spacing();
    double m = 0.0;
    detail::for_each_index(f.spec, [&](std::size_t flat, const Index& idx) {
        for (int d = 0; d < f.spec.dimension; ++d) {
            const double x = f.spec.coordinate(idx[d]);
            if (x <= -L + 0.5 * h || x >= L - 1.5 * h) {
                m = std::max(m, std::abs(f.values[flat]));
                break;
            }
        }
    });
    return m;
}

/// Mean-zero random field with coefficients supported on |kappa|_inf <= band.
inline RealField random_bandlimited_field(const GridSpec& spec, int band, std::uint64_t seed,
                                          double amplitude = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    RealField noise(spec);
    for (auto& v : noise.values) v = gauss(rng);
    SpectralField F = forward_transform(noise);
    detail::for_each_index(spec, [&](std::size_t flat, const Index& idx) {
        bool keep = true;
        int mag = 0;
        for (int d = 0; d < spec.dimension; ++d) {
            const int kappa = spec.signed_frequency(idx[d]);
            mag = std::max(mag, std::abs(kappa));
            if (kappa == -spec.points_per_axis / 2) keep = false;
        }
        if (!keep || mag > band || mag == 0) F.coefficients[flat] = 0.0;
    });
    RealField out = inverse_transform(F);
    const double scale = field_max_abs(out);
    if (scale > 0)
        for (auto& v : out.values) v *= amplitude / scale;
    return out;
}

} // namespace polyhess
