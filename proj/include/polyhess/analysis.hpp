#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "polyhess/grid.hpp"
#include "polyhess/spectral_ops.hpp"

namespace polyhess::analysis {

/// L^p norm by plain Riemann quadrature; p = inf is the grid max.
inline double lp_norm(const RealField& f, double p) {
    if (p < 1.0) throw BadP("lp_norm: p must be >= 1");
    return spectral::detail::lp_quadrature(f, p);
}

/// sup_t t * |{ |f| > t }|, computed exactly by sorting: the supremum is
/// attained just below a sample value.
inline double weak_l1_quasinorm(const RealField& f) {
    std::vector<double> mags(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) mags[i] = std::abs(f.values[i]);
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    const double hN = std::pow(f.spec.spacing(), f.spec.dimension);
    double best = 0.0;
    for (std::size_t i = 0; i < mags.size(); ++i)
        best = std::max(best, mags[i] * static_cast<double>(i + 1) * hN);
    return best;
}

/// Axis-aligned cube, required to lie inside the box with >= 2 grid points
/// per axis.
struct CubeSample {
    std::array<double, kMaxDim> center{};
    double side = 0.0;

    void validate(const GridSpec& spec) const {
        const double L = spec.half_length;
        if (!(side > 0)) throw BadCube("cube side must be positive");
        for (int d = 0; d < spec.dimension; ++d)
            if (center[d] - 0.5 * side < -L || center[d] + 0.5 * side > L)
                throw BadCube("cube leaves the box");
        if (side < 2.0 * spec.spacing()) throw CubeTooSmall("cube holds fewer than 2 points per axis");
    }
};

/**
 * Cube-sampling policy for the BMO/VMO estimators: dyadic sides (2L/2^j down
 * to min_cells cells) with uniformly jittered integer anchor cells, wrapped
 * periodically. Integer anchors make the estimator exactly covariant under
 * whole-cell translations of the data (apply the same origin_shift).
 */
struct CubeSampler {
    int total_cubes = 10000;
    std::uint64_t seed = 1;
    int min_cells = 2;
    std::array<int, kMaxDim> origin_shift{}; // in cells
};

namespace detail {

struct IndexCube {
    std::array<int, kMaxDim> start{}; // anchor cell per axis (mod n)
    int cells = 0;                    // points per axis
};

inline std::vector<IndexCube> sample_cubes(const GridSpec& spec, const CubeSampler& sampler) {
    const int n = spec.points_per_axis;
    std::vector<int> sides; // points per axis per dyadic level
    for (int cells = n / 2; cells >= std::max(sampler.min_cells, 2); cells /= 2)
        sides.push_back(cells);
    if (sides.empty()) sides.push_back(n / 2);

    std::mt19937_64 rng(sampler.seed);
    std::uniform_int_distribution<int> anchor(0, n - 1);
    std::vector<IndexCube> cubes;
    cubes.reserve(static_cast<std::size_t>(sampler.total_cubes));
    const int per_side = std::max(1, sampler.total_cubes / static_cast<int>(sides.size()));
    for (int cells : sides)
        for (int c = 0; c < per_side; ++c) {
            IndexCube q;
            q.cells = cells;
            for (int d = 0; d < spec.dimension; ++d)
                q.start[d] = (anchor(rng) + sampler.origin_shift[d] % n + n) % n;
            cubes.push_back(q);
        }
    return cubes;
}

/// Mean oscillation (1/|Q|) sum_Q |f - f_Q| over the cube's grid points.
inline double mean_oscillation(const RealField& f, const IndexCube& q) {
    const GridSpec& spec = f.spec;
    const int n = spec.points_per_axis;
    const int N = spec.dimension;
    std::array<int, kMaxDim> off{};
    std::size_t count = 1;
    for (int d = 0; d < N; ++d) count *= static_cast<std::size_t>(q.cells);

    auto flat_of = [&](const std::array<int, kMaxDim>& o) {
        std::size_t flat = 0;
        for (int d = 0; d < N; ++d)
            flat = flat * static_cast<std::size_t>(n) + static_cast<std::size_t>((q.start[d] + o[d]) % n);
        return flat;
    };

    // anchor at the first value so constant data yields exactly zero
    const double anchor = f.values[flat_of(off)];
    double offset_sum = 0.0;
    for (std::size_t it = 0; it < count; ++it) {
        offset_sum += f.values[flat_of(off)] - anchor;
        for (int d = N - 1; d >= 0; --d) {
            if (++off[d] < q.cells) break;
            off[d] = 0;
        }
    }
    const double mean = anchor + offset_sum / static_cast<double>(count);

    off.fill(0);
    double osc = 0.0;
    for (std::size_t it = 0; it < count; ++it) {
        osc += std::abs(f.values[flat_of(off)] - mean);
        for (int d = N - 1; d >= 0; --d) {
            if (++off[d] < q.cells) break;
            off[d] = 0;
        }
    }
    return osc / static_cast<double>(count);
}

} // namespace detail

/// Lower-bound BMO estimate: max mean oscillation over the sampled cubes.
/// Reported together with the sample count; it is an estimator, not the sup.
struct BmoEstimate {
    double value = 0.0;
    int cubes_sampled = 0;
};

inline BmoEstimate bmo_seminorm(const RealField& f, const CubeSampler& sampler) {
    const auto cubes = detail::sample_cubes(f.spec, sampler);
    BmoEstimate est;
    est.cubes_sampled = static_cast<int>(cubes.size());
    for (const auto& q : cubes) est.value = std::max(est.value, detail::mean_oscillation(f, q));
    return est;
}

/// Oscillation profile: per dyadic side, the max mean oscillation over that
/// side's sampled cubes. Sides are listed decreasing.
struct VmoProfileRow {
    double side = 0.0;
    double max_oscillation = 0.0;
    int cubes = 0;
};

inline std::vector<VmoProfileRow> vmo_profile(const RealField& f, const CubeSampler& sampler) {
    const auto cubes = detail::sample_cubes(f.spec, sampler);
    const double h = f.spec.spacing();
    std::vector<VmoProfileRow> rows;
    for (const auto& q : cubes) {
        const double side = q.cells * h;
        auto it = std::find_if(rows.begin(), rows.end(),
                               [&](const VmoProfileRow& r) { return r.side == side; });
        if (it == rows.end()) {
            rows.push_back({side, 0.0, 0});
            it = rows.end() - 1;
        }
        it->max_oscillation = std::max(it->max_oscillation, detail::mean_oscillation(f, q));
        it->cubes += 1;
    }
    std::sort(rows.begin(), rows.end(),
              [](const VmoProfileRow& a, const VmoProfileRow& b) { return a.side > b.side; });
    return rows;
}

struct Ball {
    std::array<double, kMaxDim> center{};
    double radius = 0.0;
};

/// Scale-invariant critical Poincare ratio |f - f_B|_B / || |grad f| ||_{L^N(B)}
/// (mean oscillation over the critical gradient norm): the combination whose
/// constant depends only on N, not on the ball. Constants report 0 (the 0/0
/// guard).
inline double poincare_ratio(const RealField& f, const Ball& ball) {
    const GridSpec& spec = f.spec;
    const int N = spec.dimension;

    std::vector<std::size_t> inside;
    polyhess::detail::for_each_index(spec, [&](std::size_t flat, const Index& idx) {
        double r2 = 0.0;
        for (int d = 0; d < N; ++d) {
            const double dx = spec.coordinate(idx[d]) - ball.center[d];
            r2 += dx * dx;
        }
        if (r2 <= ball.radius * ball.radius) inside.push_back(flat);
    });
    if (inside.empty()) throw EmptyBall("poincare_ratio: ball contains no grid points");

    double mean = 0.0;
    for (std::size_t i : inside) mean += f.values[i];
    mean /= static_cast<double>(inside.size());

    RealField grad_sq(spec);
    SpectralField F = forward_transform(f);
    for (int d = 0; d < N; ++d) {
        spectral::MultiIndex alpha;
        alpha.dimension = N;
        alpha.components[d] = 1;
        RealField g = inverse_transform(spectral::derivative_multiply(F, alpha));
        for (std::size_t i = 0; i < g.size(); ++i) grad_sq.values[i] += g.values[i] * g.values[i];
    }

    const double hN = std::pow(spec.spacing(), N);
    double num = 0.0, den = 0.0;
    for (std::size_t i : inside) {
        num += std::abs(f.values[i] - mean);
        den += std::pow(std::sqrt(grad_sq.values[i]), N) * hN;
    }
    num /= static_cast<double>(inside.size()); // |f - f_B|_B
    den = std::pow(den, 1.0 / N);
    if (den < 1e-300) return 0.0;
    return num / den;
}

// --- Hardy space machinery ---

namespace detail {

/// The fixed smooth bump behind the maximal function: (1 - |x/s|^2)^2 on
/// |x| <= s, sampled and renormalized to unit discrete mass.
inline RealField smoothing_bump(const GridSpec& spec, double s) {
    RealField phi = sample([&](const std::array<double, kMaxDim>& x) {
        double r2 = 0.0;
        for (int d = 0; d < spec.dimension; ++d) r2 += x[d] * x[d];
        const double u = r2 / (s * s);
        return u >= 1.0 ? 0.0 : (1.0 - u) * (1.0 - u);
    }, spec);
    double mass = 0.0;
    for (double v : phi.values) mass += v;
    mass *= std::pow(spec.spacing(), spec.dimension);
    for (auto& v : phi.values) v /= mass;
    return phi;
}

} // namespace detail

/// Dyadic scale list h * 2^j up to the box half-length.
inline std::vector<double> dyadic_scales(const GridSpec& spec) {
    std::vector<double> scales;
    for (double s = spec.spacing(); s <= spec.half_length; s *= 2.0) scales.push_back(s);
    return scales;
}

/// Smooth maximal function: pointwise max over scales of |Phi_s * f|, with
/// the periodic spectral convolution.
inline RealField hardy_maximal(const RealField& f, const std::vector<double>& scales) {
    SpectralField F = forward_transform(f);
    const double boxN = std::pow(2.0 * f.spec.half_length, f.spec.dimension);
    RealField maximal(f.spec);
    for (double s : scales) {
        SpectralField Phi = forward_transform(detail::smoothing_bump(f.spec, s));
        SpectralField conv(f.spec);
        for (std::size_t i = 0; i < conv.coefficients.size(); ++i)
            conv.coefficients[i] = boxN * Phi.coefficients[i] * F.coefficients[i];
        RealField g = inverse_transform(conv);
        for (std::size_t i = 0; i < g.size(); ++i)
            maximal.values[i] = std::max(maximal.values[i], std::abs(g.values[i]));
    }
    return maximal;
}

/// ||Mf||_1 over the dyadic scale list.
inline double h1_norm(const RealField& f) {
    return lp_norm(hardy_maximal(f, dyadic_scales(f.spec)), 1.0);
}

// --- atoms ---

/// L^inf-atom: supported on a cube, |a| <= |Q|^{-1}, zero discrete mean.
struct Atom {
    RealField field;
    CubeSample cube;
};

enum class AtomPattern { dipole, checker };

/**
 * Synthesize an atom on the cube. The dipole splits the cube along axis 0
 * into +|Q|^{-1} / -|Q|^{-1} halves; an odd plane count zeroes the last slab,
 * so the positive and negative point counts balance exactly. The checker
 * alternates sign by local index parity, zeroing one point if the counts
 * come out odd.
 */
inline Atom make_atom(const GridSpec& spec, const CubeSample& cube, AtomPattern pattern) {
    cube.validate(spec);
    const int N = spec.dimension;
    const int n = spec.points_per_axis;
    const double h = spec.spacing();

    std::array<int, kMaxDim> lo{}, cnt{};
    for (int d = 0; d < N; ++d) {
        lo[d] = static_cast<int>(std::ceil((cube.center[d] - 0.5 * cube.side + spec.half_length) / h - 1e-12));
        const int hi = static_cast<int>(std::ceil((cube.center[d] + 0.5 * cube.side + spec.half_length) / h - 1e-12));
        cnt[d] = hi - lo[d];
        if (cnt[d] < 2) throw CubeTooSmall("make_atom: fewer than 2 points along an axis");
        if (lo[d] < 0 || lo[d] + cnt[d] > n) throw BadCube("make_atom: cube leaves the grid");
    }

    const double v = 1.0 / std::pow(cube.side, N); // |Q|^{-1}
    Atom atom{RealField(spec), cube};

    std::array<int, kMaxDim> off{};
    std::size_t total = 1;
    for (int d = 0; d < N; ++d) total *= static_cast<std::size_t>(cnt[d]);

    auto flat_of = [&](const std::array<int, kMaxDim>& o) {
        std::size_t flat = 0;
        for (int d = 0; d < N; ++d)
            flat = flat * static_cast<std::size_t>(n) + static_cast<std::size_t>(lo[d] + o[d]);
        return flat;
    };

    if (pattern == AtomPattern::dipole) {
        const int planes = cnt[0];
        const int pos_planes = planes / 2;
        for (std::size_t it = 0; it < total; ++it) {
            double val;
            if (off[0] < pos_planes)
                val = v;
            else if (planes % 2 == 1 && off[0] == planes - 1)
                val = 0.0; // balancing slab
            else
                val = -v;
            atom.field.values[flat_of(off)] = val;
            for (int d = N - 1; d >= 0; --d) {
                if (++off[d] < cnt[d]) break;
                off[d] = 0;
            }
        }
    } else {
        long plus = 0, minus = 0;
        for (std::size_t it = 0; it < total; ++it) {
            int parity = 0;
            for (int d = 0; d < N; ++d) parity += off[d];
            const double val = (parity % 2 == 0) ? v : -v;
            (val > 0 ? plus : minus) += 1;
            atom.field.values[flat_of(off)] = val;
            for (int d = N - 1; d >= 0; --d) {
                if (++off[d] < cnt[d]) break;
                off[d] = 0;
            }
        }
        if (plus != minus) {
            // counts differ by one when every axis count is odd; zero the
            // majority-sign point at the cube's far corner
            const double majority = plus > minus ? v : -v;
            off.fill(0);
            std::size_t chosen = 0;
            bool found = false;
            for (std::size_t it = 0; it < total; ++it) {
                const std::size_t flat = flat_of(off);
                if (atom.field.values[flat] == majority) {
                    chosen = flat;
                    found = true;
                }
                for (int d = N - 1; d >= 0; --d) {
                    if (++off[d] < cnt[d]) break;
                    off[d] = 0;
                }
            }
            if (found) atom.field.values[chosen] = 0.0;
        }
    }
    return atom;
}

/**
 * Decay estimate for Lambda^{-N} a: per radial shell in
 * [2 sqrt(N) l, L/2], the sup of |g(x)| (l + |x-c|) / l. One constant must
 * control every shell; pass when the shell envelopes stay within a fixed
 * spread and show no growth trend.
 */
struct AtomDecayReport {
    struct Shell {
        double radius = 0.0;   // shell midpoint
        double sup_value = 0.0;
        double envelope = 0.0; // sup |g| (l + r)/l over the shell
    };
    std::vector<Shell> shells;
    double spread = 0.0;      // max/min envelope
    double loglog_slope = 0.0;
    bool pass = false;
};

// The envelope must not grow across shells (boundedness by one constant);
// decaying faster than the l/(l+r) bound is consistent with the estimate.
inline constexpr double kAtomDecaySpreadBound = 8.0;
inline constexpr double kAtomDecayGrowthBound = 0.15; // max upward log-log slope

inline AtomDecayReport atom_decay_check(const Atom& atom) {
    const GridSpec& spec = atom.field.spec;
    const int N = spec.dimension;
    const double l = atom.cube.side;
    if (l > 0.25 * spec.half_length + 1e-12)
        throw BadCube("atom_decay_check: cube side exceeds the L/4 truncation margin");
    if (field_max_abs(atom.field) == 0.0) throw Error("atom_decay_check: zero field is not an atom");

    RealField g = spectral::lambda_invert(atom.field, N);

    const double r_lo = 2.0 * std::sqrt(static_cast<double>(N)) * l;
    const double r_hi = 0.5 * spec.half_length;
    AtomDecayReport report;
    if (r_hi <= r_lo) throw BadCube("atom_decay_check: no shell range between 2 sqrt(N) l and L/2");

    const int shell_count = 8;
    const double ratio = std::pow(r_hi / r_lo, 1.0 / shell_count);
    std::vector<double> edges;
    for (int i = 0; i <= shell_count; ++i) edges.push_back(r_lo * std::pow(ratio, i));

    std::vector<AtomDecayReport::Shell> shells(shell_count);
    for (int i = 0; i < shell_count; ++i)
        shells[static_cast<std::size_t>(i)].radius = 0.5 * (edges[static_cast<std::size_t>(i)] + edges[static_cast<std::size_t>(i + 1)]);

    polyhess::detail::for_each_index(spec, [&](std::size_t flat, const Index& idx) {
        double r2 = 0.0;
        for (int d = 0; d < N; ++d) {
            const double dx = spec.coordinate(idx[d]) - atom.cube.center[d];
            r2 += dx * dx;
        }
        const double r = std::sqrt(r2);
        if (r < r_lo || r >= r_hi) return;
        const int bin = std::min(shell_count - 1,
                                 static_cast<int>(std::log(r / r_lo) / std::log(ratio)));
        auto& shell = shells[static_cast<std::size_t>(bin)];
        const double mag = std::abs(g.values[flat]);
        shell.sup_value = std::max(shell.sup_value, mag);
        shell.envelope = std::max(shell.envelope, mag * (l + r) / l);
    });

    double lo = 1e300, hi = 0.0;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int m = 0;
    for (const auto& s : shells) {
        if (s.envelope <= 0.0) continue;
        lo = std::min(lo, s.envelope);
        hi = std::max(hi, s.envelope);
        const double x = std::log(s.radius), y = std::log(s.envelope);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    report.shells = std::move(shells);
    if (m >= 2) {
        report.spread = hi / lo;
        report.loglog_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        report.pass = report.spread <= kAtomDecaySpreadBound &&
                      report.loglog_slope <= kAtomDecayGrowthBound;
    }
    return report;
}

/// bmo(Lambda^{-1} f) / ||f||_N: the boundedness ratio behind
/// Lambda^{-1}: H^N -> BMO (for N >= 2, H^N = L^N).
inline double bmo_boundedness_check(const RealField& f, const CubeSampler& sampler,
                                    double zero_mode_tol = spectral::kZeroModeTol) {
    const double denom = lp_norm(f, static_cast<double>(f.spec.dimension));
    if (denom == 0.0) return 0.0;
    RealField g = spectral::lambda_invert(f, 1, zero_mode_tol);
    return bmo_seminorm(g, sampler).value / denom;
}

} // namespace polyhess::analysis
