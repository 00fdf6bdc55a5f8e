#include <catch2/catch.hpp>

#include <cmath>

#include "polyhess/kernels.hpp"
#include "polyhess/spectral_ops.hpp"
#include "test_support.hpp"

using namespace polyhess;
using namespace polyhess::kernels;
using namespace polyhess::test;

namespace {
const double kPi = std::acos(-1.0);
}

TEST_CASE("polyharmonic fundamental solution constants", "[kernels]") {
    SECTION("N=4, m=1 matches the classical Laplace kernel in R^4") {
        const RadialKernel k = green_polyharmonic(4, 1);
        REQUIRE(k.form == RadialKernel::Form::power);
        REQUIRE(k.exponent == -2.0);
        // classical fundamental solution of -Delta in R^N: Gamma(N/2-1)/(4 pi^{N/2}) r^{2-N}
        const double classical = std::tgamma(1.0) / (4.0 * std::pow(kPi, 2.0));
        REQUIRE(k.coefficient == Approx(classical).epsilon(1e-14));
        REQUIRE(k.coefficient == Approx(1.0 / (4.0 * kPi * kPi)).epsilon(1e-14));
    }

    SECTION("N=4, m=2 is -log|x|/(8 pi^2)") {
        const RadialKernel k = green_polyharmonic(4, 2);
        REQUIRE(k.form == RadialKernel::Form::log);
        // V_4 = pi^2/2, so N V_N 4^{m-1} Gamma(N/2) (m-1)! = 4 (pi^2/2) 4 * 1 * 1 = 8 pi^2
        REQUIRE(k.coefficient == Approx(-1.0 / (8.0 * kPi * kPi)).epsilon(1e-14));
    }

    SECTION("the log branch occurs exactly at N = 2m") {
        for (int m = 1; m <= 3; ++m) {
            const RadialKernel crit = green_polyharmonic(2 * m, m);
            REQUIRE(crit.form == RadialKernel::Form::log);
            if (2 * m + 1 <= 6) {
                const RadialKernel sub = green_polyharmonic(2 * m + 1, m);
                REQUIRE(sub.form == RadialKernel::Form::power);
            }
        }
    }

    REQUIRE_THROWS_AS(green_polyharmonic(3, 2), InadmissibleOrder);
    REQUIRE_THROWS_AS(green_polyharmonic(4, 0), InadmissibleOrder);
}

TEST_CASE("lambda fundamental solution constants", "[kernels]") {
    SECTION("n=1, N=3 is the Riesz kernel 1/(2 pi^2 |x|^2)") {
        const RadialKernel k = green_lambda(1, 3);
        REQUIRE(k.form == RadialKernel::Form::power);
        REQUIRE(k.exponent == -2.0);
        REQUIRE(k.coefficient == Approx(1.0 / (2.0 * kPi * kPi)).epsilon(1e-14));
    }

    SECTION("critical constants") {
        REQUIRE(green_lambda(2, 2).coefficient == Approx(-1.0 / (2.0 * kPi)).epsilon(1e-14));
        REQUIRE(green_lambda(1, 1).coefficient == Approx(1.0 / kPi).epsilon(1e-14));
    }

    SECTION("even orders reproduce the polyharmonic family") {
        for (int N = 2; N <= 6; ++N)
            for (int n = 2; n <= N; n += 2) {
                const RadialKernel a = green_lambda(n, N);
                const RadialKernel b = green_polyharmonic(N, n / 2);
                REQUIRE(a.form == b.form);
                REQUIRE(a.coefficient == Approx(b.coefficient).epsilon(1e-13));
                if (a.form == RadialKernel::Form::power) REQUIRE(a.exponent == b.exponent);
            }
    }

    SECTION("critical log constant obeys C_N = C_{N-2,N} / (2 - N)") {
        // Lambda^2 (C_N log|x|) = C_N (2-N)/|x|^2 must equal the order-(N-2)
        // power kernel, which pins the sign/inversion convention of the
        // critical constant.
        for (int N = 3; N <= 6; ++N) {
            const double CN = green_lambda(N, N).coefficient;
            const double CN2 = green_lambda(N - 2, N).coefficient;
            REQUIRE(CN == Approx(CN2 / (2.0 - N)).epsilon(1e-13));
        }
    }

    SECTION("radial Laplacian identity behind the recursion, by finite differences") {
        // Delta log r = (N-2)/r^2 with Delta = d^2/dr^2 + (N-1)/r d/dr
        const double r = 1.37, dh = 1e-5;
        auto phi = [](double s) { return std::log(s); };
        const double d1 = (phi(r + dh) - phi(r - dh)) / (2.0 * dh);
        const double d2 = (phi(r + dh) - 2.0 * phi(r) + phi(r - dh)) / (dh * dh);
        for (int N = 2; N <= 6; ++N) {
            const double lap = d2 + (N - 1) / r * d1;
            REQUIRE(lap == Approx((N - 2) / (r * r)).margin(1e-5));
        }
    }

    REQUIRE_THROWS_AS(green_lambda(0, 3), InadmissibleOrder);
    REQUIRE_THROWS_AS(green_lambda(4, 3), InadmissibleOrder);
}

TEST_CASE("kernel scaling law", "[kernels][property]") {
    const RadialKernel k = green_polyharmonic(5, 1);
    for (double r : {0.3, 1.0, 2.7})
        for (double s : {0.5, 2.0, 3.0})
            REQUIRE(k(s * r) == Approx(std::pow(s, k.exponent) * k(r)).epsilon(1e-12));
}

TEST_CASE("direct convolution against the closed form", "[kernels]") {
    const GridSpec spec = GridSpec::create(3, 24, 6.0);
    const double h = spec.spacing();

    SECTION("zero field convolves to zero") {
        RealField zero(spec);
        REQUIRE(field_max_abs(convolve_kernel(zero, green_lambda(1, 3))) == 0.0);
    }

    SECTION("mollified delta reproduces the kernel on shells") {
        const RadialKernel k = green_polyharmonic(3, 1);
        RealField delta = mollified_delta(spec, 2.5 * h);
        RealField u = convolve_kernel(delta, k);
        double worst = 0.0;
        polyhess::detail::for_each_index(spec, [&](std::size_t flat, const Index& idx) {
            double r2 = 0.0;
            for (int d = 0; d < 3; ++d) {
                const double x = spec.coordinate(idx[d]);
                r2 += x * x;
            }
            const double r = std::sqrt(r2);
            if (r < 2.0 * h || r > 0.5 * spec.half_length) return;
            worst = std::max(worst, std::abs(u.values[flat] - k(r)) / std::abs(k(r)));
        });
        REQUIRE(worst < 0.05);
    }

    SECTION("radial input produces radial output") {
        RealField delta = mollified_delta(spec, 3.0 * h);
        RealField u = convolve_kernel(delta, green_lambda(2, 3));
        // compare axis-permuted nodes at the same radius
        const int n = spec.points_per_axis;
        auto at = [&](int i, int j, int l) {
            return u.values[(static_cast<std::size_t>(i) * n + j) * n + l];
        };
        const int c = n / 2; // origin index
        for (int off : {2, 3, 5}) {
            const double a = at(c + off, c, c);
            const double b = at(c, c + off, c);
            const double d = at(c, c, c + off);
            REQUIRE(a == Approx(b).epsilon(1e-10));
            REQUIRE(a == Approx(d).epsilon(1e-10));
        }
    }

    SECTION("support and cost guards") {
        RealField shifted(spec);
        Index corner{};
        corner[0] = 1; // x = -L + h: outside the half-box margin
        std::size_t flat = 0;
        for (int d = 0; d < 3; ++d) flat = flat * spec.points_per_axis + (d == 0 ? 1 : spec.points_per_axis / 2);
        shifted.values[flat] = 1.0;
        REQUIRE_THROWS_AS(convolve_kernel(shifted, green_lambda(1, 3)), SupportTooLarge);

        // n^N * |support| = 2^20 * 12^4 > 2^34 kernel evaluations
        const GridSpec big = GridSpec::create(4, 32, 8.0);
        RealField f(big);
        const int n4 = big.points_per_axis;
        for (int a = 10; a < 22; ++a)
            for (int b = 10; b < 22; ++b)
                for (int c = 10; c < 22; ++c)
                    for (int d = 10; d < 22; ++d)
                        f.values[((static_cast<std::size_t>(a) * n4 + b) * n4 + c) * n4 + d] = 1.0;
        REQUIRE_THROWS_AS(convolve_kernel(f, green_lambda(1, 4)), CostCapExceeded);
    }
}

TEST_CASE("convolution agrees with the spectral inverse on mean-zero data", "[kernels]") {
    const GridSpec spec = GridSpec::create(3, 24, 6.0);
    const double h = spec.spacing();
    // dipole of mollified deltas, exactly mean-zero by construction
    std::array<double, kMaxDim> plus{};
    plus[0] = 2.0 * h;
    std::array<double, kMaxDim> minus{};
    minus[0] = -2.0 * h;
    RealField dipole = mollified_delta(spec, 2.5 * h, plus);
    RealField neg = mollified_delta(spec, 2.5 * h, minus);
    for (std::size_t i = 0; i < dipole.size(); ++i) dipole.values[i] -= neg.values[i];

    RealField u_conv = convolve_kernel(dipole, green_polyharmonic(3, 1));
    RealField u_spec = spectral::laplacian_power_invert(dipole, 1);

    double num = 0.0, den = 0.0;
    polyhess::detail::for_each_index(spec, [&](std::size_t flat, const Index& idx) {
        for (int d = 0; d < 3; ++d)
            if (std::abs(spec.coordinate(idx[d])) > 0.5 * spec.half_length) return;
        const double diff = u_conv.values[flat] - u_spec.values[flat];
        num += diff * diff;
        den += u_conv.values[flat] * u_conv.values[flat];
    });
    REQUIRE(std::sqrt(num / den) < 0.05);
}

TEST_CASE("Newtonian potential ratio is dilation stable", "[kernels][property]") {
    // ||G * f_s||_q / ||f_s||_p with q = Np/(N-2mp) must not drift with s
    const GridSpec spec = GridSpec::create(3, 24, 6.0);
    const int m = 1;
    const double p = 1.2;
    const double q = 3.0 * p / (3.0 - 2.0 * m * p);
    const RadialKernel k = green_polyharmonic(3, m);

    auto bump = [&](double s) {
        return sample([&](const std::array<double, kMaxDim>& x) {
            double r2 = 0.0;
            for (int d = 0; d < 3; ++d) r2 += x[d] * x[d];
            const double u = r2 / (s * s);
            return u >= 1.0 ? 0.0 : std::pow(1.0 - u, 4);
        }, spec);
    };

    std::vector<double> ratios;
    for (double s : {1.0, 1.5, 2.0}) {
        RealField f = bump(s);
        RealField u = convolve_kernel(f, k);
        ratios.push_back(lp_quad(u, q) / lp_quad(f, p));
    }
    const double lo = *std::min_element(ratios.begin(), ratios.end());
    const double hi = *std::max_element(ratios.begin(), ratios.end());
    REQUIRE(hi / lo < 1.10);
}
