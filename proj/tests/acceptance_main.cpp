// Acceptance suite: one line per criterion, every tolerance pinned in code.
// Exit status 0 iff every criterion passes.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "polyhess/analysis.hpp"
#include "polyhess/cli.hpp"
#include "polyhess/fixedpoint.hpp"
#include "polyhess/kernels.hpp"
#include "polyhess/khessian.hpp"
#include "polyhess/solver.hpp"
#include "polyhess/spectral_ops.hpp"

using namespace polyhess;

namespace {

int g_failures = 0;

class Criterion {
public:
    explicit Criterion(std::string name)
        : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

    void finish(bool pass, const std::string& detail) {
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::printf("%s %s (%s) [%.1fs]\n", pass ? "PASS" : "FAIL", name_.c_str(), detail.c_str(),
                    seconds);
        std::fflush(stdout);
        if (!pass) ++g_failures;
    }

private:
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* format, ...) {
    va_list args;
    va_start(args, format);
    char buffer[512];
    std::vsnprintf(buffer, sizeof buffer, format, args);
    va_end(args);
    return buffer;
}

// 1. sigma_k via eigenvalues vs principal minors, Euler identity, Newton
//    tensor analytic vs finite differences: 1e5 random symmetric matrices.
void criterion_1() {
    Criterion crit("criterion 1: k-Hessian matrix algebra");
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    const int total_target = 100000;
    int combos = 0;
    for (int N = 2; N <= 6; ++N) combos += N;
    const int per_combo = total_target / combos; // 5000 for N=2..6, all k

    double worst_sigma = 0.0, worst_euler = 0.0, worst_fd = 0.0;
    long produced = 0;
    for (int N = 2; N <= 6; ++N)
        for (int k = 1; k <= N; ++k)
            for (int rep = 0; rep < per_combo; ++rep, ++produced) {
                double a[36];
                for (int r = 0; r < N; ++r)
                    for (int c = r; c < N; ++c) {
                        a[r * N + c] = uni(rng);
                        a[c * N + r] = a[r * N + c];
                    }
                const auto lam = khessian::symmetric_eigenvalues(a, N);
                const double via_eigs = khessian::sigma_k(
                    std::span<const double>(lam.data(), static_cast<std::size_t>(N)), k);
                const double via_minors = khessian::sigma_k_minors(a, N, k);
                worst_sigma = std::max(worst_sigma, std::abs(via_eigs - via_minors) /
                                                        std::max(1.0, std::abs(via_minors)));

                double tensor[36], fd[36];
                khessian::newton_tensor_matrix(a, N, k, tensor);
                khessian::newton_tensor_matrix_fd(a, N, k, fd);
                double euler = 0.0, scale = 0.0;
                for (int t = 0; t < N * N; ++t) {
                    euler += a[t] * tensor[t];
                    scale = std::max(scale, std::abs(tensor[t]));
                }
                for (int t = 0; t < N * N; ++t)
                    worst_fd = std::max(worst_fd, std::abs(tensor[t] - fd[t]) / std::max(1.0, scale));
                worst_euler = std::max(worst_euler, std::abs(euler - k * via_minors) /
                                                        std::max(1.0, std::abs(k * via_minors)));
            }

    const bool pass = worst_sigma <= 1e-10 && worst_euler <= 1e-9 && worst_fd <= 1e-6;
    crit.finish(pass, fmt("matrices=%ld sigma=%.2e<=1e-10 euler=%.2e<=1e-9 newton_fd=%.2e<=1e-6",
                          produced, worst_sigma, worst_euler, worst_fd));
}

// 2. Divergence-form and null-divergence identities: 20 random band-limited
//    fields at N=4, k=2, n=16, residuals <= 1e-8.
void criterion_2() {
    Criterion crit("criterion 2: divergence-form identities");
    const GridSpec grid = GridSpec::create(4, 16, 4.0);
    double worst_div = 0.0, worst_null = 0.0;
    for (int i = 0; i < 20; ++i) {
        RealField u = random_bandlimited_field(grid, 4, 200 + static_cast<std::uint64_t>(i));
        const auto res = khessian::identity_residuals(u, 2);
        worst_div = std::max(worst_div, res.divergence_form);
        worst_null = std::max(worst_null, res.null_divergence);
    }
    const bool pass = worst_div <= 1e-8 && worst_null <= 1e-8;
    crit.finish(pass, fmt("fields=20 divergence=%.2e<=1e-8 null=%.2e<=1e-8", worst_div, worst_null));
}

// 3. Linear theory oracle: spectral inverse vs Green's-function convolution
//    within 5% on the half-box at (N,m) in {(3,1),(4,1),(4,2)}; closed-form
//    shell comparison; Lambda-family constants equal polyharmonic ones.
void criterion_3() {
    Criterion crit("criterion 3: linear theory oracle");
    bool pass = true;
    std::ostringstream detail;

    struct Case {
        int N, m, n;
        double L, eps_cells;
    };
    for (const Case c :
         {Case{3, 1, 24, 6.0, 2.5}, Case{4, 1, 24, 8.0, 3.5}, Case{4, 2, 24, 8.0, 3.5}}) {
        const GridSpec grid = GridSpec::create(c.N, c.n, c.L);
        const double rel = kernels::spectral_convolution_gap(grid, c.m, c.eps_cells * grid.spacing());
        pass = pass && rel <= 0.05;
        detail << "L2(" << c.N << "," << c.m << ")=" << fmt("%.3f", rel) << " ";
    }

    // single mollified delta against the closed form on shells (N=3, m=1)
    {
        const GridSpec grid = GridSpec::create(3, 24, 6.0);
        const double h = grid.spacing();
        const kernels::RadialKernel kernel = kernels::green_polyharmonic(3, 1);
        RealField u = kernels::convolve_kernel(kernels::mollified_delta(grid, 2.5 * h), kernel);
        double worst = 0.0;
        polyhess::detail::for_each_index(grid, [&](std::size_t flat, const Index& idx) {
            double r2 = 0.0;
            for (int d = 0; d < 3; ++d) {
                const double x = grid.coordinate(idx[d]);
                r2 += x * x;
            }
            const double r = std::sqrt(r2);
            if (r < 2.0 * h || r > 0.5 * grid.half_length) return;
            worst = std::max(worst, std::abs(u.values[flat] - kernel(r)) / std::abs(kernel(r)));
        });
        pass = pass && worst <= 0.05;
        detail << "shells=" << fmt("%.3f", worst) << "<=0.05 ";
    }

    // green_lambda(even n) constants equal green_polyharmonic constants
    double worst_const = 0.0;
    for (int N = 2; N <= 6; ++N)
        for (int n = 2; n <= N; n += 2) {
            const double a = kernels::green_lambda(n, N).coefficient;
            const double b = kernels::green_polyharmonic(N, n / 2).coefficient;
            worst_const = std::max(worst_const, std::abs(a - b) / std::abs(b));
        }
    pass = pass && worst_const <= 1e-13;
    detail << "constants=" << fmt("%.1e", worst_const) << "<=1e-13";

    crit.finish(pass, detail.str());
}

// 4. Riesz machinery: sum R_j^2 = -pi^2 (Id - mean) within 1e-10; the
//    factorization constant is datum-independent within 1e-8.
void criterion_4() {
    Criterion crit("criterion 4: Riesz machinery");
    const double pi = std::acos(-1.0);
    bool pass = true;
    std::ostringstream detail;

    {
        const GridSpec grid = GridSpec::create(3, 16, 4.0);
        RealField f = random_bandlimited_field(grid, 6, 400);
        for (auto& v : f.values) v += 0.5;
        RealField sum(grid);
        for (int j = 0; j < 3; ++j) {
            RealField rr = spectral::riesz(spectral::riesz(f, j), j);
            for (std::size_t i = 0; i < sum.size(); ++i) sum.values[i] += rr.values[i];
        }
        const double mean = field_mean(f);
        double worst = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            worst = std::max(worst, std::abs(sum.values[i] + pi * pi * (f.values[i] - mean)));
            scale = std::max(scale, std::abs(pi * pi * (f.values[i] - mean)));
        }
        const double rel = worst / scale;
        pass = pass && rel <= 1e-10;
        detail << "sumRj2=" << fmt("%.1e", rel) << "<=1e-10 ";
    }

    struct Setup {
        int n, N;
        spectral::MultiIndex alpha;
    };
    const std::vector<Setup> setups = {{1, 3, spectral::MultiIndex::create({1, 0, 0})},
                                       {2, 4, spectral::MultiIndex::create({1, 1, 0, 0})}};
    for (const auto& setup : setups) {
        const GridSpec grid = GridSpec::create(setup.N, 16, 4.0);
        double lo = 1e300, hi = -1e300, worst_dev = 0.0;
        for (int i = 0; i < 10; ++i) {
            RealField f = random_bandlimited_field(grid, 5, 410 + static_cast<std::uint64_t>(i));
            const auto r = spectral::riesz_factorization_check(f, setup.n, setup.alpha);
            lo = std::min(lo, r.median_ratio);
            hi = std::max(hi, r.median_ratio);
            worst_dev = std::max(worst_dev, r.max_deviation);
        }
        const double spread = hi - lo;
        // oracle: the symbol quotient is pi^{-n}
        const double oracle = std::pow(pi, -setup.n);
        pass = pass && spread <= 1e-8 && std::abs(hi - oracle) <= 1e-8 && worst_dev <= 1e-8;
        detail << "A(" << setup.n << "," << setup.N << ") spread=" << fmt("%.1e", spread)
               << "<=1e-8 ";
    }
    crit.finish(pass, detail.str());
}

// 5. Sobolev scaling at (N=4, m=1, p=3/2, q=6): dilation drift <= 10%, the
//    wrong-exponent control drifts by more than 25%.
void criterion_5() {
    Criterion crit("criterion 5: Sobolev scaling");
    const GridSpec grid = GridSpec::create(4, 24, 8.0);
    const std::vector<double> dilations{1.0, 1.5, 2.0};
    solver::ScalingTable good = solver::sobolev_scaling_check(grid, 1, 1.5, dilations);
    solver::ScalingTable control =
        solver::sobolev_scaling_check(grid, 1, 1.5, dilations, 0.5 * good.exponent_q);
    const bool pass = good.exponent_q == 6.0 && good.drift <= 0.10 && control.drift > 0.25;
    crit.finish(pass, fmt("q=%.1f drift=%.3f<=0.10 control=%.3f>0.25", good.exponent_q, good.drift,
                          control.drift));
}

// 6. Fixed-point solve at N=4, k=2, m=2, n=16 with a mean-zero datum:
//    convergence with contraction < 1, PDE residual <= 1e-6 ||lambda f||_2,
//    three-seed local uniqueness, and a divergence transition in lambda.
void criterion_6() {
    Criterion crit("criterion 6: Picard fixed-point solve");
    const double tol = 1e-9;

    solver::ProblemSpec prob;
    prob.N = 4;
    prob.k = 2;
    prob.kind = solver::OperatorKind::polyharmonic;
    prob.order = 2;
    prob.lambda = 0.5;
    prob.datum.kind = solver::DatumSpec::Kind::gaussian_derivative;
    prob.datum.amplitude = 1.0;
    prob.datum.width = 2.0;
    prob.grid = GridSpec::create(4, 16, 8.0);
    prob.space = solver::IterationSpace::u_space;

    RealField zero(prob.grid);
    solver::SolverTrace trace = solver::picard_solve(prob, zero, tol, 40);
    bool pass = trace.verdict == solver::Verdict::converged;
    pass = pass && trace.late_contraction_ratio() < 1.0;
    pass = pass && trace.final_residual <= 1e-6 * trace.rhs_scale;

    // three seeds inside the ball around u0 = lambda Lambda^{-2m} f
    const RealField datum = solver::make_datum(prob.grid, prob.datum);
    RealField u0 = spectral::lambda_invert(datum, prob.lambda_power());
    for (auto& v : u0.values) v *= prob.lambda;
    RealField nudged = u0;
    for (auto& v : nudged.values) v *= 1.001;
    solver::UniquenessReport uniq = solver::uniqueness_probe(prob, {zero, u0, nudged}, tol, 40);
    pass = pass && uniq.pass;

    solver::ContinuationTable sweep = solver::lambda_continuation(prob, {0.5, 2.0, 8.0}, tol, 40);
    pass = pass && sweep.found_transition && sweep.last_converged_lambda >= 0.5;

    crit.finish(pass, fmt("verdict=%s ratio=%.3f residual=%.2e<=%.2e uniq=%.2e lambda*=(%.1f,8.0]",
                          solver::verdict_name(trace.verdict), trace.late_contraction_ratio(),
                          trace.final_residual, 1e-6 * trace.rhs_scale, uniq.max_pairwise_distance,
                          sweep.last_converged_lambda));
}

// 7. Projector inequality on 1e4 points, 3 radii, 2 polytopes with zero
//    violations; the convolution-squaring demo reaches residual <= 1e-6 with
//    a delta-vector limit on the d=16 simplex.
void criterion_7() {
    Criterion crit("criterion 7: delta-net projector and simplex demo");
    const fixedpoint::Polytope simplex = fixedpoint::Polytope::simplex(4);
    const fixedpoint::Polytope box =
        fixedpoint::Polytope::box(fixedpoint::Point{0, 0, 0}, fixedpoint::Point{1, 1, 1});
    const fixedpoint::WeakStarMetric metric4 = fixedpoint::WeakStarMetric::create(4, 24, 701);
    const fixedpoint::WeakStarMetric metric3 = fixedpoint::WeakStarMetric::create(3, 24, 702);

    long violations = 0;
    long tested = 0;
    std::mt19937_64 rng(703);
    for (double delta : {0.3, 0.2, 0.12}) {
        fixedpoint::NetCover snet = fixedpoint::NetCover::build(simplex, metric4, delta, 20000, 704);
        fixedpoint::NetCover bnet = fixedpoint::NetCover::build(box, metric3, delta, 20000, 705);
        for (int rep = 0; rep < 1667; ++rep) {
            const fixedpoint::Point v = simplex.sample(rng);
            const fixedpoint::Point w = box.sample(rng);
            tested += 2;
            try {
                if (metric4.distance(fixedpoint::project(v, snet), v) > delta) ++violations;
                if (metric3.distance(fixedpoint::project(w, bnet), w) > delta) ++violations;
            } catch (const PointOutsideSet&) {
                ++violations;
            }
        }
    }

    const fixedpoint::Polytope demo = fixedpoint::Polytope::simplex(16);
    const fixedpoint::WeakStarMetric metric16 = fixedpoint::WeakStarMetric::create(16, 32, 706);
    fixedpoint::ScheduleOptions opts;
    opts.sample_count = 12000;
    opts.seed = 707;
    const auto trace = fixedpoint::schauder_iterate(fixedpoint::convolution_square, demo, metric16,
                                                    {0.4, 0.2, 0.1, 0.05, 0.025}, opts);
    const double top = trace.fixed_point.empty() ? 0.0 : trace.fixed_point[0];
    const bool pass = violations == 0 && trace.final_residual <= 1e-6 && top >= 1.0 - 1e-9;
    crit.finish(pass, fmt("points=%ld violations=%ld residual=%.1e<=1e-6 limit[0]=%.9f", tested,
                          violations, trace.final_residual, top));
}

// 8. Harmonic-analysis estimators: exact zero BMO for constants, stable
//    log|x| estimate, dilation-invariant critical Poincare ratio, trend-free
//    atom decay, bounded Lambda^{-1} BMO ratios.
void criterion_8() {
    Criterion crit("criterion 8: harmonic-analysis estimators");
    bool pass = true;
    std::ostringstream detail;

    {
        const GridSpec grid = GridSpec::create(2, 256, 2.0);
        analysis::CubeSampler sampler{2000, 801, 2, {}};
        RealField constant(grid);
        for (auto& v : constant.values) v = 4.25;
        const double bmo_const = analysis::bmo_seminorm(constant, sampler).value;
        pass = pass && bmo_const == 0.0;
        detail << "bmo(const)=" << bmo_const << " ";

        RealField logf = sample([&](const std::array<double, kMaxDim>& x) {
            const double r = std::max(std::sqrt(x[0] * x[0] + x[1] * x[1]), 0.5 * grid.spacing());
            return std::log(r);
        }, grid);
        analysis::CubeSampler doubled{4000, 801, 2, {}};
        const double e1 = analysis::bmo_seminorm(logf, sampler).value;
        const double e2 = analysis::bmo_seminorm(logf, doubled).value;
        const double stability = std::abs(e2 - e1) / e1;
        pass = pass && stability <= 0.15;
        detail << "log_bmo=" << fmt("%.3f", stability) << "<=0.15 ";

        analysis::CubeSample cube{{0.0, 0.0}, 0.125};
        const auto decay =
            analysis::atom_decay_check(analysis::make_atom(grid, cube, analysis::AtomPattern::dipole));
        pass = pass && decay.pass;
        detail << "atom_slope=" << fmt("%.2f", decay.loglog_slope) << " spread="
               << fmt("%.2f", decay.spread) << " ";
    }

    {
        const GridSpec grid = GridSpec::create(2, 128, 4.0);
        auto bump = [&](double radius) {
            return sample([&](const std::array<double, kMaxDim>& x) {
                const double r2 = (x[0] * x[0] + x[1] * x[1]) / (radius * radius);
                return r2 >= 1.0 ? 0.0 : std::pow(1.0 - r2, 3);
            }, grid);
        };
        const double r = 0.8;
        const double a = analysis::poincare_ratio(bump(r), analysis::Ball{{0, 0}, r});
        const double b = analysis::poincare_ratio(bump(2 * r), analysis::Ball{{0, 0}, 2 * r});
        const double dev = std::abs(a - b) / b;
        pass = pass && dev <= 0.05;
        detail << "poincare=" << fmt("%.3f", dev) << "<=0.05 ";
    }

    {
        const GridSpec grid = GridSpec::create(2, 64, 2.0);
        analysis::CubeSampler sampler{1500, 802, 2, {}};
        std::vector<double> ratios;
        for (int i = 0; i < 100; ++i)
            ratios.push_back(analysis::bmo_boundedness_check(
                random_bandlimited_field(grid, 16, 810 + static_cast<std::uint64_t>(i)), sampler));
        std::sort(ratios.begin(), ratios.end());
        const double spread = ratios.back() / ratios[ratios.size() / 2];
        pass = pass && spread <= 10.0;
        detail << "bmo_bound_spread=" << fmt("%.2f", spread) << "<=10";
    }

    crit.finish(pass, detail.str());
}

// 9. Determinism: re-running a config bit-reproduces every CSV.
void criterion_9() {
    Criterion crit("criterion 9: determinism");
    namespace fs = std::filesystem;

    auto slurp = [](const fs::path& p) {
        std::ifstream file(p, std::ios::binary);
        std::ostringstream out;
        out << file.rdbuf();
        return out.str();
    };

    const fs::path base = fs::temp_directory_path() / "polyhess_acceptance";
    fs::remove_all(base);

    const nlohmann::json solve_cfg{
        {"command", "solve"},
        {"output_dir", (base / "a").string()},
        {"tolerances", {{"picard_tol", 1e-9}, {"max_iter", 50}}},
        {"problem",
         {{"grid", {{"dimension", 3}, {"points_per_axis", 12}, {"half_length", 3.0}}},
          {"k", 2},
          {"operator", "polyharmonic"},
          {"order", 1},
          {"lambda", 0.15},
          {"space", "u_space"},
          {"datum",
           {{"kind", "gaussian_derivative"}, {"amplitude", 1.0}, {"width", 1.0}, {"seed", 3}}}}}};
    const nlohmann::json khessian_cfg{
        {"command", "khessian-check"},
        {"output_dir", (base / "a").string()},
        {"grid", {{"dimension", 3}, {"points_per_axis", 12}, {"half_length", 3.0}}},
        {"k", 2},
        {"fields", 2},
        {"band", 3},
        {"seed", 9},
        {"matrix_samples", 2000}};

    bool pass = true;
    std::ostringstream detail;
    for (const auto& [cfg, csv_name] :
         std::vector<std::pair<nlohmann::json, std::string>>{{solve_cfg, "trace.csv"},
                                                             {khessian_cfg, "identities.csv"}}) {
        nlohmann::json second = cfg;
        second["output_dir"] = (base / "b").string();
        const cli::RunResult a = cli::run(cfg);
        const cli::RunResult b = cli::run(second);
        const std::string bytes_a = slurp(a.output_path / csv_name);
        const std::string bytes_b = slurp(b.output_path / csv_name);
        const bool same = !bytes_a.empty() && bytes_a == bytes_b;
        pass = pass && same && a.exit_code == 0 && b.exit_code == 0;
        detail << csv_name << (same ? "=identical " : "=DIFFERS ");
    }
    crit.finish(pass, detail.str());
}

} // namespace

int main() {
    std::printf("polyhess acceptance suite\n");
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
