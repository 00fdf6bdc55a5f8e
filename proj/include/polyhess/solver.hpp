#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "polyhess/analysis.hpp"
#include "polyhess/grid.hpp"
#include "polyhess/khessian.hpp"
#include "polyhess/spectral_ops.hpp"

namespace polyhess::solver {

enum class OperatorKind { polyharmonic, lambda };
enum class IterationSpace { u_space, v_space };

/// Admissible order arithmetic. Without p: m = 1 + N(k-1)/(2k) (local) or
/// n = 2 + N(k-1)/k (nonlocal), exact integer checks. With p given, the
/// L^p-data variants, checked to 1e-9.
struct AdmissibleOrder {
    int order = 0;    // m for polyharmonic, n for lambda
    bool critical = false; // N == 2k, where m = k always
};

inline AdmissibleOrder admissible_order(int N, int k, OperatorKind kind,
                                        std::optional<double> p = std::nullopt) {
    if (N < 2 || k < 2) throw NotAdmissible("admissible_order requires N, k >= 2");
    AdmissibleOrder result;
    result.critical = (N == 2 * k);
    if (!p) {
        const long num = static_cast<long>(N) * (k - 1);
        if (kind == OperatorKind::polyharmonic) {
            if (num % (2L * k) != 0)
                throw NotAdmissible("m = 1 + N(k-1)/(2k) is not an integer");
            result.order = 1 + static_cast<int>(num / (2L * k));
        } else {
            if (num % static_cast<long>(k) != 0)
                throw NotAdmissible("n = 2 + N(k-1)/k is not an integer");
            result.order = 2 + static_cast<int>(num / k);
        }
        return result;
    }
    if (*p <= 1.0) throw NotAdmissible("admissible_order requires p > 1");
    const double raw = (kind == OperatorKind::polyharmonic)
                           ? 1.0 + N * (k - 1.0) / (2.0 * (*p) * k)
                           : 2.0 + N * (k - 1.0) / ((*p) * k);
    const double rounded = std::round(raw);
    if (std::abs(raw - rounded) > 1e-9)
        throw NotAdmissible("order formula is not an integer for the given p");
    result.order = static_cast<int>(rounded);
    return result;
}

/// Datum synthesis: every datum is reproducible from its parameters and seed.
struct DatumSpec {
    enum class Kind { gaussian, gaussian_derivative, atom_dipole, atom_checker, random_bandlimited };
    Kind kind = Kind::gaussian_derivative;
    double amplitude = 1.0;
    double width = 1.0;   // gaussian width / atom cube side
    int band = 4;         // random_bandlimited band
    std::uint64_t seed = 1;
};

inline RealField make_datum(const GridSpec& spec, const DatumSpec& datum) {
    switch (datum.kind) {
        case DatumSpec::Kind::gaussian:
            return sample([&](const std::array<double, kMaxDim>& x) {
                double r2 = 0.0;
                for (int d = 0; d < spec.dimension; ++d) r2 += x[d] * x[d];
                return datum.amplitude * std::exp(-r2 / (datum.width * datum.width));
            }, spec);
        case DatumSpec::Kind::gaussian_derivative: {
            RealField f = sample([&](const std::array<double, kMaxDim>& x) {
                double r2 = 0.0;
                for (int d = 0; d < spec.dimension; ++d) r2 += x[d] * x[d];
                const double w2 = datum.width * datum.width;
                return -datum.amplitude * (2.0 * x[0] / w2) * std::exp(-r2 / w2);
            }, spec);
            // the analytic derivative is mean-zero on R^N; remove the residual
            // mean left by the periodic truncation so inverses accept it
            const double mean = field_mean(f);
            for (auto& v : f.values) v -= mean;
            return f;
        }
        case DatumSpec::Kind::atom_dipole:
        case DatumSpec::Kind::atom_checker: {
            analysis::CubeSample cube{{}, datum.width};
            RealField f = analysis::make_atom(spec, cube,
                                              datum.kind == DatumSpec::Kind::atom_dipole
                                                  ? analysis::AtomPattern::dipole
                                                  : analysis::AtomPattern::checker)
                              .field;
            for (auto& v : f.values) v *= datum.amplitude;
            return f;
        }
        case DatumSpec::Kind::random_bandlimited:
            return random_bandlimited_field(spec, datum.band, datum.seed, datum.amplitude);
    }
    throw Error("make_datum: unknown datum kind");
}

/// One k-Hessian problem instance: Lambda^order u = S_k[-u] + lambda f on the
/// periodic box, with order = 2m (polyharmonic) or n (lambda).
struct ProblemSpec {
    int N = 4;
    int k = 2;
    OperatorKind kind = OperatorKind::polyharmonic;
    int order = 2; // m or n depending on kind
    double lambda = 0.0;
    DatumSpec datum;
    GridSpec grid;
    IterationSpace space = IterationSpace::u_space;
    double zero_mode_tol = spectral::kZeroModeTol;

    /// Top derivative order: the Lambda power of the operator.
    int lambda_power() const { return kind == OperatorKind::polyharmonic ? 2 * order : order; }

    void validate() const {
        if (N != grid.dimension) throw NotAdmissible("ProblemSpec: N must match the grid dimension");
        if (k < 1 || k > N) throw BadK("ProblemSpec: k must lie in [1, N]");
        if (kind == OperatorKind::polyharmonic && N < 2 * order)
            throw NotAdmissible("ProblemSpec: polyharmonic order requires N >= 2m");
        if (kind == OperatorKind::lambda && order > N)
            throw NotAdmissible("ProblemSpec: lambda order requires n <= N");
        if (order < 1) throw NotAdmissible("ProblemSpec: order must be positive");
    }
};

/// Working seminorm for convergence control: L2 of the top-order derivative
/// ||Lambda^order u||_2. On the torus with zero-mean modes this realizes the
/// homogeneous-seminorm quotient exactly.
inline double working_seminorm(const RealField& u, int lambda_power) {
    SpectralField F = spectral::radial_power_multiply(forward_transform(u), lambda_power);
    double sum = 0.0;
    for (const auto& z : F.coefficients) sum += std::norm(z);
    return std::sqrt(sum * std::pow(2.0 * u.spec.half_length, u.spec.dimension));
}

inline double l2_norm(const RealField& f) {
    double s = 0.0;
    for (double v : f.values) s += v * v;
    return std::sqrt(s * std::pow(f.spec.spacing(), f.spec.dimension));
}

/// S_k[-u] with the dealiased production pipeline.
inline RealField sk_of_minus(const RealField& u, int k) {
    RealField neg = u;
    for (auto& v : neg.values) v = -v;
    return khessian::s_k_field(neg, k);
}

/**
 * One application of the fixed-point map in the selected iteration space:
 *   u_space:  w -> Lambda^{-order} S_k[-w] + lambda Lambda^{-order} f
 *   v_space:  v -> S_k[Lambda^{-order}(-v)] + lambda f
 * The S_k term must come out near-mean-zero (divergence structure on the
 * torus); a violation signals dealiasing failure and raises NonZeroMean.
 */
inline RealField rhs_map(const RealField& state, const ProblemSpec& prob, const RealField& datum) {
    prob.validate();
    const int power = prob.lambda_power();
    if (prob.space == IterationSpace::u_space) {
        RealField sk = sk_of_minus(state, prob.k);
        RealField sk_part = spectral::lambda_invert(sk, power, prob.zero_mode_tol);
        RealField f_part = spectral::lambda_invert(datum, power, prob.zero_mode_tol);
        RealField out(prob.grid);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.values[i] = sk_part.values[i] + prob.lambda * f_part.values[i];
        return out;
    }
    RealField neg_u = spectral::lambda_invert(state, power, prob.zero_mode_tol);
    for (auto& v : neg_u.values) v = -v;
    RealField sk = khessian::s_k_field(neg_u, prob.k);
    RealField out(prob.grid);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values[i] = sk.values[i] + prob.lambda * datum.values[i];
    return out;
}

/// Recover the solution field u from the iteration state.
inline RealField state_to_solution(const RealField& state, const ProblemSpec& prob) {
    if (prob.space == IterationSpace::u_space) return state;
    return spectral::lambda_invert(state, prob.lambda_power(), prob.zero_mode_tol);
}

enum class Verdict { converged, diverged, max_iter };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::converged: return "converged";
        case Verdict::diverged: return "diverged";
        default: return "max_iter";
    }
}

struct SolverTrace {
    struct Row {
        int iteration = 0;
        double iterate_seminorm = 0.0;   // ||Lambda^order u_j||_2
        double step_seminorm = 0.0;      // ||Lambda^order (u_j - u_{j-1})||_2
        double contraction_ratio = 0.0;  // step_j / step_{j-1}, j >= 2
        double ball_distance = 0.0;      // ||u_j - u_0||_* against the configured radius
    };
    std::vector<Row> rows;
    Verdict verdict = Verdict::max_iter;
    double final_residual = 0.0;  // ||Lambda^order u - S_k[-u] - lambda f||_2, assembled from scratch
    double rhs_scale = 0.0;       // ||lambda f||_2
    double ball_radius = 0.0;
    double boundary_sup = 0.0;    // boundary smallness report for the final field
    RealField solution;           // u (solution space, both iteration spaces)

    double late_contraction_ratio() const {
        for (auto it = rows.rbegin(); it != rows.rend(); ++it)
            if (it->contraction_ratio > 0.0) return it->contraction_ratio;
        return 0.0;
    }
};

/// PDE residual assembled independently of the iteration internals.
inline double pde_residual(const RealField& u, const ProblemSpec& prob, const RealField& datum) {
    RealField lhs = inverse_transform(
        spectral::radial_power_multiply(forward_transform(u), prob.lambda_power()));
    RealField sk = sk_of_minus(u, prob.k);
    RealField res(prob.grid);
    for (std::size_t i = 0; i < res.size(); ++i)
        res.values[i] = lhs.values[i] - sk.values[i] - prob.lambda * datum.values[i];
    return l2_norm(res);
}

inline constexpr double kDefaultTol = 1e-9;
inline constexpr int kDefaultMaxIter = 60;

/**
 * Picard iteration u_{j+1} = T(u_j) in the configured space. Converged when
 * the step seminorm drops to tol (1 + ||u_j||) and the independently
 * assembled PDE residual reaches 10 tol ||lambda f||_2; diverged when step
 * norms grow more than tenfold over five consecutive steps or blow up.
 */
inline SolverTrace picard_solve_with_datum(const ProblemSpec& prob, const RealField& datum,
                                           const RealField& u0, double tol = kDefaultTol,
                                           int max_iter = kDefaultMaxIter,
                                           std::optional<double> ball_radius = std::nullopt) {
    prob.validate();
    const int power = prob.lambda_power();

    SolverTrace trace;
    trace.rhs_scale = std::abs(prob.lambda) * l2_norm(datum);

    // iteration base point u_0 = lambda Lambda^{-order} f (v_0 = lambda f)
    RealField base(prob.grid);
    if (prob.space == IterationSpace::u_space) {
        base = spectral::lambda_invert(datum, power, prob.zero_mode_tol);
        for (auto& v : base.values) v *= prob.lambda;
    } else {
        base = datum;
        for (auto& v : base.values) v *= prob.lambda;
    }
    trace.ball_radius = ball_radius.value_or(2.0 * working_seminorm(base, power));

    RealField state = u0;
    double prev_step = 0.0;
    std::vector<double> steps;
    for (int iter = 1; iter <= max_iter; ++iter) {
        RealField next = rhs_map(state, prob, datum);
        RealField diff(prob.grid);
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff.values[i] = next.values[i] - state.values[i];

        SolverTrace::Row row;
        row.iteration = iter;
        row.step_seminorm = prob.space == IterationSpace::u_space
                                ? working_seminorm(diff, power)
                                : l2_norm(diff);
        row.iterate_seminorm = prob.space == IterationSpace::u_space
                                   ? working_seminorm(next, power)
                                   : l2_norm(next);
        RealField from_base(prob.grid);
        for (std::size_t i = 0; i < from_base.size(); ++i)
            from_base.values[i] = next.values[i] - base.values[i];
        row.ball_distance = prob.space == IterationSpace::u_space
                                ? working_seminorm(from_base, power)
                                : l2_norm(from_base);
        if (iter >= 2 && prev_step > 0.0) row.contraction_ratio = row.step_seminorm / prev_step;
        trace.rows.push_back(row);
        steps.push_back(row.step_seminorm);

        if (!field_finite(next)) {
            trace.verdict = Verdict::diverged;
            trace.solution = state_to_solution(state, prob);
            trace.final_residual = std::numeric_limits<double>::infinity();
            return trace;
        }

        state = std::move(next);

        const std::size_t s = steps.size();
        if (s >= 6 && steps[s - 1] > 10.0 * steps[s - 6] && steps[s - 1] > tol) {
            trace.verdict = Verdict::diverged;
            trace.solution = state_to_solution(state, prob);
            trace.final_residual = pde_residual(trace.solution, prob, datum);
            trace.boundary_sup = boundary_sup(trace.solution);
            return trace;
        }

        if (row.step_seminorm <= tol * (1.0 + row.iterate_seminorm)) {
            RealField u = state_to_solution(state, prob);
            const double residual = pde_residual(u, prob, datum);
            if (residual <= 10.0 * tol * std::max(trace.rhs_scale, 1e-300) || trace.rhs_scale == 0.0) {
                trace.verdict = Verdict::converged;
                trace.solution = std::move(u);
                trace.final_residual = residual;
                trace.boundary_sup = boundary_sup(trace.solution);
                return trace;
            }
        }
        prev_step = row.step_seminorm;
    }
    trace.verdict = Verdict::max_iter;
    trace.solution = state_to_solution(state, prob);
    trace.final_residual = pde_residual(trace.solution, prob, datum);
    trace.boundary_sup = boundary_sup(trace.solution);
    return trace;
}

inline SolverTrace picard_solve(const ProblemSpec& prob, const RealField& u0, double tol = kDefaultTol,
                                int max_iter = kDefaultMaxIter,
                                std::optional<double> ball_radius = std::nullopt) {
    return picard_solve_with_datum(prob, make_datum(prob.grid, prob.datum), u0, tol, max_iter,
                                   ball_radius);
}

/// Warm-started sweep over |lambda|-sorted values; stops after the first
/// divergence (verdicts are data, not errors).
struct ContinuationRow {
    double lambda = 0.0;
    Verdict verdict = Verdict::max_iter;
    double final_residual = 0.0;
    double contraction_ratio = 0.0;
};

struct ContinuationTable {
    std::vector<ContinuationRow> rows;
    double last_converged_lambda = 0.0;
    bool found_transition = false;
};

inline ContinuationTable lambda_continuation(ProblemSpec prob, const std::vector<double>& lambdas,
                                             double tol = kDefaultTol, int max_iter = kDefaultMaxIter) {
    ContinuationTable table;
    RealField warm(prob.grid);
    for (double lam : lambdas) {
        prob.lambda = lam;
        SolverTrace trace = picard_solve(prob, warm, tol, max_iter);
        ContinuationRow row{lam, trace.verdict, trace.final_residual, trace.late_contraction_ratio()};
        table.rows.push_back(row);
        if (trace.verdict == Verdict::converged) {
            table.last_converged_lambda = lam;
            if (prob.space == IterationSpace::u_space) {
                warm = trace.solution;
            } else {
                warm = inverse_transform(spectral::radial_power_multiply(
                    forward_transform(trace.solution), prob.lambda_power()));
            }
        } else {
            table.found_transition = true;
            break;
        }
    }
    return table;
}

/// Run picard_solve from several seeds; PASS iff all converged limits agree
/// pairwise within 10 tol in the working seminorm.
struct UniquenessReport {
    struct SeedRow {
        Verdict verdict = Verdict::max_iter;
        double seminorm = 0.0;
    };
    std::vector<SeedRow> seeds;
    double max_pairwise_distance = 0.0;
    bool pass = false;
};

inline UniquenessReport uniqueness_probe(const ProblemSpec& prob, const std::vector<RealField>& seeds,
                                         double tol = kDefaultTol, int max_iter = kDefaultMaxIter) {
    UniquenessReport report;
    std::vector<RealField> limits;
    const int power = prob.lambda_power();
    for (const RealField& seed : seeds) {
        SolverTrace trace = picard_solve(prob, seed, tol, max_iter);
        UniquenessReport::SeedRow row;
        row.verdict = trace.verdict;
        row.seminorm = working_seminorm(trace.solution, power);
        report.seeds.push_back(row);
        if (trace.verdict == Verdict::converged) limits.push_back(trace.solution);
    }
    if (limits.size() == seeds.size() && !limits.empty()) {
        for (std::size_t a = 0; a < limits.size(); ++a)
            for (std::size_t b = a + 1; b < limits.size(); ++b) {
                RealField diff(prob.grid);
                for (std::size_t i = 0; i < diff.size(); ++i)
                    diff.values[i] = limits[a].values[i] - limits[b].values[i];
                report.max_pairwise_distance =
                    std::max(report.max_pairwise_distance, working_seminorm(diff, power));
            }
        report.pass = report.max_pairwise_distance <= 10.0 * tol;
    }
    return report;
}

/// Datum-response probe: solve for f and f + df, report ||du||_* / ||df||_2.
struct BranchResponseRow {
    double df_norm = 0.0;
    double du_seminorm = 0.0;
    double ratio = 0.0;
};

struct BranchReport {
    std::vector<BranchResponseRow> rows;
    double ratio_spread = 0.0; // max/min over nonzero perturbations
    bool pass = false;
};

inline constexpr double kBranchSpreadBound = 10.0;

inline BranchReport branch_continuity_probe(const ProblemSpec& prob,
                                            const std::vector<RealField>& perturbations,
                                            double tol = kDefaultTol, int max_iter = kDefaultMaxIter) {
    prob.validate();
    BranchReport report;
    const RealField base_datum = make_datum(prob.grid, prob.datum);
    RealField zero(prob.grid);
    SolverTrace base = picard_solve(prob, zero, tol, max_iter);
    if (base.verdict != Verdict::converged) throw ComputeError("branch_continuity_probe: base solve diverged");

    const int power = prob.lambda_power();
    double lo = 1e300, hi = 0.0;
    for (const RealField& df : perturbations) {
        RealField datum(prob.grid);
        for (std::size_t i = 0; i < datum.size(); ++i)
            datum.values[i] = base_datum.values[i] + df.values[i];
        RealField seed(prob.grid);
        SolverTrace trace = picard_solve_with_datum(prob, datum, seed, tol, max_iter);
        if (trace.verdict != Verdict::converged)
            throw ComputeError("branch_continuity_probe: perturbed solve failed to converge");

        BranchResponseRow row;
        row.df_norm = l2_norm(df);
        RealField du(prob.grid);
        for (std::size_t i = 0; i < du.size(); ++i)
            du.values[i] = trace.solution.values[i] - base.solution.values[i];
        row.du_seminorm = working_seminorm(du, power);
        row.ratio = row.df_norm > 0.0 ? row.du_seminorm / row.df_norm : 0.0;
        report.rows.push_back(row);
        if (row.df_norm > 0.0) {
            lo = std::min(lo, row.ratio);
            hi = std::max(hi, row.ratio);
        }
    }
    if (hi > 0.0 && lo < 1e300) {
        report.ratio_spread = hi / lo;
        report.pass = report.ratio_spread <= kBranchSpreadBound;
    } else {
        report.pass = true; // only the zero perturbation was probed
    }
    return report;
}

/// Dilation family scaling check for the linear problem: the ratio
/// ||u_s||_q / ||f_s||_p with q = Np/(N - 2mp) must be s-independent.
struct ScalingRow {
    double dilation = 0.0;
    double f_norm = 0.0;
    double u_norm = 0.0;
    double ratio = 0.0;
};

struct ScalingTable {
    std::vector<ScalingRow> rows;
    double drift = 0.0; // max/min ratio - 1
    double exponent_q = 0.0;
};

inline ScalingTable sobolev_scaling_check(const GridSpec& grid, int m, double p,
                                          const std::vector<double>& dilations,
                                          std::optional<double> q_override = std::nullopt,
                                          double base_radius = 0.0) {
    const int N = grid.dimension;
    if (!(p > 1.0) || !(p < N / (2.0 * m)))
        throw NotAdmissible("sobolev_scaling_check requires 1 < p < N/(2m)");
    const double q = q_override.value_or(N * p / (N - 2.0 * m * p));
    const double radius = base_radius > 0.0 ? base_radius : 0.2 * grid.half_length;

    ScalingTable table;
    table.exponent_q = q;
    double lo = 1e300, hi = 0.0;
    for (double s : dilations) {
        if (radius * s > 0.5 * grid.half_length)
            throw SupportTooLarge("sobolev_scaling_check: dilation exceeds the truncation margin");
        RealField f = sample([&](const std::array<double, kMaxDim>& x) {
            double r2 = 0.0;
            for (int d = 0; d < N; ++d) r2 += x[d] * x[d];
            const double u = r2 / (radius * s * radius * s);
            return u >= 1.0 ? 0.0 : std::pow(1.0 - u, 4);
        }, grid);
        // mean-corrected spectral inverse: the zero mode carries no scaling
        // information and the periodic inverse requires mean-zero data
        RealField f_centered = f;
        const double mean = field_mean(f);
        for (auto& v : f_centered.values) v -= mean;
        RealField u = inverse_transform(
            spectral::radial_power_divide(forward_transform(f_centered), 2 * m));
        ScalingRow row;
        row.dilation = s;
        row.f_norm = analysis::lp_norm(f, p);
        row.u_norm = analysis::lp_norm(u, q);
        row.ratio = row.u_norm / row.f_norm;
        table.rows.push_back(row);
        lo = std::min(lo, row.ratio);
        hi = std::max(hi, row.ratio);
    }
    table.drift = hi / lo - 1.0;
    return table;
}

} // namespace polyhess::solver
