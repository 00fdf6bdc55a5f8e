#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "polyhess/analysis.hpp"
#include "polyhess/fixedpoint.hpp"
#include "polyhess/grid.hpp"
#include "polyhess/kernels.hpp"
#include "polyhess/khessian.hpp"
#include "polyhess/solver.hpp"
#include "polyhess/spectral_ops.hpp"

namespace polyhess::cli {

inline constexpr const char* kArtifactVersion = "polyhess 0.1.0";

// --- tables and CSV emission ---

using Cell = std::variant<double, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

/// CSV with a header row, UTF-8, '\n' endings, doubles at 17 significant
/// digits (round-trip exact). Any non-finite numeric aborts before a byte is
/// written.
inline void emit_csv(const Table& table, const std::filesystem::path& path) {
    for (const auto& row : table.rows)
        for (const auto& cell : row)
            if (const double* v = std::get_if<double>(&cell); v && !std::isfinite(*v))
                throw ComputeError("emit_csv: non-finite value in table for " + path.string());

    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out += ',';
        out += table.columns[c];
    }
    out += '\n';
    char buffer[64];
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            if (const double* v = std::get_if<double>(&row[c])) {
                std::snprintf(buffer, sizeof buffer, "%.17g", *v);
                out += buffer;
            } else {
                out += std::get<std::string>(row[c]);
            }
        }
        out += '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("emit_csv: cannot open " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("emit_csv: short write to " + path.string());
}

// --- run report ---

struct CheckRow {
    std::string name;
    std::string status; // pass | fail | skipped | reported
    double measured = 0.0;
    double threshold = 0.0;
};

struct RunReport {
    nlohmann::ordered_json config_echo;
    std::string config_hash;
    std::vector<CheckRow> checks;
    std::vector<std::pair<std::string, double>> wall_clock; // stage -> seconds
    int exit_status = 0;

    void check(const std::string& name, bool pass, double measured, double threshold) {
        checks.push_back({name, pass ? "pass" : "fail", measured, threshold});
    }
    void reported(const std::string& name, double measured) {
        checks.push_back({name, "reported", measured, 0.0});
    }
    bool all_passed() const {
        for (const auto& row : checks)
            if (row.status == "fail") return false;
        return true;
    }
};

inline void emit_summary(const RunReport& report, const std::filesystem::path& path) {
    nlohmann::ordered_json doc;
    doc["artifact"] = kArtifactVersion;
    doc["config_hash"] = report.config_hash;
    doc["exit_status"] = report.exit_status;
    nlohmann::ordered_json checks = nlohmann::ordered_json::array();
    for (const auto& row : report.checks) {
        nlohmann::ordered_json c;
        c["name"] = row.name;
        c["status"] = row.status;
        c["measured"] = row.measured;
        c["threshold"] = row.threshold;
        checks.push_back(c);
    }
    doc["checks"] = checks;
    nlohmann::ordered_json clock;
    for (const auto& [stage, seconds] : report.wall_clock) clock[stage] = seconds;
    doc["wall_clock_seconds"] = clock;
    doc["config"] = report.config_echo;
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("emit_summary: cannot open " + path.string());
    file << doc.dump(2) << '\n';
}

// --- config parsing (strict: unknown keys rejected) ---

namespace detail {

inline void require_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
inline T get_or(const nlohmann::json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

template <class T>
inline T get_required(const nlohmann::json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
    }
}

inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

inline std::string hash_hex(const nlohmann::json& config) {
    const std::uint64_t h = fnv1a(config.dump());
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
    return buffer;
}

inline GridSpec parse_grid(const nlohmann::json& obj, const std::string& where) {
    require_keys(obj, {"dimension", "points_per_axis", "half_length"}, where);
    try {
        return GridSpec::create(get_required<int>(obj, "dimension", where),
                                get_required<int>(obj, "points_per_axis", where),
                                get_required<double>(obj, "half_length", where));
    } catch (const BadGrid& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

inline solver::DatumSpec parse_datum(const nlohmann::json& obj, const std::string& where) {
    require_keys(obj, {"kind", "amplitude", "width", "band", "seed"}, where);
    solver::DatumSpec datum;
    const std::string kind = get_required<std::string>(obj, "kind", where);
    if (kind == "gaussian") datum.kind = solver::DatumSpec::Kind::gaussian;
    else if (kind == "gaussian_derivative") datum.kind = solver::DatumSpec::Kind::gaussian_derivative;
    else if (kind == "atom_dipole") datum.kind = solver::DatumSpec::Kind::atom_dipole;
    else if (kind == "atom_checker") datum.kind = solver::DatumSpec::Kind::atom_checker;
    else if (kind == "random_bandlimited") datum.kind = solver::DatumSpec::Kind::random_bandlimited;
    else throw ConfigError(where + ": unknown datum kind '" + kind + "'");
    datum.amplitude = get_or<double>(obj, "amplitude", 1.0);
    datum.width = get_or<double>(obj, "width", 1.0);
    datum.band = get_or<int>(obj, "band", 4);
    datum.seed = get_or<std::uint64_t>(obj, "seed", 1);
    return datum;
}

inline solver::ProblemSpec parse_problem(const nlohmann::json& obj, const std::string& where) {
    require_keys(obj,
                 {"grid", "k", "operator", "order", "lambda", "space", "datum", "zero_mode_tol"},
                 where);
    solver::ProblemSpec prob;
    prob.grid = parse_grid(obj.at("grid"), where + ".grid");
    prob.N = prob.grid.dimension;
    prob.k = get_required<int>(obj, "k", where);
    const std::string op = get_required<std::string>(obj, "operator", where);
    if (op == "polyharmonic") prob.kind = solver::OperatorKind::polyharmonic;
    else if (op == "lambda") prob.kind = solver::OperatorKind::lambda;
    else throw ConfigError(where + ": unknown operator '" + op + "'");
    prob.order = get_required<int>(obj, "order", where);
    prob.lambda = get_required<double>(obj, "lambda", where);
    const std::string space = get_or<std::string>(obj, "space", "u_space");
    if (space == "u_space") prob.space = solver::IterationSpace::u_space;
    else if (space == "v_space") prob.space = solver::IterationSpace::v_space;
    else throw ConfigError(where + ": unknown space '" + space + "'");
    if (!obj.contains("datum")) throw ConfigError(where + ": missing datum");
    prob.datum = parse_datum(obj.at("datum"), where + ".datum");
    prob.zero_mode_tol = get_or<double>(obj, "zero_mode_tol", spectral::kZeroModeTol);
    try {
        prob.validate();
    } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return prob;
}

class StageClock {
public:
    explicit StageClock(RunReport& report, std::string name)
        : report_(report), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    ~StageClock() {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        report_.wall_clock.emplace_back(
            name_, std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count());
    }

private:
    RunReport& report_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace detail

// --- commands ---

namespace detail {

inline void run_solve(const nlohmann::json& config, RunReport& report,
                      const std::filesystem::path& outdir) {
    require_keys(config, {"command", "output_dir", "problem", "tolerances"}, "config");
    const nlohmann::json tol_obj = config.value("tolerances", nlohmann::json::object());
    require_keys(tol_obj, {"picard_tol", "max_iter"}, "tolerances");
    const double tol = get_or<double>(tol_obj, "picard_tol", solver::kDefaultTol);
    const int max_iter = get_or<int>(tol_obj, "max_iter", solver::kDefaultMaxIter);
    if (!config.contains("problem")) throw ConfigError("solve: missing problem");
    const solver::ProblemSpec prob = parse_problem(config.at("problem"), "problem");

    StageClock clock(report, "solve");
    RealField seed(prob.grid);
    solver::SolverTrace trace = solver::picard_solve(prob, seed, tol, max_iter);

    Table table;
    table.columns = {"iteration", "iterate_seminorm", "step_seminorm", "contraction_ratio",
                     "ball_distance"};
    for (const auto& row : trace.rows)
        table.add_row({static_cast<double>(row.iteration), row.iterate_seminorm, row.step_seminorm,
                       row.contraction_ratio, row.ball_distance});
    emit_csv(table, outdir / "trace.csv");

    report.check("picard_converged", trace.verdict == solver::Verdict::converged,
                 static_cast<double>(trace.rows.size()), static_cast<double>(max_iter));
    report.check("pde_residual", trace.final_residual <= 10.0 * tol * std::max(trace.rhs_scale, 0.0) ||
                                     (trace.rhs_scale == 0.0 && trace.final_residual == 0.0),
                 trace.final_residual, 10.0 * tol * trace.rhs_scale);
    report.reported("late_contraction_ratio", trace.late_contraction_ratio());
    report.reported("boundary_sup", trace.boundary_sup);
    report.reported("ball_radius", trace.ball_radius);
}

inline void run_sweep(const nlohmann::json& config, RunReport& report,
                      const std::filesystem::path& outdir) {
    require_keys(config, {"command", "output_dir", "problem", "tolerances", "lambdas"}, "config");
    const nlohmann::json tol_obj = config.value("tolerances", nlohmann::json::object());
    require_keys(tol_obj, {"picard_tol", "max_iter"}, "tolerances");
    const double tol = get_or<double>(tol_obj, "picard_tol", solver::kDefaultTol);
    const int max_iter = get_or<int>(tol_obj, "max_iter", solver::kDefaultMaxIter);
    if (!config.contains("problem")) throw ConfigError("sweep: missing problem");
    solver::ProblemSpec prob = parse_problem(config.at("problem"), "problem");
    const auto lambdas = get_required<std::vector<double>>(config, "lambdas", "config");
    for (std::size_t i = 1; i < lambdas.size(); ++i)
        if (std::abs(lambdas[i]) < std::abs(lambdas[i - 1]))
            throw ConfigError("sweep: lambdas must be sorted ascending in |lambda|");

    StageClock clock(report, "sweep");
    solver::ContinuationTable table = solver::lambda_continuation(prob, lambdas, tol, max_iter);

    Table csv;
    csv.columns = {"lambda", "verdict", "final_residual", "contraction_ratio"};
    for (const auto& row : table.rows)
        csv.add_row({row.lambda, std::string(solver::verdict_name(row.verdict)), row.final_residual,
                     row.contraction_ratio});
    emit_csv(csv, outdir / "sweep.csv");

    bool monotone = true;
    bool seen_fail = false;
    for (const auto& row : table.rows) {
        if (row.verdict != solver::Verdict::converged) seen_fail = true;
        else if (seen_fail) monotone = false;
    }
    report.check("verdict_monotone", monotone, monotone ? 1.0 : 0.0, 1.0);
    report.reported("last_converged_lambda", table.last_converged_lambda);
    report.reported("transition_found", table.found_transition ? 1.0 : 0.0);
}

inline void run_linear_check(const nlohmann::json& config, RunReport& report,
                             const std::filesystem::path& outdir) {
    require_keys(config, {"command", "output_dir", "grid", "m", "p", "dilations", "delta_radius"},
                 "config");
    const GridSpec grid = parse_grid(config.at("grid"), "grid");
    const int m = get_required<int>(config, "m", "config");
    const double p = get_required<double>(config, "p", "config");
    const auto dilations = get_or<std::vector<double>>(config, "dilations", {1.0, 1.5, 2.0});
    const double delta_radius = get_or<double>(config, "delta_radius", 2.5 * grid.spacing());

    StageClock clock(report, "linear-check");
    solver::ScalingTable table = solver::sobolev_scaling_check(grid, m, p, dilations);
    solver::ScalingTable control =
        solver::sobolev_scaling_check(grid, m, p, dilations, 0.5 * table.exponent_q);

    Table csv;
    csv.columns = {"dilation", "f_norm", "u_norm", "ratio"};
    for (const auto& row : table.rows)
        csv.add_row({row.dilation, row.f_norm, row.u_norm, row.ratio});
    emit_csv(csv, outdir / "scaling.csv");

    report.check("scaling_drift", table.drift <= 0.10, table.drift, 0.10);
    report.check("negative_control_drift", control.drift > 0.25, control.drift, 0.25);

    // Green's-function constants: Lambda family vs polyharmonic family
    double worst = 0.0;
    for (int N = 2; N <= 6; ++N)
        for (int n = 2; n <= N; n += 2) {
            const double a = kernels::green_lambda(n, N).coefficient;
            const double b = kernels::green_polyharmonic(N, n / 2).coefficient;
            worst = std::max(worst, std::abs(a - b) / std::abs(b));
        }
    report.check("green_constants_consistent", worst <= 1e-13, worst, 1e-13);

    // spectral inverse vs direct free-space convolution for a mollified delta
    {
        const double rel = kernels::spectral_convolution_gap(grid, m, delta_radius);
        report.check("spectral_vs_convolution", rel <= 0.05, rel, 0.05);
    }
}

inline void run_khessian_check(const nlohmann::json& config, RunReport& report,
                               const std::filesystem::path& outdir) {
    require_keys(config, {"command", "output_dir", "grid", "k", "fields", "band", "seed",
                          "matrix_samples"},
                 "config");
    const GridSpec grid = parse_grid(config.at("grid"), "grid");
    const int k = get_required<int>(config, "k", "config");
    const int fields = get_or<int>(config, "fields", 5);
    const int band = get_or<int>(config, "band", 4);
    const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
    const int matrix_samples = get_or<int>(config, "matrix_samples", 20000);

    StageClock clock(report, "khessian-check");

    Table csv;
    csv.columns = {"field", "divergence_residual", "null_divergence_residual", "sigma_rel_l2"};
    double worst_div = 0.0, worst_null = 0.0, worst_sigma = 0.0;
    for (int i = 0; i < fields; ++i) {
        RealField u = random_bandlimited_field(grid, band, seed + static_cast<std::uint64_t>(i));
        const double div = khessian::divergence_form_residual(u, k);
        const double nul = khessian::null_divergence_residual(u, k);
        RealField a = khessian::s_k_field(u, k);
        RealField b = khessian::s_k_minors(u, k);
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            const double d = a.values[j] - b.values[j];
            num += d * d;
            den += b.values[j] * b.values[j];
        }
        const double sigma = std::sqrt(num / std::max(den, 1e-300));
        csv.add_row({static_cast<double>(i), div, nul, sigma});
        worst_div = std::max(worst_div, div);
        worst_null = std::max(worst_null, nul);
        worst_sigma = std::max(worst_sigma, sigma);
    }
    emit_csv(csv, outdir / "identities.csv");

    report.check("divergence_form_residual", worst_div <= 1e-8, worst_div, 1e-8);
    report.check("null_divergence_residual", worst_null <= 1e-8, worst_null, 1e-8);
    report.check("sigma_paths_agree", worst_sigma <= 1e-9, worst_sigma, 1e-9);

    // matrix-level battery across dimensions and k
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double worst_eigs = 0.0, worst_euler = 0.0, worst_fd = 0.0;
    int produced = 0;
    for (int N = 2; N <= 6 && produced < matrix_samples; ++N)
        for (int kk = 1; kk <= N && produced < matrix_samples; ++kk)
            for (int rep = 0; rep < matrix_samples / 20 && produced < matrix_samples; ++rep, ++produced) {
                double a[36];
                for (int r = 0; r < N; ++r)
                    for (int c = r; c < N; ++c) {
                        a[r * N + c] = uni(rng);
                        a[c * N + r] = a[r * N + c];
                    }
                const auto lam = khessian::symmetric_eigenvalues(a, N);
                const double via_eigs =
                    khessian::sigma_k(std::span<const double>(lam.data(), static_cast<std::size_t>(N)), kk);
                const double via_minors = khessian::sigma_k_minors(a, N, kk);
                worst_eigs = std::max(worst_eigs, std::abs(via_eigs - via_minors) /
                                                      (1.0 + std::abs(via_minors)));
                double tensor[36], fd[36];
                khessian::newton_tensor_matrix(a, N, kk, tensor);
                khessian::newton_tensor_matrix_fd(a, N, kk, fd);
                double euler = 0.0, scale = 0.0;
                for (int t = 0; t < N * N; ++t) {
                    euler += a[t] * tensor[t];
                    scale = std::max(scale, std::abs(tensor[t]));
                    worst_fd = std::max(worst_fd, std::abs(tensor[t] - fd[t]) / (1.0 + scale));
                }
                worst_euler = std::max(worst_euler, std::abs(euler - kk * via_minors) /
                                                        (1.0 + std::abs(kk * via_minors)));
            }
    report.check("sigma_eigen_vs_minors", worst_eigs <= 1e-10, worst_eigs, 1e-10);
    report.check("euler_identity", worst_euler <= 1e-9, worst_euler, 1e-9);
    report.check("newton_tensor_fd", worst_fd <= 1e-6, worst_fd, 1e-6);
}

inline void run_analysis(const nlohmann::json& config, RunReport& report,
                         const std::filesystem::path& outdir) {
    require_keys(config, {"command", "output_dir", "grid", "seed", "cubes", "family_size"},
                 "config");
    const GridSpec grid = parse_grid(config.at("grid"), "grid");
    const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
    const int cubes = get_or<int>(config, "cubes", 2000);
    const int family = get_or<int>(config, "family_size", 40);
    if (grid.dimension != 2) throw ConfigError("analysis: the estimator battery runs at N = 2");

    StageClock clock(report, "analysis");
    analysis::CubeSampler sampler{cubes, seed, 2, {}};
    Table csv;
    csv.columns = {"quantity", "value"};

    // constants have zero oscillation, exactly
    RealField constant(grid);
    for (auto& v : constant.values) v = 2.5;
    const double bmo_const = analysis::bmo_seminorm(constant, sampler).value;
    report.check("bmo_const_zero", bmo_const == 0.0, bmo_const, 0.0);
    csv.add_row({std::string("bmo_const"), bmo_const});

    // log|x| estimate stability under cube-count doubling
    RealField logf = sample([&](const std::array<double, kMaxDim>& x) {
        const double r = std::max(std::sqrt(x[0] * x[0] + x[1] * x[1]), 0.5 * grid.spacing());
        return std::log(r);
    }, grid);
    analysis::CubeSampler doubled{2 * cubes, seed, 2, {}};
    const double e1 = analysis::bmo_seminorm(logf, sampler).value;
    const double e2 = analysis::bmo_seminorm(logf, doubled).value;
    const double stability = std::abs(e2 - e1) / e1;
    report.check("log_bmo_stability", stability <= 0.15, stability, 0.15);
    csv.add_row({std::string("log_bmo_estimate"), e2});
    csv.add_row({std::string("log_bmo_stability"), stability});

    // Poincare dilation invariance
    auto bump_at = [&](double radius) {
        return sample([&](const std::array<double, kMaxDim>& x) {
            const double r2 = (x[0] * x[0] + x[1] * x[1]) / (radius * radius);
            return r2 >= 1.0 ? 0.0 : std::pow(1.0 - r2, 3);
        }, grid);
    };
    const double r1 = 0.2 * grid.half_length;
    const double a = analysis::poincare_ratio(bump_at(r1), analysis::Ball{{0, 0}, r1});
    const double b = analysis::poincare_ratio(bump_at(2 * r1), analysis::Ball{{0, 0}, 2 * r1});
    const double poincare_dev = std::abs(a - b) / b;
    report.check("poincare_dilation_invariant", poincare_dev <= 0.05, poincare_dev, 0.05);
    csv.add_row({std::string("poincare_ratio"), b});
    csv.add_row({std::string("poincare_dilation_dev"), poincare_dev});

    // atom decay
    analysis::CubeSample cube{{0.0, 0.0}, grid.half_length / 16.0};
    analysis::Atom atom = analysis::make_atom(grid, cube, analysis::AtomPattern::dipole);
    const auto decay = analysis::atom_decay_check(atom);
    report.check("atom_decay_trend_free", decay.pass, decay.loglog_slope,
                 analysis::kAtomDecayGrowthBound);
    csv.add_row({std::string("atom_decay_slope"), decay.loglog_slope});
    csv.add_row({std::string("atom_decay_spread"), decay.spread});

    // Lambda^{-1}: H^N -> BMO boundedness family
    std::vector<double> ratios;
    for (int i = 0; i < family; ++i)
        ratios.push_back(analysis::bmo_boundedness_check(
            random_bandlimited_field(grid, grid.points_per_axis / 4, seed + 100 + i), sampler));
    std::sort(ratios.begin(), ratios.end());
    const double spread = ratios.back() / std::max(ratios[ratios.size() / 2], 1e-300);
    report.check("bmo_boundedness_spread", spread <= 10.0, spread, 10.0);
    csv.add_row({std::string("bmo_boundedness_median"), ratios[ratios.size() / 2]});
    csv.add_row({std::string("bmo_boundedness_spread"), spread});

    emit_csv(csv, outdir / "analysis.csv");
}

inline void run_fixedpoint_demo(const nlohmann::json& config, RunReport& report,
                                const std::filesystem::path& outdir) {
    require_keys(config, {"command", "output_dir", "dimension", "deltas", "points", "seed",
                          "sample_count"},
                 "config");
    const int dim = get_or<int>(config, "dimension", 16);
    const auto deltas = get_or<std::vector<double>>(config, "deltas", {0.4, 0.2, 0.1, 0.05, 0.025});
    const int points = get_or<int>(config, "points", 10000);
    const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
    const int sample_count = get_or<int>(config, "sample_count", 20000);

    StageClock clock(report, "fixedpoint-demo");

    // projector inequality battery: two polytopes, three radii
    const fixedpoint::Polytope simplex = fixedpoint::Polytope::simplex(4);
    const fixedpoint::Polytope box =
        fixedpoint::Polytope::box(fixedpoint::Point{0, 0, 0}, fixedpoint::Point{1, 1, 1});
    const fixedpoint::WeakStarMetric metric4 = fixedpoint::WeakStarMetric::create(4, 24, seed + 1);
    const fixedpoint::WeakStarMetric metric3 = fixedpoint::WeakStarMetric::create(3, 24, seed + 2);

    Table csv;
    csv.columns = {"stage", "value"};
    long violations = 0;
    std::mt19937_64 rng(seed + 3);
    const int per_case = points / 6;
    for (double delta : {0.3, 0.2, 0.12}) {
        fixedpoint::NetCover snet =
            fixedpoint::NetCover::build(simplex, metric4, delta, sample_count, seed + 10);
        fixedpoint::NetCover bnet =
            fixedpoint::NetCover::build(box, metric3, delta, sample_count, seed + 11);
        for (int rep = 0; rep < per_case; ++rep) {
            const fixedpoint::Point v = simplex.sample(rng);
            const fixedpoint::Point w = box.sample(rng);
            try {
                if (metric4.distance(fixedpoint::project(v, snet), v) > delta) ++violations;
                if (metric3.distance(fixedpoint::project(w, bnet), w) > delta) ++violations;
            } catch (const PointOutsideSet&) {
                ++violations;
            }
        }
    }
    report.check("projineq_violations", violations == 0, static_cast<double>(violations), 0.0);
    csv.add_row({std::string("projineq_points"), static_cast<double>(per_case * 6)});
    csv.add_row({std::string("projineq_violations"), static_cast<double>(violations)});

    // convolution-squaring demo on the probability simplex
    const fixedpoint::Polytope demo_simplex = fixedpoint::Polytope::simplex(dim);
    const fixedpoint::WeakStarMetric demo_metric =
        fixedpoint::WeakStarMetric::create(dim, 2 * dim, seed + 4);
    fixedpoint::ScheduleOptions opts;
    opts.sample_count = sample_count;
    opts.seed = seed + 5;
    const auto trace = fixedpoint::schauder_iterate(fixedpoint::convolution_square, demo_simplex,
                                                    demo_metric, deltas, opts);
    Table stage_csv;
    stage_csv.columns = {"delta", "residual", "centers", "finder_steps", "stalled"};
    for (const auto& stage : trace.stages)
        stage_csv.add_row({stage.delta, stage.residual, static_cast<double>(stage.centers),
                           static_cast<double>(stage.finder_steps), stage.stalled ? 1.0 : 0.0});
    emit_csv(stage_csv, outdir / "fixedpoint_stages.csv");

    report.check("conv_squaring_residual", trace.final_residual <= 1e-6, trace.final_residual, 1e-6);
    const double top = trace.fixed_point.empty() ? 0.0 : trace.fixed_point[0];
    report.check("conv_squaring_delta_limit", top >= 1.0 - 1e-9, top, 1.0 - 1e-9);
    csv.add_row({std::string("conv_residual"), trace.final_residual});
    csv.add_row({std::string("conv_limit_coordinate0"), top});
    emit_csv(csv, outdir / "fixedpoint.csv");
}

} // namespace detail

struct RunResult {
    int exit_code = 0;
    RunReport report;
    std::filesystem::path output_path;
};

/**
 * Parse, validate and dispatch one run configuration. Deterministic given
 * (config, seeds): every CSV byte reproduces. The report is written even when
 * checks fail; config errors abort before any output exists.
 */
inline RunResult run(const nlohmann::json& config) {
    if (!config.is_object()) throw ConfigError("config: expected a JSON object");
    const std::string command = detail::get_required<std::string>(config, "command", "config");
    std::string outdir_name = detail::get_or<std::string>(config, "output_dir", "out");
    if (const char* env = std::getenv("POLYHESS_OUTDIR")) outdir_name = env;

    RunResult result;
    result.report.config_echo = nlohmann::ordered_json(config);
    result.report.config_hash = detail::hash_hex(config);

    using Runner = void (*)(const nlohmann::json&, RunReport&, const std::filesystem::path&);
    Runner runner = nullptr;
    if (command == "solve") runner = detail::run_solve;
    else if (command == "sweep") runner = detail::run_sweep;
    else if (command == "linear-check") runner = detail::run_linear_check;
    else if (command == "khessian-check") runner = detail::run_khessian_check;
    else if (command == "analysis") runner = detail::run_analysis;
    else if (command == "fixedpoint-demo") runner = detail::run_fixedpoint_demo;
    else throw ConfigError("config: unknown command '" + command + "'");

    const std::filesystem::path outdir =
        std::filesystem::path(outdir_name) / command / result.report.config_hash;
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec) throw IoError("cannot create output directory " + outdir.string());
    result.output_path = outdir;

    try {
        runner(config, result.report, outdir);
        result.exit_code = result.report.all_passed() ? 0 : 1;
    } catch (const ConfigError&) {
        // runners validate before writing anything: drop the directories just
        // created (remove() only deletes empty ones, so pre-existing content
        // is never touched)
        std::error_code rmec;
        std::filesystem::remove(outdir, rmec);
        std::filesystem::remove(outdir.parent_path(), rmec);
        std::filesystem::remove(outdir.parent_path().parent_path(), rmec);
        throw;
    } catch (const Error& e) {
        result.report.checks.push_back({"compute_error", "fail", 0.0, 0.0});
        result.report.config_echo["error"] = e.what();
        result.exit_code = 1;
    }
    result.report.exit_status = result.exit_code;
    emit_summary(result.report, outdir / "report.json");
    return result;
}

inline RunResult run_file(const std::filesystem::path& config_path) {
    std::ifstream file(config_path);
    if (!file) throw ConfigError("cannot open config file " + config_path.string());
    nlohmann::json config;
    try {
        file >> config;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return run(config);
}

} // namespace polyhess::cli
