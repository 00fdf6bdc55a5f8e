#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <span>
#include <vector>

#include "polyhess/grid.hpp"
#include "polyhess/spectral_ops.hpp"

namespace polyhess::khessian {

inline int triangle_size(int N) { return N * (N + 1) / 2; }

/// Packed index of the upper-triangle entry (i, j), i <= j.
inline int tri_index(int N, int i, int j) {
    return i * N - i * (i - 1) / 2 + (j - i);
}

/// Per-grid-point symmetric N x N matrices, stored as packed upper triangles
/// so symmetry is exact by construction.
struct SymmetricMatrixField {
    GridSpec spec;
    int matrix_dim = 0;
    std::vector<double> entries; // point-major: point * T + tri_index

    SymmetricMatrixField() = default;
    SymmetricMatrixField(const GridSpec& s, int dim)
        : spec(s), matrix_dim(dim),
          entries(s.point_count() * static_cast<std::size_t>(triangle_size(dim)), 0.0) {}

    double entry(std::size_t point, int i, int j) const {
        if (i > j) std::swap(i, j);
        return entries[point * static_cast<std::size_t>(triangle_size(matrix_dim)) +
                       static_cast<std::size_t>(tri_index(matrix_dim, i, j))];
    }

    double& entry_ref(std::size_t point, int i, int j) {
        if (i > j) std::swap(i, j);
        return entries[point * static_cast<std::size_t>(triangle_size(matrix_dim)) +
                       static_cast<std::size_t>(tri_index(matrix_dim, i, j))];
    }

    /// Expand one point into a full row-major dim x dim matrix.
    void full_matrix(std::size_t point, double* out) const {
        for (int i = 0; i < matrix_dim; ++i)
            for (int j = 0; j < matrix_dim; ++j)
                out[i * matrix_dim + j] = entry(point, i, j);
    }
};

/// Per-grid-point eigenvalue tuples, ascending.
struct EigenvalueField {
    GridSpec spec;
    int matrix_dim = 0;
    std::vector<double> values; // point-major: point * dim + slot

    EigenvalueField() = default;
    EigenvalueField(const GridSpec& s, int dim)
        : spec(s), matrix_dim(dim), values(s.point_count() * static_cast<std::size_t>(dim), 0.0) {}

    std::span<const double> at(std::size_t point) const {
        return {values.data() + point * static_cast<std::size_t>(matrix_dim),
                static_cast<std::size_t>(matrix_dim)};
    }
};

// --- matrix-level kernels (N <= 6, no allocation) ---

namespace detail {

inline constexpr int kMaxMat = kMaxDim;

/// Cyclic Jacobi diagonalization of a symmetric matrix, in place. The diagonal
/// holds the (unsorted) eigenvalues afterwards. Every arithmetic step is
/// linear in the entries with negation-invariant rotation coefficients, so
/// diagonalizing -A yields exactly the negated diagonal.
inline void jacobi_diagonalize(double* a, int n) {
    for (int sweep = 0; sweep < 30; ++sweep) {
        double off = 0.0, scale = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off = std::max(off, std::abs(a[p * n + q]));
        for (int p = 0; p < n; ++p) scale = std::max(scale, std::abs(a[p * n + p]));
        if (off <= 1e-15 * std::max(scale, 1e-300) || off == 0.0) return;

        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                const double app = a[p * n + p], aqq = a[q * n + q];
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for (int r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = a[r * n + p], arq = a[r * n + q];
                    a[r * n + p] = arp - s * (arq + tau * arp);
                    a[p * n + r] = a[r * n + p];
                    a[r * n + q] = arq + s * (arp - tau * arq);
                    a[q * n + r] = a[r * n + q];
                }
            }
    }
}

/// Determinant of a k x k matrix by Gaussian elimination with partial pivoting.
inline double determinant(double* a, int k) {
    double det = 1.0;
    for (int col = 0; col < k; ++col) {
        int pivot = col;
        for (int r = col + 1; r < k; ++r)
            if (std::abs(a[r * k + col]) > std::abs(a[pivot * k + col])) pivot = r;
        if (a[pivot * k + col] == 0.0) return 0.0;
        if (pivot != col) {
            for (int c = 0; c < k; ++c) std::swap(a[pivot * k + c], a[col * k + c]);
            det = -det;
        }
        det *= a[col * k + col];
        for (int r = col + 1; r < k; ++r) {
            const double factor = a[r * k + col] / a[col * k + col];
            for (int c = col; c < k; ++c) a[r * k + c] -= factor * a[col * k + c];
        }
    }
    return det;
}

} // namespace detail

/// Eigenvalues of a full row-major symmetric matrix, ascending.
inline std::array<double, detail::kMaxMat> symmetric_eigenvalues(const double* full, int n) {
    double work[detail::kMaxMat * detail::kMaxMat];
    for (int i = 0; i < n * n; ++i) work[i] = full[i];
    detail::jacobi_diagonalize(work, n);
    std::array<double, detail::kMaxMat> out{};
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = work[i * n + i];
    std::sort(out.begin(), out.begin() + n);
    return out;
}

/**
 * k-th elementary symmetric polynomial of the values, by the direct product
 * expansion e <- e + lambda * shift(e). Exact sign equivariance: feeding the
 * negated tuple in the same order returns exactly (-1)^k sigma_k.
 */
inline double sigma_k(std::span<const double> lambda, int k) {
    const int n = static_cast<int>(lambda.size());
    if (k < 1 || k > n) throw BadK("sigma_k: k must lie in [1, N]");
    std::array<double, detail::kMaxMat + 1> e{};
    e[0] = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::min(i + 1, k); j >= 1; --j)
            e[static_cast<std::size_t>(j)] += lambda[static_cast<std::size_t>(i)] * e[static_cast<std::size_t>(j - 1)];
    return e[static_cast<std::size_t>(k)];
}

/// sigma_k as the sum of principal k x k minors; valid for general square
/// matrices, which makes it the reference path and the finite-difference
/// oracle's evaluation route.
inline double sigma_k_minors(const double* full, int n, int k) {
    if (k < 1 || k > n) throw BadK("sigma_k_minors: k must lie in [1, N]");
    double sum = 0.0;
    double sub[detail::kMaxMat * detail::kMaxMat];
    int members[detail::kMaxMat];
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (std::popcount(mask) != k) continue;
        int m = 0;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) members[m++] = i;
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < k; ++c) sub[r * k + c] = full[members[r] * n + members[c]];
        sum += detail::determinant(sub, k);
    }
    return sum;
}

/// Newton tensor S_k^{ij}(A) = d sigma_k / d a_{ij}: cofactor expansion over
/// the principal k-subsets containing both i and j.
inline void newton_tensor_matrix(const double* full, int n, int k, double* out) {
    if (k < 1 || k > n) throw BadK("newton_tensor_matrix: k must lie in [1, N]");
    for (int i = 0; i < n * n; ++i) out[i] = 0.0;
    double minor_mat[detail::kMaxMat * detail::kMaxMat];
    int members[detail::kMaxMat];
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (std::popcount(mask) != k) continue;
        int m = 0;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) members[m++] = i;
        for (int pi = 0; pi < k; ++pi)
            for (int pj = 0; pj < k; ++pj) {
                int rr = 0;
                for (int r = 0; r < k; ++r) {
                    if (r == pi) continue;
                    int cc = 0;
                    for (int c = 0; c < k; ++c) {
                        if (c == pj) continue;
                        minor_mat[rr * (k - 1) + cc] = full[members[r] * n + members[c]];
                        ++cc;
                    }
                    ++rr;
                }
                const double minor_det = (k == 1) ? 1.0 : detail::determinant(minor_mat, k - 1);
                const double sign = ((pi + pj) % 2 == 0) ? 1.0 : -1.0;
                out[members[pi] * n + members[pj]] += sign * minor_det;
            }
    }
}

/// Central finite differences of sigma_k in single matrix entries; the
/// independent oracle for newton_tensor_matrix.
inline void newton_tensor_matrix_fd(const double* full, int n, int k, double* out) {
    double norm = 0.0;
    for (int i = 0; i < n * n; ++i) norm += full[i] * full[i];
    const double eps = 1e-6 * (1.0 + std::sqrt(norm));
    double work[detail::kMaxMat * detail::kMaxMat];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            for (int t = 0; t < n * n; ++t) work[t] = full[t];
            work[i * n + j] = full[i * n + j] + eps;
            const double plus = sigma_k_minors(work, n, k);
            work[i * n + j] = full[i * n + j] - eps;
            const double minus = sigma_k_minors(work, n, k);
            out[i * n + j] = (plus - minus) / (2.0 * eps);
        }
}

// --- field-level operations ---

/// Spectral Hessian H_ij = d^2 u / dx_i dx_j; exact on band-limited fields.
inline SymmetricMatrixField hessian(const RealField& u) {
    const int N = u.spec.dimension;
    SymmetricMatrixField H(u.spec, N);
    SpectralField F = forward_transform(u);
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) {
            spectral::MultiIndex alpha;
            alpha.dimension = N;
            alpha.components[i] += 1;
            alpha.components[j] += 1;
            RealField entry = inverse_transform(spectral::derivative_multiply(F, alpha));
            const int t = tri_index(N, i, j);
            const std::size_t T = static_cast<std::size_t>(triangle_size(N));
            for (std::size_t pt = 0; pt < entry.size(); ++pt)
                H.entries[pt * T + static_cast<std::size_t>(t)] = entry.values[pt];
        }
    return H;
}

/// Per-point symmetric eigendecomposition, ascending order.
inline EigenvalueField eigenvalues(const SymmetricMatrixField& H) {
    EigenvalueField out(H.spec, H.matrix_dim);
    const int N = H.matrix_dim;
    double full[detail::kMaxMat * detail::kMaxMat];
    const std::size_t total = H.spec.point_count();
    for (std::size_t pt = 0; pt < total; ++pt) {
        H.full_matrix(pt, full);
        const auto lam = symmetric_eigenvalues(full, N);
        for (int i = 0; i < N; ++i) out.values[pt * static_cast<std::size_t>(N) + i] = lam[static_cast<std::size_t>(i)];
    }
    return out;
}

namespace detail {

/// Smallest even lattice size >= n (k+1)/2: degree-k pointwise products of
/// band-limited fields are alias-free in the retained band.
inline int dealias_fine_size(int n, int k) {
    const int raw = (n * (k + 1) + 1) / 2; // ceil(n(k+1)/2)
    return raw + (raw % 2);
}

/// Hessian entries (and optionally the gradient) of u evaluated on the padded
/// lattice used for degree-k pointwise products.
struct FineHessian {
    GridSpec fine;
    std::vector<RealField> entries;  // triangle order
    std::vector<RealField> gradient; // axis order, only if requested
};

inline FineHessian fine_hessian(const RealField& u, int k, bool with_gradient) {
    const int N = u.spec.dimension;
    FineHessian out;
    SpectralField padded = polyhess::detail::resize_spectrum(
        forward_transform(u), dealias_fine_size(u.spec.points_per_axis, k));
    out.fine = padded.spec;
    out.entries.reserve(static_cast<std::size_t>(triangle_size(N)));
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) {
            spectral::MultiIndex alpha;
            alpha.dimension = N;
            alpha.components[i] += 1;
            alpha.components[j] += 1;
            out.entries.push_back(inverse_transform(spectral::derivative_multiply(padded, alpha)));
        }
    if (with_gradient) {
        out.gradient.reserve(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) {
            spectral::MultiIndex alpha;
            alpha.dimension = N;
            alpha.components[i] = 1;
            out.gradient.push_back(inverse_transform(spectral::derivative_multiply(padded, alpha)));
        }
    }
    return out;
}

inline RealField truncate_to(const RealField& fine, const GridSpec& coarse) {
    return inverse_transform(
        polyhess::detail::resize_spectrum(forward_transform(fine), coarse.points_per_axis));
}

inline double l2_grid(const RealField& f) {
    double s = 0.0;
    for (double v : f.values) s += v * v;
    return std::sqrt(s * std::pow(f.spec.spacing(), f.spec.dimension));
}

inline constexpr double kTinyFloor = 1e-300;

} // namespace detail

/**
 * S_k[u]: the production path. Hessian entries are padded by ceil((k+1)/2)
 * per axis, eigenvalues and sigma_k are taken pointwise on the fine lattice,
 * and the result is truncated back to the original grid.
 */
inline RealField s_k_field(const RealField& u, int k) {
    const int N = u.spec.dimension;
    if (k < 1 || k > N) throw BadK("s_k_field: k must lie in [1, N]");
    detail::FineHessian fh = detail::fine_hessian(u, k, false);
    RealField sk(fh.fine);
    const std::size_t total = fh.fine.point_count();
    double full[detail::kMaxMat * detail::kMaxMat];
    double work[detail::kMaxMat * detail::kMaxMat];
    for (std::size_t pt = 0; pt < total; ++pt) {
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                const double v = fh.entries[static_cast<std::size_t>(tri_index(N, i, j))].values[pt];
                full[i * N + j] = v;
                full[j * N + i] = v;
            }
        for (int t = 0; t < N * N; ++t) work[t] = full[t];
        detail::jacobi_diagonalize(work, N);
        double lam[detail::kMaxMat];
        for (int i = 0; i < N; ++i) lam[i] = work[i * N + i];
        sk.values[pt] = sigma_k(std::span<const double>(lam, static_cast<std::size_t>(N)), k);
    }
    return detail::truncate_to(sk, u.spec);
}

/// S_k[u] through the principal-minors route; the independent oracle path.
inline RealField s_k_minors(const RealField& u, int k) {
    const int N = u.spec.dimension;
    if (k < 1 || k > N) throw BadK("s_k_minors: k must lie in [1, N]");
    detail::FineHessian fh = detail::fine_hessian(u, k, false);
    RealField sk(fh.fine);
    const std::size_t total = fh.fine.point_count();
    double full[detail::kMaxMat * detail::kMaxMat];
    for (std::size_t pt = 0; pt < total; ++pt) {
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                const double v = fh.entries[static_cast<std::size_t>(tri_index(N, i, j))].values[pt];
                full[i * N + j] = v;
                full[j * N + i] = v;
            }
        sk.values[pt] = sigma_k_minors(full, N, k);
    }
    return detail::truncate_to(sk, u.spec);
}

/// Newton tensor field S_k^{ij}[u] on the original grid (dealiased).
inline SymmetricMatrixField newton_tensor(const RealField& u, int k) {
    const int N = u.spec.dimension;
    if (k < 1 || k > N) throw BadK("newton_tensor: k must lie in [1, N]");
    detail::FineHessian fh = detail::fine_hessian(u, k, false);
    const std::size_t total = fh.fine.point_count();
    std::vector<RealField> tensor_fine(static_cast<std::size_t>(triangle_size(N)), RealField(fh.fine));
    double full[detail::kMaxMat * detail::kMaxMat];
    double tensor[detail::kMaxMat * detail::kMaxMat];
    for (std::size_t pt = 0; pt < total; ++pt) {
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                const double v = fh.entries[static_cast<std::size_t>(tri_index(N, i, j))].values[pt];
                full[i * N + j] = v;
                full[j * N + i] = v;
            }
        newton_tensor_matrix(full, N, k, tensor);
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j)
                tensor_fine[static_cast<std::size_t>(tri_index(N, i, j))].values[pt] = tensor[i * N + j];
    }
    SymmetricMatrixField out(u.spec, N);
    const std::size_t T = static_cast<std::size_t>(triangle_size(N));
    for (int t = 0; t < triangle_size(N); ++t) {
        RealField coarse = detail::truncate_to(tensor_fine[static_cast<std::size_t>(t)], u.spec);
        for (std::size_t pt = 0; pt < coarse.size(); ++pt)
            out.entries[pt * T + static_cast<std::size_t>(t)] = coarse.values[pt];
    }
    return out;
}

/// Both structural residuals from one shared fine-lattice pipeline; the batch
/// path when a field needs the divergence form and the null divergence.
struct IdentityResiduals {
    double divergence_form = 0.0;
    double null_divergence = 0.0;
};

inline IdentityResiduals identity_residuals(const RealField& u, int k) {
    const int N = u.spec.dimension;
    if (k < 1 || k > N) throw BadK("identity_residuals: k must lie in [1, N]");
    detail::FineHessian fh = detail::fine_hessian(u, k, true);
    const std::size_t total = fh.fine.point_count();

    RealField sk(fh.fine);
    std::vector<RealField> flux(static_cast<std::size_t>(N), RealField(fh.fine));
    std::vector<RealField> tensor_fine(static_cast<std::size_t>(triangle_size(N)), RealField(fh.fine));
    double full[detail::kMaxMat * detail::kMaxMat];
    double work[detail::kMaxMat * detail::kMaxMat];
    double tensor[detail::kMaxMat * detail::kMaxMat];
    double hess_sq = 0.0;
    for (std::size_t pt = 0; pt < total; ++pt) {
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                const double v = fh.entries[static_cast<std::size_t>(tri_index(N, i, j))].values[pt];
                full[i * N + j] = v;
                full[j * N + i] = v;
            }
        for (int i = 0; i < N * N; ++i) hess_sq += full[i] * full[i];
        for (int t = 0; t < N * N; ++t) work[t] = full[t];
        detail::jacobi_diagonalize(work, N);
        double lam[detail::kMaxMat];
        for (int i = 0; i < N; ++i) lam[i] = work[i * N + i];
        sk.values[pt] = sigma_k(std::span<const double>(lam, static_cast<std::size_t>(N)), k);

        newton_tensor_matrix(full, N, k, tensor);
        for (int i = 0; i < N; ++i) {
            double w = 0.0;
            for (int j = 0; j < N; ++j) w += fh.gradient[static_cast<std::size_t>(j)].values[pt] * tensor[i * N + j];
            flux[static_cast<std::size_t>(i)].values[pt] = w;
        }
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j)
                tensor_fine[static_cast<std::size_t>(tri_index(N, i, j))].values[pt] = tensor[i * N + j];
    }

    IdentityResiduals out;

    SpectralField div(fh.fine);
    for (int i = 0; i < N; ++i) {
        spectral::MultiIndex alpha;
        alpha.dimension = N;
        alpha.components[i] = 1;
        SpectralField term = spectral::derivative_multiply(forward_transform(flux[static_cast<std::size_t>(i)]), alpha);
        for (std::size_t m = 0; m < div.coefficients.size(); ++m) div.coefficients[m] += term.coefficients[m];
    }
    RealField rhs = inverse_transform(div);
    for (auto& v : rhs.values) v /= static_cast<double>(k);
    RealField diff(fh.fine);
    for (std::size_t pt = 0; pt < total; ++pt) diff.values[pt] = sk.values[pt] - rhs.values[pt];
    out.divergence_form = detail::l2_grid(diff) / std::max(detail::l2_grid(sk), detail::kTinyFloor);

    const double hN = std::pow(fh.fine.spacing(), N);
    const double hess_norm = std::sqrt(hess_sq * hN);
    std::vector<SpectralField> tensor_hat;
    tensor_hat.reserve(tensor_fine.size());
    for (const auto& entry : tensor_fine) tensor_hat.push_back(forward_transform(entry));
    double worst = 0.0;
    for (int j = 0; j < N; ++j) {
        SpectralField row_div(fh.fine);
        for (int i = 0; i < N; ++i) {
            spectral::MultiIndex alpha;
            alpha.dimension = N;
            alpha.components[i] = 1;
            SpectralField term = spectral::derivative_multiply(
                tensor_hat[static_cast<std::size_t>(tri_index(N, std::min(i, j), std::max(i, j)))], alpha);
            for (std::size_t m = 0; m < row_div.coefficients.size(); ++m)
                row_div.coefficients[m] += term.coefficients[m];
        }
        worst = std::max(worst, detail::l2_grid(inverse_transform(row_div)));
    }
    double denom = 1.0;
    for (int i = 0; i < k - 1; ++i) denom *= hess_norm;
    out.null_divergence = worst / std::max(denom, detail::kTinyFloor);
    return out;
}

/**
 * Relative residual of the divergence form
 *   S_k[u] = (1/k) sum_{i,j} d_i (u_{x_j} S_k^{ij}[u]),
 * assembled entirely on the fine lattice.
 */
inline double divergence_form_residual(const RealField& u, int k) {
    const int N = u.spec.dimension;
    if (k < 1 || k > N) throw BadK("divergence_form_residual: k must lie in [1, N]");
    detail::FineHessian fh = detail::fine_hessian(u, k, true);
    const std::size_t total = fh.fine.point_count();

    RealField sk(fh.fine);
    std::vector<RealField> flux(static_cast<std::size_t>(N), RealField(fh.fine)); // w_i = sum_j u_j S^ij
    double full[detail::kMaxMat * detail::kMaxMat];
    double work[detail::kMaxMat * detail::kMaxMat];
    double tensor[detail::kMaxMat * detail::kMaxMat];
    for (std::size_t pt = 0; pt < total; ++pt) {
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                const double v = fh.entries[static_cast<std::size_t>(tri_index(N, i, j))].values[pt];
                full[i * N + j] = v;
                full[j * N + i] = v;
            }
        for (int t = 0; t < N * N; ++t) work[t] = full[t];
        detail::jacobi_diagonalize(work, N);
        double lam[detail::kMaxMat];
        for (int i = 0; i < N; ++i) lam[i] = work[i * N + i];
        sk.values[pt] = sigma_k(std::span<const double>(lam, static_cast<std::size_t>(N)), k);

        newton_tensor_matrix(full, N, k, tensor);
        for (int i = 0; i < N; ++i) {
            double w = 0.0;
            for (int j = 0; j < N; ++j) w += fh.gradient[static_cast<std::size_t>(j)].values[pt] * tensor[i * N + j];
            flux[static_cast<std::size_t>(i)].values[pt] = w;
        }
    }

    // (1/k) sum_i d_i w_i, spectrally on the fine lattice
    SpectralField div(fh.fine);
    for (int i = 0; i < N; ++i) {
        spectral::MultiIndex alpha;
        alpha.dimension = N;
        alpha.components[i] = 1;
        SpectralField term = spectral::derivative_multiply(forward_transform(flux[static_cast<std::size_t>(i)]), alpha);
        for (std::size_t m = 0; m < div.coefficients.size(); ++m) div.coefficients[m] += term.coefficients[m];
    }
    RealField rhs = inverse_transform(div);
    for (auto& v : rhs.values) v /= static_cast<double>(k);

    RealField diff(fh.fine);
    for (std::size_t pt = 0; pt < total; ++pt) diff.values[pt] = sk.values[pt] - rhs.values[pt];
    return detail::l2_grid(diff) / std::max(detail::l2_grid(sk), detail::kTinyFloor);
}

/**
 * max_j || sum_i d_i S_k^{ij}[u] ||_2 normalized by ||D^2 u||_2^{k-1}: the
 * rows of the Newton tensor are divergence free.
 */
inline double null_divergence_residual(const RealField& u, int k) {
    const int N = u.spec.dimension;
    if (k < 1 || k > N) throw BadK("null_divergence_residual: k must lie in [1, N]");
    detail::FineHessian fh = detail::fine_hessian(u, k, false);
    const std::size_t total = fh.fine.point_count();

    std::vector<RealField> tensor_fine(static_cast<std::size_t>(triangle_size(N)), RealField(fh.fine));
    double full[detail::kMaxMat * detail::kMaxMat];
    double tensor[detail::kMaxMat * detail::kMaxMat];
    double hess_sq = 0.0;
    for (std::size_t pt = 0; pt < total; ++pt) {
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                const double v = fh.entries[static_cast<std::size_t>(tri_index(N, i, j))].values[pt];
                full[i * N + j] = v;
                full[j * N + i] = v;
            }
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) hess_sq += full[i * N + j] * full[i * N + j];
        newton_tensor_matrix(full, N, k, tensor);
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j)
                tensor_fine[static_cast<std::size_t>(tri_index(N, i, j))].values[pt] = tensor[i * N + j];
    }
    const double hN = std::pow(fh.fine.spacing(), N);
    const double hess_norm = std::sqrt(hess_sq * hN);

    std::vector<SpectralField> tensor_hat;
    tensor_hat.reserve(tensor_fine.size());
    for (const auto& entry : tensor_fine) tensor_hat.push_back(forward_transform(entry));

    double worst = 0.0;
    for (int j = 0; j < N; ++j) {
        SpectralField div(fh.fine);
        for (int i = 0; i < N; ++i) {
            spectral::MultiIndex alpha;
            alpha.dimension = N;
            alpha.components[i] = 1;
            SpectralField term = spectral::derivative_multiply(
                tensor_hat[static_cast<std::size_t>(tri_index(N, std::min(i, j), std::max(i, j)))], alpha);
            for (std::size_t m = 0; m < div.coefficients.size(); ++m) div.coefficients[m] += term.coefficients[m];
        }
        worst = std::max(worst, detail::l2_grid(inverse_transform(div)));
    }
    double denom = 1.0;
    for (int i = 0; i < k - 1; ++i) denom *= hess_norm;
    return worst / std::max(denom, detail::kTinyFloor);
}

} // namespace polyhess::khessian
