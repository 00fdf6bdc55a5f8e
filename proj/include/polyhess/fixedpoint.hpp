#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "polyhess/errors.hpp"

namespace polyhess::fixedpoint {

using Point = std::vector<double>;

inline double euclidean_norm(const Point& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

/// Convex candidate sets for the finite-dimensional demonstrator: the
/// probability simplex {x >= 0, sum x = 1} in R^d, or an axis box.
struct Polytope {
    enum class Kind { simplex, box };
    Kind kind = Kind::simplex;
    int dim = 0;
    Point lo, hi; // box only

    static Polytope simplex(int dim) {
        Polytope p;
        p.kind = Kind::simplex;
        p.dim = dim;
        return p;
    }

    static Polytope box(Point lo, Point hi) {
        Polytope p;
        p.kind = Kind::box;
        p.dim = static_cast<int>(lo.size());
        p.lo = std::move(lo);
        p.hi = std::move(hi);
        return p;
    }

    bool contains(const Point& x, double tol = 1e-9) const {
        if (static_cast<int>(x.size()) != dim) return false;
        if (kind == Kind::simplex) {
            double sum = 0.0;
            for (double v : x) {
                if (v < -tol) return false;
                sum += v;
            }
            return std::abs(sum - 1.0) <= tol * dim;
        }
        for (int i = 0; i < dim; ++i)
            if (x[static_cast<std::size_t>(i)] < lo[static_cast<std::size_t>(i)] - tol ||
                x[static_cast<std::size_t>(i)] > hi[static_cast<std::size_t>(i)] + tol)
                return false;
        return true;
    }

    Point sample(std::mt19937_64& rng) const {
        Point x(static_cast<std::size_t>(dim));
        if (kind == Kind::simplex) {
            std::exponential_distribution<double> expo(1.0);
            double sum = 0.0;
            for (auto& v : x) {
                v = expo(rng);
                sum += v;
            }
            for (auto& v : x) v /= sum;
        } else {
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            for (int i = 0; i < dim; ++i)
                x[static_cast<std::size_t>(i)] =
                    lo[static_cast<std::size_t>(i)] +
                    uni(rng) * (hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]);
        }
        return x;
    }

    std::vector<Point> vertices(int cap = 64) const {
        std::vector<Point> out;
        if (kind == Kind::simplex) {
            for (int i = 0; i < dim; ++i) {
                Point v(static_cast<std::size_t>(dim), 0.0);
                v[static_cast<std::size_t>(i)] = 1.0;
                out.push_back(std::move(v));
            }
        } else {
            const long count = 1L << dim;
            for (long mask = 0; mask < count && static_cast<int>(out.size()) < cap; ++mask) {
                Point v(static_cast<std::size_t>(dim));
                for (int i = 0; i < dim; ++i)
                    v[static_cast<std::size_t>(i)] = (mask >> i) & 1
                                                         ? hi[static_cast<std::size_t>(i)]
                                                         : lo[static_cast<std::size_t>(i)];
                out.push_back(std::move(v));
            }
        }
        return out;
    }

    Point barycenter() const {
        Point c(static_cast<std::size_t>(dim));
        if (kind == Kind::simplex) {
            for (auto& v : c) v = 1.0 / dim;
        } else {
            for (int i = 0; i < dim; ++i)
                c[static_cast<std::size_t>(i)] =
                    0.5 * (lo[static_cast<std::size_t>(i)] + hi[static_cast<std::size_t>(i)]);
        }
        return c;
    }
};

/**
 * The weak-*-style seminorm ||x||_* = sum_i 2^{-i} |<x, y_i>| built from a
 * unit-ball sample {y_i} of the predual. The Euclidean norm dominates it with
 * constant sum_i 2^{-i} ||y_i||, and it is a norm on the span of the sample
 * (positive definiteness is checked on the basis vectors at construction).
 */
struct WeakStarMetric {
    std::vector<Point> test_vectors; // unit Euclidean norm

    static WeakStarMetric create(int dim, int count, std::uint64_t seed) {
        WeakStarMetric metric;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss;
        metric.test_vectors.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            Point y(static_cast<std::size_t>(dim));
            double nrm = 0.0;
            do {
                for (auto& v : y) v = gauss(rng);
                nrm = euclidean_norm(y);
            } while (nrm < 1e-8);
            for (auto& v : y) v /= nrm;
            metric.test_vectors.push_back(std::move(y));
        }
        for (int j = 0; j < dim; ++j) {
            Point basis(static_cast<std::size_t>(dim), 0.0);
            basis[static_cast<std::size_t>(j)] = 1.0;
            if (metric.norm(basis) <= 0.0)
                throw Error("WeakStarMetric: sample does not span the space; use more test vectors");
        }
        return metric;
    }

    double norm(const Point& x) const {
        double total = 0.0;
        double weight = 0.5;
        for (const Point& y : test_vectors) {
            double dot = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
            total += weight * std::abs(dot);
            weight *= 0.5;
        }
        return total;
    }

    double distance(const Point& a, const Point& b) const {
        Point diff(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
        return norm(diff);
    }

    double dominance_constant() const {
        double c = 0.0, weight = 0.5;
        for (const Point& y : test_vectors) {
            c += weight * euclidean_norm(y);
            weight *= 0.5;
        }
        return c;
    }
};

/**
 * Finite delta-net of the polytope in the weak-* metric: greedy
 * farthest-point centers over a dense sample, covering the sample to
 * margin * delta. The polytope vertices are seeded as centers so that the
 * extreme points are represented exactly.
 */
struct NetCover {
    Polytope polytope;
    WeakStarMetric metric;
    double delta = 0.0;
    std::vector<Point> centers;
    double sample_cover_radius = 0.0;
    double sample_diameter = 0.0;
    bool single_ball = false; // the whole sampled set fits one delta-ball

    static NetCover build(const Polytope& polytope, const WeakStarMetric& metric, double delta,
                          int sample_count, std::uint64_t seed, double margin = 0.7) {
        NetCover net;
        net.polytope = polytope;
        net.metric = metric;
        net.delta = delta;

        std::mt19937_64 rng(seed);
        std::vector<Point> cloud;
        cloud.reserve(static_cast<std::size_t>(sample_count));
        for (int i = 0; i < sample_count; ++i) cloud.push_back(polytope.sample(rng));

        net.centers = polytope.vertices();
        std::vector<double> nearest(cloud.size(), 1e300);
        for (const Point& c : net.centers)
            for (std::size_t i = 0; i < cloud.size(); ++i)
                nearest[i] = std::min(nearest[i], metric.distance(cloud[i], c));

        const double target = margin * delta;
        while (true) {
            std::size_t worst = 0;
            double worst_dist = 0.0;
            for (std::size_t i = 0; i < cloud.size(); ++i)
                if (nearest[i] > worst_dist) {
                    worst_dist = nearest[i];
                    worst = i;
                }
            net.sample_cover_radius = worst_dist;
            if (worst_dist <= target) break;
            const Point& added = cloud[worst];
            net.centers.push_back(added);
            for (std::size_t i = 0; i < cloud.size(); ++i)
                nearest[i] = std::min(nearest[i], metric.distance(cloud[i], added));
        }

        // sample diameter (for the single-ball edge case) from the vertices
        const auto verts = polytope.vertices();
        for (std::size_t a = 0; a < verts.size(); ++a)
            for (std::size_t b = a + 1; b < verts.size(); ++b)
                net.sample_diameter = std::max(net.sample_diameter, metric.distance(verts[a], verts[b]));
        net.single_ball = net.sample_diameter <= delta && verts.size() >= 2;
        return net;
    }

    void add_center(const Point& v) { centers.push_back(v); }
};

/**
 * Partition-of-unity weights lambda_i(v) = d(v, complement of B_{v_i}(delta)),
 * realized by the closed form max(0, delta - ||v - v_i||_*). If the whole set
 * fits inside one ball the weights degenerate to the barycentric blend
 * lambda_i = diam.
 */
inline std::vector<double> partition_weights(const Point& v, const NetCover& net) {
    if (!net.polytope.contains(v)) throw PointOutsideSet("partition_weights: v is not in the set");
    std::vector<double> weights(net.centers.size(), 0.0);
    if (net.single_ball) {
        for (auto& w : weights) w = net.sample_diameter;
        return weights;
    }
    for (std::size_t i = 0; i < net.centers.size(); ++i)
        weights[i] = std::max(0.0, net.delta - net.metric.distance(v, net.centers[i]));
    return weights;
}

/// P_delta[v] = sum lambda_i(v) v_i / sum lambda_i(v). Throws when v is not
/// covered by any center ball (a net defect, not a projector property).
inline Point project(const Point& v, const NetCover& net) {
    const std::vector<double> weights = partition_weights(v, net);
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0)
        throw PointOutsideSet("project: point is not covered by the net (all weights vanish)");
    Point out(v.size(), 0.0);
    for (std::size_t i = 0; i < net.centers.size(); ++i) {
        const double c = weights[i] / total;
        if (c == 0.0) continue;
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += c * net.centers[i][d];
    }
    return out;
}

/**
 * The delta_k -> 0 fixed-point demonstration: for each radius, find a fixed
 * point of P_delta o Z on the net's convex hull with a damped multi-start
 * iteration (vertices of the polytope first, then the barycenter, then
 * seeded random starts). Iterates whose image leaves the covered region
 * refine the net, which keeps the covering property. Failures are reported
 * per stage with the best residual reached, never hidden.
 */
struct FixedPointTrace {
    struct Stage {
        double delta = 0.0;
        double residual = 0.0; // ||v_k - Z(v_k)||_*
        int centers = 0;
        int finder_steps = 0;
        bool stalled = false;
    };
    std::vector<Stage> stages;
    Point fixed_point;
    double final_residual = 0.0;
    bool all_stages_converged = true;
};

struct ScheduleOptions {
    int sample_count = 20000;
    int random_starts = 4;
    int max_finder_steps = 400;
    double finder_tol = 1e-12;
    std::uint64_t seed = 1;
};

inline FixedPointTrace schauder_iterate(const std::function<Point(const Point&)>& map,
                                        const Polytope& polytope, const WeakStarMetric& metric,
                                        const std::vector<double>& delta_sequence,
                                        const ScheduleOptions& opts = {}) {
    FixedPointTrace trace;
    std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);

    for (double delta : delta_sequence) {
        NetCover net = NetCover::build(polytope, metric, delta, opts.sample_count, opts.seed);

        std::vector<Point> starts = polytope.vertices();
        starts.push_back(polytope.barycenter());
        for (int r = 0; r < opts.random_starts; ++r) starts.push_back(polytope.sample(rng));

        FixedPointTrace::Stage stage;
        stage.delta = delta;
        stage.stalled = true;
        stage.residual = 1e300;
        Point best_point;

        // one damped run; with_projection iterates the projected map
        // P_delta o Z, without it the run polishes candidates on the raw map
        auto run = [&](const Point& start, double damping, bool with_projection,
                       int& steps_taken) -> std::pair<Point, bool> {
            Point x = start;
            for (int step = 1; step <= opts.max_finder_steps; ++step) {
                Point z = map(x);
                Point target;
                if (with_projection) {
                    if (metric.distance(z, *std::min_element(
                                               net.centers.begin(), net.centers.end(),
                                               [&](const Point& a, const Point& b) {
                                                   return metric.distance(z, a) < metric.distance(z, b);
                                               })) >= net.delta)
                        net.add_center(z); // refine: keeps every iterate covered
                    target = project(z, net);
                } else {
                    target = std::move(z);
                }
                Point next(x.size());
                for (std::size_t i = 0; i < x.size(); ++i)
                    next[i] = (1.0 - damping) * x[i] + damping * target[i];
                const double moved = metric.distance(next, x);
                x = std::move(next);
                if (moved <= opts.finder_tol) {
                    steps_taken = step;
                    return {std::move(x), true};
                }
            }
            steps_taken = opts.max_finder_steps;
            return {std::move(x), false};
        };

        auto consider = [&](const Point& x, bool accepted, int steps) {
            if (!polytope.contains(x, 1e-7)) return;
            const double residual = metric.distance(x, map(x));
            if (residual < stage.residual) {
                stage.residual = residual;
                best_point = x;
                stage.finder_steps = steps;
                if (accepted) stage.stalled = false;
            }
        };

        for (const Point& start : starts) {
            for (bool with_projection : {true, false})
                for (double damping : {1.0, 0.5, 0.25}) {
                    int steps = 0;
                    auto [x, accepted] = run(start, damping, with_projection, steps);
                    consider(x, accepted, steps);
                    if (accepted) break;
                }
            if (!stage.stalled && stage.residual <= opts.finder_tol) break;
        }

        stage.centers = static_cast<int>(net.centers.size());
        trace.stages.push_back(stage);
        if (stage.stalled) trace.all_stages_converged = false;
        if (!best_point.empty()) {
            trace.fixed_point = best_point;
            trace.final_residual = stage.residual;
        }
    }
    return trace;
}

/// Cyclic convolution squaring on the probability simplex: Z(mu) = mu * mu.
inline Point convolution_square(const Point& mu) {
    const std::size_t d = mu.size();
    Point out(d, 0.0);
    for (std::size_t a = 0; a < d; ++a) {
        if (mu[a] == 0.0) continue;
        for (std::size_t b = 0; b < d; ++b) out[(a + b) % d] += mu[a] * mu[b];
    }
    return out;
}

} // namespace polyhess::fixedpoint
