#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "fal/errors.hpp"
#include "fal/rng.hpp"

namespace fal {

using Point = std::vector<double>;

inline double squared_distance(const Point& a, const Point& b) {
    double d2 = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double diff = a[i] - b[i];
        d2 += diff * diff;
    }
    return d2;
}

inline size_t count_distinct(const std::vector<Point>& points) {
    std::vector<Point> sorted = points;
    std::sort(sorted.begin(), sorted.end());
    return static_cast<size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

struct Clustering {
    std::vector<Point> centroids;
    std::vector<int> assignments;  // per-point cluster index
    double objective = 0.0;        // J = sum_i ||x_i - mu_assign(i)||^2

    int num_clusters() const { return static_cast<int>(centroids.size()); }

    std::vector<std::vector<int>> members() const {
        std::vector<std::vector<int>> m(centroids.size());
        for (size_t i = 0; i < assignments.size(); ++i) m[assignments[i]].push_back(static_cast<int>(i));
        return m;
    }
};

namespace detail {

// k-means++ seeding: first pick uniform, each next proportional to squared
// distance to the nearest chosen centroid. With fewer distinct points than
// requested the D^2 mass runs out; tolerate_duplicates then falls back to a
// uniform draw over the unchosen points (BADGE's degenerate-tie case).
inline std::vector<int> kmeans_pp_indices(const std::vector<Point>& points, int num_centroids,
                                          Rng& rng, bool tolerate_duplicates) {
    const size_t n = points.size();
    std::vector<int> chosen;
    chosen.reserve(num_centroids);
    std::vector<char> is_chosen(n, 0);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    size_t first = rng.uniform_index(n);
    chosen.push_back(static_cast<int>(first));
    is_chosen[first] = 1;
    for (size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], points[first]);

    while (chosen.size() < static_cast<size_t>(num_centroids)) {
        double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        size_t next;
        if (total > 0.0) {
            next = rng.weighted_index(d2);
        } else {
            require(tolerate_duplicates, "kmeans++: fewer distinct points than centroids");
            size_t remaining = n - chosen.size();
            size_t pick = rng.uniform_index(remaining);
            next = 0;
            for (size_t i = 0, seen = 0; i < n; ++i) {
                if (is_chosen[i]) continue;
                if (seen++ == pick) {
                    next = i;
                    break;
                }
            }
        }
        chosen.push_back(static_cast<int>(next));
        is_chosen[next] = 1;
        for (size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], points[next]));
    }
    return chosen;
}

}  // namespace detail

// Returns indices of the seeded points (centroids are points[index]).
inline std::vector<int> kmeans_pp_seed(const std::vector<Point>& points, int num_centroids,
                                       uint64_t seed) {
    require(num_centroids >= 1, "kmeans++: need at least 1 centroid");
    require(!points.empty(), "kmeans++: no points");
    require(static_cast<size_t>(num_centroids) <= count_distinct(points),
            "kmeans++: fewer distinct points than centroids");
    Rng rng(seed);
    return detail::kmeans_pp_indices(points, num_centroids, rng, /*tolerate_duplicates=*/false);
}

// Lloyd's algorithm with k-means++ seeding. Assignment ties break to the
// lowest cluster index; empty clusters are re-seeded at the point currently
// farthest from its centroid, which keeps exactly B non-empty clusters and
// cannot increase J.
inline Clustering lloyd(const std::vector<Point>& points, int num_clusters, uint64_t seed,
                        int max_iters = 100, double tol = 1e-6) {
    require(num_clusters >= 1, "lloyd: need at least 1 cluster");
    require(max_iters >= 1, "lloyd: max_iters must be >= 1");
    require(!points.empty(), "lloyd: no points");
    require(static_cast<size_t>(num_clusters) <= count_distinct(points),
            "lloyd: fewer distinct points than clusters");

    const size_t n = points.size();
    Rng rng(derive_seed(seed, "lloyd-seed"));
    std::vector<int> seeds = detail::kmeans_pp_indices(points, num_clusters, rng, false);

    Clustering result;
    for (int idx : seeds) result.centroids.push_back(points[idx]);
    result.assignments.assign(n, 0);

    auto assign_all = [&]() {
        double j_total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_b = 0;
            for (int b = 0; b < num_clusters; ++b) {
                double d2 = squared_distance(points[i], result.centroids[b]);
                if (d2 < best) {
                    best = d2;
                    best_b = b;
                }
            }
            result.assignments[i] = best_b;
            j_total += best;
        }
        return j_total;
    };

    result.objective = assign_all();
    for (int iter = 0; iter < max_iters; ++iter) {
        // M-step: centroid means.
        size_t dim = points[0].size();
        std::vector<Point> new_centroids(num_clusters, Point(dim, 0.0));
        std::vector<int> sizes(num_clusters, 0);
        for (size_t i = 0; i < n; ++i) {
            int b = result.assignments[i];
            sizes[b]++;
            for (size_t j = 0; j < dim; ++j) new_centroids[b][j] += points[i][j];
        }
        for (int b = 0; b < num_clusters; ++b)
            if (sizes[b] > 0)
                for (size_t j = 0; j < dim; ++j) new_centroids[b][j] /= sizes[b];

        // Empty-cluster repair: seed at the farthest point, one cluster at a time.
        for (int b = 0; b < num_clusters; ++b) {
            if (sizes[b] > 0) continue;
            double worst = -1.0;
            size_t far_idx = 0;
            for (size_t i = 0; i < n; ++i) {
                int a = result.assignments[i];
                if (sizes[a] <= 1) continue;  // donor cluster must stay non-empty
                double d2 = squared_distance(points[i], new_centroids[a]);
                if (d2 > worst) {
                    worst = d2;
                    far_idx = i;
                }
            }
            require(worst >= 0.0, "lloyd: cannot repair empty cluster");
            sizes[result.assignments[far_idx]]--;
            new_centroids[b] = points[far_idx];
            result.assignments[far_idx] = b;
            sizes[b] = 1;
        }

        double moved = 0.0;
        for (int b = 0; b < num_clusters; ++b)
            moved = std::max(moved, squared_distance(result.centroids[b], new_centroids[b]));
        result.centroids = std::move(new_centroids);

        double new_objective = assign_all();
        // EM steps cannot increase J; tolerate only float noise.
        require(new_objective <= result.objective * (1.0 + 1e-12) + 1e-12,
                "lloyd: objective increased");
        result.objective = new_objective;
        if (std::sqrt(moved) < tol) break;
    }

    // Final guard: every cluster non-empty.
    std::vector<int> sizes(num_clusters, 0);
    for (int a : result.assignments) sizes[a]++;
    for (int b = 0; b < num_clusters; ++b)
        require(sizes[b] > 0, "lloyd: empty cluster in result");
    return result;
}

// Independent restarts with derived seeds; lowest J wins.
inline Clustering lloyd_best_of(const std::vector<Point>& points, int num_clusters, uint64_t seed,
                                int restarts, int max_iters = 100, double tol = 1e-6) {
    require(restarts >= 1, "lloyd_best_of: restarts must be >= 1");
    Clustering best;
    bool have = false;
    for (int r = 0; r < restarts; ++r) {
        Clustering c = lloyd(points, num_clusters, derive_seed(seed, "restart", static_cast<uint64_t>(r)),
                             max_iters, tol);
        if (!have || c.objective < best.objective) {
            best = std::move(c);
            have = true;
        }
    }
    return best;
}

}  // namespace fal
