#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "fal/clustering.hpp"
#include "fal/data.hpp"
#include "fal/errors.hpp"
#include "fal/federation.hpp"

namespace fal {

// Class-distribution distance. factor 0.5 gives the total-variation form
// 0.5 * sum |p_c - q_c|; factor 1.0 gives plain L1.
inline double emd(const std::vector<double>& p, const std::vector<double>& q, double factor = 0.5) {
    if (p.size() != q.size())
        throw ShapeMismatchError("emd: distributions of different length");
    double l1 = 0.0;
    for (size_t i = 0; i < p.size(); ++i) l1 += std::abs(p[i] - q[i]);
    return factor * l1;
}

inline std::vector<double> uniform_distribution(int num_classes) {
    return std::vector<double>(num_classes, 1.0 / num_classes);
}

// Mean over clients of the distance between the labeled set's class
// distribution and uniform.
inline double local_emd(const LabelState& state, const Dataset& data, double factor = 0.5) {
    require(state.num_clients() >= 1, "local_emd: no clients");
    auto uniform = uniform_distribution(data.num_classes);
    double total = 0.0;
    for (int k = 0; k < state.num_clients(); ++k)
        total += emd(class_distribution(data, state.labeled[k]), uniform, factor);
    return total / state.num_clients();
}

// Distance between the aggregated labeled set's class distribution and uniform.
inline double global_emd(const LabelState& state, const Dataset& data, double factor = 0.5) {
    require(state.num_clients() >= 1, "global_emd: no clients");
    std::vector<int> all;
    for (const auto& d : state.labeled) all.insert(all.end(), d.begin(), d.end());
    return emd(class_distribution(data, all), uniform_distribution(data.num_classes), factor);
}

// Paired t-score sqrt(n) * mean(diff) / sd(diff), sample standard deviation
// with divisor n-1. A zero sd with nonzero mean yields a signed infinity
// sentinel (a deterministic win or loss); zero mean yields 0.
inline double t_score(const std::vector<double>& a_i, const std::vector<double>& a_j) {
    require(a_i.size() == a_j.size(), "t_score: mismatched seed counts");
    const size_t n = a_i.size();
    require(n >= 2, "t_score: need at least 2 seeds");
    std::vector<double> diff(n);
    for (size_t l = 0; l < n; ++l) diff[l] = a_i[l] - a_j[l];
    double mu = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
    double ss = 0.0;
    for (double d : diff) ss += (d - mu) * (d - mu);
    double sigma = std::sqrt(ss / (n - 1));
    if (sigma == 0.0) {
        if (mu > 0.0) return std::numeric_limits<double>::infinity();
        if (mu < 0.0) return -std::numeric_limits<double>::infinity();
        return 0.0;
    }
    return std::sqrt(static_cast<double>(n)) * mu / sigma;
}

// Two-sided 95% Student-t critical values by degrees of freedom.
inline double student_t_critical_975(int df) {
    static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                   2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                   2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                   2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
    require(df >= 1, "t critical: df must be >= 1");
    if (df <= 30) return table[df - 1];
    return 1.960;
}

// The conventional fixed threshold for four seeds; the tabulated critical
// value at df = n-1 otherwise.
inline double default_t_threshold(int num_seeds) {
    require(num_seeds >= 2, "threshold: need at least 2 seeds");
    if (num_seeds == 4) return 2.776;
    return student_t_critical_975(num_seeds - 1);
}

// Per-round accuracy sets for one strategy: rounds[r][l] is the accuracy of
// seed l at AL round r.
struct AccuracySeries {
    std::string strategy;
    std::vector<std::vector<double>> rounds;

    int num_rounds() const { return static_cast<int>(rounds.size()); }
};

inline std::vector<double> round_t_scores(const AccuracySeries& a, const AccuracySeries& b) {
    require(a.num_rounds() == b.num_rounds(), "winning rate: mismatched round counts");
    std::vector<double> scores;
    scores.reserve(a.rounds.size());
    for (size_t r = 0; r < a.rounds.size(); ++r) scores.push_back(t_score(a.rounds[r], b.rounds[r]));
    return scores;
}

// Fraction of AL rounds in which strategy i beats strategy j, i.e. t > threshold.
inline double winning_rate(const std::vector<double>& t_scores, double threshold = 2.776) {
    require(!t_scores.empty(), "winning rate: no rounds");
    int wins = 0;
    for (double t : t_scores)
        if (t > threshold) wins++;
    return static_cast<double>(wins) / static_cast<double>(t_scores.size());
}

inline double winning_rate(const AccuracySeries& a, const AccuracySeries& b,
                           double threshold = 2.776) {
    return winning_rate(round_t_scores(a, b), threshold);
}

// P_ij = sum over settings of win(i, j). The defeat row gives, per column j,
// the average number of times j is beaten by the other strategies.
struct PenaltyMatrix {
    std::vector<std::string> strategies;
    std::vector<std::vector<double>> cells;

    std::vector<double> defeat_means() const {
        const size_t S = strategies.size();
        std::vector<double> means(S, 0.0);
        if (S < 2) return means;
        for (size_t j = 0; j < S; ++j) {
            double sum = 0.0;
            for (size_t i = 0; i < S; ++i)
                if (i != j) sum += cells[i][j];
            means[j] = sum / static_cast<double>(S - 1);
        }
        return means;
    }
};

// settings[s] holds one AccuracySeries per strategy, same labels and order in
// every setting.
inline PenaltyMatrix penalty_matrix(const std::vector<std::vector<AccuracySeries>>& settings,
                                    double threshold = 2.776) {
    require(!settings.empty(), "penalty matrix: no settings");
    const size_t S = settings[0].size();
    require(S >= 1, "penalty matrix: no strategies");
    PenaltyMatrix out;
    for (const auto& series : settings[0]) out.strategies.push_back(series.strategy);
    for (const auto& setting : settings) {
        require(setting.size() == S, "penalty matrix: ragged settings");
        for (size_t i = 0; i < S; ++i)
            require(setting[i].strategy == out.strategies[i],
                    "penalty matrix: strategy order differs between settings");
    }
    out.cells.assign(S, std::vector<double>(S, 0.0));
    for (const auto& setting : settings)
        for (size_t i = 0; i < S; ++i)
            for (size_t j = 0; j < S; ++j) {
                if (i == j) continue;
                out.cells[i][j] += winning_rate(setting[i], setting[j], threshold);
            }
    return out;
}

namespace detail {

// O(n^3) Hungarian algorithm (potentials formulation) for a square min-cost
// assignment.
inline double hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = match[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j) total += cost[match[j] - 1][j - 1];
    return total;
}

}  // namespace detail

// Minimal one-to-one squared-distance transport between macro centroids and a
// selected set of the same size: exact enumeration up to 8, exact assignment
// solver beyond.
inline double transport_cost_M(const std::vector<Point>& centroids,
                               const std::vector<Point>& selected) {
    require(centroids.size() == selected.size(), "transport cost: size mismatch");
    const int B = static_cast<int>(centroids.size());
    require(B >= 1, "transport cost: empty inputs");

    std::vector<std::vector<double>> cost(B, std::vector<double>(B));
    for (int b = 0; b < B; ++b)
        for (int p = 0; p < B; ++p) cost[b][p] = squared_distance(centroids[b], selected[p]);

    if (B <= 8) {
        std::vector<int> perm(B);
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double total = 0.0;
            for (int b = 0; b < B; ++b) total += cost[b][perm[b]];
            best = std::min(best, total);
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    return detail::hungarian_min_cost(cost);
}

}  // namespace fal
