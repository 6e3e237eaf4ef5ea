#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "fal/metrics.hpp"

using namespace fal;

namespace {

// Test-side assignment oracle: enumerate every permutation.
double brute_force_assignment(const std::vector<Point>& centroids,
                              const std::vector<Point>& selected) {
    const int B = static_cast<int>(centroids.size());
    std::vector<int> perm(B);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int b = 0; b < B; ++b) total += squared_distance(centroids[b], selected[perm[b]]);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

std::vector<Point> random_points(int n, int dim, uint64_t seed) {
    Rng rng(seed);
    std::vector<Point> pts(n, Point(dim));
    for (auto& p : pts)
        for (double& v : p) v = rng.normal();
    return pts;
}

Dataset tiny_dataset(const std::vector<int>& labels, int C) {
    Dataset d;
    d.num_classes = C;
    for (size_t i = 0; i < labels.size(); ++i)
        d.examples.push_back({static_cast<int>(i), {0.0, 0.0}, labels[i]});
    return d;
}

}  // namespace

TEST_CASE("emd identities") {
    std::vector<double> uniform10(10, 0.1);
    CHECK(emd(uniform10, uniform10) == 0.0);
    std::vector<double> onehot(10, 0.0);
    onehot[0] = 1.0;
    CHECK(std::abs(emd(onehot, uniform10) - 0.9) < 1e-12);
    CHECK(emd({0.7, 0.3}, {0.5, 0.5}) == doctest::Approx(0.2));
    CHECK(emd({0.7, 0.3}, {0.5, 0.5}, 1.0) == doctest::Approx(0.4));  // plain L1 convention
    CHECK_THROWS_AS(emd({0.5, 0.5}, {1.0}), ShapeMismatchError);
}

TEST_CASE("emd is symmetric, non-negative, zero iff equal") {
    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> p(5), q(5);
        double sp = 0.0, sq = 0.0;
        for (int i = 0; i < 5; ++i) {
            p[i] = rng.uniform_real() + 1e-6;
            q[i] = rng.uniform_real() + 1e-6;
            sp += p[i];
            sq += q[i];
        }
        for (int i = 0; i < 5; ++i) {
            p[i] /= sp;
            q[i] /= sq;
        }
        CHECK(emd(p, q) == emd(q, p));
        CHECK(emd(p, q) >= 0.0);
        CHECK(emd(p, p) == 0.0);
        if (p != q) CHECK(emd(p, q) > 0.0);
    }
}

TEST_CASE("local and global emd over label states") {
    // Complementary one-hot clients: globally balanced, locally extreme.
    Dataset d = tiny_dataset({0, 0, 1, 1}, 2);
    LabelState state;
    state.labeled = {{0, 1}, {2, 3}};
    state.unlabeled = {{}, {}};
    CHECK(local_emd(state, d) == doctest::Approx(0.5));
    CHECK(global_emd(state, d) == doctest::Approx(0.0));

    // Balanced everywhere.
    Dataset d2 = tiny_dataset({0, 1, 0, 1}, 2);
    LabelState state2;
    state2.labeled = {{0, 1}, {2, 3}};
    state2.unlabeled = {{}, {}};
    CHECK(local_emd(state2, d2) == doctest::Approx(0.0));
    CHECK(global_emd(state2, d2) == doctest::Approx(0.0));

    // Single client: local equals the plain emd of that client.
    Dataset d3 = tiny_dataset({0, 0, 2}, 3);
    LabelState state3;
    state3.labeled = {{0, 1, 2}};
    state3.unlabeled = {{}};
    double expect = emd(class_distribution(d3, {0, 1, 2}), uniform_distribution(3));
    CHECK(local_emd(state3, d3) == doctest::Approx(expect));
    CHECK(global_emd(state3, d3) == doctest::Approx(expect));

    // Hand-built 3-class, 2-client average.
    Dataset d4 = tiny_dataset({0, 0, 0, 1, 1, 2}, 3);
    LabelState state4;
    state4.labeled = {{0, 1, 2}, {3, 4, 5}};
    state4.unlabeled = {{}, {}};
    double c1 = emd(std::vector<double>{1.0, 0.0, 0.0}, uniform_distribution(3));
    double c2 = emd(std::vector<double>{0.0, 2.0 / 3, 1.0 / 3}, uniform_distribution(3));
    CHECK(local_emd(state4, d4) == doctest::Approx(0.5 * (c1 + c2)));
}

TEST_CASE("t-score: identical, hand-computed and degenerate cases") {
    std::vector<double> same = {0.5, 0.6, 0.7, 0.8};
    CHECK(t_score(same, same) == 0.0);

    std::vector<double> ai = {0.70, 0.72, 0.68, 0.74};
    std::vector<double> aj = {0.60, 0.61, 0.59, 0.62};
    // Longhand: diffs {0.10,0.11,0.09,0.12}, mu = 0.105,
    // sigma = sqrt((2*0.005^2 + 2*0.015^2)/3) = 0.0129099, t = 2*0.105/sigma.
    double mu = 0.105;
    double sigma = std::sqrt((2 * 0.005 * 0.005 + 2 * 0.015 * 0.015) / 3.0);
    double expect = 2.0 * mu / sigma;
    CHECK(t_score(ai, aj) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(t_score(ai, aj) - 16.27) < 0.01);

    // Constant positive difference (binary-exact values so sigma is exactly
    // zero): the +inf sentinel counts as a deterministic win.
    std::vector<double> base = {0.5, 0.625, 0.75};
    std::vector<double> shifted = {0.625, 0.75, 0.875};
    CHECK(std::isinf(t_score(shifted, base)));
    CHECK(t_score(shifted, base) > 0.0);
    CHECK(t_score(base, shifted) < 0.0);

    CHECK_THROWS_AS(t_score({0.5}, {0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(t_score({0.5}, {0.5}), std::invalid_argument);
}

TEST_CASE("t-score antisymmetry") {
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> a(4), b(4);
        for (int i = 0; i < 4; ++i) {
            a[i] = rng.uniform_real();
            b[i] = rng.uniform_real();
        }
        CHECK(t_score(a, b) == -t_score(b, a));
    }
}

TEST_CASE("winning rate on raw t-scores") {
    CHECK(winning_rate(std::vector<double>{3.0, 1.0, 5.0, 2.9}) == 0.75);
    CHECK(winning_rate(std::vector<double>{0.0, 0.0, 0.0}) == 0.0);
    // A strategy never beats itself.
    AccuracySeries self;
    self.strategy = "x";
    self.rounds = {{0.5, 0.6, 0.7, 0.8}, {0.6, 0.7, 0.8, 0.9}};
    CHECK(winning_rate(self, self) == 0.0);
}

TEST_CASE("winning rates of a pair never sum above one") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        AccuracySeries a, b;
        a.strategy = "a";
        b.strategy = "b";
        for (int r = 0; r < 5; ++r) {
            std::vector<double> ra(4), rb(4);
            for (int i = 0; i < 4; ++i) {
                ra[i] = rng.uniform_real();
                rb[i] = rng.uniform_real();
            }
            a.rounds.push_back(ra);
            b.rounds.push_back(rb);
        }
        CHECK(winning_rate(a, b) + winning_rate(b, a) <= 1.0);
    }
}

TEST_CASE("t critical values and the default threshold") {
    CHECK(default_t_threshold(4) == 2.776);
    CHECK(default_t_threshold(8) == doctest::Approx(2.365));
    CHECK(default_t_threshold(2) == doctest::Approx(12.706));
    CHECK(default_t_threshold(100) == doctest::Approx(1.960));
    CHECK_THROWS_AS(default_t_threshold(1), std::invalid_argument);
}

TEST_CASE("penalty matrix: identical strategies produce zeros") {
    AccuracySeries a, b;
    a.strategy = "a";
    b.strategy = "b";
    a.rounds = b.rounds = {{0.5, 0.6, 0.7, 0.8}, {0.6, 0.7, 0.75, 0.8}};
    PenaltyMatrix pm = penalty_matrix({{a, b}});
    CHECK(pm.cells[0][0] == 0.0);
    CHECK(pm.cells[1][1] == 0.0);
    CHECK(pm.cells[0][1] == 0.0);
    CHECK(pm.cells[1][0] == 0.0);
}

TEST_CASE("penalty matrix: single setting reduces to the winning rate") {
    AccuracySeries strong, weak;
    strong.strategy = "strong";
    weak.strategy = "weak";
    // Constant gap: sigma = 0 so every round is an infinite-t win.
    strong.rounds = {{0.9, 0.9, 0.9, 0.9}, {0.95, 0.95, 0.95, 0.95}};
    weak.rounds = {{0.5, 0.5, 0.5, 0.5}, {0.55, 0.55, 0.55, 0.55}};
    PenaltyMatrix pm = penalty_matrix({{strong, weak}});
    CHECK(pm.cells[0][1] == winning_rate(strong, weak));
    CHECK(pm.cells[0][1] == 1.0);
    CHECK(pm.cells[1][0] == 0.0);
}

TEST_CASE("penalty matrix: three strategies across two settings") {
    auto flat = [](double v) { return std::vector<double>{v, v, v, v}; };
    AccuracySeries a, b, c;
    a.strategy = "a";
    b.strategy = "b";
    c.strategy = "c";
    // Setting 1: a > b > c on every round (deterministic wins).
    a.rounds = {flat(0.9), flat(0.9)};
    b.rounds = {flat(0.7), flat(0.7)};
    c.rounds = {flat(0.5), flat(0.5)};
    std::vector<AccuracySeries> s1 = {a, b, c};
    // Setting 2: b wins round 1 only; a and c tie everywhere.
    a.rounds = {flat(0.6), flat(0.6)};
    b.rounds = {flat(0.8), flat(0.6)};
    c.rounds = {flat(0.6), flat(0.6)};
    std::vector<AccuracySeries> s2 = {a, b, c};

    PenaltyMatrix pm = penalty_matrix({s1, s2});
    CHECK(pm.cells[0][1] == doctest::Approx(1.0));        // a beats b only in setting 1
    CHECK(pm.cells[1][0] == doctest::Approx(0.5));        // b beats a in half of setting 2
    CHECK(pm.cells[0][2] == doctest::Approx(1.0));
    CHECK(pm.cells[2][0] == doctest::Approx(0.0));
    CHECK(pm.cells[1][2] == doctest::Approx(1.5));        // all of setting 1, half of setting 2
    auto defeats = pm.defeat_means();
    CHECK(defeats[2] == doctest::Approx((1.0 + 1.5) / 2));

    AccuracySeries wrong = c;
    wrong.strategy = "d";
    CHECK_THROWS_AS(penalty_matrix({s1, {a, b, wrong}}), std::invalid_argument);
}

TEST_CASE("transport cost: identity, single pair, crossing") {
    std::vector<Point> cents = {{0.0}, {10.0}};
    CHECK(transport_cost_M(cents, cents) == 0.0);
    CHECK(transport_cost_M({{1.0, 1.0}}, {{4.0, 5.0}}) == doctest::Approx(25.0));
    // Crossed assignment beats identity.
    std::vector<Point> sel = {{9.5}, {0.5}};
    CHECK(transport_cost_M(cents, sel) == doctest::Approx(0.5));
    CHECK_THROWS_AS(transport_cost_M(cents, {{1.0}}), std::invalid_argument);
}

TEST_CASE("transport cost is minimal over every permutation") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        int B = 2 + static_cast<int>(seed % 5);  // 2..6
        auto cents = random_points(B, 3, derive_seed(seed, "c"));
        auto sel = random_points(B, 3, derive_seed(seed, "s"));
        double m = transport_cost_M(cents, sel);
        CHECK(m == doctest::Approx(brute_force_assignment(cents, sel)));
    }
}

TEST_CASE("hungarian path agrees with enumeration beyond the cutoff") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        auto cents = random_points(9, 2, derive_seed(seed, "hc"));
        auto sel = random_points(9, 2, derive_seed(seed, "hs"));
        double viaHungarian = transport_cost_M(cents, sel);  // B = 9 > 8
        double brute = brute_force_assignment(cents, sel);
        CHECK(viaHungarian == doctest::Approx(brute).epsilon(1e-9));
    }
}
