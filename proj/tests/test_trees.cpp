#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "esgmi/errors.hpp"
#include "esgmi/trees.hpp"

using namespace esgmi;

namespace {

FeatureMatrix make_matrix(std::size_t rows, std::size_t cols) {
    FeatureMatrix X;
    X.n_rows = rows;
    X.n_cols = cols;
    X.values.assign(rows * cols, 0.0);
    X.mask.assign(rows * cols, 1);
    return X;
}

double sse(const std::vector<double>& ys) {
    if (ys.empty()) return 0.0;
    double s = 0, ss = 0;
    for (double y : ys) {
        s += y;
        ss += y * y;
    }
    return std::max(0.0, ss - s * s / static_cast<double>(ys.size()));
}

struct OracleSplit {
    double gain = 0.0;
    bool found = false;
};

// exhaustive enumeration of (feature, threshold, missing routing)
OracleSplit best_split_oracle(const FeatureMatrix& X, const std::vector<double>& y,
                              int min_leaf) {
    OracleSplit best;
    std::vector<double> all(y);
    double parent = sse(all);
    for (std::size_t f = 0; f < X.n_cols; ++f) {
        std::set<double> values;
        for (std::size_t r = 0; r < X.n_rows; ++r)
            if (X.observed(r, f)) values.insert(X.at(r, f));
        std::vector<double> thresholds(values.begin(), values.end());
        // midpoints plus the boundary thresholds used for missing-only splits
        std::vector<double> cands;
        for (std::size_t i = 0; i + 1 < thresholds.size(); ++i)
            cands.push_back(0.5 * (thresholds[i] + thresholds[i + 1]));
        if (!thresholds.empty()) {
            cands.push_back(thresholds.back());
            cands.push_back(std::nextafter(thresholds.front(),
                                           -std::numeric_limits<double>::infinity()));
        }
        for (double thr : cands)
            for (bool miss_left : {true, false}) {
                std::vector<double> L, R;
                for (std::size_t r = 0; r < X.n_rows; ++r) {
                    bool left = X.observed(r, f) ? X.at(r, f) <= thr : miss_left;
                    (left ? L : R).push_back(y[r]);
                }
                if (L.size() < static_cast<std::size_t>(min_leaf) ||
                    R.size() < static_cast<std::size_t>(min_leaf))
                    continue;
                double gain = parent - sse(L) - sse(R);
                if (gain > best.gain + 1e-12) {
                    best.gain = gain;
                    best.found = true;
                }
            }
    }
    return best;
}

}  // namespace

TEST_CASE("constant target yields a single leaf") {
    FeatureMatrix X = make_matrix(10, 2);
    Rng rng(1);
    for (std::size_t r = 0; r < 10; ++r) X.values[r * 2] = static_cast<double>(r);
    std::vector<double> y(10, 3.5);
    Tree t = fit_tree(X, y, {16, 1, 0}, rng);
    CHECK(t.nodes.size() == 1);
    CHECK(t.nodes[0].value == 3.5);
}

TEST_CASE("step function splits between 2 and 3") {
    FeatureMatrix X = make_matrix(4, 1);
    for (std::size_t r = 0; r < 4; ++r) X.values[r] = static_cast<double>(r + 1);
    std::vector<double> y{0, 0, 10, 10};
    Rng rng(2);
    Tree t = fit_tree(X, y, {16, 1, 0}, rng);
    REQUIRE(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold > 2.0);
    CHECK(t.nodes[0].threshold < 3.0);
    const std::uint8_t obs = 1;
    double lo = 1.0, hi = 4.0;
    CHECK(t.predict_row(&lo, &obs) == 0.0);
    CHECK(t.predict_row(&hi, &obs) == 10.0);
}

TEST_CASE("missingness that determines the target is learnable") {
    // 20 rows: missing feature -> y = 1, observed -> y = 0
    FeatureMatrix X = make_matrix(20, 2);
    Rng data_rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> y(20);
    for (std::size_t r = 0; r < 20; ++r) {
        X.values[r * 2] = u(data_rng);
        if (r % 2 == 0) {
            X.mask[r * 2 + 1] = 0;
            X.values[r * 2 + 1] = Dataset::kMissing;
            y[r] = 1.0;
        } else {
            X.values[r * 2 + 1] = u(data_rng);
            y[r] = 0.0;
        }
    }
    Rng rng(4);
    Tree t = fit_tree(X, y, {16, 1, 0}, rng);
    for (std::size_t r = 0; r < 20; ++r)
        CHECK(t.predict(X, r) == y[r]);
}

TEST_CASE("root split matches exhaustive gain enumeration on small instances") {
    Rng rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> p(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        std::size_t n = 6 + static_cast<std::size_t>(p(rng) * 10);  // <= 16 rows
        FeatureMatrix X = make_matrix(n, 3);
        std::vector<double> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            y[r] = u(rng);
            for (std::size_t c = 0; c < 3; ++c) {
                if (p(rng) < 0.25) {
                    X.mask[r * 3 + c] = 0;
                    X.values[r * 3 + c] = Dataset::kMissing;
                } else {
                    X.values[r * 3 + c] = u(rng);
                }
            }
        }
        OracleSplit oracle = best_split_oracle(X, y, 2);
        Rng fit_rng(100 + trial);
        Tree t = fit_tree(X, y, {1, 2, 0}, fit_rng);  // root-only tree
        if (!oracle.found) {
            CHECK(t.nodes[0].feature == -1);
            continue;
        }
        REQUIRE(t.nodes[0].feature >= 0);
        // recompute the tree's own gain and compare against the oracle optimum
        std::vector<double> L, R;
        for (std::size_t r = 0; r < n; ++r) {
            bool left = X.observed(r, t.nodes[0].feature)
                            ? X.at(r, t.nodes[0].feature) <= t.nodes[0].threshold
                            : t.nodes[0].missing_left;
            (left ? L : R).push_back(y[r]);
        }
        double tree_gain = sse(y) - sse(L) - sse(R);
        CHECK(tree_gain == doctest::Approx(oracle.gain).epsilon(1e-9));
    }
}

TEST_CASE("learned missing routing never loses to a forced routing") {
    Rng rng(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> p(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        std::size_t n = 8 + static_cast<std::size_t>(p(rng) * 8);
        FeatureMatrix X = make_matrix(n, 2);
        std::vector<double> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            y[r] = u(rng);
            for (std::size_t c = 0; c < 2; ++c) {
                if (p(rng) < 0.3) {
                    X.mask[r * 2 + c] = 0;
                    X.values[r * 2 + c] = Dataset::kMissing;
                } else {
                    X.values[r * 2 + c] = u(rng);
                }
            }
        }
        Rng fit_rng(trial);
        Tree t = fit_tree(X, y, {1, 1, 0}, fit_rng);
        if (t.nodes[0].feature < 0) continue;
        int f = t.nodes[0].feature;
        double thr = t.nodes[0].threshold;
        auto gain_with = [&](bool miss_left) {
            std::vector<double> L, R;
            for (std::size_t r = 0; r < n; ++r) {
                bool left = X.observed(r, f) ? X.at(r, f) <= thr : miss_left;
                (left ? L : R).push_back(y[r]);
            }
            if (L.empty() || R.empty()) return -1.0;
            return sse(y) - sse(L) - sse(R);
        };
        double learned = gain_with(t.nodes[0].missing_left);
        CHECK(learned >= gain_with(true) - 1e-12);
        CHECK(learned >= gain_with(false) - 1e-12);
    }
}

TEST_CASE("single-tree OOB predictions cover exactly the out-of-bootstrap rows") {
    FeatureMatrix X = make_matrix(12, 1);
    std::vector<double> y(12);
    for (std::size_t r = 0; r < 12; ++r) {
        X.values[r] = static_cast<double>(r);
        y[r] = static_cast<double>(r);
    }
    ForestModel model = fit_forest(X, y, {1, {4, 1, 0}}, 5);
    std::set<std::size_t> inbag(model.bootstrap_indices[0].begin(),
                                model.bootstrap_indices[0].end());
    for (std::size_t r = 0; r < 12; ++r)
        CHECK(model.has_oob(r) == (inbag.count(r) == 0));
}

TEST_CASE("forest on constant target predicts the constant") {
    FeatureMatrix X = make_matrix(20, 3);
    Rng rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : X.values) v = u(rng);
    std::vector<double> y(20, -2.5);
    ForestModel model = fit_forest(X, y, {10, {8, 2, 0}}, 3);
    for (double pred : forest_predict(model, X)) CHECK(pred == -2.5);
}

TEST_CASE("per-tree OOB fraction matches the analytic bootstrap exclusion rate") {
    const std::size_t n = 1000;
    FeatureMatrix X = make_matrix(n, 1);
    std::vector<double> y(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) X.values[r] = static_cast<double>(r % 7);
    ForestModel model = fit_forest(X, y, {50, {1, 500, 0}}, 11);
    double expected = std::pow(1.0 - 1.0 / static_cast<double>(n),
                               static_cast<double>(n));  // ~ e^-1
    double total_oob = 0;
    for (const auto& boot : model.bootstrap_indices) {
        std::set<std::size_t> inbag(boot.begin(), boot.end());
        total_oob += static_cast<double>(n - inbag.size()) / static_cast<double>(n);
    }
    double mean_oob = total_oob / static_cast<double>(model.trees.size());
    CHECK(std::abs(mean_oob - expected) < 0.03);
}

TEST_CASE("two-tree forest prediction is the mean of its trees") {
    FeatureMatrix X = make_matrix(30, 2);
    Rng rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> y(30);
    for (std::size_t r = 0; r < 30; ++r) {
        X.values[r * 2] = u(rng);
        X.values[r * 2 + 1] = u(rng);
        y[r] = X.values[r * 2] * 2.0;
    }
    ForestModel model = fit_forest(X, y, {2, {8, 2, 0}}, 19);
    std::vector<double> preds = forest_predict(model, X);
    for (std::size_t r = 0; r < 30; ++r) {
        double mean = 0.5 * (model.trees[0].predict(X, r) + model.trees[1].predict(X, r));
        CHECK(preds[r] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("an all-missing row still yields a finite prediction") {
    FeatureMatrix X = make_matrix(20, 2);
    Rng rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> y(20);
    for (std::size_t r = 0; r < 20; ++r) {
        X.values[r * 2] = u(rng);
        X.values[r * 2 + 1] = u(rng);
        y[r] = X.values[r * 2];
    }
    ForestModel model = fit_forest(X, y, {5, {8, 2, 0}}, 29);
    std::vector<double> vals{Dataset::kMissing, Dataset::kMissing};
    std::vector<std::uint8_t> mask{0, 0};
    CHECK(std::isfinite(forest_predict_row(model, vals.data(), mask.data())));
}

TEST_CASE("deep single tree recovers training targets on separable data") {
    FeatureMatrix X = make_matrix(8, 1);
    std::vector<double> y(8);
    for (std::size_t r = 0; r < 8; ++r) {
        X.values[r] = static_cast<double>(r) * 10.0;
        y[r] = static_cast<double>(r);
    }
    Rng rng(31);
    std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7};
    Tree t = fit_tree_on_rows(X, y, rows, {16, 1, 0}, rng);
    for (std::size_t r = 0; r < 8; ++r) CHECK(t.predict(X, r) == y[r]);
}

TEST_CASE("oob_residuals matches brute-force recomputation") {
    FeatureMatrix X = make_matrix(40, 2);
    Rng rng(37);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> y(40);
    for (std::size_t r = 0; r < 40; ++r) {
        X.values[r * 2] = u(rng);
        X.values[r * 2 + 1] = u(rng);
        y[r] = 3.0 * X.values[r * 2] + u(rng) * 0.1;
    }
    ForestModel model = fit_forest(X, y, {7, {8, 2, 0}}, 41);
    auto residuals = oob_residuals(model, y);

    // oracle: rerun each tree on its own OOB rows
    std::vector<double> sum(40, 0.0);
    std::vector<int> cnt(40, 0);
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        std::set<std::size_t> inbag(model.bootstrap_indices[t].begin(),
                                    model.bootstrap_indices[t].end());
        for (std::size_t r = 0; r < 40; ++r)
            if (!inbag.count(r)) {
                sum[r] += model.trees[t].predict(X, r);
                ++cnt[r];
            }
    }
    std::size_t idx = 0;
    for (std::size_t r = 0; r < 40; ++r) {
        if (cnt[r] == 0) continue;
        REQUIRE(idx < residuals.size());
        CHECK(residuals[idx].row == r);
        CHECK(residuals[idx].residual ==
              doctest::Approx(y[r] - sum[r] / cnt[r]).epsilon(1e-12));
        ++idx;
    }
    CHECK(idx == residuals.size());
}

TEST_CASE("constant-target forest has all-zero OOB residuals") {
    FeatureMatrix X = make_matrix(15, 1);
    for (std::size_t r = 0; r < 15; ++r) X.values[r] = static_cast<double>(r);
    std::vector<double> y(15, 4.0);
    ForestModel model = fit_forest(X, y, {5, {4, 2, 0}}, 43);
    for (const auto& res : oob_residuals(model, y)) CHECK(res.residual == 0.0);
}

TEST_CASE("forest prediction rejects a feature-count mismatch") {
    FeatureMatrix X = make_matrix(10, 2);
    std::vector<double> y(10, 1.0);
    ForestModel model = fit_forest(X, y, {2, {4, 2, 0}}, 47);
    FeatureMatrix bad = make_matrix(3, 3);
    CHECK_THROWS_AS(forest_predict(model, bad), ConfigError);
}

TEST_CASE("parallel and sequential forest fits are identical") {
    FeatureMatrix X = make_matrix(60, 3);
    Rng rng(53);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> y(60);
    for (std::size_t r = 0; r < 60; ++r) {
        for (std::size_t c = 0; c < 3; ++c) X.values[r * 3 + c] = u(rng);
        y[r] = X.values[r * 3] - X.values[r * 3 + 2];
    }
    ForestModel seq = fit_forest(X, y, {8, {8, 2, 2}}, 59, 1);
    ForestModel par = fit_forest(X, y, {8, {8, 2, 2}}, 59, 4);
    REQUIRE(seq.trees.size() == par.trees.size());
    CHECK(seq.bootstrap_indices == par.bootstrap_indices);
    std::vector<double> ps = forest_predict(seq, X);
    std::vector<double> pp = forest_predict(par, X);
    CHECK(ps == pp);
}
