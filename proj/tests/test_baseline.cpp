#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "esgmi/baseline.hpp"
#include "esgmi/errors.hpp"

using namespace esgmi;

namespace {

Dataset random_dataset(std::size_t rows, std::size_t cols, double missing_rate,
                       Rng& rng) {
    Dataset ds = Dataset::make(rows, cols);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            if (u(rng) >= missing_rate) ds.set(r, c, val(rng));
    return ds;
}

// brute-force oracle: partial distance straight from the definition
std::optional<double> partial_distance_oracle(const Dataset& ds, std::size_t a,
                                              std::size_t b, int min_overlap) {
    int overlap = 0;
    double ss = 0;
    for (std::size_t c = 0; c < ds.n_cols; ++c)
        if (ds.observed(a, c) && ds.observed(b, c)) {
            double d = ds.at(a, c) - ds.at(b, c);
            ss += d * d;
            ++overlap;
        }
    if (overlap < min_overlap) return std::nullopt;
    return std::sqrt(static_cast<double>(ds.n_cols) / overlap * ss);
}

std::optional<double> row_distance(const Dataset& ds, std::size_t a, std::size_t b,
                                   int min_overlap) {
    return partial_euclidean(
        {ds.values.data() + a * ds.n_cols, ds.n_cols},
        {ds.mask.data() + a * ds.n_cols, ds.n_cols},
        {ds.values.data() + b * ds.n_cols, ds.n_cols},
        {ds.mask.data() + b * ds.n_cols, ds.n_cols}, min_overlap);
}

}  // namespace

TEST_CASE("simple impute fills column statistics") {
    Dataset ds = Dataset::make(4, 3);
    // col 0: observed {1, 3}; col 1: {1, 2, 100}; col 2: {5, 5, 7}
    ds.set(0, 0, 1.0);
    ds.set(1, 0, 3.0);
    ds.set(0, 1, 1.0);
    ds.set(1, 1, 2.0);
    ds.set(2, 1, 100.0);
    ds.set(0, 2, 5.0);
    ds.set(1, 2, 5.0);
    ds.set(2, 2, 7.0);

    Dataset mean = simple_impute(ds, Statistic::Mean);
    CHECK(mean.at(2, 0) == 2.0);
    CHECK(mean.complete());
    CHECK(mean.at(0, 0) == 1.0);  // observed cells untouched

    Dataset median = simple_impute(ds, Statistic::Median);
    CHECK(median.at(3, 1) == 2.0);

    Dataset mode = simple_impute(ds, Statistic::Mode);
    CHECK(mode.at(3, 2) == 5.0);
}

TEST_CASE("mode ties break toward the smallest value") {
    Dataset ds = Dataset::make(5, 1);
    ds.set(0, 0, 9.0);
    ds.set(1, 0, 9.0);
    ds.set(2, 0, 3.0);
    ds.set(3, 0, 3.0);
    CHECK(simple_impute(ds, Statistic::Mode).at(4, 0) == 3.0);
}

TEST_CASE("simple impute rejects a fully missing column") {
    Dataset ds = Dataset::make(2, 2);
    ds.set(0, 0, 1.0);
    ds.set(1, 0, 2.0);
    CHECK_THROWS_AS(simple_impute(ds, Statistic::Mean), DataError);
}

TEST_CASE("partial euclidean on hand-checked inputs") {
    Dataset ds = Dataset::make(3, 2);
    ds.set(0, 0, 0.0);           // row 0: [0, missing]
    ds.set(1, 0, 3.0);
    ds.set(1, 1, 4.0);           // row 1: [3, 4]
    ds.set(2, 1, 1.0);           // row 2: [missing, 1]

    auto d01 = row_distance(ds, 0, 1, 1);
    REQUIRE(d01.has_value());
    CHECK(*d01 == doctest::Approx(std::sqrt(18.0)));  // sqrt(2/1 * 9)

    // identical fully observed rows
    Dataset eq = Dataset::make(2, 3);
    for (std::size_t c = 0; c < 3; ++c) {
        eq.set(0, c, 1.5);
        eq.set(1, c, 1.5);
    }
    CHECK(*partial_euclidean({eq.values.data(), 3}, {eq.mask.data(), 3},
                             {eq.values.data() + 3, 3}, {eq.mask.data() + 3, 3}, 1) ==
          0.0);

    // disjoint observed supports
    CHECK_FALSE(row_distance(ds, 0, 2, 1).has_value());
}

TEST_CASE("partial euclidean is symmetric and matches brute force") {
    Rng rng(17);
    Dataset ds = random_dataset(40, 6, 0.35, rng);
    for (std::size_t a = 0; a < ds.n_rows; ++a)
        for (std::size_t b = a + 1; b < ds.n_rows; ++b) {
            auto d1 = row_distance(ds, a, b, 2);
            auto d2 = row_distance(ds, b, a, 2);
            auto oracle = partial_distance_oracle(ds, a, b, 2);
            CHECK(d1.has_value() == d2.has_value());
            CHECK(d1.has_value() == oracle.has_value());
            if (d1) {
                CHECK(*d1 == *d2);
                CHECK(*d1 == doctest::Approx(*oracle).epsilon(1e-12));
            }
        }
}

TEST_CASE("partial euclidean equals classical distance when fully observed") {
    Rng rng(23);
    Dataset ds = random_dataset(10, 4, 0.0, rng);
    for (std::size_t a = 0; a < ds.n_rows; ++a)
        for (std::size_t b = 0; b < ds.n_rows; ++b) {
            double classical = 0;
            for (std::size_t c = 0; c < ds.n_cols; ++c) {
                double d = ds.at(a, c) - ds.at(b, c);
                classical += d * d;
            }
            CHECK(*row_distance(ds, a, b, 1) ==
                  doctest::Approx(std::sqrt(classical)).epsilon(1e-12));
        }
}

TEST_CASE("knn k=1 copies the exact duplicate's value") {
    Dataset ds = Dataset::make(3, 3);
    // rows 0 and 1 identical on observed features; row 0 misses col 2
    ds.set(0, 0, 1.0);
    ds.set(0, 1, 2.0);
    ds.set(1, 0, 1.0);
    ds.set(1, 1, 2.0);
    ds.set(1, 2, 7.0);
    ds.set(2, 0, 50.0);
    ds.set(2, 1, 50.0);
    ds.set(2, 2, 99.0);
    KnnResult res = knn_impute(ds, {1, 1});
    CHECK(res.imputed.at(0, 2) == 7.0);
    CHECK(res.warnings.empty());
}

TEST_CASE("knn k=2 averages the two nearest donors") {
    Dataset ds = Dataset::make(5, 2);
    ds.set(0, 0, 0.0);            // target row, col 1 missing
    ds.set(1, 0, 0.1);
    ds.set(1, 1, 4.0);
    ds.set(2, 0, 0.2);
    ds.set(2, 1, 6.0);
    ds.set(3, 0, 10.0);
    ds.set(3, 1, 100.0);
    ds.set(4, 0, 11.0);
    ds.set(4, 1, 200.0);
    KnnResult res = knn_impute(ds, {2, 1});
    CHECK(res.imputed.at(0, 1) == doctest::Approx(5.0));
}

TEST_CASE("knn on complete data is a no-op") {
    Rng rng(5);
    Dataset ds = random_dataset(8, 3, 0.0, rng);
    KnnResult res = knn_impute(ds, {3, 1});
    CHECK(res.imputed.values == ds.values);
}

TEST_CASE("knn matches exhaustive neighbor search on small datasets") {
    Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        Dataset ds = random_dataset(8, 4, 0.3, rng);
        KnnConfig cfg{3, 1};
        KnnResult res = knn_impute(ds, cfg);
        for (std::size_t r = 0; r < ds.n_rows; ++r)
            for (std::size_t c = 0; c < ds.n_cols; ++c) {
                if (ds.observed(r, c)) continue;
                // oracle: sort eligible donors by distance, take first k
                std::vector<std::pair<double, std::size_t>> donors;
                for (std::size_t o = 0; o < ds.n_rows; ++o) {
                    if (o == r || !ds.observed(o, c)) continue;
                    auto d = partial_distance_oracle(ds, r, o, cfg.min_overlap);
                    if (d) donors.emplace_back(*d, o);
                }
                if (donors.empty()) continue;  // column-mean fallback path
                std::sort(donors.begin(), donors.end());
                double sum = 0;
                std::size_t k = std::min<std::size_t>(cfg.k, donors.size());
                for (std::size_t i = 0; i < k; ++i) sum += ds.at(donors[i].second, c);
                CHECK(res.imputed.at(r, c) == doctest::Approx(sum / k).epsilon(1e-12));
            }
    }
}

TEST_CASE("knn imputed values stay inside the donors' observed range") {
    Rng rng(41);
    Dataset ds = random_dataset(30, 5, 0.25, rng);
    KnnResult res = knn_impute(ds, {4, 1});
    for (std::size_t c = 0; c < ds.n_cols; ++c) {
        auto sup = ds.observed_support(c);
        if (sup.empty()) continue;
        for (std::size_t r = 0; r < ds.n_rows; ++r)
            if (!ds.observed(r, c)) {
                CHECK(res.imputed.at(r, c) >= sup.front());
                CHECK(res.imputed.at(r, c) <= sup.back());
            }
    }
}

TEST_CASE("knn with k = rows-1 equals the donor-column mean") {
    Rng rng(43);
    Dataset ds = random_dataset(12, 3, 0.2, rng);
    KnnResult res = knn_impute(ds, {11, 1});
    for (std::size_t r = 0; r < ds.n_rows; ++r)
        for (std::size_t c = 0; c < ds.n_cols; ++c) {
            if (ds.observed(r, c)) continue;
            double sum = 0;
            int n = 0;
            bool all_defined = true;
            for (std::size_t o = 0; o < ds.n_rows; ++o) {
                if (o == r) continue;
                if (!partial_distance_oracle(ds, r, o, 1)) all_defined = false;
                if (ds.observed(o, c)) {
                    sum += ds.at(o, c);
                    ++n;
                }
            }
            if (all_defined && n > 0)
                CHECK(res.imputed.at(r, c) == doctest::Approx(sum / n).epsilon(1e-12));
        }
}
