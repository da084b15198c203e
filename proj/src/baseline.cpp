#include "esgmi/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "esgmi/errors.hpp"

namespace esgmi {

Statistic parse_statistic(const std::string& s) {
    if (s == "mean") return Statistic::Mean;
    if (s == "median") return Statistic::Median;
    if (s == "mode") return Statistic::Mode;
    throw ConfigError("unknown statistic '" + s + "'");
}

namespace {

double column_statistic(const std::vector<double>& obs, Statistic stat) {
    switch (stat) {
        case Statistic::Mean: {
            double s = 0;
            for (double v : obs) s += v;
            return s / static_cast<double>(obs.size());
        }
        case Statistic::Median: {
            std::vector<double> v = obs;
            std::sort(v.begin(), v.end());
            std::size_t n = v.size();
            return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        }
        case Statistic::Mode: {
            // ordered map: ties resolve to the smallest value
            std::map<double, std::size_t> freq;
            for (double v : obs) ++freq[v];
            double best = obs.front();
            std::size_t best_n = 0;
            for (const auto& [v, n] : freq)
                if (n > best_n) {
                    best = v;
                    best_n = n;
                }
            return best;
        }
    }
    throw ConfigError("invalid statistic");
}

}  // namespace

SimpleImputeRule fit_simple(const Dataset& ds, Statistic statistic) {
    SimpleImputeRule rule{statistic, {}};
    rule.fitted.resize(ds.n_cols);
    for (std::size_t c = 0; c < ds.n_cols; ++c) {
        std::vector<double> obs = ds.observed_values(c);
        if (obs.empty())
            throw DataError("simple_impute: column '" + ds.columns[c].name +
                            "' has no observed value");
        rule.fitted[c] = column_statistic(obs, statistic);
    }
    return rule;
}

Dataset simple_impute(const Dataset& ds, Statistic statistic) {
    SimpleImputeRule rule = fit_simple(ds, statistic);
    Dataset out = ds;
    for (std::size_t r = 0; r < ds.n_rows; ++r)
        for (std::size_t c = 0; c < ds.n_cols; ++c)
            if (!ds.observed(r, c)) out.set(r, c, rule.fitted[c]);
    return out;
}

std::optional<double> partial_euclidean(std::span<const double> a,
                                        std::span<const std::uint8_t> a_mask,
                                        std::span<const double> b,
                                        std::span<const std::uint8_t> b_mask,
                                        int min_overlap) {
    if (a.size() != b.size() || a.size() != a_mask.size() || b.size() != b_mask.size())
        throw ConfigError("partial_euclidean: vector length mismatch");
    std::size_t overlap = 0;
    double ss = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a_mask[i] && b_mask[i]) {
            double d = a[i] - b[i];
            ss += d * d;
            ++overlap;
        }
    }
    if (overlap < static_cast<std::size_t>(std::max(1, min_overlap)))
        return std::nullopt;
    double scale = static_cast<double>(a.size()) / static_cast<double>(overlap);
    return std::sqrt(scale * ss);
}

KnnResult knn_impute(const Dataset& ds, const KnnConfig& cfg) {
    if (cfg.k < 1 || cfg.min_overlap < 1)
        throw ConfigError("knn_impute: k and min_overlap must be >= 1");
    KnnResult res{ds, {}};
    std::vector<double> col_mean(ds.n_cols, 0.0);
    std::vector<bool> col_has_obs(ds.n_cols, false);
    for (std::size_t c = 0; c < ds.n_cols; ++c) {
        std::vector<double> obs = ds.observed_values(c);
        if (!obs.empty()) {
            col_has_obs[c] = true;
            col_mean[c] = column_statistic(obs, Statistic::Mean);
        }
    }

    auto row_span = [&](std::size_t r) {
        return std::span<const double>(ds.values.data() + r * ds.n_cols, ds.n_cols);
    };
    auto mask_span = [&](std::size_t r) {
        return std::span<const std::uint8_t>(ds.mask.data() + r * ds.n_cols, ds.n_cols);
    };

    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        bool any_missing = false;
        for (std::size_t c = 0; c < ds.n_cols; ++c)
            if (!ds.observed(r, c)) any_missing = true;
        if (!any_missing) continue;

        // distances to all other rows, reused for every missing cell of r
        std::vector<std::pair<double, std::size_t>> dist;
        for (std::size_t o = 0; o < ds.n_rows; ++o) {
            if (o == r) continue;
            auto d = partial_euclidean(row_span(r), mask_span(r), row_span(o),
                                       mask_span(o), cfg.min_overlap);
            if (d) dist.emplace_back(*d, o);
        }
        std::sort(dist.begin(), dist.end());

        for (std::size_t c = 0; c < ds.n_cols; ++c) {
            if (ds.observed(r, c)) continue;
            double sum = 0;
            int taken = 0;
            for (const auto& [d, o] : dist) {
                if (!ds.observed(o, c)) continue;
                sum += ds.at(o, c);
                if (++taken == cfg.k) break;
            }
            if (taken > 0) {
                res.imputed.set(r, c, sum / taken);
            } else if (col_has_obs[c]) {
                res.imputed.set(r, c, col_mean[c]);
                res.warnings.push_back("no eligible donor for row '" + ds.row_ids[r] +
                                       "', column '" + ds.columns[c].name +
                                       "'; used column mean");
            } else {
                throw DataError("knn_impute: column '" + ds.columns[c].name +
                                "' has no observed value");
            }
        }
    }
    return res;
}

}  // namespace esgmi
