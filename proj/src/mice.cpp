#include "esgmi/mice.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "esgmi/csv.hpp"
#include "esgmi/errors.hpp"

namespace esgmi {

DrawMethod parse_draw_method(const std::string& s) {
    if (s == "point") return DrawMethod::Point;
    if (s == "pmm") return DrawMethod::Pmm;
    if (s == "lrd") return DrawMethod::Lrd;
    throw ConfigError("unknown draw method '" + s + "'");
}

Dataset init_from_marginals(const Dataset& ds, Rng& rng) {
    Dataset out = ds;
    for (std::size_t c = 0; c < ds.n_cols; ++c) {
        bool any_missing = false;
        for (std::size_t r = 0; r < ds.n_rows; ++r)
            if (!ds.observed(r, c)) any_missing = true;
        if (!any_missing) continue;
        std::vector<double> obs = ds.observed_values(c);
        if (obs.empty())
            throw DataError("init_from_marginals: column '" + ds.columns[c].name +
                            "' is fully missing");
        std::uniform_int_distribution<std::size_t> d(0, obs.size() - 1);
        for (std::size_t r = 0; r < ds.n_rows; ++r)
            if (!ds.observed(r, c)) out.set(r, c, obs[d(rng)]);
    }
    return out;
}

namespace {

// indices of the n_donors donors closest to `prediction`, ties by donor index
std::vector<std::size_t> closest_donors(double prediction,
                                        const std::vector<double>& donor_predictions,
                                        int n_donors) {
    if (donor_predictions.empty()) throw DataError("empty donor pool");
    if (n_donors < 1) throw ConfigError("n_donors must be >= 1");
    std::vector<std::size_t> idx(donor_predictions.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto key = [&](std::size_t i) {
        return std::make_pair(std::abs(donor_predictions[i] - prediction), i);
    };
    auto n = std::min<std::size_t>(static_cast<std::size_t>(n_donors), idx.size());
    std::partial_sort(idx.begin(), idx.begin() + n, idx.end(),
                      [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    idx.resize(n);
    return idx;
}

}  // namespace

double pmm_draw(double prediction, const std::vector<double>& donor_predictions,
                const std::vector<double>& donor_values, int n_donors, Rng& rng) {
    if (donor_predictions.size() != donor_values.size())
        throw ConfigError("pmm_draw: donor vector length mismatch");
    auto pool = closest_donors(prediction, donor_predictions, n_donors);
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return donor_values[pool[d(rng)]];
}

double lrd_draw(double prediction, const std::vector<double>& donor_predictions,
                const std::vector<double>& donor_residuals, int n_donors, Rng& rng) {
    if (donor_predictions.size() != donor_residuals.size())
        throw ConfigError("lrd_draw: donor vector length mismatch");
    auto pool = closest_donors(prediction, donor_predictions, n_donors);
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return prediction + donor_residuals[pool[d(rng)]];
}

namespace {

FeatureMatrix take_feature_rows(const FeatureMatrix& X,
                                const std::vector<std::size_t>& rows) {
    FeatureMatrix out;
    out.n_rows = rows.size();
    out.n_cols = X.n_cols;
    out.values.reserve(rows.size() * X.n_cols);
    out.mask.reserve(rows.size() * X.n_cols);
    for (std::size_t r : rows) {
        out.values.insert(out.values.end(), X.values.begin() + r * X.n_cols,
                          X.values.begin() + (r + 1) * X.n_cols);
        out.mask.insert(out.mask.end(), X.mask.begin() + r * X.n_cols,
                        X.mask.begin() + (r + 1) * X.n_cols);
    }
    return out;
}

std::vector<std::size_t> visit_columns(const Dataset& ds, VisitOrder order) {
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < ds.n_cols; ++c)
        if (ds.column_missing_rate(c) > 0.0) cols.push_back(c);
    if (order == VisitOrder::AscendingMissingRate)
        std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
            return ds.column_missing_rate(a) < ds.column_missing_rate(b);
        });
    return cols;
}

struct ColumnFit {
    ForestModel forest;
    std::vector<std::size_t> donor_rows;       // dataset row index per donor
    std::vector<double> donor_predictions;     // OOB where available, else in-sample
    std::vector<double> donor_values;          // observed target values
    std::vector<double> donor_residuals;       // OOB, in-bag fallback
    std::size_t inbag_fallbacks = 0;
};

// Fits the conditional forest for column c on the current completions,
// restricted to fit_rows that observe c in the original mask.
ColumnFit fit_column(const Dataset& work, const std::vector<std::uint8_t>& source_mask,
                     std::size_t c, const std::vector<std::size_t>& fit_rows,
                     const ForestParams& fp, std::uint64_t forest_seed,
                     bool need_residuals) {
    ColumnFit cf;
    for (std::size_t r : fit_rows)
        if (source_mask[r * work.n_cols + c]) cf.donor_rows.push_back(r);
    if (cf.donor_rows.empty())
        throw DataError("mice: column '" + work.columns[c].name +
                        "' has no observed value among fit rows");

    FeatureMatrix X_all = FeatureMatrix::from_dataset_excluding(work, c);
    FeatureMatrix X_fit = take_feature_rows(X_all, cf.donor_rows);
    std::vector<double> y;
    y.reserve(cf.donor_rows.size());
    for (std::size_t r : cf.donor_rows) y.push_back(work.at(r, c));

    cf.forest = fit_forest(X_fit, y, fp, forest_seed);
    // Honest donor matching: rank donors by their OOB prediction where
    // available. In-sample predictions track the donor's own value too
    // closely, which collapses the donor pool's spread and the intervals.
    cf.donor_predictions = forest_predict(cf.forest, X_fit);
    for (std::size_t i = 0; i < cf.donor_rows.size(); ++i)
        if (cf.forest.has_oob(i)) cf.donor_predictions[i] = cf.forest.oob_predictions[i];
    cf.donor_values = std::move(y);

    if (need_residuals) {
        cf.donor_residuals.resize(cf.donor_rows.size());
        for (std::size_t i = 0; i < cf.donor_rows.size(); ++i) {
            if (cf.forest.has_oob(i)) {
                cf.donor_residuals[i] = cf.donor_values[i] - cf.forest.oob_predictions[i];
            } else {
                cf.donor_residuals[i] = cf.donor_values[i] - cf.donor_predictions[i];
                ++cf.inbag_fallbacks;
            }
        }
    }
    return cf;
}

struct ChainResult {
    Dataset completed;
    std::vector<ChainDiagnostic> diagnostics;
    std::vector<std::optional<ForestModel>> models;
    std::size_t lrd_inbag_fallbacks = 0;
};

void record_diagnostic(std::vector<ChainDiagnostic>& diags, int chain, int iter,
                       const Dataset& work, const std::vector<std::uint8_t>& source_mask,
                       std::size_t c) {
    double n = 0, s = 0, ss = 0;
    for (std::size_t r = 0; r < work.n_rows; ++r)
        if (!source_mask[r * work.n_cols + c]) {
            double v = work.at(r, c);
            n += 1;
            s += v;
            ss += v * v;
        }
    if (n == 0) return;
    double mean = s / n;
    double var = n > 1 ? std::max(0.0, (ss - s * s / n) / (n - 1)) : 0.0;
    diags.push_back({chain, iter, c, mean, std::sqrt(var)});
}

// One stochastic chain: marginal init, then n_iterations sweeps of
// fit-forest + PMM/LRD draws per visited column.
ChainResult run_chain(const Dataset& ds, const MiceConfig& cfg,
                      const std::vector<std::size_t>& fit_rows,
                      std::uint64_t chain_seed, int chain_index, bool keep_models) {
    Rng rng(chain_seed);
    ChainResult res{init_from_marginals(ds, rng), {}, {}, 0};
    Dataset& work = res.completed;
    const std::vector<std::uint8_t>& source_mask = ds.mask;
    std::vector<std::size_t> cols = visit_columns(ds, cfg.visit_order);
    bool lrd = cfg.draw_method == DrawMethod::Lrd;

    for (int iter = 0; iter < cfg.n_iterations; ++iter) {
        for (std::size_t c : cols) {
            std::uint64_t fseed = rng();
            ColumnFit cf = fit_column(work, source_mask, c, fit_rows, cfg.forest,
                                      fseed, lrd);
            res.lrd_inbag_fallbacks += cf.inbag_fallbacks;

            FeatureMatrix X_all = FeatureMatrix::from_dataset_excluding(work, c);
            for (std::size_t r = 0; r < ds.n_rows; ++r) {
                if (source_mask[r * ds.n_cols + c]) continue;
                double pred = forest_predict_row(cf.forest,
                                                 X_all.values.data() + r * X_all.n_cols,
                                                 X_all.mask.data() + r * X_all.n_cols);
                double v = lrd ? lrd_draw(pred, cf.donor_predictions,
                                          cf.donor_residuals, cfg.n_donors, rng)
                               : pmm_draw(pred, cf.donor_predictions, cf.donor_values,
                                          cfg.n_donors, rng);
                work.set(r, c, v);
            }
            record_diagnostic(res.diagnostics, chain_index, iter, work, source_mask, c);
        }
    }

    if (keep_models) {
        res.models.resize(ds.n_cols);
        for (std::size_t c = 0; c < ds.n_cols; ++c) {
            std::uint64_t fseed = rng();
            ColumnFit cf = fit_column(work, work.mask /* all observed */, c, fit_rows,
                                      cfg.forest, fseed, false);
            res.models[c] = std::move(cf.forest);
        }
    }
    return res;
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
    std::vector<std::size_t> rows(ds.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

}  // namespace

MiceSingleResult mice_single(const Dataset& ds, const MiceConfig& cfg) {
    if (cfg.draw_method != DrawMethod::Point)
        throw ConfigError("mice_single requires draw_method = point");
    Rng rng = make_rng(cfg.seed, 0);
    Dataset work = init_from_marginals(ds, rng);
    std::vector<std::size_t> fit_rows = all_rows(ds);
    std::vector<std::size_t> cols = visit_columns(ds, cfg.visit_order);

    // per-column stopping tolerance from observed-value SD
    std::vector<double> tol(ds.n_cols, cfg.tol_factor);
    for (std::size_t c : cols) {
        std::vector<double> obs = ds.observed_values(c);
        double n = static_cast<double>(obs.size());
        double s = 0, ss = 0;
        for (double v : obs) {
            s += v;
            ss += v * v;
        }
        double var = n > 1 ? std::max(0.0, (ss - s * s / n) / (n - 1)) : 0.0;
        tol[c] = cfg.tol_factor * std::sqrt(var);
    }

    MiceSingleResult res;
    res.models.resize(ds.n_cols);
    int iter = 0;
    for (; iter < cfg.n_iterations; ++iter) {
        bool converged = true;
        for (std::size_t c : cols) {
            std::uint64_t fseed = rng();
            ColumnFit cf = fit_column(work, ds.mask, c, fit_rows, cfg.forest, fseed,
                                      false);
            FeatureMatrix X_all = FeatureMatrix::from_dataset_excluding(work, c);
            double max_change = 0.0;
            for (std::size_t r = 0; r < ds.n_rows; ++r) {
                if (ds.observed(r, c)) continue;
                double pred = forest_predict_row(cf.forest,
                                                 X_all.values.data() + r * X_all.n_cols,
                                                 X_all.mask.data() + r * X_all.n_cols);
                max_change = std::max(max_change, std::abs(pred - work.at(r, c)));
                work.set(r, c, pred);
            }
            if (max_change >= tol[c]) converged = false;
            res.models[c] = std::move(cf.forest);
        }
        if (converged) {
            ++iter;
            break;
        }
    }
    res.iterations_run = std::max(iter, 1);

    // final conditional models for every column, fit on the completed data
    for (std::size_t c = 0; c < ds.n_cols; ++c) {
        std::uint64_t fseed = rng();
        ColumnFit cf = fit_column(work, work.mask, c, fit_rows, cfg.forest, fseed,
                                  false);
        res.models[c] = std::move(cf.forest);
    }
    res.completed = std::move(work);
    return res;
}

ImputationSet mice_multiple_fit_on(const Dataset& ds, const MiceConfig& cfg,
                                   const std::vector<std::size_t>& fit_rows) {
    if (cfg.draw_method == DrawMethod::Point)
        throw ConfigError("mice_multiple requires draw_method = pmm or lrd");
    if (cfg.n_imputations < 1) throw ConfigError("n_imputations must be >= 1");

    ImputationSet set;
    set.config = cfg;
    set.source_mask = ds.mask;
    set.completed.resize(cfg.n_imputations);
    std::vector<ChainResult> results(cfg.n_imputations);

    auto run_one = [&](int k) {
        std::uint64_t chain_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(k));
        results[k] = run_chain(ds, cfg, fit_rows, chain_seed, k,
                               cfg.keep_models && k == 0);
    };

    int threads = std::min(cfg.n_threads, cfg.n_imputations);
    if (threads > 1) {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&]() {
                for (int k; (k = next.fetch_add(1)) < cfg.n_imputations;) run_one(k);
            });
        for (auto& th : pool) th.join();
    } else {
        for (int k = 0; k < cfg.n_imputations; ++k) run_one(k);
    }

    for (int k = 0; k < cfg.n_imputations; ++k) {
        set.completed[k] = std::move(results[k].completed);
        for (const auto& d : results[k].diagnostics) set.diagnostics.push_back(d);
    }
    if (cfg.keep_models) set.models = std::move(results[0].models);
    return set;
}

ImputationSet mice_multiple(const Dataset& ds, const MiceConfig& cfg) {
    std::vector<std::size_t> rows(ds.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    return mice_multiple_fit_on(ds, cfg, rows);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ConfigError("quantile of empty sample");
    if (sorted.size() == 1) return sorted[0];
    double h = q * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<PooledCell> pool_cells(const ImputationSet& set, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0,1)");
    if (set.m() < 2) throw ConfigError("pool_cells needs m >= 2 imputations");
    const Dataset& first = set.completed.front();
    std::vector<PooledCell> out;
    std::vector<double> vals(set.m());
    double ql = (1.0 - level) / 2.0;
    double qu = (1.0 + level) / 2.0;
    for (std::size_t r = 0; r < first.n_rows; ++r)
        for (std::size_t c = 0; c < first.n_cols; ++c) {
            if (set.source_mask[r * first.n_cols + c]) continue;
            for (std::size_t k = 0; k < set.m(); ++k)
                vals[k] = set.completed[k].at(r, c);
            double mean = std::accumulate(vals.begin(), vals.end(), 0.0) /
                          static_cast<double>(vals.size());
            std::sort(vals.begin(), vals.end());
            out.push_back({r, c, mean, quantile_sorted(vals, ql),
                           quantile_sorted(vals, qu)});
        }
    return out;
}

void write_chain_diagnostics_csv(const ImputationSet& set, const Dataset& source,
                                 const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "chain,iteration,column,imputed_mean,imputed_sd\n";
    for (const auto& d : set.diagnostics)
        out << d.chain << ',' << d.iteration << ',' << source.columns[d.column].name
            << ',' << format_double(d.imputed_mean) << ','
            << format_double(d.imputed_sd) << '\n';
}

}  // namespace esgmi
