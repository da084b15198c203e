#include "esgmi/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "esgmi/csv.hpp"
#include "esgmi/errors.hpp"

namespace esgmi {

namespace {

// distinct RNG streams for the stochastic workflow steps
constexpr std::uint64_t kAugmentStream = 0x61756700;
constexpr std::uint64_t kAmputeStream = 0x616d7000;
constexpr std::uint64_t kSplitStream = 0x73706c00;

template <typename F>
auto with_step(const char* step, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(step) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(step) + ": " + e.what());
    }
}

}  // namespace

WorkflowResult run_workflow(const Dataset& raw, const ScoringModel& scoring,
                            const WorkflowConfig& cfg) {
    if (cfg.mice.n_imputations < 2)
        throw ConfigError("workflow needs n_imputations >= 2");
    scoring.check_columns(raw);
    std::uint64_t seed = cfg.mice.seed;

    WorkflowResult res;

    // step 1: multiple imputation of the raw data, keeping chain-0 forests
    MiceConfig step1 = cfg.mice;
    step1.keep_models = true;
    res.production = with_step("step 1 (imputation)",
                               [&] { return mice_multiple(raw, step1); });
    res.scores = score_distribution(res.production, scoring, cfg.level);

    // step 2: per-column missingness classifiers on the raw (incomplete) data
    MissingnessModel miss_model = with_step(
        "step 2 (missingness calibration)",
        [&] { return fit_missingness(raw, cfg.missingness); });

    // step 3: synthetic twin by conditional redraw of every cell
    Rng aug_rng = make_rng(seed, kAugmentStream);
    res.synthetic_complete = with_step("step 3 (augmentation)", [&] {
        return augment(res.production.completed.front(), res.production.models,
                       cfg.mice.draw_method, cfg.mice.n_donors, aug_rng);
    });

    // step 4: model-driven amputation of the twin
    Rng amp_rng = make_rng(seed, kAmputeStream);
    res.synthetic_amputed = with_step("step 4 (amputation)", [&] {
        return ampute(res.synthetic_complete, miss_model, cfg.ampute_rounds, amp_rng);
    });

    // step 5: 70/30 re-imputation test against known truth
    with_step("step 5 (validation)", [&] {
        std::vector<std::size_t> rows(raw.n_rows);
        std::iota(rows.begin(), rows.end(), 0);
        Rng split_rng = make_rng(seed, kSplitStream);
        std::shuffle(rows.begin(), rows.end(), split_rng);
        auto n_test = static_cast<std::size_t>(
            std::llround(cfg.test_fraction * static_cast<double>(raw.n_rows)));
        std::vector<std::size_t> test_rows(rows.begin(), rows.begin() + n_test);
        std::vector<std::size_t> train_rows(rows.begin() + n_test, rows.end());
        std::sort(test_rows.begin(), test_rows.end());
        std::sort(train_rows.begin(), train_rows.end());

        MiceConfig step5 = cfg.mice;
        step5.keep_models = false;
        res.validation = mice_multiple_fit_on(res.synthetic_amputed, step5, train_rows);

        std::vector<std::uint8_t> in_test(raw.n_rows, 0);
        for (std::size_t r : test_rows) in_test[r] = 1;
        for (std::size_t r = 0; r < raw.n_rows; ++r) {
            if (!in_test[r]) continue;
            for (std::size_t c = 0; c < raw.n_cols; ++c)
                if (!res.synthetic_amputed.observed(r, c))
                    res.validation_truth.push_back(
                        {r, c, res.synthetic_complete.at(r, c)});
        }
        res.report = evaluate(res.validation, res.validation_truth, scoring, cfg.level);
        return 0;
    });
    return res;
}

void write_scores_csv(const ScoreDistribution& dist, const Dataset& source,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "row,level,name,mean,lower,upper,missing_rate\n";
    auto emit = [&](std::size_t r, const std::string& level, const std::string& name,
                    const ScoreInterval& iv) {
        out << source.row_ids[r] << ',' << level << ',' << name << ','
            << format_double(iv.mean) << ',' << format_double(iv.lower) << ','
            << format_double(iv.upper) << ','
            << format_double(source.row_missing_rate(r)) << '\n';
    };
    for (std::size_t r = 0; r < dist.overall.size(); ++r) {
        for (std::size_t d = 0; d < dist.descriptor_names.size(); ++d)
            emit(r, "descriptor", dist.descriptor_names[d], dist.descriptor[r][d]);
        for (std::size_t p = 0; p < dist.pillar_names.size(); ++p)
            emit(r, "pillar", dist.pillar_names[p], dist.pillar[r][p]);
        emit(r, "overall", "ESG", dist.overall[r]);
    }
}

void write_histograms_csv(const ImputationSet& set, const Dataset& source,
                          const std::string& path, int n_bins) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "column,source,bin_lo,bin_hi,count\n";
    for (std::size_t c = 0; c < source.n_cols; ++c) {
        std::vector<double> observed = source.observed_values(c);
        std::vector<double> imputed;
        for (std::size_t r = 0; r < source.n_rows; ++r)
            if (!source.observed(r, c))
                for (const Dataset& ds : set.completed) imputed.push_back(ds.at(r, c));
        if (imputed.empty()) continue;

        double lo = imputed.front(), hi = imputed.front();
        for (double v : observed) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (double v : imputed) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi <= lo) hi = lo + 1.0;
        double w = (hi - lo) / n_bins;
        auto emit = [&](const char* label, const std::vector<double>& vals) {
            std::vector<std::size_t> counts(n_bins, 0);
            for (double v : vals) {
                auto b = std::min<std::size_t>(
                    static_cast<std::size_t>((v - lo) / w), n_bins - 1);
                ++counts[b];
            }
            for (int b = 0; b < n_bins; ++b)
                out << source.columns[c].name << ',' << label << ','
                    << format_double(lo + b * w) << ','
                    << format_double(lo + (b + 1) * w) << ',' << counts[b] << '\n';
        };
        emit("observed", observed);
        emit("imputed", imputed);
    }
}

std::vector<WidthBin> width_by_missing_rate(const ScoreDistribution& dist,
                                            const Dataset& source,
                                            const std::vector<double>& bin_edges) {
    if (bin_edges.size() < 2) throw ConfigError("width_by_missing_rate: need >= 2 edges");
    std::vector<WidthBin> bins(bin_edges.size() - 1);
    std::vector<std::vector<double>> widths(bins.size());
    for (std::size_t b = 0; b < bins.size(); ++b) {
        bins[b].lo = bin_edges[b];
        bins[b].hi = bin_edges[b + 1];
    }
    for (std::size_t r = 0; r < dist.overall.size(); ++r) {
        double rate = source.row_missing_rate(r);
        for (std::size_t b = 0; b < bins.size(); ++b) {
            bool in_bin = b == 0 ? rate >= bins[b].lo && rate <= bins[b].hi
                                 : rate > bins[b].lo && rate <= bins[b].hi;
            if (in_bin) {
                widths[b].push_back(dist.overall[r].width());
                break;
            }
        }
    }
    for (std::size_t b = 0; b < bins.size(); ++b) {
        bins[b].n_rows = widths[b].size();
        if (!widths[b].empty()) {
            std::sort(widths[b].begin(), widths[b].end());
            bins[b].median_width = quantile_sorted(widths[b], 0.5);
        }
    }
    return bins;
}

void write_width_bins_csv(const std::vector<WidthBin>& bins, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "bin_lo,bin_hi,n_rows,median_width\n";
    for (const auto& b : bins)
        out << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.n_rows
            << ',' << format_double(b.median_width) << '\n';
}

}  // namespace esgmi
