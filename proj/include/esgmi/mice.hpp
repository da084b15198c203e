#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "esgmi/dataset.hpp"
#include "esgmi/trees.hpp"

namespace esgmi {

enum class DrawMethod { Point, Pmm, Lrd };
enum class VisitOrder { AscendingMissingRate, ColumnOrder };

DrawMethod parse_draw_method(const std::string& s);  // throws ConfigError

struct MiceConfig {
    int n_iterations = 10;
    int n_imputations = 5;  // m
    DrawMethod draw_method = DrawMethod::Pmm;
    int n_donors = 5;
    ForestParams forest;
    VisitOrder visit_order = VisitOrder::AscendingMissingRate;
    std::uint64_t seed = 0;
    double tol_factor = 1e-4;  // point-mode stop: max cell change < tol_factor * col SD
    bool keep_models = false;  // retain chain-0 final-sweep forests (for augmentation)
    int n_threads = 1;         // chains run in parallel; output is thread-count invariant
};

struct ChainDiagnostic {
    int chain;
    int iteration;
    std::size_t column;
    double imputed_mean;
    double imputed_sd;
};

/// m completed datasets agreeing exactly on originally-observed cells.
struct ImputationSet {
    std::vector<Dataset> completed;
    std::vector<std::uint8_t> source_mask;  // 1 = originally observed
    MiceConfig config;
    std::vector<ChainDiagnostic> diagnostics;
    // per-column conditional forests from chain 0's completed data, present
    // when config.keep_models is set; feature order = all columns except the target
    std::vector<std::optional<ForestModel>> models;

    std::size_t m() const { return completed.size(); }
};

/// Fills each missing cell with a uniform draw from the column's observed values.
Dataset init_from_marginals(const Dataset& ds, Rng& rng);

struct MiceSingleResult {
    Dataset completed;
    std::vector<std::optional<ForestModel>> models;  // one per column
    int iterations_run = 0;
};

/// Point-estimate chained equations: sweeps until the imputed cells stabilize
/// or n_iterations is reached; returns final-sweep forests for every column.
MiceSingleResult mice_single(const Dataset& ds, const MiceConfig& cfg);

/// One donor-value draw among the n_donors donors whose predictions are
/// closest to `prediction`; ties on distance break by donor position.
double pmm_draw(double prediction, const std::vector<double>& donor_predictions,
                const std::vector<double>& donor_values, int n_donors, Rng& rng);

/// prediction + the residual of one of the n_donors closest donors.
double lrd_draw(double prediction, const std::vector<double>& donor_predictions,
                const std::vector<double>& donor_residuals, int n_donors, Rng& rng);

/// m independent chains with derived seeds; draw_method must be pmm or lrd.
ImputationSet mice_multiple(const Dataset& ds, const MiceConfig& cfg);

/// As mice_multiple but forests and donor pools are restricted to fit_rows
/// (train/test separation); missing cells of all rows are still imputed.
ImputationSet mice_multiple_fit_on(const Dataset& ds, const MiceConfig& cfg,
                                   const std::vector<std::size_t>& fit_rows);

struct PooledCell {
    std::size_t row;
    std::size_t col;
    double mean;
    double lower;
    double upper;
};

/// Per originally-missing cell: mean and central `level` interval across the
/// m imputations (type-7 empirical quantiles).
std::vector<PooledCell> pool_cells(const ImputationSet& set, double level);

/// Type-7 (linear interpolation) quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q);

void write_chain_diagnostics_csv(const ImputationSet& set, const Dataset& source,
                                 const std::string& path);

}  // namespace esgmi
