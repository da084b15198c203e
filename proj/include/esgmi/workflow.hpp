#pragma once

#include <string>
#include <vector>

#include "esgmi/boosted.hpp"
#include "esgmi/mice.hpp"
#include "esgmi/missingness.hpp"
#include "esgmi/scoring.hpp"

namespace esgmi {

struct WorkflowConfig {
    MiceConfig mice;
    BoostedParams missingness;  // per-column missingness classifiers
    int ampute_rounds = 10;
    double test_fraction = 0.3;
    double level = 0.95;
};

struct WorkflowResult {
    ImputationSet production;     // imputations of the raw input
    ScoreDistribution scores;     // score distribution from the production set
    EvaluationReport report;      // self-validation on the synthetic twin
    Dataset synthetic_complete;   // augmented twin
    Dataset synthetic_amputed;    // twin with model-driven missingness
    ImputationSet validation;     // imputations fitted on the 70% train split
    std::vector<HoldOutCell> validation_truth;  // amputed test-row cells
};

/// Five-step workflow: impute the raw data, fit missingness models, augment a
/// synthetic twin, ampute it, then re-impute 70/30 and score the result.
WorkflowResult run_workflow(const Dataset& raw, const ScoringModel& scoring,
                            const WorkflowConfig& cfg);

/// row,level,name,mean,lower,upper,missing_rate — one line per row and level.
void write_scores_csv(const ScoreDistribution& dist, const Dataset& source,
                      const std::string& path);

/// Observed-vs-imputed histogram data per column with missing cells.
void write_histograms_csv(const ImputationSet& set, const Dataset& source,
                          const std::string& path, int n_bins = 20);

struct WidthBin {
    double lo = 0.0;  // row missing rate in (lo, hi]; first bin includes lo
    double hi = 0.0;
    std::size_t n_rows = 0;
    double median_width = 0.0;
};

/// Median overall-score interval width by row-missing-rate bin.
std::vector<WidthBin> width_by_missing_rate(const ScoreDistribution& dist,
                                            const Dataset& source,
                                            const std::vector<double>& bin_edges);

void write_width_bins_csv(const std::vector<WidthBin>& bins, const std::string& path);

}  // namespace esgmi
