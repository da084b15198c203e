#pragma once

#include <string>
#include <vector>

#include "esgmi/dataset.hpp"
#include "esgmi/mice.hpp"

namespace esgmi {

struct WeightedRef {
    std::string name;
    double weight = 0.0;
};

/// Weight hierarchy KPI -> Descriptor -> Pillar -> overall score. Weights are
/// normalized to sum to 1 within each group at load/validation time.
struct ScoringModel {
    std::vector<std::pair<std::string, std::vector<WeightedRef>>> descriptors;
    std::vector<std::pair<std::string, std::vector<WeightedRef>>> pillars;
    std::vector<WeightedRef> overall;

    /// Normalizes weights and enforces the hierarchy invariants
    /// (unique membership, non-negative weights, known pillar names).
    void finalize();
    void check_columns(const Dataset& ds) const;  // throws ConfigError

    static ScoringModel load(const std::string& path);
};

/// Per-row scores at every aggregation level for one complete dataset.
struct ScoreLevels {
    std::vector<std::string> descriptor_names;
    std::vector<std::string> pillar_names;
    std::vector<std::vector<double>> descriptor;  // [row][descriptor]
    std::vector<std::vector<double>> pillar;      // [row][pillar]
    std::vector<double> overall;                  // [row]
};

ScoreLevels compute_scores(const Dataset& ds, const ScoringModel& model);

struct ScoreInterval {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double width() const { return upper - lower; }
};

/// Empirical score distribution over the m imputations.
struct ScoreDistribution {
    double level = 0.95;
    std::size_t m = 0;
    std::vector<std::string> descriptor_names;
    std::vector<std::string> pillar_names;
    std::vector<std::vector<ScoreInterval>> descriptor;  // [row][descriptor]
    std::vector<std::vector<ScoreInterval>> pillar;      // [row][pillar]
    std::vector<ScoreInterval> overall;                  // [row]
};

ScoreDistribution score_distribution(const ImputationSet& set,
                                     const ScoringModel& model, double level);

struct MetricRow {
    std::string level;  // kpi | descriptor | pillar | overall
    std::string name;
    double rmse = 0.0;
    double mae = 0.0;
    double cr = 0.0;
    double aw = 0.0;
    std::size_t n = 0;  // cells (kpi) or rows (scores) the metrics average over
};

struct EvaluationReport {
    std::vector<MetricRow> rows;
    std::string draw_method;
    std::size_t m = 0;
    std::uint64_t seed = 0;

    const MetricRow* find(const std::string& level, const std::string& name) const;
};

/// RMSE/MAE/CR/AW against held-out truth, at KPI level (per cell) and at
/// descriptor/pillar/overall level (per row, truth values re-aggregated
/// through one completed dataset).
EvaluationReport evaluate(const ImputationSet& set,
                          const std::vector<HoldOutCell>& truth,
                          const ScoringModel& model, double level);

void write_report_csv(const EvaluationReport& report, const std::string& path);
void write_report_text(const EvaluationReport& report, const std::string& path);

}  // namespace esgmi
