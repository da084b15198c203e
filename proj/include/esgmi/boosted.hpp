#pragma once

#include <cstdint>
#include <vector>

#include "esgmi/trees.hpp"

namespace esgmi {

enum class BoostTask { RegressionSquaredLoss, BinaryLogLoss };

struct BoostedParams {
    int n_stages = 100;
    double learning_rate = 0.1;
    int n_bins = 255;
    int max_depth = 6;
    int min_leaf = 5;
    BoostTask task = BoostTask::RegressionSquaredLoss;
};

struct BinnedNode {
    int feature = -1;  // -1 = leaf
    int bin_threshold = 0;  // observed bin <= threshold routes left
    bool missing_left = true;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

/// Stagewise additive model over histogram-binned features. Each feature gets
/// quantile bin edges plus a dedicated missing bin, so splits can separate
/// missing from observed when the missingness pattern itself is predictive.
struct BoostedModel {
    BoostedParams params;
    double base_score = 0.0;  // mean target (regression) or log-odds (binary)
    std::size_t n_features = 0;
    std::vector<std::vector<double>> bin_edges;  // per feature, ascending
    std::vector<std::vector<BinnedNode>> stages;

    int bin_of(std::size_t feature, double value, bool observed) const;
    /// Raw score: base_score + learning_rate * sum of stage outputs.
    double score_row(const double* vals, const std::uint8_t* mask) const;
};

BoostedModel fit_boosted(const FeatureMatrix& X, const std::vector<double>& y,
                         const BoostedParams& params);

/// Regression prediction / raw logit score per row.
std::vector<double> boosted_predict(const BoostedModel& model, const FeatureMatrix& X);

/// Sigmoid of the logit score; binary-task models only.
std::vector<double> boosted_predict_proba(const BoostedModel& model,
                                          const FeatureMatrix& X);

}  // namespace esgmi
