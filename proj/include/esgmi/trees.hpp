#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "esgmi/dataset.hpp"
#include "esgmi/rng.hpp"

namespace esgmi {

/// Plain feature matrix with a missingness mask; what the tree learners see.
struct FeatureMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values;      // row-major
    std::vector<std::uint8_t> mask;  // 1 = observed

    double at(std::size_t r, std::size_t c) const { return values[r * n_cols + c]; }
    bool observed(std::size_t r, std::size_t c) const { return mask[r * n_cols + c] != 0; }

    static FeatureMatrix from_dataset(const Dataset& ds);
    /// All columns except excl_col, in original order.
    static FeatureMatrix from_dataset_excluding(const Dataset& ds, std::size_t excl_col);
};

struct TreeParams {
    int max_depth = 16;
    int min_leaf = 5;
    int mtry = 0;  // 0 = all features (forest overrides to ceil(p/3))
};

struct TreeNode {
    int feature = -1;  // -1 = leaf
    double threshold = 0.0;
    bool missing_left = true;  // routing for rows missing the split feature
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf mean
};

/// Regression tree over a flat node arena; any input, including one missing
/// every feature, routes to exactly one leaf.
struct Tree {
    std::vector<TreeNode> nodes;

    double predict_row(const double* vals, const std::uint8_t* mask,
                       std::size_t stride = 1) const;
    double predict(const FeatureMatrix& X, std::size_t row) const;
    int depth() const;
};

/// Greedy variance-reduction fit; at every candidate split both routings of
/// missing-feature rows are scored and the better one is kept.
Tree fit_tree(const FeatureMatrix& X, const std::vector<double>& y,
              const TreeParams& params, Rng& rng);

/// As fit_tree but restricted to the given row multiset (bootstrap support).
Tree fit_tree_on_rows(const FeatureMatrix& X, const std::vector<double>& y,
                      const std::vector<std::size_t>& rows, const TreeParams& params,
                      Rng& rng);

struct ForestParams {
    int n_trees = 100;
    TreeParams tree;
};

struct ForestModel {
    std::vector<Tree> trees;
    std::vector<std::vector<std::size_t>> bootstrap_indices;  // per tree
    std::size_t n_features = 0;
    std::size_t n_training_rows = 0;
    // oob_predictions[i] defined iff oob_tree_count[i] > 0; mean over those trees.
    std::vector<double> oob_predictions;
    std::vector<std::uint32_t> oob_tree_count;

    bool has_oob(std::size_t row) const { return oob_tree_count[row] > 0; }
};

/// Bagged regression forest with per-split feature subsampling and recorded
/// out-of-bag predictions. Tree t uses an RNG stream derived from (seed, t),
/// so parallel and sequential fits agree.
ForestModel fit_forest(const FeatureMatrix& X, const std::vector<double>& y,
                       const ForestParams& params, std::uint64_t seed,
                       int n_threads = 1);

std::vector<double> forest_predict(const ForestModel& model, const FeatureMatrix& X);
double forest_predict_row(const ForestModel& model, const double* vals,
                          const std::uint8_t* mask);

struct OobResidual {
    std::size_t row;
    double residual;  // y[row] - oob_prediction[row]
};

/// Residuals for every row with OOB coverage; rows never out-of-bag are omitted.
std::vector<OobResidual> oob_residuals(const ForestModel& model,
                                       const std::vector<double>& y);

}  // namespace esgmi
