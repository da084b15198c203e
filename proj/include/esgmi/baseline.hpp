#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esgmi/dataset.hpp"

namespace esgmi {

enum class Statistic { Mean, Median, Mode };

Statistic parse_statistic(const std::string& s);  // throws ConfigError

/// Per-column fitted fill values, computed from observed entries only.
struct SimpleImputeRule {
    Statistic statistic;
    std::vector<double> fitted;  // one per column
};

SimpleImputeRule fit_simple(const Dataset& ds, Statistic statistic);

/// Fills every missing cell with the column statistic; output mask is all-true.
Dataset simple_impute(const Dataset& ds, Statistic statistic);

struct KnnConfig {
    int k = 5;
    int min_overlap = 1;
};

/// Partial Euclidean distance over co-observed coordinates, rescaled by
/// D/|S| so sparse overlaps are not systematically closer. Returns nullopt
/// when fewer than min_overlap coordinates are co-observed.
std::optional<double> partial_euclidean(std::span<const double> a,
                                        std::span<const std::uint8_t> a_mask,
                                        std::span<const double> b,
                                        std::span<const std::uint8_t> b_mask,
                                        int min_overlap);

struct KnnResult {
    Dataset imputed;
    std::vector<std::string> warnings;  // cells that fell back to column mean
};

/// Each missing cell becomes the unweighted mean of the k nearest rows
/// (by partial_euclidean) that observe the column.
KnnResult knn_impute(const Dataset& ds, const KnnConfig& cfg);

}  // namespace esgmi
