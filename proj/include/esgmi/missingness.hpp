#pragma once

#include <optional>
#include <vector>

#include "esgmi/boosted.hpp"
#include "esgmi/dataset.hpp"
#include "esgmi/mice.hpp"

namespace esgmi {

/// Per-column missingness-probability model: a binary boosted classifier on
/// all other columns' raw (incomplete) values, or a constant rate when the
/// column has only one class of missingness indicator.
struct ColumnMissingness {
    bool constant = false;
    double constant_rate = 0.0;
    std::optional<BoostedModel> model;  // features = all columns except the target
};

struct MissingnessModel {
    std::vector<ColumnMissingness> per_column;  // one per dataset column
};

MissingnessModel fit_missingness(const Dataset& ds,
                                 const BoostedParams& params = BoostedParams{});

/// Predicted per-row missingness probability of one column, conditioning on
/// the current (possibly partially missing) values of the other columns.
std::vector<double> predict_missingness(const MissingnessModel& model,
                                        const Dataset& ds, std::size_t col);

/// Synthetic twin: every cell replaced by a PMM/LRD draw from the column's
/// conditional forest, all draws conditioned on the source values.
Dataset augment(const Dataset& completed,
                const std::vector<std::optional<ForestModel>>& models,
                DrawMethod draw_method, int n_donors, Rng& rng);

/// Model-driven removal. Each round converts per-row missingness probability
/// p into the per-round hazard 1-(1-p)^(1/n_rounds) before the Bernoulli
/// draw, so the accumulated missing rate over all rounds tracks p rather
/// than compounding past it. Missing cells never come back.
Dataset ampute(const Dataset& ds, const MissingnessModel& model, int n_rounds,
               Rng& rng);

}  // namespace esgmi
