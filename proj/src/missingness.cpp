#include "esgmi/missingness.hpp"

#include <algorithm>
#include <cmath>

#include "esgmi/errors.hpp"

namespace esgmi {

MissingnessModel fit_missingness(const Dataset& ds, const BoostedParams& params) {
    MissingnessModel model;
    model.per_column.resize(ds.n_cols);
    BoostedParams bp = params;
    bp.task = BoostTask::BinaryLogLoss;

    for (std::size_t c = 0; c < ds.n_cols; ++c) {
        std::vector<double> labels(ds.n_rows);
        std::size_t miss = 0;
        for (std::size_t r = 0; r < ds.n_rows; ++r) {
            labels[r] = ds.observed(r, c) ? 0.0 : 1.0;
            if (labels[r] > 0.5) ++miss;
        }
        ColumnMissingness& cm = model.per_column[c];
        if (miss == 0 || miss == ds.n_rows) {
            cm.constant = true;
            cm.constant_rate = static_cast<double>(miss) / static_cast<double>(ds.n_rows);
            continue;
        }
        FeatureMatrix X = FeatureMatrix::from_dataset_excluding(ds, c);
        cm.model = fit_boosted(X, labels, bp);
    }
    return model;
}

std::vector<double> predict_missingness(const MissingnessModel& model,
                                        const Dataset& ds, std::size_t col) {
    if (model.per_column.size() != ds.n_cols)
        throw ConfigError("predict_missingness: column count mismatch");
    const ColumnMissingness& cm = model.per_column[col];
    if (cm.constant) return std::vector<double>(ds.n_rows, cm.constant_rate);
    FeatureMatrix X = FeatureMatrix::from_dataset_excluding(ds, col);
    return boosted_predict_proba(*cm.model, X);
}

Dataset augment(const Dataset& completed,
                const std::vector<std::optional<ForestModel>>& models,
                DrawMethod draw_method, int n_donors, Rng& rng) {
    if (!completed.complete())
        throw DataError("augment: input dataset must be complete");
    if (models.size() != completed.n_cols)
        throw ConfigError("augment: one conditional model per column required");
    if (draw_method == DrawMethod::Point)
        throw ConfigError("augment requires draw_method = pmm or lrd");
    bool lrd = draw_method == DrawMethod::Lrd;

    Dataset synth = completed;
    for (std::size_t c = 0; c < completed.n_cols; ++c) {
        if (!models[c])
            throw ConfigError("augment: missing conditional model for column '" +
                              completed.columns[c].name + "'");
        const ForestModel& forest = *models[c];
        FeatureMatrix X = FeatureMatrix::from_dataset_excluding(completed, c);
        if (X.n_cols != forest.n_features)
            throw ConfigError("augment: model feature count mismatch for column '" +
                              completed.columns[c].name + "'");
        std::vector<double> preds = forest_predict(forest, X);

        // donors: every source row (complete input); honest residuals via OOB
        std::vector<double> donor_values(completed.n_rows);
        for (std::size_t r = 0; r < completed.n_rows; ++r)
            donor_values[r] = completed.at(r, c);
        std::vector<double> donor_residuals;
        if (lrd) {
            donor_residuals.resize(completed.n_rows);
            bool oob_usable = forest.n_training_rows == completed.n_rows;
            for (std::size_t r = 0; r < completed.n_rows; ++r) {
                if (oob_usable && forest.has_oob(r))
                    donor_residuals[r] = donor_values[r] - forest.oob_predictions[r];
                else
                    donor_residuals[r] = donor_values[r] - preds[r];
            }
        }

        for (std::size_t r = 0; r < completed.n_rows; ++r) {
            double v = lrd ? lrd_draw(preds[r], preds, donor_residuals, n_donors, rng)
                           : pmm_draw(preds[r], preds, donor_values, n_donors, rng);
            synth.set(r, c, v);
        }
    }
    return synth;
}

Dataset ampute(const Dataset& ds, const MissingnessModel& model, int n_rounds,
               Rng& rng) {
    if (model.per_column.size() != ds.n_cols)
        throw ConfigError("ampute: column count mismatch");
    if (n_rounds < 1) throw ConfigError("ampute: n_rounds must be >= 1");

    Dataset work = ds;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double inv_rounds = 1.0 / static_cast<double>(n_rounds);
    for (int round = 0; round < n_rounds; ++round) {
        for (std::size_t c = 0; c < ds.n_cols; ++c) {
            std::vector<double> p = predict_missingness(model, work, c);
            for (std::size_t r = 0; r < ds.n_rows; ++r) {
                if (!work.observed(r, c)) continue;
                double prob = std::clamp(p[r], 0.0, 1.0);
                double hazard =
                    prob >= 1.0 ? 1.0 : 1.0 - std::pow(1.0 - prob, inv_rounds);
                if (unif(rng) < hazard) work.unset(r, c);
            }
        }
    }
    return work;
}

}  // namespace esgmi
