#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "esgmi/rng.hpp"

namespace esgmi {

enum class ColumnKind { Continuous, SemiContinuous, CategoricalEncoded };

struct ColumnMeta {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
};

/// Numeric KPI panel: dense row-major value matrix plus an authoritative
/// observation mask. The mask, not the NaN sentinel, decides what is data.
/// Treated as immutable once built; operations return new datasets.
struct Dataset {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values;        // row-major, n_rows * n_cols
    std::vector<std::uint8_t> mask;    // 1 = observed
    std::vector<ColumnMeta> columns;
    std::vector<std::string> row_ids;
    std::vector<std::string> row_groups;  // empty or size n_rows
    std::string id_header = "id";
    std::string group_header = "group";

    static constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

    double at(std::size_t r, std::size_t c) const { return values[r * n_cols + c]; }
    bool observed(std::size_t r, std::size_t c) const { return mask[r * n_cols + c] != 0; }

    void set(std::size_t r, std::size_t c, double v) {
        values[r * n_cols + c] = v;
        mask[r * n_cols + c] = 1;
    }
    void unset(std::size_t r, std::size_t c) {
        values[r * n_cols + c] = kMissing;
        mask[r * n_cols + c] = 0;
    }

    std::size_t observed_count() const;
    std::size_t missing_count() const { return n_rows * n_cols - observed_count(); }
    bool complete() const { return missing_count() == 0; }

    std::size_t column_index(const std::string& name) const;  // throws ConfigError

    /// Sorted distinct observed values of one column.
    std::vector<double> observed_support(std::size_t col) const;
    /// Observed values of one column, in row order.
    std::vector<double> observed_values(std::size_t col) const;

    double column_missing_rate(std::size_t col) const;
    double row_missing_rate(std::size_t row) const;

    /// Checks shape/uniqueness invariants; throws DataError on violation.
    void validate() const;

    static Dataset make(std::size_t rows, std::size_t cols);
};

/// Explicit missing-data view: indicator = !mask plus per-slice rates.
struct MissingnessPattern {
    std::vector<std::uint8_t> indicator;  // 1 = missing
    std::vector<double> column_missing_rate;
    std::vector<double> row_missing_rate;
};

MissingnessPattern missingness_pattern(const Dataset& ds);

struct HoldOutCell {
    std::size_t row;
    std::size_t col;
    double true_value;
};

/// Disjoint row partition (train, test); test gets round(test_fraction * rows).
std::pair<Dataset, Dataset> split_rows(const Dataset& ds, double test_fraction,
                                       std::uint64_t seed);

/// Turns round(fraction * observed_count) observed cells missing, uniformly at
/// random, returning the new dataset and the held-out ground truth.
std::pair<Dataset, std::vector<HoldOutCell>> remove_observed(const Dataset& ds,
                                                             double fraction,
                                                             std::uint64_t seed);

ColumnKind parse_column_kind(const std::string& s);  // throws ConfigError

}  // namespace esgmi
