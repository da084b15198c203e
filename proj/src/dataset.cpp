#include "esgmi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "esgmi/errors.hpp"

namespace esgmi {

Dataset Dataset::make(std::size_t rows, std::size_t cols) {
    Dataset ds;
    ds.n_rows = rows;
    ds.n_cols = cols;
    ds.values.assign(rows * cols, kMissing);
    ds.mask.assign(rows * cols, 0);
    ds.columns.resize(cols);
    for (std::size_t c = 0; c < cols; ++c) ds.columns[c].name = "c" + std::to_string(c);
    ds.row_ids.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) ds.row_ids[r] = "r" + std::to_string(r);
    return ds;
}

std::size_t Dataset::observed_count() const {
    return static_cast<std::size_t>(
        std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::size_t Dataset::column_index(const std::string& name) const {
    for (std::size_t c = 0; c < n_cols; ++c)
        if (columns[c].name == name) return c;
    throw ConfigError("unknown column '" + name + "'");
}

std::vector<double> Dataset::observed_values(std::size_t col) const {
    std::vector<double> out;
    for (std::size_t r = 0; r < n_rows; ++r)
        if (observed(r, col)) out.push_back(at(r, col));
    return out;
}

std::vector<double> Dataset::observed_support(std::size_t col) const {
    std::vector<double> v = observed_values(col);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

double Dataset::column_missing_rate(std::size_t col) const {
    if (n_rows == 0) return 0.0;
    std::size_t miss = 0;
    for (std::size_t r = 0; r < n_rows; ++r)
        if (!observed(r, col)) ++miss;
    return static_cast<double>(miss) / static_cast<double>(n_rows);
}

double Dataset::row_missing_rate(std::size_t row) const {
    if (n_cols == 0) return 0.0;
    std::size_t miss = 0;
    for (std::size_t c = 0; c < n_cols; ++c)
        if (!observed(row, c)) ++miss;
    return static_cast<double>(miss) / static_cast<double>(n_cols);
}

void Dataset::validate() const {
    if (values.size() != n_rows * n_cols || mask.size() != n_rows * n_cols)
        throw DataError("dataset shape mismatch between values/mask and dimensions");
    if (columns.size() != n_cols) throw DataError("column metadata count mismatch");
    if (row_ids.size() != n_rows) throw DataError("row id count mismatch");
    if (!row_groups.empty() && row_groups.size() != n_rows)
        throw DataError("row group count mismatch");
    std::unordered_set<std::string> names;
    for (const auto& cm : columns)
        if (!names.insert(cm.name).second)
            throw DataError("duplicate column name '" + cm.name + "'");
}

MissingnessPattern missingness_pattern(const Dataset& ds) {
    MissingnessPattern p;
    p.indicator.resize(ds.n_rows * ds.n_cols);
    for (std::size_t i = 0; i < p.indicator.size(); ++i)
        p.indicator[i] = ds.mask[i] ? 0 : 1;
    p.column_missing_rate.resize(ds.n_cols);
    p.row_missing_rate.resize(ds.n_rows);
    for (std::size_t c = 0; c < ds.n_cols; ++c)
        p.column_missing_rate[c] = ds.column_missing_rate(c);
    for (std::size_t r = 0; r < ds.n_rows; ++r)
        p.row_missing_rate[r] = ds.row_missing_rate(r);
    return p;
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.n_rows = rows.size();
    out.n_cols = ds.n_cols;
    out.columns = ds.columns;
    out.id_header = ds.id_header;
    out.group_header = ds.group_header;
    out.values.reserve(rows.size() * ds.n_cols);
    out.mask.reserve(rows.size() * ds.n_cols);
    for (std::size_t r : rows) {
        out.values.insert(out.values.end(), ds.values.begin() + r * ds.n_cols,
                          ds.values.begin() + (r + 1) * ds.n_cols);
        out.mask.insert(out.mask.end(), ds.mask.begin() + r * ds.n_cols,
                        ds.mask.begin() + (r + 1) * ds.n_cols);
        out.row_ids.push_back(ds.row_ids[r]);
        if (!ds.row_groups.empty()) out.row_groups.push_back(ds.row_groups[r]);
    }
    return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_rows(const Dataset& ds, double test_fraction,
                                       std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test_fraction must lie in (0,1)");
    if (ds.n_rows < 2) throw ConfigError("split_rows needs at least 2 rows");
    std::vector<std::size_t> idx(ds.n_rows);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(ds.n_rows)));
    std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + n_test);
    std::vector<std::size_t> train_idx(idx.begin() + n_test, idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {take_rows(ds, train_idx), take_rows(ds, test_idx)};
}

std::pair<Dataset, std::vector<HoldOutCell>> remove_observed(const Dataset& ds,
                                                             double fraction,
                                                             std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw ConfigError("fraction must lie in [0,1]");
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t r = 0; r < ds.n_rows; ++r)
        for (std::size_t c = 0; c < ds.n_cols; ++c)
            if (ds.observed(r, c)) cells.emplace_back(r, c);
    if (cells.empty()) throw DataError("remove_observed: no observed cell in input");
    Rng rng = make_rng(seed);
    std::shuffle(cells.begin(), cells.end(), rng);
    auto n_remove = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(cells.size())));
    Dataset out = ds;
    std::vector<HoldOutCell> held;
    held.reserve(n_remove);
    for (std::size_t i = 0; i < n_remove; ++i) {
        auto [r, c] = cells[i];
        held.push_back({r, c, ds.at(r, c)});
        out.unset(r, c);
    }
    std::sort(held.begin(), held.end(), [](const HoldOutCell& a, const HoldOutCell& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    return {std::move(out), std::move(held)};
}

ColumnKind parse_column_kind(const std::string& s) {
    if (s == "continuous") return ColumnKind::Continuous;
    if (s == "semi_continuous") return ColumnKind::SemiContinuous;
    if (s == "categorical_encoded") return ColumnKind::CategoricalEncoded;
    throw ConfigError("unknown column kind '" + s + "'");
}

}  // namespace esgmi
