#pragma once

#include <string>

#include "esgmi/dataset.hpp"

namespace esgmi {

/// Reads a comma-separated file: header row, first column is the row id.
/// Cells equal to missing_token become unobserved. If group_col names an
/// existing column, it is read as the per-row group label instead of data.
Dataset load_csv(const std::string& path, const std::string& missing_token = "",
                 const std::string& group_col = "");

/// Writes the dataset back out; unobserved cells become missing_token,
/// floats use 17 significant digits so load(save(ds)) == ds.
void save_csv(const Dataset& ds, const std::string& path,
              const std::string& missing_token = "");

/// Round-trip-safe float formatting (%.17g).
std::string format_double(double v);

}  // namespace esgmi
