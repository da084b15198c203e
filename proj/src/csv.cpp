#include "esgmi/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "esgmi/errors.hpp"

namespace esgmi {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& missing_token,
                 const std::string& group_col) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file, header expected");
    std::vector<std::string> header = split_line(line);
    if (header.size() < 2)
        throw DataError(path + ": header must have an id column plus at least one KPI");

    std::size_t group_idx = header.size();  // sentinel: no group column
    for (std::size_t i = 1; i < header.size(); ++i)
        if (!group_col.empty() && header[i] == group_col) group_idx = i;

    Dataset ds;
    ds.id_header = header[0];
    if (!group_col.empty()) ds.group_header = group_col;
    for (std::size_t i = 1; i < header.size(); ++i)
        if (i != group_idx) ds.columns.push_back({header[i], ColumnKind::Continuous});
    ds.n_cols = ds.columns.size();

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() && in.eof()) break;
        std::vector<std::string> fields = split_line(line);
        if (fields.size() != header.size())
            throw DataError(path + ": row " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
        ds.row_ids.push_back(fields[0]);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            if (i == group_idx) {
                ds.row_groups.push_back(fields[i]);
                continue;
            }
            if (fields[i] == missing_token) {
                ds.values.push_back(Dataset::kMissing);
                ds.mask.push_back(0);
            } else {
                char* end = nullptr;
                double v = std::strtod(fields[i].c_str(), &end);
                if (end == fields[i].c_str() || *end != '\0')
                    throw DataError(path + ": unparseable numeric cell '" + fields[i] +
                                    "' at row " + std::to_string(line_no) + ", column '" +
                                    header[i] + "'");
                ds.values.push_back(v);
                ds.mask.push_back(1);
            }
        }
    }
    ds.n_rows = ds.row_ids.size();
    ds.validate();
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path,
              const std::string& missing_token) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << ds.id_header;
    if (!ds.row_groups.empty()) out << ',' << ds.group_header;
    for (const auto& cm : ds.columns) out << ',' << cm.name;
    out << '\n';
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        out << ds.row_ids[r];
        if (!ds.row_groups.empty()) out << ',' << ds.row_groups[r];
        for (std::size_t c = 0; c < ds.n_cols; ++c) {
            out << ',';
            if (ds.observed(r, c))
                out << format_double(ds.at(r, c));
            else
                out << missing_token;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace esgmi
