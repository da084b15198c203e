#include "esgmi/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "esgmi/csv.hpp"
#include "esgmi/errors.hpp"

namespace esgmi {

namespace {

void normalize_group(std::vector<WeightedRef>& refs, const std::string& owner) {
    double total = 0.0;
    for (const auto& ref : refs) {
        if (ref.weight < 0.0)
            throw ConfigError("scoring model: negative weight for '" + ref.name +
                              "' in '" + owner + "'");
        total += ref.weight;
    }
    if (total <= 0.0)
        throw ConfigError("scoring model: weights in '" + owner + "' sum to zero");
    for (auto& ref : refs) ref.weight /= total;
}

const std::set<std::string> kPillarNames = {"Environment", "Social", "Governance"};

}  // namespace

void ScoringModel::finalize() {
    std::set<std::string> seen_kpis;
    for (auto& [name, refs] : descriptors) {
        if (refs.empty())
            throw ConfigError("scoring model: descriptor '" + name + "' has no KPIs");
        for (const auto& ref : refs)
            if (!seen_kpis.insert(ref.name).second)
                throw ConfigError("scoring model: KPI '" + ref.name +
                                  "' belongs to more than one descriptor");
        normalize_group(refs, name);
    }
    std::set<std::string> desc_names;
    for (const auto& [name, refs] : descriptors) desc_names.insert(name);
    std::set<std::string> seen_descs;
    for (auto& [name, refs] : pillars) {
        if (!kPillarNames.count(name))
            throw ConfigError("scoring model: unknown pillar '" + name +
                              "' (expected Environment, Social or Governance)");
        for (const auto& ref : refs) {
            if (!desc_names.count(ref.name))
                throw ConfigError("scoring model: pillar '" + name +
                                  "' references unknown descriptor '" + ref.name + "'");
            if (!seen_descs.insert(ref.name).second)
                throw ConfigError("scoring model: descriptor '" + ref.name +
                                  "' belongs to more than one pillar");
        }
        normalize_group(refs, name);
    }
    if (seen_descs.size() != desc_names.size())
        throw ConfigError("scoring model: every descriptor must belong to a pillar");
    std::set<std::string> pillar_names;
    for (const auto& [name, refs] : pillars) pillar_names.insert(name);
    for (const auto& ref : overall)
        if (!pillar_names.count(ref.name))
            throw ConfigError("scoring model: overall references unknown pillar '" +
                              ref.name + "'");
    normalize_group(overall, "overall");
}

void ScoringModel::check_columns(const Dataset& ds) const {
    for (const auto& [name, refs] : descriptors)
        for (const auto& ref : refs) ds.column_index(ref.name);  // throws if absent
}

ScoringModel ScoringModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    ScoringModel model;
    try {
        for (const auto& [name, group] : j.at("descriptors").items()) {
            std::vector<WeightedRef> refs;
            for (const auto& [kpi, w] : group.items())
                refs.push_back({kpi, w.get<double>()});
            model.descriptors.emplace_back(name, std::move(refs));
        }
        for (const auto& [name, group] : j.at("pillars").items()) {
            std::vector<WeightedRef> refs;
            for (const auto& [desc, w] : group.items())
                refs.push_back({desc, w.get<double>()});
            model.pillars.emplace_back(name, std::move(refs));
        }
        for (const auto& [pillar, w] : j.at("overall").items())
            model.overall.push_back({pillar, w.get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": bad scoring model: " + e.what());
    }
    model.finalize();
    return model;
}

ScoreLevels compute_scores(const Dataset& ds, const ScoringModel& model) {
    if (!ds.complete())
        throw ConfigError("compute_scores: dataset must be complete");
    model.check_columns(ds);

    ScoreLevels s;
    for (const auto& [name, refs] : model.descriptors) s.descriptor_names.push_back(name);
    for (const auto& [name, refs] : model.pillars) s.pillar_names.push_back(name);

    std::map<std::string, std::size_t> desc_index;
    for (std::size_t i = 0; i < s.descriptor_names.size(); ++i)
        desc_index[s.descriptor_names[i]] = i;
    std::map<std::string, std::size_t> pillar_index;
    for (std::size_t i = 0; i < s.pillar_names.size(); ++i)
        pillar_index[s.pillar_names[i]] = i;

    s.descriptor.assign(ds.n_rows, std::vector<double>(s.descriptor_names.size(), 0.0));
    s.pillar.assign(ds.n_rows, std::vector<double>(s.pillar_names.size(), 0.0));
    s.overall.assign(ds.n_rows, 0.0);

    for (std::size_t d = 0; d < model.descriptors.size(); ++d) {
        const auto& refs = model.descriptors[d].second;
        std::vector<std::size_t> cols;
        for (const auto& ref : refs) cols.push_back(ds.column_index(ref.name));
        for (std::size_t r = 0; r < ds.n_rows; ++r) {
            double v = 0.0;
            for (std::size_t i = 0; i < refs.size(); ++i)
                v += refs[i].weight * ds.at(r, cols[i]);
            s.descriptor[r][d] = v;
        }
    }
    for (std::size_t pi = 0; pi < model.pillars.size(); ++pi) {
        const auto& refs = model.pillars[pi].second;
        for (std::size_t r = 0; r < ds.n_rows; ++r) {
            double v = 0.0;
            for (const auto& ref : refs)
                v += ref.weight * s.descriptor[r][desc_index.at(ref.name)];
            s.pillar[r][pi] = v;
        }
    }
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        double v = 0.0;
        for (const auto& ref : model.overall)
            v += ref.weight * s.pillar[r][pillar_index.at(ref.name)];
        s.overall[r] = v;
    }
    return s;
}

namespace {

ScoreInterval summarize(std::vector<double>& vals, double ql, double qu) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    std::sort(vals.begin(), vals.end());
    return {mean, quantile_sorted(vals, ql), quantile_sorted(vals, qu)};
}

}  // namespace

ScoreDistribution score_distribution(const ImputationSet& set,
                                     const ScoringModel& model, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0,1)");
    if (set.m() < 2) throw ConfigError("score_distribution needs m >= 2");

    std::vector<ScoreLevels> per_imp;
    per_imp.reserve(set.m());
    for (const Dataset& ds : set.completed) per_imp.push_back(compute_scores(ds, model));

    const ScoreLevels& first = per_imp.front();
    ScoreDistribution dist;
    dist.level = level;
    dist.m = set.m();
    dist.descriptor_names = first.descriptor_names;
    dist.pillar_names = first.pillar_names;
    double ql = (1.0 - level) / 2.0, qu = (1.0 + level) / 2.0;

    std::size_t n_rows = first.overall.size();
    dist.descriptor.assign(n_rows, {});
    dist.pillar.assign(n_rows, {});
    dist.overall.resize(n_rows);
    std::vector<double> vals(set.m());
    for (std::size_t r = 0; r < n_rows; ++r) {
        dist.descriptor[r].resize(first.descriptor_names.size());
        for (std::size_t d = 0; d < first.descriptor_names.size(); ++d) {
            for (std::size_t k = 0; k < set.m(); ++k) vals[k] = per_imp[k].descriptor[r][d];
            dist.descriptor[r][d] = summarize(vals, ql, qu);
        }
        dist.pillar[r].resize(first.pillar_names.size());
        for (std::size_t p = 0; p < first.pillar_names.size(); ++p) {
            for (std::size_t k = 0; k < set.m(); ++k) vals[k] = per_imp[k].pillar[r][p];
            dist.pillar[r][p] = summarize(vals, ql, qu);
        }
        for (std::size_t k = 0; k < set.m(); ++k) vals[k] = per_imp[k].overall[r];
        dist.overall[r] = summarize(vals, ql, qu);
    }
    return dist;
}

namespace {

struct MetricAccum {
    double se = 0, ae = 0, width = 0;
    std::size_t covered = 0, n = 0;

    void add(double truth, const ScoreInterval& iv) {
        double err = iv.mean - truth;
        se += err * err;
        ae += std::abs(err);
        width += iv.width();
        if (truth >= iv.lower && truth <= iv.upper) ++covered;
        ++n;
    }
    MetricRow finish(const std::string& level, const std::string& name) const {
        MetricRow row{level, name, 0, 0, 0, 0, n};
        if (n > 0) {
            row.rmse = std::sqrt(se / static_cast<double>(n));
            row.mae = ae / static_cast<double>(n);
            row.cr = static_cast<double>(covered) / static_cast<double>(n);
            row.aw = width / static_cast<double>(n);
        }
        return row;
    }
};

}  // namespace

const MetricRow* EvaluationReport::find(const std::string& level,
                                        const std::string& name) const {
    for (const auto& row : rows)
        if (row.level == level && row.name == name) return &row;
    return nullptr;
}

EvaluationReport evaluate(const ImputationSet& set,
                          const std::vector<HoldOutCell>& truth,
                          const ScoringModel& model, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0,1)");
    const Dataset& first = set.completed.front();
    for (const auto& cell : truth)
        if (set.source_mask[cell.row * first.n_cols + cell.col])
            throw ConfigError("evaluate: truth cell (" + std::to_string(cell.row) +
                              "," + std::to_string(cell.col) +
                              ") was not missing in the source");

    EvaluationReport report;
    report.m = set.m();
    report.seed = set.config.seed;
    report.draw_method = set.config.draw_method == DrawMethod::Lrd ? "lrd" : "pmm";

    // KPI level: per-cell pooled mean + interval vs truth
    std::vector<PooledCell> pooled = pool_cells(set, level);
    std::map<std::pair<std::size_t, std::size_t>, const PooledCell*> by_cell;
    for (const auto& pc : pooled) by_cell[{pc.row, pc.col}] = &pc;

    std::map<std::string, MetricAccum> per_kpi;
    MetricAccum all_kpi;
    for (const auto& cell : truth) {
        const PooledCell* pc = by_cell.at({cell.row, cell.col});
        ScoreInterval iv{pc->mean, pc->lower, pc->upper};
        per_kpi[first.columns[cell.col].name].add(cell.true_value, iv);
        all_kpi.add(cell.true_value, iv);
    }
    report.rows.push_back(all_kpi.finish("kpi", "ALL"));
    for (std::size_t c = 0; c < first.n_cols; ++c) {
        auto it = per_kpi.find(first.columns[c].name);
        if (it != per_kpi.end())
            report.rows.push_back(it->second.finish("kpi", first.columns[c].name));
    }

    // Score levels: truth values re-aggregated through one completed dataset
    Dataset truth_completed = first;
    std::vector<std::uint8_t> row_has_truth(first.n_rows, 0);
    for (const auto& cell : truth) {
        truth_completed.set(cell.row, cell.col, cell.true_value);
        row_has_truth[cell.row] = 1;
    }
    ScoreLevels truth_scores = compute_scores(truth_completed, model);
    ScoreDistribution dist = score_distribution(set, model, level);

    std::vector<MetricAccum> desc_acc(dist.descriptor_names.size());
    std::vector<MetricAccum> pillar_acc(dist.pillar_names.size());
    MetricAccum overall_acc;
    for (std::size_t r = 0; r < first.n_rows; ++r) {
        if (!row_has_truth[r]) continue;
        for (std::size_t d = 0; d < dist.descriptor_names.size(); ++d)
            desc_acc[d].add(truth_scores.descriptor[r][d], dist.descriptor[r][d]);
        for (std::size_t p = 0; p < dist.pillar_names.size(); ++p)
            pillar_acc[p].add(truth_scores.pillar[r][p], dist.pillar[r][p]);
        overall_acc.add(truth_scores.overall[r], dist.overall[r]);
    }
    for (std::size_t d = 0; d < dist.descriptor_names.size(); ++d)
        report.rows.push_back(desc_acc[d].finish("descriptor", dist.descriptor_names[d]));
    for (std::size_t p = 0; p < dist.pillar_names.size(); ++p)
        report.rows.push_back(pillar_acc[p].finish("pillar", dist.pillar_names[p]));
    report.rows.push_back(overall_acc.finish("overall", "ESG"));
    return report;
}

void write_report_csv(const EvaluationReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "level,name,rmse,mae,cr,aw,n,draw_method,m,seed\n";
    for (const auto& row : report.rows)
        out << row.level << ',' << row.name << ',' << format_double(row.rmse) << ','
            << format_double(row.mae) << ',' << format_double(row.cr) << ','
            << format_double(row.aw) << ',' << row.n << ',' << report.draw_method
            << ',' << report.m << ',' << report.seed << '\n';
}

void write_report_text(const EvaluationReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    std::vector<const MetricRow*> cols;
    if (const auto* esg = report.find("overall", "ESG")) cols.push_back(esg);
    for (const auto& row : report.rows)
        if (row.level == "pillar") cols.push_back(&row);

    out << "Multiple-imputation performance (" << report.draw_method << ", m = "
        << report.m << ")\n\n";
    char buf[64];
    out << "Metric  ";
    for (const auto* c : cols) {
        std::snprintf(buf, sizeof(buf), "%14s", c->name.c_str());
        out << buf;
    }
    out << '\n';
    auto line = [&](const char* label, auto getter, const char* fmt) {
        out << label;
        for (const auto* c : cols) {
            std::snprintf(buf, sizeof(buf), fmt, getter(*c));
            out << buf;
        }
        out << '\n';
    };
    line("RMSE    ", [](const MetricRow& r) { return r.rmse; }, "%14.4f");
    line("MAE     ", [](const MetricRow& r) { return r.mae; }, "%14.4f");
    line("CR (%)  ", [](const MetricRow& r) { return 100.0 * r.cr; }, "%14.1f");
    line("AW      ", [](const MetricRow& r) { return r.aw; }, "%14.4f");
}

}  // namespace esgmi
