// esgmi: imputation and validation workbench for weighted-score KPI panels.
//
// Subcommands: impute, generate, ampute, workflow. Every stochastic command
// requires an explicit --seed; given the same flags the outputs are
// byte-identical. Exit codes: 1 = configuration error, 2 = data error,
// 3 = internal error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "esgmi/baseline.hpp"
#include "esgmi/csv.hpp"
#include "esgmi/errors.hpp"
#include "esgmi/mice.hpp"
#include "esgmi/missingness.hpp"
#include "esgmi/scoring.hpp"
#include "esgmi/synthetic.hpp"
#include "esgmi/workflow.hpp"

namespace {

using namespace esgmi;

int env_threads() {
    const char* v = std::getenv("ESGMI_THREADS");
    if (!v) return 1;
    int n = std::atoi(v);
    return n > 0 ? n : 1;
}

void write_manifest(const std::string& path, const std::string& subcommand,
                    const nlohmann::json& flags) {
    nlohmann::json j;
    j["tool"] = "esgmi";
    j["version"] = "1.0.0";
    j["subcommand"] = subcommand;
    j["flags"] = flags;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

void apply_column_kinds(Dataset& ds, const std::string& config_path) {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open '" + config_path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(config_path + ": invalid JSON: " + e.what());
    }
    for (const auto& [name, kind] : j.items())
        ds.columns[ds.column_index(name)].kind =
            parse_column_kind(kind.get<std::string>());
}

std::string indexed_name(const std::string& base, int k) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), ".%03d", k);
    std::string out = base;
    auto dot = out.rfind('.');
    if (dot != std::string::npos && dot > out.rfind('/') + 1)
        out.insert(dot, buf);
    else
        out += buf;
    return out;
}

struct ImputeArgs {
    std::string method;
    std::string in_path, out_path, columns_config;
    int k = 5, min_overlap = 1;
    int m = 50, donors = 5, iterations = 10;
    std::string draw = "pmm";
    int trees = 100, depth = 16, min_leaf = 5, mtry = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_impute(const ImputeArgs& a) {
    Dataset ds = load_csv(a.in_path);
    apply_column_kinds(ds, a.columns_config);

    bool stochastic = a.method == "mice-point" || a.method == "mice-mi";
    if (stochastic && !a.seed_set)
        throw ConfigError("--seed is required for method '" + a.method + "'");

    nlohmann::json flags{{"method", a.method}, {"in", a.in_path}, {"out", a.out_path}};
    if (stochastic) flags["seed"] = a.seed;

    if (a.method == "mean" || a.method == "median" || a.method == "mode") {
        save_csv(simple_impute(ds, parse_statistic(a.method)), a.out_path);
    } else if (a.method == "knn") {
        flags["k"] = a.k;
        KnnResult res = knn_impute(ds, KnnConfig{a.k, a.min_overlap});
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
        save_csv(res.imputed, a.out_path);
    } else if (a.method == "mice-point") {
        MiceConfig cfg;
        cfg.draw_method = DrawMethod::Point;
        cfg.n_iterations = a.iterations;
        cfg.forest = {a.trees, {a.depth, a.min_leaf, a.mtry}};
        cfg.seed = a.seed;
        save_csv(mice_single(ds, cfg).completed, a.out_path);
    } else if (a.method == "mice-mi") {
        MiceConfig cfg;
        cfg.draw_method = parse_draw_method(a.draw);
        cfg.n_imputations = a.m;
        cfg.n_donors = a.donors;
        cfg.n_iterations = a.iterations;
        cfg.forest = {a.trees, {a.depth, a.min_leaf, a.mtry}};
        cfg.seed = a.seed;
        cfg.n_threads = env_threads();
        flags["m"] = a.m;
        flags["draw"] = a.draw;
        flags["donors"] = a.donors;
        ImputationSet set = mice_multiple(ds, cfg);
        for (int k = 0; k < a.m; ++k)
            save_csv(set.completed[k], indexed_name(a.out_path, k + 1));
        // pooled per-cell summary
        std::string pooled_path = a.out_path + ".pooled.csv";
        std::ofstream pooled(pooled_path, std::ios::binary);
        if (!pooled) throw IoError("cannot open '" + pooled_path + "' for writing");
        pooled << "row,column,mean,lower,upper\n";
        for (const auto& pc : pool_cells(set, 0.95))
            pooled << ds.row_ids[pc.row] << ',' << ds.columns[pc.col].name << ','
                   << format_double(pc.mean) << ',' << format_double(pc.lower) << ','
                   << format_double(pc.upper) << '\n';
    } else {
        throw ConfigError("unknown method '" + a.method + "'");
    }
    write_manifest(a.out_path + ".manifest.json", "impute", flags);
    return 0;
}

struct GenerateArgs {
    std::string spec_path, out_prefix;
    std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a) {
    SyntheticSpec spec = load_synthetic_spec(a.spec_path);
    SyntheticData data = generate_synthetic(spec, a.seed);
    save_csv(data.complete, a.out_prefix + ".complete.csv");
    save_csv(data.amputed, a.out_prefix + ".amputed.csv");
    std::string truth_path = a.out_prefix + ".truth.csv";
    std::ofstream truth(truth_path, std::ios::binary);
    if (!truth) throw IoError("cannot open '" + truth_path + "' for writing");
    truth << "row,column,value\n";
    for (const auto& cell : data.truth)
        truth << data.complete.row_ids[cell.row] << ','
              << data.complete.columns[cell.col].name << ','
              << format_double(cell.true_value) << '\n';
    write_manifest(a.out_prefix + ".manifest.json", "generate",
                   {{"spec", a.spec_path}, {"out_prefix", a.out_prefix},
                    {"seed", a.seed}});
    return 0;
}

struct AmputeArgs {
    std::string in_path, pattern_path, out_path;
    int rounds = 10;
    int stages = 100, depth = 6;
    std::uint64_t seed = 0;
};

int cmd_ampute(const AmputeArgs& a) {
    Dataset complete = load_csv(a.in_path);
    Dataset pattern = load_csv(a.pattern_path);
    BoostedParams bp;
    bp.n_stages = a.stages;
    bp.max_depth = a.depth;
    MissingnessModel model = fit_missingness(pattern, bp);
    Rng rng = make_rng(a.seed);
    save_csv(ampute(complete, model, a.rounds, rng), a.out_path);
    write_manifest(a.out_path + ".manifest.json", "ampute",
                   {{"in", a.in_path}, {"pattern", a.pattern_path},
                    {"out", a.out_path}, {"rounds", a.rounds}, {"seed", a.seed}});
    return 0;
}

struct WorkflowArgs {
    std::string in_path, scoring_path, out_dir, columns_config;
    int m = 50, donors = 5, iterations = 10;
    std::string draw = "pmm";
    int trees = 100, depth = 16, min_leaf = 5, mtry = 0;
    int boost_stages = 100, boost_depth = 6;
    int ampute_rounds = 10;
    double test_fraction = 0.3, level = 0.95;
    std::uint64_t seed = 0;
};

int cmd_workflow(const WorkflowArgs& a) {
    Dataset ds = load_csv(a.in_path);
    apply_column_kinds(ds, a.columns_config);
    ScoringModel scoring = ScoringModel::load(a.scoring_path);

    WorkflowConfig cfg;
    cfg.mice.draw_method = parse_draw_method(a.draw);
    cfg.mice.n_imputations = a.m;
    cfg.mice.n_donors = a.donors;
    cfg.mice.n_iterations = a.iterations;
    cfg.mice.forest = {a.trees, {a.depth, a.min_leaf, a.mtry}};
    cfg.mice.seed = a.seed;
    cfg.mice.n_threads = env_threads();
    cfg.missingness.n_stages = a.boost_stages;
    cfg.missingness.max_depth = a.boost_depth;
    cfg.ampute_rounds = a.ampute_rounds;
    cfg.test_fraction = a.test_fraction;
    cfg.level = a.level;

    WorkflowResult res = run_workflow(ds, scoring, cfg);

    std::string d = a.out_dir + "/";
    for (std::size_t k = 0; k < res.production.m(); ++k)
        save_csv(res.production.completed[k],
                 indexed_name(d + "imputed.csv", static_cast<int>(k) + 1));
    write_scores_csv(res.scores, ds, d + "scores.csv");
    write_report_csv(res.report, d + "report.csv");
    write_report_text(res.report, d + "report.txt");
    write_histograms_csv(res.production, ds, d + "histograms.csv");
    write_chain_diagnostics_csv(res.production, ds, d + "chain_diagnostics.csv");
    write_width_bins_csv(
        width_by_missing_rate(res.scores, ds, {0.0, 0.1, 0.2, 0.3, 0.5, 1.0}),
        d + "width_vs_missing.csv");
    save_csv(res.synthetic_complete, d + "synthetic_complete.csv");
    save_csv(res.synthetic_amputed, d + "synthetic_amputed.csv");

    write_manifest(d + "manifest.json", "workflow",
                   {{"in", a.in_path}, {"scoring", a.scoring_path},
                    {"out_dir", a.out_dir}, {"m", a.m}, {"draw", a.draw},
                    {"donors", a.donors}, {"iterations", a.iterations},
                    {"trees", a.trees}, {"ampute_rounds", a.ampute_rounds},
                    {"test_fraction", a.test_fraction}, {"level", a.level},
                    {"seed", a.seed}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Imputation and validation workbench for weighted-score KPI panels"};
    app.require_subcommand(1);

    ImputeArgs ia;
    auto* impute = app.add_subcommand("impute", "Impute missing values in a CSV");
    impute->add_option("--method", ia.method,
                       "mean|median|mode|knn|mice-point|mice-mi")->required();
    impute->add_option("--in", ia.in_path, "input CSV")->required();
    impute->add_option("--out", ia.out_path, "output CSV")->required();
    impute->add_option("--columns", ia.columns_config, "column-kind overrides (JSON)");
    impute->add_option("--k", ia.k, "KNN neighbor count");
    impute->add_option("--min-overlap", ia.min_overlap, "KNN minimum co-observed columns");
    impute->add_option("--m", ia.m, "number of imputations (mice-mi)");
    impute->add_option("--draw", ia.draw, "pmm|lrd (mice-mi)");
    impute->add_option("--donors", ia.donors, "PMM/LRD donor count");
    impute->add_option("--iters", ia.iterations, "chained-equation sweeps");
    impute->add_option("--trees", ia.trees, "forest size per column");
    impute->add_option("--depth", ia.depth, "max tree depth");
    impute->add_option("--min-leaf", ia.min_leaf, "min rows per leaf");
    impute->add_option("--mtry", ia.mtry, "features per split (0 = ceil(p/3))");
    auto* iseed = impute->add_option("--seed", ia.seed, "RNG seed");

    GenerateArgs ga;
    auto* generate = app.add_subcommand("generate", "Generate a synthetic benchmark");
    generate->add_option("--spec", ga.spec_path, "synthetic spec (JSON)")->required();
    generate->add_option("--out-prefix", ga.out_prefix, "output path prefix")->required();
    generate->add_option("--seed", ga.seed, "RNG seed")->required();

    AmputeArgs aa;
    auto* amp = app.add_subcommand(
        "ampute", "Remove values from a complete CSV, mimicking a source pattern");
    amp->add_option("--in", aa.in_path, "complete input CSV")->required();
    amp->add_option("--pattern", aa.pattern_path,
                    "CSV whose missingness pattern to mimic")->required();
    amp->add_option("--out", aa.out_path, "output CSV")->required();
    amp->add_option("--rounds", aa.rounds, "amputation rounds");
    amp->add_option("--stages", aa.stages, "boosting stages per missingness model");
    amp->add_option("--boost-depth", aa.depth, "boosting tree depth");
    amp->add_option("--seed", aa.seed, "RNG seed")->required();

    WorkflowArgs wa;
    auto* wf = app.add_subcommand("workflow",
                                  "Impute, score and self-validate end to end");
    wf->add_option("--in", wa.in_path, "input CSV")->required();
    wf->add_option("--scoring", wa.scoring_path, "scoring model (JSON)")->required();
    wf->add_option("--out-dir", wa.out_dir, "output directory (must exist)")->required();
    wf->add_option("--columns", wa.columns_config, "column-kind overrides (JSON)");
    wf->add_option("--m", wa.m, "number of imputations");
    wf->add_option("--draw", wa.draw, "pmm|lrd");
    wf->add_option("--donors", wa.donors, "PMM/LRD donor count");
    wf->add_option("--iters", wa.iterations, "chained-equation sweeps");
    wf->add_option("--trees", wa.trees, "forest size per column");
    wf->add_option("--depth", wa.depth, "max tree depth");
    wf->add_option("--min-leaf", wa.min_leaf, "min rows per leaf");
    wf->add_option("--mtry", wa.mtry, "features per split (0 = ceil(p/3))");
    wf->add_option("--boost-stages", wa.boost_stages, "missingness boosting stages");
    wf->add_option("--boost-depth", wa.boost_depth, "missingness boosting depth");
    wf->add_option("--ampute-rounds", wa.ampute_rounds, "amputation rounds");
    wf->add_option("--test-fraction", wa.test_fraction, "validation test fraction");
    wf->add_option("--level", wa.level, "prediction-interval level");
    wf->add_option("--seed", wa.seed, "RNG seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*impute) {
            ia.seed_set = iseed->count() > 0;
            return cmd_impute(ia);
        }
        if (*generate) return cmd_generate(ga);
        if (*amp) return cmd_ampute(aa);
        if (*wf) return cmd_workflow(wa);
        return 1;
    } catch (const esgmi::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const esgmi::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const esgmi::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
}
