#include "esgmi/trees.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "esgmi/errors.hpp"

namespace esgmi {

FeatureMatrix FeatureMatrix::from_dataset(const Dataset& ds) {
    FeatureMatrix X;
    X.n_rows = ds.n_rows;
    X.n_cols = ds.n_cols;
    X.values = ds.values;
    X.mask = ds.mask;
    return X;
}

FeatureMatrix FeatureMatrix::from_dataset_excluding(const Dataset& ds,
                                                    std::size_t excl_col) {
    FeatureMatrix X;
    X.n_rows = ds.n_rows;
    X.n_cols = ds.n_cols - 1;
    X.values.reserve(X.n_rows * X.n_cols);
    X.mask.reserve(X.n_rows * X.n_cols);
    for (std::size_t r = 0; r < ds.n_rows; ++r)
        for (std::size_t c = 0; c < ds.n_cols; ++c)
            if (c != excl_col) {
                X.values.push_back(ds.at(r, c));
                X.mask.push_back(ds.observed(r, c) ? 1 : 0);
            }
    return X;
}

double Tree::predict_row(const double* vals, const std::uint8_t* mask,
                         std::size_t stride) const {
    int node = 0;
    while (nodes[node].feature >= 0) {
        const TreeNode& n = nodes[node];
        std::size_t f = static_cast<std::size_t>(n.feature) * stride;
        bool go_left;
        if (!mask[f])
            go_left = n.missing_left;
        else
            go_left = vals[f] <= n.threshold;
        node = go_left ? n.left : n.right;
    }
    return nodes[node].value;
}

double Tree::predict(const FeatureMatrix& X, std::size_t row) const {
    return predict_row(X.values.data() + row * X.n_cols, X.mask.data() + row * X.n_cols);
}

int Tree::depth() const {
    // iterative: depth of node 0
    std::vector<std::pair<int, int>> stack{{0, 0}};
    int best = 0;
    while (!stack.empty()) {
        auto [n, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (nodes[n].feature >= 0) {
            stack.emplace_back(nodes[n].left, d + 1);
            stack.emplace_back(nodes[n].right, d + 1);
        }
    }
    return best;
}

namespace {

struct GroupStats {
    double n = 0, sum = 0, sumsq = 0;
    void add(double y) { n += 1; sum += y; sumsq += y * y; }
    double sse() const {
        if (n <= 0) return 0.0;
        double s = sumsq - sum * sum / n;
        return s > 0 ? s : 0.0;
    }
};

struct BestSplit {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    bool missing_left = true;
};

struct TreeBuilder {
    const FeatureMatrix& X;
    const std::vector<double>& y;
    TreeParams params;
    Rng& rng;
    std::vector<TreeNode> nodes;

    // scratch, reused across nodes
    std::vector<std::pair<double, double>> obs;  // (x, y) sorted by x

    int build(std::vector<std::size_t>& rows, int depth) {
        GroupStats total;
        for (std::size_t r : rows) total.add(y[r]);

        int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[id].value = total.sum / total.n;

        if (depth >= params.max_depth ||
            rows.size() < 2 * static_cast<std::size_t>(params.min_leaf))
            return id;

        BestSplit best = search_split(rows, total);
        if (best.feature < 0) return id;

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            bool go_left = X.observed(r, best.feature)
                               ? X.at(r, best.feature) <= best.threshold
                               : best.missing_left;
            (go_left ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        nodes[id].feature = best.feature;
        nodes[id].threshold = best.threshold;
        nodes[id].missing_left = best.missing_left;
        int l = build(left_rows, depth + 1);
        int r = build(right_rows, depth + 1);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }

    std::vector<int> candidate_features() {
        int p = static_cast<int>(X.n_cols);
        int mtry = params.mtry > 0 ? std::min(params.mtry, p) : p;
        std::vector<int> feats(p);
        std::iota(feats.begin(), feats.end(), 0);
        if (mtry < p) {
            for (int i = 0; i < mtry; ++i) {
                std::uniform_int_distribution<int> d(i, p - 1);
                std::swap(feats[i], feats[d(rng)]);
            }
            feats.resize(mtry);
            std::sort(feats.begin(), feats.end());  // lowest-index tie-break
        }
        return feats;
    }

    BestSplit search_split(const std::vector<std::size_t>& rows, const GroupStats& total) {
        BestSplit best;
        double node_sse = total.sse();
        if (node_sse <= 1e-12) return best;
        std::size_t min_leaf = static_cast<std::size_t>(params.min_leaf);

        for (int f : candidate_features()) {
            obs.clear();
            GroupStats miss;
            for (std::size_t r : rows) {
                if (X.observed(r, f))
                    obs.emplace_back(X.at(r, f), y[r]);
                else
                    miss.add(y[r]);
            }
            if (obs.empty()) continue;
            std::sort(obs.begin(), obs.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            auto consider = [&](double thr, const GroupStats& lobs, const GroupStats& robs,
                                bool has_missing_here) {
                // missing-left first so exact ties default to left routing
                for (int side = 0; side < (has_missing_here ? 2 : 1); ++side) {
                    GroupStats L = lobs, R = robs;
                    (side == 0 ? L : R).n += miss.n;
                    (side == 0 ? L : R).sum += miss.sum;
                    (side == 0 ? L : R).sumsq += miss.sumsq;
                    if (L.n < static_cast<double>(min_leaf) ||
                        R.n < static_cast<double>(min_leaf))
                        continue;
                    double gain = node_sse - L.sse() - R.sse();
                    if (gain > best.gain + 1e-12) {
                        best = {gain, f, thr, side == 0};
                    }
                }
            };

            bool has_missing = miss.n > 0;

            // pure missing-vs-observed split, all observed on the right
            if (has_missing) {
                GroupStats lobs, robs;
                for (const auto& [x, yy] : obs) robs.add(yy);
                consider(std::nextafter(obs.front().first,
                                        -std::numeric_limits<double>::infinity()),
                         lobs, robs, true);
            }

            GroupStats lobs;
            GroupStats robs;
            for (const auto& [x, yy] : obs) robs.add(yy);
            for (std::size_t i = 0; i + 1 < obs.size(); ++i) {
                lobs.add(obs[i].second);
                robs.n -= 1;
                robs.sum -= obs[i].second;
                robs.sumsq -= obs[i].second * obs[i].second;
                if (obs[i].first == obs[i + 1].first) continue;
                double thr = 0.5 * (obs[i].first + obs[i + 1].first);
                consider(thr, lobs, robs, has_missing);
            }

            // all observed on the left, missing on the right
            if (has_missing) {
                GroupStats all_obs;
                for (const auto& [x, yy] : obs) all_obs.add(yy);
                // threshold at the max observed value: x <= thr routes left
                GroupStats empty;
                GroupStats L = all_obs, R = empty;
                R.n += miss.n;
                R.sum += miss.sum;
                R.sumsq += miss.sumsq;
                if (L.n >= static_cast<double>(min_leaf) &&
                    R.n >= static_cast<double>(min_leaf)) {
                    double gain = node_sse - L.sse() - R.sse();
                    if (gain > best.gain + 1e-12)
                        best = {gain, f, obs.back().first, false};
                }
            }
        }
        return best;
    }
};

}  // namespace

Tree fit_tree_on_rows(const FeatureMatrix& X, const std::vector<double>& y,
                      const std::vector<std::size_t>& rows, const TreeParams& params,
                      Rng& rng) {
    if (rows.empty()) throw DataError("fit_tree: empty input");
    for (double v : y)
        if (std::isnan(v)) throw DataError("fit_tree: target contains missing values");
    TreeBuilder builder{X, y, params, rng, {}, {}};
    std::vector<std::size_t> work = rows;
    builder.build(work, 0);
    Tree t;
    t.nodes = std::move(builder.nodes);
    return t;
}

Tree fit_tree(const FeatureMatrix& X, const std::vector<double>& y,
              const TreeParams& params, Rng& rng) {
    if (X.n_rows == 0) throw DataError("fit_tree: empty input");
    if (y.size() != X.n_rows) throw DataError("fit_tree: target length mismatch");
    std::vector<std::size_t> rows(X.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    return fit_tree_on_rows(X, y, rows, params, rng);
}

ForestModel fit_forest(const FeatureMatrix& X, const std::vector<double>& y,
                       const ForestParams& params, std::uint64_t seed, int n_threads) {
    if (X.n_rows == 0) throw DataError("fit_forest: empty input");
    if (y.size() != X.n_rows) throw DataError("fit_forest: target length mismatch");
    if (params.n_trees < 1) throw ConfigError("fit_forest: n_trees must be >= 1");

    ForestModel model;
    model.n_features = X.n_cols;
    model.n_training_rows = X.n_rows;
    model.trees.resize(params.n_trees);
    model.bootstrap_indices.resize(params.n_trees);

    TreeParams tp = params.tree;
    if (tp.mtry == 0)
        tp.mtry = static_cast<int>((X.n_cols + 2) / 3);  // ceil(p/3)

    auto fit_one = [&](int t) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(t));
        std::vector<std::size_t> boot(X.n_rows);
        std::uniform_int_distribution<std::size_t> d(0, X.n_rows - 1);
        for (auto& b : boot) b = d(rng);
        model.bootstrap_indices[t] = boot;
        model.trees[t] = fit_tree_on_rows(X, y, boot, tp, rng);
    };

    if (n_threads > 1 && params.n_trees > 1) {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        int workers = std::min(n_threads, params.n_trees);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                for (int t; (t = next.fetch_add(1)) < params.n_trees;) fit_one(t);
            });
        for (auto& th : pool) th.join();
    } else {
        for (int t = 0; t < params.n_trees; ++t) fit_one(t);
    }

    // OOB bookkeeping
    model.oob_predictions.assign(X.n_rows, 0.0);
    model.oob_tree_count.assign(X.n_rows, 0);
    std::vector<std::uint8_t> inbag(X.n_rows);
    for (int t = 0; t < params.n_trees; ++t) {
        std::fill(inbag.begin(), inbag.end(), 0);
        for (std::size_t r : model.bootstrap_indices[t]) inbag[r] = 1;
        for (std::size_t r = 0; r < X.n_rows; ++r)
            if (!inbag[r]) {
                model.oob_predictions[r] += model.trees[t].predict(X, r);
                model.oob_tree_count[r] += 1;
            }
    }
    for (std::size_t r = 0; r < X.n_rows; ++r)
        if (model.oob_tree_count[r] > 0)
            model.oob_predictions[r] /= model.oob_tree_count[r];
        else
            model.oob_predictions[r] = std::numeric_limits<double>::quiet_NaN();

    return model;
}

double forest_predict_row(const ForestModel& model, const double* vals,
                          const std::uint8_t* mask) {
    double s = 0;
    for (const Tree& t : model.trees) s += t.predict_row(vals, mask);
    return s / static_cast<double>(model.trees.size());
}

std::vector<double> forest_predict(const ForestModel& model, const FeatureMatrix& X) {
    if (X.n_cols != model.n_features)
        throw ConfigError("forest_predict: feature count mismatch");
    std::vector<double> out(X.n_rows);
    for (std::size_t r = 0; r < X.n_rows; ++r)
        out[r] = forest_predict_row(model, X.values.data() + r * X.n_cols,
                                    X.mask.data() + r * X.n_cols);
    return out;
}

std::vector<OobResidual> oob_residuals(const ForestModel& model,
                                       const std::vector<double>& y) {
    if (y.size() != model.n_training_rows)
        throw ConfigError("oob_residuals: target length mismatch");
    std::vector<OobResidual> out;
    for (std::size_t r = 0; r < y.size(); ++r)
        if (model.has_oob(r)) out.push_back({r, y[r] - model.oob_predictions[r]});
    return out;
}

}  // namespace esgmi
