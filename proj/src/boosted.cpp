#include "esgmi/boosted.hpp"

#include <algorithm>
#include <cmath>

#include "esgmi/errors.hpp"

namespace esgmi {

namespace {

constexpr double kHessEps = 1e-12;

std::vector<double> quantile_edges(std::vector<double> obs, int n_bins) {
    std::sort(obs.begin(), obs.end());
    std::vector<double> edges;
    if (obs.empty()) return edges;
    for (int b = 1; b < n_bins; ++b) {
        double q = static_cast<double>(b) / n_bins;
        double h = q * static_cast<double>(obs.size() - 1);
        auto lo = static_cast<std::size_t>(h);
        double frac = h - static_cast<double>(lo);
        double e = obs[lo] + frac * (lo + 1 < obs.size() ? obs[lo + 1] - obs[lo] : 0.0);
        if (edges.empty() || e > edges.back()) edges.push_back(e);
    }
    return edges;
}

struct BinStats {
    double cnt = 0, g = 0, h = 0;
};

double leaf_value(double g, double h) { return -g / (h + kHessEps); }

double split_score(double g, double h) { return g * g / (h + kHessEps); }

struct HistBuilder {
    const std::vector<std::uint16_t>& bins;  // row-major binned matrix
    std::size_t n_cols;
    const std::vector<int>& n_obs_bins;  // per feature; missing bin id == n_obs_bins[f]
    const std::vector<double>& grad;
    const std::vector<double>& hess;
    int max_depth;
    int min_leaf;
    std::vector<BinnedNode> nodes;

    int build(std::vector<std::size_t>& rows, int depth) {
        double G = 0, H = 0;
        for (std::size_t r : rows) {
            G += grad[r];
            H += hess[r];
        }
        int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[id].value = leaf_value(G, H);

        if (depth >= max_depth || rows.size() < 2 * static_cast<std::size_t>(min_leaf))
            return id;

        double best_gain = 1e-12;
        int best_f = -1, best_b = 0;
        bool best_missing_left = true;

        std::vector<BinStats> hist;
        for (std::size_t f = 0; f < n_cols; ++f) {
            int nb = n_obs_bins[f];
            hist.assign(nb + 1, BinStats{});  // last slot = missing bin
            for (std::size_t r : rows) {
                BinStats& s = hist[bins[r * n_cols + f]];
                s.cnt += 1;
                s.g += grad[r];
                s.h += hess[r];
            }
            const BinStats& miss = hist[nb];
            double parent = split_score(G, H);

            // b = -1 puts every observed bin on the right (missing-only left)
            double cl = 0, gl = 0, hl = 0;
            for (int b = -1; b < nb; ++b) {
                if (b >= 0) {
                    cl += hist[b].cnt;
                    gl += hist[b].g;
                    hl += hist[b].h;
                }
                for (int side = 0; side < (miss.cnt > 0 ? 2 : 1); ++side) {
                    double Lc = cl, Lg = gl, Lh = hl;
                    double Rc = rows.size() - cl - miss.cnt;
                    double Rg = G - gl - miss.g;
                    double Rh = H - hl - miss.h;
                    if (side == 0) {
                        Lc += miss.cnt;
                        Lg += miss.g;
                        Lh += miss.h;
                    } else {
                        Rc += miss.cnt;
                        Rg += miss.g;
                        Rh += miss.h;
                    }
                    if (Lc < min_leaf || Rc < min_leaf) continue;
                    double gain = split_score(Lg, Lh) + split_score(Rg, Rh) - parent;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_f = static_cast<int>(f);
                        best_b = b;
                        best_missing_left = side == 0;
                    }
                }
            }
        }
        if (best_f < 0) return id;

        std::vector<std::size_t> left_rows, right_rows;
        int miss_bin = n_obs_bins[best_f];
        for (std::size_t r : rows) {
            int b = bins[r * n_cols + best_f];
            bool go_left = (b == miss_bin) ? best_missing_left : b <= best_b;
            (go_left ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        nodes[id].feature = best_f;
        nodes[id].bin_threshold = best_b;
        nodes[id].missing_left = best_missing_left;
        int l = build(left_rows, depth + 1);
        int r = build(right_rows, depth + 1);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }
};

double predict_binned(const std::vector<BinnedNode>& nodes, const int* row_bins,
                      const std::vector<int>& n_obs_bins) {
    int node = 0;
    while (nodes[node].feature >= 0) {
        const BinnedNode& n = nodes[node];
        int b = row_bins[n.feature];
        bool go_left =
            (b == n_obs_bins[n.feature]) ? n.missing_left : b <= n.bin_threshold;
        node = go_left ? n.left : n.right;
    }
    return nodes[node].value;
}

}  // namespace

int BoostedModel::bin_of(std::size_t feature, double value, bool observed) const {
    const auto& edges = bin_edges[feature];
    if (!observed) return static_cast<int>(edges.size()) + 1;  // missing bin
    auto it = std::upper_bound(edges.begin(), edges.end(), value);
    return static_cast<int>(it - edges.begin());
}

double BoostedModel::score_row(const double* vals, const std::uint8_t* mask) const {
    double s = base_score;
    std::vector<int> row_bins(n_features);
    for (std::size_t f = 0; f < n_features; ++f)
        row_bins[f] = bin_of(f, vals[f], mask[f] != 0);
    // missing bin id in traversal is edges.size()+1, matching bin_of
    std::vector<int> miss_id(n_features);
    for (std::size_t f = 0; f < n_features; ++f)
        miss_id[f] = static_cast<int>(bin_edges[f].size()) + 1;
    for (const auto& stage : stages) {
        int node = 0;
        while (stage[node].feature >= 0) {
            const BinnedNode& n = stage[node];
            int b = row_bins[n.feature];
            bool go_left =
                (b == miss_id[n.feature]) ? n.missing_left : b <= n.bin_threshold;
            node = go_left ? n.left : n.right;
        }
        s += params.learning_rate * stage[node].value;
    }
    return s;
}

BoostedModel fit_boosted(const FeatureMatrix& X, const std::vector<double>& y,
                         const BoostedParams& params) {
    if (X.n_rows == 0) throw DataError("fit_boosted: empty input");
    if (y.size() != X.n_rows) throw DataError("fit_boosted: target length mismatch");
    if (params.n_stages < 0) throw ConfigError("fit_boosted: n_stages must be >= 0");

    BoostedModel model;
    model.params = params;
    model.n_features = X.n_cols;

    if (params.task == BoostTask::BinaryLogLoss) {
        double pos = 0;
        for (double v : y) {
            if (v != 0.0 && v != 1.0)
                throw DataError("fit_boosted: binary task labels must be 0/1");
            pos += v;
        }
        double rate = pos / static_cast<double>(y.size());
        if (rate <= 0.0 || rate >= 1.0)
            throw DataError("fit_boosted: binary labels are single-class");
        model.base_score = std::log(rate / (1.0 - rate));
    } else {
        double s = 0;
        for (double v : y) s += v;
        model.base_score = s / static_cast<double>(y.size());
    }

    // bin once from training quantiles; missing gets its own bin id per feature
    model.bin_edges.resize(X.n_cols);
    std::vector<int> n_obs_bins(X.n_cols);
    for (std::size_t f = 0; f < X.n_cols; ++f) {
        std::vector<double> obs;
        for (std::size_t r = 0; r < X.n_rows; ++r)
            if (X.observed(r, f)) obs.push_back(X.at(r, f));
        model.bin_edges[f] = quantile_edges(std::move(obs), params.n_bins);
        n_obs_bins[f] = static_cast<int>(model.bin_edges[f].size()) + 1;
    }
    std::vector<std::uint16_t> bins(X.n_rows * X.n_cols);
    for (std::size_t r = 0; r < X.n_rows; ++r)
        for (std::size_t f = 0; f < X.n_cols; ++f) {
            int b = X.observed(r, f)
                        ? model.bin_of(f, X.at(r, f), true)
                        : n_obs_bins[f];
            bins[r * X.n_cols + f] = static_cast<std::uint16_t>(b);
        }

    std::vector<double> score(X.n_rows, model.base_score);
    std::vector<double> grad(X.n_rows), hess(X.n_rows);

    for (int stage = 0; stage < params.n_stages; ++stage) {
        for (std::size_t r = 0; r < X.n_rows; ++r) {
            if (params.task == BoostTask::BinaryLogLoss) {
                double p = 1.0 / (1.0 + std::exp(-score[r]));
                grad[r] = p - y[r];
                hess[r] = std::max(p * (1.0 - p), 1e-16);
            } else {
                grad[r] = score[r] - y[r];
                hess[r] = 1.0;
            }
        }
        HistBuilder hb{bins, X.n_cols, n_obs_bins, grad, hess,
                       params.max_depth, params.min_leaf, {}};
        std::vector<std::size_t> rows(X.n_rows);
        for (std::size_t r = 0; r < X.n_rows; ++r) rows[r] = r;
        hb.build(rows, 0);
        model.stages.push_back(std::move(hb.nodes));

        const auto& tree = model.stages.back();
        std::vector<int> row_bins(X.n_cols);
        for (std::size_t r = 0; r < X.n_rows; ++r) {
            for (std::size_t f = 0; f < X.n_cols; ++f)
                row_bins[f] = bins[r * X.n_cols + f];
            score[r] += params.learning_rate * predict_binned(tree, row_bins.data(),
                                                              n_obs_bins);
        }
    }
    return model;
}

std::vector<double> boosted_predict(const BoostedModel& model, const FeatureMatrix& X) {
    if (X.n_cols != model.n_features)
        throw ConfigError("boosted_predict: feature count mismatch");
    std::vector<double> out(X.n_rows);
    for (std::size_t r = 0; r < X.n_rows; ++r)
        out[r] = model.score_row(X.values.data() + r * X.n_cols,
                                 X.mask.data() + r * X.n_cols);
    return out;
}

std::vector<double> boosted_predict_proba(const BoostedModel& model,
                                          const FeatureMatrix& X) {
    if (model.params.task != BoostTask::BinaryLogLoss)
        throw ConfigError("boosted_predict_proba: model is not a binary classifier");
    std::vector<double> out = boosted_predict(model, X);
    for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

}  // namespace esgmi
