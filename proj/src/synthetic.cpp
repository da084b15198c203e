#include "esgmi/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "esgmi/errors.hpp"
#include "esgmi/rng.hpp"

namespace esgmi {

MissingMechanism parse_mechanism(const std::string& s) {
    if (s == "MCAR" || s == "mcar") return MissingMechanism::MCAR;
    if (s == "MAR" || s == "mar") return MissingMechanism::MAR;
    if (s == "MNAR" || s == "mnar") return MissingMechanism::MNAR;
    throw ConfigError("unknown missing mechanism '" + s + "'");
}

void SyntheticSpec::validate() const {
    if (n_rows == 0) throw ConfigError("synthetic spec: n_rows must be positive");
    std::size_t p = columns.size();
    if (p == 0) throw ConfigError("synthetic spec: at least one column required");
    if (correlation.size() != p)
        throw ConfigError("synthetic spec: correlation matrix must be " +
                          std::to_string(p) + "x" + std::to_string(p));
    for (std::size_t i = 0; i < p; ++i) {
        if (correlation[i].size() != p)
            throw ConfigError("synthetic spec: ragged correlation matrix");
        for (std::size_t j = 0; j < p; ++j)
            if (std::abs(correlation[i][j] - correlation[j][i]) > 1e-12)
                throw ConfigError("synthetic spec: correlation matrix not symmetric");
    }
    for (const auto& col : columns)
        if (col.kind != ColumnKind::Continuous && col.support.empty())
            throw ConfigError("synthetic spec: column '" + col.name +
                              "' needs a finite support");
    auto find_col = [&](const std::string& name) {
        for (const auto& col : columns)
            if (col.name == name) return true;
        return false;
    };
    for (const auto& [target, mt] : targets) {
        if (!find_col(target))
            throw ConfigError("synthetic spec: unknown target column '" + target + "'");
        bool self_driver = false;
        for (const auto& [drv, coef] : mt.driver_coefs) {
            if (!find_col(drv))
                throw ConfigError("synthetic spec: unknown driver column '" + drv + "'");
            if (drv == target) self_driver = true;
            if (mechanism == MissingMechanism::MAR) {
                if (drv == target)
                    throw ConfigError("synthetic spec: MAR driver '" + drv +
                                      "' may not be its own target");
                if (targets.count(drv))
                    throw ConfigError("synthetic spec: MAR driver '" + drv +
                                      "' must stay fully observed");
            }
        }
        if (mechanism == MissingMechanism::MNAR && !self_driver)
            throw ConfigError("synthetic spec: MNAR target '" + target +
                              "' must include itself among its drivers");
    }
}

namespace {

// lower-triangular Cholesky factor; throws on non-positive-definite input
std::vector<std::vector<double>> cholesky(const std::vector<std::vector<double>>& a) {
    std::size_t p = a.size();
    std::vector<std::vector<double>> L(p, std::vector<double>(p, 0.0));
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
            if (i == j) {
                if (s <= 0.0)
                    throw ConfigError(
                        "synthetic spec: correlation matrix is not positive-definite");
                L[i][j] = std::sqrt(s);
            } else {
                L[i][j] = s / L[j][j];
            }
        }
    }
    return L;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-row logistic missingness probabilities for one target column.
std::vector<double> logistic_probs(const Dataset& ds, const MissingTarget& mt,
                                   double intercept) {
    std::vector<double> probs(ds.n_rows, 0.0);
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        double z = intercept;
        for (const auto& [drv, coef] : mt.driver_coefs)
            z += coef * ds.at(r, ds.column_index(drv));
        probs[r] = sigmoid(z);
    }
    return probs;
}

// Bisection on the intercept so the mean logistic probability hits `rate`.
double calibrate_intercept(const Dataset& ds, const MissingTarget& mt, double rate) {
    auto mean_prob = [&](double b0) {
        std::vector<double> p = logistic_probs(ds, mt, b0);
        double s = 0;
        for (double v : p) s += v;
        return s / static_cast<double>(p.size());
    };
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mean_prob(mid) < rate)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::size_t p = spec.columns.size();
    auto L = cholesky(spec.correlation);

    Dataset complete = Dataset::make(spec.n_rows, p);
    for (std::size_t c = 0; c < p; ++c) {
        complete.columns[c].name = spec.columns[c].name;
        complete.columns[c].kind = spec.columns[c].kind;
    }

    Rng rng = make_rng(seed, 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> z(p), x(p);
    for (std::size_t r = 0; r < spec.n_rows; ++r) {
        for (std::size_t c = 0; c < p; ++c) z[c] = gauss(rng);
        for (std::size_t c = 0; c < p; ++c) {
            double s = 0;
            for (std::size_t k = 0; k <= c; ++k) s += L[c][k] * z[k];
            x[c] = s;
        }
        for (std::size_t c = 0; c < p; ++c) {
            double u = normal_cdf(x[c]);
            const auto& col = spec.columns[c];
            if (col.kind == ColumnKind::Continuous) {
                complete.set(r, c, u);
            } else {
                // equal-probability quantization onto the finite support
                std::vector<double> sup = col.support;
                std::sort(sup.begin(), sup.end());
                auto idx = std::min<std::size_t>(
                    static_cast<std::size_t>(u * static_cast<double>(sup.size())),
                    sup.size() - 1);
                complete.set(r, c, sup[idx]);
            }
        }
    }

    Dataset amputed = complete;
    Rng miss_rng = make_rng(seed, 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    if (spec.mechanism == MissingMechanism::MCAR) {
        for (std::size_t r = 0; r < spec.n_rows; ++r)
            for (std::size_t c = 0; c < p; ++c)
                if (unif(miss_rng) < spec.mcar_rate) amputed.unset(r, c);
    } else {
        for (std::size_t c = 0; c < p; ++c) {
            auto it = spec.targets.find(spec.columns[c].name);
            if (it == spec.targets.end()) continue;
            const MissingTarget& mt = it->second;
            double b0 = mt.rate >= 0.0 ? calibrate_intercept(complete, mt, mt.rate)
                                       : mt.intercept;
            std::vector<double> probs = logistic_probs(complete, mt, b0);
            for (std::size_t r = 0; r < spec.n_rows; ++r)
                if (unif(miss_rng) < probs[r]) amputed.unset(r, c);
        }
    }

    SyntheticData out{std::move(complete), std::move(amputed), {}};
    for (std::size_t r = 0; r < spec.n_rows; ++r)
        for (std::size_t c = 0; c < p; ++c)
            if (!out.amputed.observed(r, c))
                out.truth.push_back({r, c, out.complete.at(r, c)});
    return out;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    SyntheticSpec spec;
    try {
        spec.n_rows = j.at("n_rows").get<std::size_t>();
        for (const auto& jc : j.at("columns")) {
            SyntheticColumn col;
            col.name = jc.at("name").get<std::string>();
            if (jc.contains("kind"))
                col.kind = parse_column_kind(jc["kind"].get<std::string>());
            if (jc.contains("support"))
                col.support = jc["support"].get<std::vector<double>>();
            spec.columns.push_back(std::move(col));
        }
        spec.correlation = j.at("correlation").get<std::vector<std::vector<double>>>();
        const auto& jm = j.at("missingness");
        spec.mechanism = parse_mechanism(jm.at("mechanism").get<std::string>());
        if (spec.mechanism == MissingMechanism::MCAR) {
            spec.mcar_rate = jm.at("rate").get<double>();
        } else {
            for (const auto& [name, jt] : jm.at("targets").items()) {
                MissingTarget mt;
                for (const auto& [drv, coef] : jt.at("drivers").items())
                    mt.driver_coefs[drv] = coef.get<double>();
                if (jt.contains("intercept")) mt.intercept = jt["intercept"].get<double>();
                if (jt.contains("rate")) mt.rate = jt["rate"].get<double>();
                spec.targets[name] = std::move(mt);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": bad synthetic spec: " + e.what());
    }
    spec.validate();
    return spec;
}

}  // namespace esgmi
