#pragma once

#include <map>
#include <string>
#include <vector>

#include "esgmi/dataset.hpp"

namespace esgmi {

enum class MissingMechanism { MCAR, MAR, MNAR };

MissingMechanism parse_mechanism(const std::string& s);  // throws ConfigError

struct SyntheticColumn {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    std::vector<double> support;  // finite support for semi_continuous columns
};

/// Logistic missingness for one target column:
///   P(missing) = sigmoid(intercept + sum_d coef_d * value_d).
/// When `rate` is set the intercept is calibrated (bisection) so the marginal
/// missing rate of the target matches it on the generated sample.
struct MissingTarget {
    std::map<std::string, double> driver_coefs;  // driver column -> coefficient
    double intercept = 0.0;
    double rate = -1.0;  // < 0: use intercept as given
};

struct SyntheticSpec {
    std::size_t n_rows = 0;
    std::vector<SyntheticColumn> columns;
    std::vector<std::vector<double>> correlation;  // symmetric positive-definite
    MissingMechanism mechanism = MissingMechanism::MCAR;
    double mcar_rate = 0.0;
    std::map<std::string, MissingTarget> targets;  // MAR/MNAR, keyed by column

    void validate() const;  // throws ConfigError
};

struct SyntheticData {
    Dataset complete;
    Dataset amputed;
    std::vector<HoldOutCell> truth;  // every amputed cell with its true value
};

/// Gaussian-copula sample with uniform(0,1) marginals; semi-continuous
/// columns are quantized onto their finite support, then missingness is
/// applied per the spec's mechanism.
SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Loads a SyntheticSpec from a JSON configuration file.
SyntheticSpec load_synthetic_spec(const std::string& path);

}  // namespace esgmi
