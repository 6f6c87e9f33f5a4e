#pragma once

#include <string>
#include <vector>

#include "cylheat/simulate.hpp"
#include "cylheat/table_io.hpp"
#include "cylheat/verify.hpp"

namespace cylheat {

struct DensityConfig {
    std::vector<double> times = {0.25, 1.0, 4.0};
    double x_max = 50.0;  // in units of t^{1/alpha}
    int points = 201;
};

struct SimulateConfig {
    bool enabled = true;
    SimulationSpec paths;
    BinSpec bins;
    JumpBand band;
    ExitSpec exit;
    double agreement = 0.95;  // required fraction of occupied bins within 3 sigma
};

// A single YAML file fully determines a run.
struct RunConfig {
    double alpha = 1.0;
    int d = 2;
    double beta = 0.25;            // working exponent, at most alpha / 4
    double holder_exponent = 0.0;  // smoothness of the field itself (defaults to beta)
    double b1 = 1.0, b2 = 1.0, b3 = 1.0, T = 1.0;
    FieldSpec field;
    QuadratureScheme scheme;
    TableLayout layout;
    DensityConfig density;
    VerifyOptions verify;
    std::vector<std::string> checks = {"all"};
    bool refine = true;
    SimulateConfig simulate;
    std::string out_dir = "out";
    std::vector<std::string> formats = {"csv", "json"};
    int threads = 1;

    ModelParams params() const;
    CoefficientField make_field() const;
    bool wants(const std::string& check) const;
};

// Throws ConfigError with the offending key in the message.
RunConfig parse_config(const std::string& yaml_text);
RunConfig load_config(const std::string& path);

}  // namespace cylheat
