#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "circledyn/config.hpp"

namespace circledyn {

struct ParamSpec {
    std::string name;
    std::string default_value;
    std::string help;
};

struct ExperimentInfo {
    std::string name;
    std::string description;
    // "csv" or "json".
    std::string format;
    std::vector<ParamSpec> params;
};

const std::vector<ExperimentInfo>& experiment_catalog();
const ExperimentInfo& experiment_info(const std::string& name);

struct ExperimentSpec {
    std::string name;
    // Overrides of the catalog defaults; unknown names are rejected.
    std::map<std::string, std::string> params;
    std::string output_path;
    std::uint64_t seed = 1;
};

struct ExperimentOutput {
    std::string data;
    // Resolved parameters, group description and seed.
    std::string sidecar;
};

// Pure computation: returns the artifact text without touching the disk.
ExperimentOutput compute_experiment(const GroupConfig& cfg, const ExperimentSpec& spec);

// Writes output_path and output_path + ".params.json".
void run_experiment(const GroupConfig& cfg, const ExperimentSpec& spec);

// Machine-readable error document for contract failures.
std::string error_json(const std::string& code, const std::string& message);

// Sampling and scoring behind acceptance of the randomized distortion checks.
struct DistortionSuiteReport {
    struct Row {
        std::string check;
        int trials = 0;
        int violations = 0;
        double worst_margin = 0.0;
    };
    std::vector<Row> rows;
    int total_violations() const;
};
DistortionSuiteReport distortion_suite(int trials, std::uint64_t seed);

}  // namespace circledyn
