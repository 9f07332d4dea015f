#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ebound/asymptotic.hpp"
#include "ebound/errorbound.hpp"
#include "ebound/fiber.hpp"

namespace ebound {

/// Every knob of one analysis. The sampler seed and member_tol are copied
/// into the module configs before each stage runs.
struct AnalysisConfig {
    SamplerConfig sampler;
    double member_tol = 1e-16;

    double level_lo = 1e-4, level_hi = 1e2;
    std::size_t level_count = 24, near_count = 8, far_count = 8;

    double radius_r0 = 4.0, radius_factor = 4.0;
    std::size_t radius_count = 8;

    FiberConfig fiber;
    KinfConfig kinf;
    std::vector<double> kinf_levels = default_kinf_levels();
    std::vector<double> kinf_radii = default_kinf_radii();

    CloudConfig cloud;
    std::vector<double> holder_alpha = default_exponent_grid();
    std::vector<double> holder_beta = default_exponent_grid();
    std::vector<double> hormander_alpha = default_exponent_grid();
    std::vector<double> hormander_beta = default_hormander_beta_grid();
    double stability_margin = 0.25;
};

/// Reads a config document; keys left out keep their defaults. Throws
/// ParseError on malformed JSON, unknown keys or wrongly typed values.
AnalysisConfig parse_config(std::string_view text, AnalysisConfig base = {});

/// The config as JSON, in the layout parse_config accepts. The thread count
/// is left out because it does not affect any result.
std::string config_to_json(const AnalysisConfig& cfg);

struct AnalysisResult {
    GlobalVerdict verdict;
    std::vector<std::string> warnings;
    std::string report_json;  // deterministic for a fixed function, config and seed
    std::string profiles_csv;
    std::string decay_csv;
    std::string timings_json;  // wall-clock seconds per stage
};

/// Fiber profiles, trend verdicts, exponent fits, asymptotic scan,
/// Palais-Smale checks, cloud fits and the global verdict.
AnalysisResult run_analysis(const FunctionHandle& f, const AnalysisConfig& cfg);

/// Writes report.json, profiles.csv, decay.csv and timings.json into `dir`,
/// creating it when needed. Throws IoError.
void write_outputs(const std::filesystem::path& dir, const AnalysisResult& result);

struct CorpusEntry {
    std::string name;
    std::string spec;  // function-spec JSON
    VerdictKind expected;
    std::string expected_warning;  // empty when none is expected
};

/// The built-in corpus: the four worked examples plus x^2 and a seeded
/// positive definite quadratic in two variables.
std::vector<CorpusEntry> corpus();

}  // namespace ebound
