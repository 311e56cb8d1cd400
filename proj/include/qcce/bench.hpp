// bench.hpp — Scenario library, random bath generation, configuration
// ingestion, experiment orchestration, and result persistence.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qcce/cce.hpp"
#include "qcce/effective.hpp"
#include "qcce/metrics.hpp"
#include "qcce/model.hpp"

namespace qcce::bench {

using model::Vec3;
using nlohmann::json;

inline constexpr const char* engine_name = "qcce";
inline constexpr const char* engine_version = "0.1.0";

// --------------------------- bath generation ---------------------------------

struct BathSpec {
    int n = 1000;
    double radius = 20.0;   // Angstrom
    double min_dist = 3.0;  // Angstrom
    std::string species = "proton";
    std::uint64_t seed = 1;
    std::vector<Vec3> exclusion; // positions bath spins must keep min_dist from
};

// Uniform rejection sampling in the ball; deterministic for a fixed seed.
std::vector<model::SpinSite> generate_bath(const BathSpec& spec);

// --------------------------- experiment configuration ------------------------

struct GridSpec {
    double t_max = 1.0; // us
    int points = 200;

    std::vector<double> times() const;
};

struct ExperimentConfig {
    std::string name = "custom";
    model::SpinModel model;
    std::optional<BathSpec> bath_spec; // generated on run when bath sites absent
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> states;
    bool all_pairs = false; // pairs = all pairs of `states`
    cce::PulseSequence pulses = cce::PulseSequence::hahn();
    GridSpec grid;
    int cce_order = 2;
    int sw_order = 2;
    double pair_cutoff = std::numeric_limits<double>::infinity();
    double gap_floor = -1.0; // < 0 selects the automatic default
    std::uint64_t seed = 1;
    std::string output_dir;
    json resolved; // normalized configuration document

    std::vector<std::pair<int, int>> resolve_pairs() const;
};

// Built-in scenarios: giant_spin, five_spin, qudit6, qudit6_uncoupled.
ExperimentConfig scenario(const std::string& name);
std::vector<std::string> scenario_names();

ExperimentConfig load_config(const json& doc);
ExperimentConfig load_config_file(const std::string& path);

// --------------------------- orchestration -----------------------------------

struct RunOptions {
    int threads = 0;
    bool override_sw = false;
    bool with_traces = true; // metrics only when false
    bool verbose = false;
};

struct PairResult {
    metrics::PairMetrics metrics;
    cce::CoherenceTrace trace;
};

struct ExperimentResult {
    ExperimentConfig config; // bath resolved
    effective::SystemEigenbasis basis;
    effective::SwValidityReport sw_report;
    std::vector<PairResult> pairs;
    double t_ref_us = 0.0; // fastest trace to |L| = 1e-3, else t_max
    bool t_ref_fallback = false;
    json manifest;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct ScanRow {
    int alpha = 0, beta = 0;
    double delta = 0.0, clock_mismatch = 0.0, transition_moment = 0.0;
    std::optional<double> t_half; // empty = beyond-grid
};

// Pair survey sorted by Delta ascending.
std::vector<ScanRow> scan_pairs(const ExperimentConfig& config, const std::vector<int>& states,
                                const RunOptions& options = {});
std::vector<ScanRow> scan_rows(const ExperimentResult& result);

// --------------------------- persistence -------------------------------------

std::uint64_t fnv1a(const std::string& data);
std::string format_double(double value);
std::string trace_csv(const cce::CoherenceTrace& trace, const metrics::PairMetrics& metrics,
                      double t_ref_us, const std::string& manifest_hash);
std::string summary_csv(const ExperimentResult& result, const std::string& manifest_hash);
std::string spectrum_csv(const effective::SystemEigenbasis& basis);

// Writes pair_<a>_<b>.csv per pair, summary.csv, and manifest.json.
void write_results(const ExperimentResult& result, const std::string& directory);

} // namespace qcce::bench
