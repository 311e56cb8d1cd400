// qcce.cpp — Command-line front end: simulate, scan, delta, spectrum,
// bath-gen, oracle, and the closed-form estimators.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include "qcce/bench.hpp"
#include "qcce/metrics.hpp"

namespace {

using namespace qcce;

struct ConfigArgs {
    std::string config_path;
    std::string scenario_name;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<int> order;
    std::optional<int> bath_n;
    std::optional<double> t_max;
    std::optional<int> points;
    int threads = 0;
    bool override_sw = false;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args, bool output_option = true) {
    cmd->add_option("config", args.config_path, "JSON experiment config")
        ->check(CLI::ExistingFile);
    cmd->add_option("--scenario", args.scenario_name,
                    "built-in scenario (giant_spin five_spin qudit6 qudit6_uncoupled)");
    if (output_option) cmd->add_option("-o,--output", args.output, "output directory");
    cmd->add_option("--seed", args.seed, "override the bath seed");
    cmd->add_option("--order", args.order, "override the CCE truncation order");
    cmd->add_option("--bath-n", args.bath_n, "override the generated bath size");
    cmd->add_option("--t-max", args.t_max, "override the grid extent (us)");
    cmd->add_option("--points", args.points, "override the grid point count");
    cmd->add_option("-j,--threads", args.threads, "worker threads (default: QCCE_THREADS or all)");
    cmd->add_flag("--override-sw", args.override_sw,
                  "run even when the validity report lists near-degenerate states");
}

bench::ExperimentConfig resolve_config(const ConfigArgs& args) {
    bench::ExperimentConfig config;
    if (!args.config_path.empty()) {
        config = bench::load_config_file(args.config_path);
    } else if (!args.scenario_name.empty()) {
        config = bench::scenario(args.scenario_name);
    } else {
        throw ConfigError("provide a config file or --scenario");
    }
    if (args.seed && config.bath_spec) {
        config.bath_spec->seed = *args.seed;
        config.resolved["bath"]["generator"]["seed"] = *args.seed;
    }
    if (args.order) {
        config.cce_order = *args.order;
        config.resolved["cce"]["order"] = *args.order;
    }
    if (args.bath_n && config.bath_spec) {
        config.bath_spec->n = *args.bath_n;
        config.resolved["bath"]["generator"]["n"] = *args.bath_n;
    }
    if (args.t_max) {
        config.grid.t_max = *args.t_max;
        config.resolved["grid"]["t_max_us"] = *args.t_max;
    }
    if (args.points) {
        config.grid.points = *args.points;
        config.resolved["grid"]["points"] = *args.points;
    }
    if (!args.output.empty()) {
        config.output_dir = args.output;
        config.resolved["output"] = args.output;
    }
    return config;
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
    std::vector<std::pair<int, int>> out;
    std::string token;
    std::istringstream stream(text);
    while (std::getline(stream, token, ',')) {
        const auto colon = token.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("--pairs expects a:b[,c:d...], got '" + token + "'");
        }
        out.push_back({std::stoi(token.substr(0, colon)), std::stoi(token.substr(colon + 1))});
    }
    return out;
}

std::vector<int> parse_states(const std::string& text) {
    std::vector<int> out;
    std::string token;
    std::istringstream stream(text);
    while (std::getline(stream, token, ',')) out.push_back(std::stoi(token));
    return out;
}

int cmd_simulate(const ConfigArgs& args) {
    bench::ExperimentConfig config = resolve_config(args);
    bench::RunOptions options;
    options.threads = args.threads;
    options.override_sw = args.override_sw;
    options.verbose = true;
    const auto result = bench::run_experiment(config, options);
    std::printf("%zu pair traces over %d points (t_ref = %s us%s)\n", result.pairs.size(),
                result.config.grid.points, bench::format_double(result.t_ref_us).c_str(),
                result.t_ref_fallback ? ", grid end fallback" : "");
    for (const auto& pr : result.pairs) {
        std::printf("  (%d,%d)  delta=%.6g muB  clock=%.6g  moment=%.6g  |L(end)|=%.6g\n",
                    pr.metrics.pair.first, pr.metrics.pair.second, pr.metrics.delta,
                    pr.metrics.clock_mismatch, pr.metrics.transition_moment,
                    std::abs(pr.trace.values.back()));
    }
    if (!result.config.output_dir.empty()) {
        std::printf("results written to %s\n", result.config.output_dir.c_str());
    }
    return exit_code::ok;
}

int cmd_scan(const ConfigArgs& args, const std::string& states_text) {
    bench::ExperimentConfig config = resolve_config(args);
    const std::vector<int> states =
        states_text.empty() ? config.states : parse_states(states_text);
    std::printf("alpha,beta,delta_muB,clock_mismatch_muB,transition_moment_muB,t_half_us\n");
    if (states.size() < 2) return exit_code::ok;
    bench::RunOptions options;
    options.threads = args.threads;
    options.override_sw = args.override_sw;
    const auto rows = bench::scan_pairs(config, states, options);
    for (const auto& row : rows) {
        std::printf("%d,%d,%s,%s,%s,%s\n", row.alpha, row.beta,
                    bench::format_double(row.delta).c_str(),
                    bench::format_double(row.clock_mismatch).c_str(),
                    bench::format_double(row.transition_moment).c_str(),
                    row.t_half ? bench::format_double(*row.t_half).c_str() : "beyond-grid");
    }
    return exit_code::ok;
}

int cmd_delta(const ConfigArgs& args, const std::string& pairs_text) {
    bench::ExperimentConfig config = resolve_config(args);
    if (!pairs_text.empty()) {
        config.pairs = parse_pairs(pairs_text);
        config.all_pairs = false;
    }
    const auto pair_list = config.resolve_pairs();
    if (pair_list.empty()) throw ConfigError("delta: no pairs requested");
    const auto basis = effective::diagonalize_system(config.model);
    const auto partition = metrics::SiteClassPartition::build(config.model.system_sites);
    std::printf("alpha,beta,delta_muB,clock_mismatch_muB,transition_moment_muB\n");
    for (const auto& [a, b] : pair_list) {
        std::printf("%d,%d,%s,%s,%s\n", a, b,
                    bench::format_double(metrics::delta_parameter(basis, partition, a, b)).c_str(),
                    bench::format_double(metrics::clock_mismatch(basis, a, b)).c_str(),
                    bench::format_double(metrics::transition_moment(basis, a, b)).c_str());
    }
    return exit_code::ok;
}

int cmd_spectrum(const ConfigArgs& args) {
    const bench::ExperimentConfig config = resolve_config(args);
    const auto basis = effective::diagonalize_system(config.model);
    std::fputs(bench::spectrum_csv(basis).c_str(), stdout);
    return exit_code::ok;
}

int cmd_oracle(const ConfigArgs& args, double tol) {
    bench::ExperimentConfig config = resolve_config(args);
    if (config.model.bath_sites.empty()) {
        if (!config.bath_spec) throw ConfigError("oracle: no bath configured");
        bench::BathSpec spec = *config.bath_spec;
        for (const auto& s : config.model.system_sites) spec.exclusion.push_back(s.position);
        config.model.bath_sites = bench::generate_bath(spec);
    }
    const auto n = static_cast<int>(config.model.bath_sites.size());
    if (n > 14) throw ConfigError("oracle: bath too large for the exact reference (max 14 spins)");
    model::validate(config.model);

    const auto pair_list = config.resolve_pairs();
    if (pair_list.empty()) throw ConfigError("oracle: no pairs requested");
    const auto [a, b] = pair_list.front();

    const auto basis = effective::diagonalize_system(config.model);
    const double gap_floor =
        config.gap_floor >= 0.0 ? config.gap_floor : effective::default_gap_floor(basis);
    const auto bath = std::make_shared<const model::BathTerms>(
        model::build_bath_hamiltonian_terms(config.model));
    const auto sys_bath = std::make_shared<const model::InteractionTable>(
        model::system_bath_couplings(config.model));
    const auto ha = effective::conditional_hamiltonian(basis, config.model, a, config.sw_order,
                                                       gap_floor, {}, bath, sys_bath);
    const auto hb = effective::conditional_hamiltonian(basis, config.model, b, config.sw_order,
                                                       gap_floor, {}, bath, sys_bath);

    const auto times = config.grid.times();
    const auto mixed = cce::BathState::maximally_mixed();
    const auto exact = cce::exact_coherence(ha, hb, config.model, config.pulses, times, mixed,
                                            args.threads);
    cce::CceOptions cce_options;
    cce_options.threads = args.threads;
    const auto clusters_full = cce::enumerate_clusters(config.model, n);
    const auto full = cce::cce_coherence(ha, hb, clusters_full, config.pulses, times, mixed, n,
                                         cce_options);
    const auto clusters_cfg = cce::enumerate_clusters(config.model, config.cce_order,
                                                      cce::PairCutoff{config.pair_cutoff, 0.0});
    const auto truncated = cce::cce_coherence(ha, hb, clusters_cfg, config.pulses, times, mixed,
                                              config.cce_order, cce_options);

    double dev_full = 0.0, dev_truncated = 0.0;
    for (size_t i = 0; i < times.size(); ++i) {
        dev_full = std::max(dev_full, std::abs(full.values[i] - exact.values[i]));
        dev_truncated = std::max(dev_truncated, std::abs(truncated.values[i] - exact.values[i]));
    }
    std::printf("pair (%d,%d), %d bath spins, %zu grid points\n", a, b, n, times.size());
    std::printf("max |cce(full order %d) - exact| = %.3e\n", n, dev_full);
    std::printf("max |cce(order %d) - exact|      = %.3e\n", config.cce_order, dev_truncated);
    if (tol > 0.0 && dev_full > tol) {
        std::printf("full-order deviation exceeds tolerance %.3e\n", tol);
        return exit_code::numerical;
    }
    return exit_code::ok;
}

int cmd_bath_gen(const bench::BathSpec& spec, const std::string& out_path) {
    const auto sites = bench::generate_bath(spec);
    nlohmann::json doc;
    doc["schema_version"] = 1;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& site : sites) {
        nlohmann::json s;
        s["position"] = {site.position.x(), site.position.y(), site.position.z()};
        s["species"] = spec.species;
        list.push_back(s);
    }
    doc["bath"] = {{"sites", list},
                   {"generator",
                    {{"n", spec.n},
                     {"radius", spec.radius},
                     {"min_dist", spec.min_dist},
                     {"species", spec.species},
                     {"seed", spec.seed}}}};
    if (out_path.empty()) {
        std::cout << doc.dump(2) << "\n";
    } else {
        std::ofstream out(out_path);
        out << doc.dump(2) << "\n";
        std::printf("%zu bath sites written to %s\n", sites.size(), out_path.c_str());
    }
    return exit_code::ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qcce — spin-bath decoherence engine (cluster-correlation expansion)"};
    app.require_subcommand(1);

    ConfigArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "coherence traces + pair metrics for a config");
    add_config_options(sim, sim_args);

    ConfigArgs scan_args;
    std::string scan_states;
    auto* scan = app.add_subcommand("scan", "pair survey sorted by the Delta parameter");
    add_config_options(scan, scan_args);
    scan->add_option("--states", scan_states, "comma-separated eigenstate list");

    ConfigArgs delta_args;
    std::string delta_pairs;
    auto* delta = app.add_subcommand("delta", "Delta / clock / transition-moment table");
    add_config_options(delta, delta_args, false);
    delta->add_option("--pairs", delta_pairs, "pairs as a:b,c:d");

    ConfigArgs spectrum_args;
    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues and local spin expectations");
    add_config_options(spectrum, spectrum_args, false);

    ConfigArgs oracle_args;
    double oracle_tol = 0.0;
    auto* oracle = app.add_subcommand("oracle", "full-order CCE vs the exact small-bath reference");
    add_config_options(oracle, oracle_args, false);
    oracle->add_option("--tol", oracle_tol, "fail when the full-order deviation exceeds this");

    bench::BathSpec bath_spec;
    std::string bath_out;
    auto* bath_gen = app.add_subcommand("bath-gen", "generate a random bath file");
    bath_gen->add_option("--n", bath_spec.n, "spin count");
    bath_gen->add_option("--radius", bath_spec.radius, "ball radius (Angstrom)");
    bath_gen->add_option("--min-dist", bath_spec.min_dist, "minimum pair distance (Angstrom)");
    bath_gen->add_option("--species", bath_spec.species, "bath species (proton)");
    bath_gen->add_option("--seed", bath_spec.seed, "RNG seed");
    bath_gen->add_option("-o,--out", bath_out, "output file (stdout when omitted)");

    auto* estimate = app.add_subcommand("estimate", "closed-form perturbative estimators");
    estimate->require_subcommand(1);
    double est_mz = 1.0, est_gap_uev = 25.0, est_gamma_e = 2.0, est_rmin = 3.0,
           est_rmax = std::numeric_limits<double>::infinity(), est_l = 3.0;
    std::string est_gamma_n = "proton";
    auto* sw_ratio = estimate->add_subcommand("sw-ratio",
                                              "second- to first-order coupling ratio");
    sw_ratio->add_option("--mz", est_mz, "spin projection scale");
    sw_ratio->add_option("--gap-ueV", est_gap_uev, "typical level gap (ueV)");
    sw_ratio->add_option("--gamma-e", est_gamma_e, "system gyromagnetic factor (mu_B)");
    sw_ratio->add_option("--gamma-n", est_gamma_n, "bath gyromagnetic factor (proton or rad/us/T)");
    sw_ratio->add_option("--rmin", est_rmin, "inner bath radius (Angstrom)");
    sw_ratio->add_option("--rmax", est_rmax, "outer bath radius (Angstrom, inf allowed)");
    auto* lambda = estimate->add_subcommand("lambda", "mean induced/intrinsic bath-coupling ratio");
    lambda->add_option("--mz", est_mz, "spin projection scale");
    lambda->add_option("--gap-ueV", est_gap_uev, "typical level gap (ueV)");
    lambda->add_option("--gamma-e", est_gamma_e, "system gyromagnetic factor (mu_B)");
    lambda->add_option("--rmin", est_rmin, "inner bath radius (Angstrom)");
    lambda->add_option("--rmax", est_rmax, "outer bath radius (Angstrom)");
    lambda->add_option("--l", est_l, "minimum bath spin separation (Angstrom)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(sim_args);
        if (scan->parsed()) return cmd_scan(scan_args, scan_states);
        if (delta->parsed()) return cmd_delta(delta_args, delta_pairs);
        if (spectrum->parsed()) return cmd_spectrum(spectrum_args);
        if (oracle->parsed()) return cmd_oracle(oracle_args, oracle_tol);
        if (bath_gen->parsed()) return cmd_bath_gen(bath_spec, bath_out);
        if (estimate->parsed()) {
            const double gap = est_gap_uev * units::ueV;
            const double gamma_e = est_gamma_e * units::bohr_magneton;
            if (sw_ratio->parsed()) {
                const double gamma_n = (est_gamma_n == "proton" || est_gamma_n == "1H")
                                           ? units::gamma_proton
                                           : std::stod(est_gamma_n);
                std::printf("%.6e\n", metrics::sw_ratio_estimate(est_mz, gap, gamma_e, gamma_n,
                                                                 est_rmin, est_rmax));
            } else {
                std::printf("%.6e\n", metrics::lambda_estimate(est_rmin, est_rmax, est_l, est_mz,
                                                               gap, gamma_e));
            }
            return exit_code::ok;
        }
    } catch (const SwValidityError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code::sw_validity;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code::config;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code::numerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code::failure;
    }
    return exit_code::ok;
}
