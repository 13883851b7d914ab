#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hierplan/harness.hpp"

namespace fs = std::filesystem;
using namespace hierplan;

int main(int argc, char** argv)
{
    CLI::App app{"Hierarchical responder allocation planner and simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Simulate one policy over the configured seeds");
    std::string config_path;
    std::vector<std::uint64_t> seeds;
    std::string mode;
    std::string test_bed;
    std::string out_dir = "out";
    bool timing = false;
    bool trajectory = false;
    int threads = 0;
    int iterations = 0;
    int samples = 0;
    run->add_option("--config", config_path, "Scenario config (JSON)")->check(CLI::ExistingFile);
    run->add_option("--seed", seeds, "Evaluation seeds; overrides the config");
    run->add_option("--mode", mode, "baseline|lowlevel|hierarchical");
    run->add_option("--test-bed", test_bed, "stationary|nonstationary|failures");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--threads", threads, "Planner worker threads");
    run->add_option("--iterations", iterations, "MCTS iterations per tree");
    run->add_option("--samples", samples, "Sampled chains per decision");
    run->add_flag("--timing", timing, "Record planner wall-clock times");
    run->add_flag("--trajectory", trajectory, "Write per-event trajectories");

    auto* cmp = app.add_subcommand("compare", "Paired comparison of incident files from identical chains");
    std::string cmp_out = "out";
    std::vector<std::string> reports;
    cmp->add_option("--out", cmp_out, "Output directory");
    cmp->add_option("reports", reports, "incidents.csv files; the first is the reference")
        ->required()
        ->check(CLI::ExistingFile);

    auto* part = app.add_subcommand("partition", "Print the region partition");
    std::string part_config;
    part->add_option("--config", part_config, "Scenario config (JSON)")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ScenarioConfig config = config_path.empty() ? default_city() : load_config(config_path);
            if (!seeds.empty())
                config.seeds = seeds;
            if (!mode.empty())
                config.mode = parse_policy_mode(mode);
            if (!test_bed.empty())
                config.test_bed = parse_test_bed(test_bed);
            if (threads > 0)
                config.threads = threads;
            if (iterations > 0)
                config.mcts_iterations = iterations;
            if (samples > 0)
                config.samples = samples;
            config.record_timing = config.record_timing || timing;
            config.trajectory = config.trajectory || trajectory;
            config.validate();
            const auto result = run_experiment(config);
            write_outputs(result, out_dir);
            const auto& r = result.report;
            std::cout << r.mode << " n=" << r.n << " mean=" << r.mean << "s q1=" << r.q1 << "s q3=" << r.q3
                      << "s -> " << out_dir << '\n';
        } else if (*cmp) {
            std::vector<MetricsReport> loaded;
            for (const auto& path : reports)
                loaded.push_back(read_report(path));
            const auto rows = compare(loaded);
            fs::create_directories(cmp_out);
            write_comparison(fs::path(cmp_out) / "comparison.csv", rows);
            for (const auto& row : rows)
                std::cout << row.label << " mean=" << row.mean << " delta=" << row.delta_mean
                          << " paired=" << row.mean_paired_delta << '\n';
        } else if (*part) {
            const ScenarioConfig config = part_config.empty() ? default_city() : load_config(part_config);
            write_partition(std::cout, build_scenario(config));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
