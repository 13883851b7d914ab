#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hierplan/coordinator.hpp"
#include "hierplan/demand.hpp"
#include "hierplan/spatial.hpp"

namespace hierplan {

enum class TestBed { stationary, nonstationary, failures };

std::string_view to_string(TestBed t);
TestBed parse_test_bed(std::string_view text);

struct Hotspot {
    int gx = 0;
    int gy = 0;
    double sigma_cells = 1.5;
    double weight = 1.0;
};

/// Synthetic rate field: a background share spread evenly plus Gaussian hotspots,
/// scaled to `total_rate_per_hour`.
struct SyntheticDemand {
    double total_rate_per_hour = 8.0;
    double background_share = 0.2;
    std::vector<Hotspot> hotspots;
};

struct SpikeConfig {
    double windows_per_day = 3;
    double min_hours = 2;
    double max_hours = 4;
    double min_multiplier = 2;
    double max_multiplier = 5;
    double radius_cells = 2;    // disc around a demand-weighted centre cell
    bool whole_region = false;  // spike every cell of a random region instead
};

struct FailureConfig {
    int count = 1;
    double start_hours = 2;
    double duration_hours = 8;
    std::optional<std::filesystem::path> file;
};

struct ScenarioConfig {
    int grid_width = 10;
    int grid_height = 10;
    double cell_size_miles = 1.0;
    std::optional<std::filesystem::path> depot_file;
    std::vector<Depot> depots;           // inline alternative to depot_file (cell ids resolved)
    int agents = 8;
    int regions = 3;
    PolicyMode mode = PolicyMode::baseline_static;
    TestBed test_bed = TestBed::stationary;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    double horizon_hours = 30;

    // Planner hyper-parameters.
    long mcts_iterations = 1000;
    double uct_c = 1.44;
    double discount = 0.99995;
    int samples = 50;
    double replan_minutes = 60;
    double service_minutes = 20;
    double speed_mph = 30;
    double planning_horizon_hours = 2;
    std::size_t joint_action_limit = 10000;
    double instability_threshold = 1.0;
    ServiceTimeLaw::Kind service_law = ServiceTimeLaw::Kind::deterministic;
    int threads = 1;

    // Demand: history file, rate file, or synthetic hotspots, in that order of preference.
    std::optional<std::filesystem::path> history_file;
    std::optional<double> history_hours;
    std::optional<std::filesystem::path> rate_file;
    SyntheticDemand synthetic;

    SpikeConfig spikes;
    FailureConfig failures;

    std::uint64_t partition_seed = 0;
    bool record_timing = false;
    bool trajectory = false;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Loads a JSON scenario; relative paths resolve against the file's directory.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});

/// The built-in synthetic city (10x10 grid, 12 depots, 8 agents, 3 regions).
ScenarioConfig default_city();

struct Scenario {
    World world;
    DemandModel base;          // stationary rates
    RegionPartition partition;
};

/// Grid, depots, fitted or synthetic rates, and the k-means partition.
Scenario build_scenario(const ScenarioConfig& config);

/// Rate field for the synthetic generator.
std::vector<double> synthetic_rates(const Grid& grid, const SyntheticDemand& demand);

/// Random spike windows for the non-stationary test bed.
std::vector<SpikeWindow> generate_spikes(const Scenario& scenario, const SpikeConfig& config, Millis horizon,
                                         std::uint64_t seed);

/// Simultaneous failures of `count` distinct agents for the failure test bed.
std::vector<FailureEvent> generate_failures(const FailureConfig& config, int agents, std::uint64_t seed);

/// Evaluation inputs for one seed; identical across policy modes.
struct SeedInputs {
    std::uint64_t seed = 0;
    DemandModel model;
    IncidentChain chain;
    std::vector<FailureEvent> failures;
};

SeedInputs make_seed_inputs(const ScenarioConfig& config, const Scenario& scenario, std::uint64_t seed);

struct IncidentRow {
    IncidentId incident_id = 0;
    double report_time_s = 0;
    CellId cell = 0;
    double dispatch_time_s = 0;
    double arrival_time_s = 0;
    double response_time_s = 0;
    AgentId agent_id = kNone;
    RegionId region_id = kNone;
};

struct MetricsReport {
    std::string mode;
    std::vector<IncidentRow> incidents;
    std::vector<double> planner_seconds;
    double mean = 0;
    double q1 = 0;
    double median = 0;
    double q3 = 0;
    double iqr = 0;
    long n = 0;
    double planner_mean = 0;

    /// Recomputes the summary statistics from `incidents` and `planner_seconds`.
    void summarize();
};

/// Linear-interpolation quantile (the common "type 7" definition) of unsorted data.
double quantile(std::vector<double> values, double p);

struct SeedRun {
    SeedInputs inputs;
    RunResult result;
};

struct ExperimentResult {
    ScenarioConfig config;
    Scenario scenario;
    std::vector<SeedRun> runs;
    MetricsReport report;       // pooled over seeds
};

/// Builds the scenario, runs the coordinator once per seed, and pools the per-incident results.
/// Incident ids are renumbered so they stay unique across pooled chains.
ExperimentResult run_experiment(const ScenarioConfig& config);

/// Writes incidents.csv, summary.csv, checks.csv, regions.csv and per-seed chain (and
/// optional failure/trajectory/timing) files into `dir`.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

MetricsReport read_report(const std::filesystem::path& incidents_file, std::string label = {});

struct ComparisonRow {
    std::string label;
    long n = 0;
    double mean = 0;
    double q1 = 0;
    double median = 0;
    double q3 = 0;
    double iqr = 0;
    double delta_mean = 0;        // against the first report
    double delta_q1 = 0;
    double delta_median = 0;
    double delta_q3 = 0;
    double mean_paired_delta = 0; // mean over incidents of (this - reference)
    double share_improved = 0;    // incidents answered strictly faster than the reference
};

/// Paired comparison against the first report. Throws ChainMismatch unless every report
/// covers the same incidents (id, report time, cell).
std::vector<ComparisonRow> compare(const std::vector<MetricsReport>& reports);
void write_comparison(const std::filesystem::path& path, const std::vector<ComparisonRow>& rows);

/// Region dump: `gx,gy,cell_id,region_id,rate_per_hour` followed by a depot table.
void write_partition(std::ostream& out, const Scenario& scenario);

} // namespace hierplan
