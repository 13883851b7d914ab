#include "hierplan/harness.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hierplan/csv.hpp"
#include "hierplan/highlevel.hpp"

namespace hierplan {

using json = nlohmann::json;

std::string_view to_string(TestBed t)
{
    switch (t) {
    case TestBed::stationary: return "stationary";
    case TestBed::nonstationary: return "nonstationary";
    case TestBed::failures: return "failures";
    }
    return "unknown";
}

TestBed parse_test_bed(std::string_view text)
{
    if (text == "stationary")
        return TestBed::stationary;
    if (text == "nonstationary" || text == "non_stationary")
        return TestBed::nonstationary;
    if (text == "failures")
        return TestBed::failures;
    throw ConfigError("test_bed: expected stationary|nonstationary|failures, got '" + std::string(text) + "'");
}

void ScenarioConfig::validate() const
{
    auto need = [](bool ok, const std::string& msg) {
        if (!ok)
            throw ConfigError(msg);
    };
    need(grid_width > 0 && grid_height > 0, "grid_width/grid_height: must be positive");
    need(cell_size_miles > 0, "cell_size_miles: must be positive");
    need(agents >= 1, "agents: must be >= 1");
    need(regions >= 1, "regions: must be >= 1");
    need(!seeds.empty(), "seeds: at least one seed required");
    need(horizon_hours > 0, "horizon_hours: must be positive");
    need(mcts_iterations >= 1, "mcts_iterations: must be >= 1");
    need(uct_c >= 0, "uct_c: must be non-negative");
    need(discount > 0 && discount <= 1, "discount: must be in (0, 1]");
    need(samples >= 1, "samples: must be >= 1");
    need(replan_minutes > 0, "replan_minutes: must be positive");
    need(service_minutes > 0, "service_minutes: must be positive");
    need(speed_mph > 0, "speed_mph: must be positive");
    need(planning_horizon_hours > 0, "planning_horizon_hours: must be positive");
    need(joint_action_limit >= 1, "joint_action_limit: must be >= 1");
    need(instability_threshold > 0, "instability_threshold: must be positive");
    need(threads >= 1, "threads: must be >= 1");
    need(synthetic.total_rate_per_hour >= 0, "demand.total_rate_per_hour: must be non-negative");
    need(synthetic.background_share >= 0 && synthetic.background_share <= 1, "demand.background_share: must be in [0, 1]");
    need(spikes.min_hours > 0 && spikes.max_hours >= spikes.min_hours, "spikes: need 0 < min_hours <= max_hours");
    need(spikes.min_multiplier >= 1 && spikes.max_multiplier >= spikes.min_multiplier,
         "spikes: need 1 <= min_multiplier <= max_multiplier");
    need(spikes.radius_cells >= 0, "spikes.radius_cells: must be non-negative");
    need(spikes.windows_per_day >= 0, "spikes.windows_per_day: must be non-negative");
    need(failures.count >= 0 && failures.count <= agents, "failures.count: must be in [0, agents]");
    need(failures.duration_hours > 0, "failures.duration_hours: must be positive");
    need(failures.start_hours >= 0, "failures.start_hours: must be non-negative");
}

namespace {

template <class T>
void take(const json& j, const char* key, T& out)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where)
{
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw ConfigError(where + ": unknown key '" + key + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

} // namespace

ScenarioConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config: top level must be an object");
    reject_unknown(j,
                   {"grid_width", "grid_height", "cell_size_miles", "depot_file", "depots", "agents", "regions", "mode",
                    "test_bed", "seeds", "horizon_hours", "mcts_iterations", "uct_c", "discount", "samples",
                    "replan_minutes", "service_minutes", "speed_mph", "planning_horizon_hours", "joint_action_limit",
                    "instability_threshold", "service_law", "threads", "demand", "spikes", "failures",
                    "partition_seed", "record_timing", "trajectory"},
                   "config");

    ScenarioConfig c;
    take(j, "grid_width", c.grid_width);
    take(j, "grid_height", c.grid_height);
    take(j, "cell_size_miles", c.cell_size_miles);
    take(j, "agents", c.agents);
    take(j, "regions", c.regions);
    take(j, "seeds", c.seeds);
    take(j, "horizon_hours", c.horizon_hours);
    take(j, "mcts_iterations", c.mcts_iterations);
    take(j, "uct_c", c.uct_c);
    take(j, "discount", c.discount);
    take(j, "samples", c.samples);
    take(j, "replan_minutes", c.replan_minutes);
    take(j, "service_minutes", c.service_minutes);
    take(j, "speed_mph", c.speed_mph);
    take(j, "planning_horizon_hours", c.planning_horizon_hours);
    take(j, "joint_action_limit", c.joint_action_limit);
    take(j, "instability_threshold", c.instability_threshold);
    take(j, "threads", c.threads);
    take(j, "partition_seed", c.partition_seed);
    take(j, "record_timing", c.record_timing);
    take(j, "trajectory", c.trajectory);
    if (j.contains("mode"))
        c.mode = parse_policy_mode(j.at("mode").get<std::string>());
    if (j.contains("test_bed"))
        c.test_bed = parse_test_bed(j.at("test_bed").get<std::string>());
    if (j.contains("service_law")) {
        const auto law = j.at("service_law").get<std::string>();
        if (law == "deterministic")
            c.service_law = ServiceTimeLaw::Kind::deterministic;
        else if (law == "exponential")
            c.service_law = ServiceTimeLaw::Kind::exponential;
        else
            throw ConfigError("service_law: expected deterministic|exponential, got '" + law + "'");
    }
    if (j.contains("depot_file"))
        c.depot_file = resolve(base_dir, j.at("depot_file").get<std::string>());
    if (j.contains("depots")) {
        // [[gx, gy, capacity], ...]; cell ids are resolved in build_scenario.
        c.depots.clear();
        int id = 0;
        for (const auto& row : j.at("depots")) {
            if (!row.is_array() || row.size() < 2 || row.size() > 3)
                throw ConfigError("depots: each entry must be [gx, gy] or [gx, gy, capacity]");
            Depot d;
            d.id = id++;
            d.cell = row[1].get<int>() * c.grid_width + row[0].get<int>();
            if (row[0].get<int>() < 0 || row[0].get<int>() >= c.grid_width || row[1].get<int>() < 0 ||
                row[1].get<int>() >= c.grid_height)
                throw ConfigError("depots: entry " + std::to_string(d.id) + " lies outside the grid");
            d.capacity = row.size() == 3 ? row[2].get<int>() : 1;
            if (d.capacity < 1)
                throw ConfigError("depots: capacity must be >= 1");
            c.depots.push_back(d);
        }
    }
    if (j.contains("demand")) {
        const auto& d = j.at("demand");
        reject_unknown(d, {"history_file", "history_hours", "rate_file", "total_rate_per_hour", "background_share", "hotspots"},
                       "demand");
        if (d.contains("history_file"))
            c.history_file = resolve(base_dir, d.at("history_file").get<std::string>());
        if (d.contains("history_hours"))
            c.history_hours = d.at("history_hours").get<double>();
        if (d.contains("rate_file"))
            c.rate_file = resolve(base_dir, d.at("rate_file").get<std::string>());
        take(d, "total_rate_per_hour", c.synthetic.total_rate_per_hour);
        take(d, "background_share", c.synthetic.background_share);
        if (d.contains("hotspots")) {
            c.synthetic.hotspots.clear();
            for (const auto& h : d.at("hotspots")) {
                reject_unknown(h, {"gx", "gy", "sigma_cells", "weight"}, "demand.hotspots");
                Hotspot hs;
                take(h, "gx", hs.gx);
                take(h, "gy", hs.gy);
                take(h, "sigma_cells", hs.sigma_cells);
                take(h, "weight", hs.weight);
                c.synthetic.hotspots.push_back(hs);
            }
        }
    }
    if (j.contains("spikes")) {
        const auto& s = j.at("spikes");
        reject_unknown(s, {"windows_per_day", "min_hours", "max_hours", "min_multiplier", "max_multiplier", "radius_cells",
                           "whole_region"},
                       "spikes");
        take(s, "windows_per_day", c.spikes.windows_per_day);
        take(s, "min_hours", c.spikes.min_hours);
        take(s, "max_hours", c.spikes.max_hours);
        take(s, "min_multiplier", c.spikes.min_multiplier);
        take(s, "max_multiplier", c.spikes.max_multiplier);
        take(s, "radius_cells", c.spikes.radius_cells);
        take(s, "whole_region", c.spikes.whole_region);
    }
    if (j.contains("failures")) {
        const auto& f = j.at("failures");
        reject_unknown(f, {"count", "start_hours", "duration_hours", "file"}, "failures");
        take(f, "count", c.failures.count);
        take(f, "start_hours", c.failures.start_hours);
        take(f, "duration_hours", c.failures.duration_hours);
        if (f.contains("file"))
            c.failures.file = resolve(base_dir, f.at("file").get<std::string>());
    }
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

ScenarioConfig default_city()
{
    ScenarioConfig c;
    const int layout[12][2] = {{1, 1}, {4, 1}, {8, 1}, {1, 4}, {5, 4}, {8, 4},
                               {2, 6}, {6, 6}, {9, 6}, {1, 9}, {4, 8}, {8, 9}};
    for (int i = 0; i < 12; ++i)
        c.depots.push_back(Depot{i, layout[i][1] * c.grid_width + layout[i][0], 1});
    c.synthetic.total_rate_per_hour = 8.0;
    c.synthetic.background_share = 0.2;
    c.synthetic.hotspots = {{2, 7, 1.5, 1.0}, {7, 7, 1.5, 0.7}, {5, 2, 1.5, 0.5}};
    return c;
}

std::vector<double> synthetic_rates(const Grid& grid, const SyntheticDemand& demand)
{
    std::vector<double> shape(static_cast<std::size_t>(grid.size()), 0.0);
    for (const auto& cell : grid.cells())
        for (const auto& h : demand.hotspots) {
            const double dx = cell.gx - h.gx;
            const double dy = cell.gy - h.gy;
            shape[static_cast<std::size_t>(cell.id)] +=
                h.weight * std::exp(-(dx * dx + dy * dy) / (2 * h.sigma_cells * h.sigma_cells));
        }
    const double peak_total = std::accumulate(shape.begin(), shape.end(), 0.0);
    const double n = static_cast<double>(shape.size());
    std::vector<double> rates(shape.size());
    const double share = peak_total > 0 ? demand.background_share : 1.0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const double hot = peak_total > 0 ? shape[i] / peak_total : 0.0;
        rates[i] = demand.total_rate_per_hour * (share / n + (1 - share) * hot);
    }
    return rates;
}

Scenario build_scenario(const ScenarioConfig& config)
{
    config.validate();
    Scenario s;
    s.world.grid = Grid(config.grid_width, config.grid_height, config.cell_size_miles);
    s.world.travel.speed_mph = config.speed_mph;
    if (config.depot_file)
        s.world.depots = read_depot_file(*config.depot_file, s.world.grid);
    else
        s.world.depots = config.depots;
    if (s.world.depots.empty())
        throw ConfigError("depots: none configured (set depot_file or depots)");
    if (config.agents > s.world.total_capacity())
        throw ConfigError("agents: " + std::to_string(config.agents) + " exceeds total depot capacity " +
                          std::to_string(s.world.total_capacity()));

    if (config.history_file) {
        double span = 0;
        const auto history = read_history_file(*config.history_file, s.world.grid, &span);
        const double hours = config.history_hours.value_or(span);
        if (!(hours > 0))
            throw ConfigError("demand.history_hours: needed when the history spans no time");
        s.base = fit_rates(history, s.world.grid.size(), hours);
    } else if (config.rate_file) {
        s.base.rates = read_rate_file(*config.rate_file, s.world.grid);
    } else {
        s.base.rates = synthetic_rates(s.world.grid, config.synthetic);
    }
    s.base.validate();
    const double total = std::accumulate(s.base.rates.begin(), s.base.rates.end(), 0.0);
    if (!(total > 0))
        throw ConfigError("demand: total rate must be positive to partition regions");
    s.partition = partition_regions(s.world.grid, s.base.rates, s.world.depots, config.regions, config.partition_seed);
    return s;
}

std::vector<SpikeWindow> generate_spikes(const Scenario& scenario, const SpikeConfig& config, Millis horizon,
                                         std::uint64_t seed)
{
    const auto& grid = scenario.world.grid;
    const auto& rates = scenario.base.rates;
    const double total = std::accumulate(rates.begin(), rates.end(), 0.0);
    Rng rng(seed);
    std::vector<SpikeWindow> out;
    const double days = to_hours(horizon) / 24.0;
    const auto count = static_cast<long>(std::llround(config.windows_per_day * days));
    for (long i = 0; i < count; ++i) {
        SpikeWindow w;
        double pick = rng.uniform() * total;
        CellId centre = grid.size() - 1;
        for (CellId c = 0; c < grid.size(); ++c) {
            pick -= rates[static_cast<std::size_t>(c)];
            if (pick < 0) {
                centre = c;
                break;
            }
        }
        if (config.whole_region) {
            w.cells = scenario.partition.cells_of(scenario.partition.cell_region[static_cast<std::size_t>(centre)]);
        } else {
            const auto& o = grid.cell(centre);
            for (const auto& c : grid.cells()) {
                const double dx = c.gx - o.gx;
                const double dy = c.gy - o.gy;
                if (dx * dx + dy * dy <= config.radius_cells * config.radius_cells)
                    w.cells.push_back(c.id);
            }
        }
        w.start = static_cast<Millis>(rng.uniform() * static_cast<double>(horizon));
        w.end = w.start + from_hours(rng.uniform(config.min_hours, config.max_hours));
        w.multiplier = rng.uniform(config.min_multiplier, config.max_multiplier);
        out.push_back(std::move(w));
    }
    std::sort(out.begin(), out.end(), [](const SpikeWindow& a, const SpikeWindow& b) { return a.start < b.start; });
    return out;
}

std::vector<FailureEvent> generate_failures(const FailureConfig& config, int agents, std::uint64_t seed)
{
    if (config.count < 0 || config.count > agents)
        throw ConfigError("failures.count: " + std::to_string(config.count) + " is not between 0 and " +
                          std::to_string(agents));
    Rng rng(seed);
    std::vector<AgentId> ids(static_cast<std::size_t>(agents));
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[rng.below(i)]);
    std::vector<FailureEvent> out;
    for (int i = 0; i < config.count; ++i)
        out.push_back(FailureEvent{ids[static_cast<std::size_t>(i)], from_hours(config.start_hours),
                                   from_hours(config.duration_hours)});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.agent < b.agent; });
    return out;
}

SeedInputs make_seed_inputs(const ScenarioConfig& config, const Scenario& scenario, std::uint64_t seed)
{
    SeedInputs in;
    in.seed = seed;
    in.model = scenario.base;
    const Millis horizon = from_hours(config.horizon_hours);
    if (config.test_bed == TestBed::nonstationary)
        in.model.spikes = generate_spikes(scenario, config.spikes, horizon, derive_seed(seed, 1));
    in.model.validate();
    const ServiceTimeLaw service{config.service_law, from_hours(config.service_minutes / 60.0)};
    in.chain = sample_chain(in.model, 0, horizon, derive_seed(seed, 2), service);
    if (config.test_bed == TestBed::failures) {
        in.failures = config.failures.file ? read_failure_file(*config.failures.file)
                                           : generate_failures(config.failures, config.agents, derive_seed(seed, 3));
        for (const auto& f : in.failures)
            if (f.agent < 0 || f.agent >= config.agents)
                throw ConfigError("failures: unknown agent " + std::to_string(f.agent));
    }
    return in;
}

double quantile(std::vector<double> values, double p)
{
    if (values.empty())
        return 0.0;
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(values.size() - 1, lo + 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void MetricsReport::summarize()
{
    std::vector<double> rt;
    rt.reserve(incidents.size());
    for (const auto& row : incidents)
        rt.push_back(row.response_time_s);
    n = static_cast<long>(rt.size());
    mean = rt.empty() ? 0.0 : std::accumulate(rt.begin(), rt.end(), 0.0) / static_cast<double>(rt.size());
    q1 = quantile(rt, 0.25);
    median = quantile(rt, 0.5);
    q3 = quantile(rt, 0.75);
    iqr = q3 - q1;
    planner_mean = planner_seconds.empty()
                       ? 0.0
                       : std::accumulate(planner_seconds.begin(), planner_seconds.end(), 0.0) /
                             static_cast<double>(planner_seconds.size());
}

ExperimentResult run_experiment(const ScenarioConfig& config)
{
    ExperimentResult out;
    out.config = config;
    out.scenario = build_scenario(config);
    const auto& sc = out.scenario;
    const double eta = 60.0 / config.service_minutes;

    std::vector<int> caps;
    for (RegionId r = 0; r < sc.partition.k; ++r)
        caps.push_back(sc.partition.capacity(r, sc.world.depots));
    const auto x = allocate(sc.partition.region_rate, config.agents, eta, AllocateOptions{caps});
    if (x.total() != config.agents)
        throw ConfigError("agents: regions cannot hold all agents");
    const auto [depots, regions] = initial_placement(sc.world, sc.partition, sc.base.rates, x.x);

    CoordinatorOptions co;
    co.mode = config.mode;
    co.service_rate_eta = eta;
    co.replan_interval = from_hours(config.replan_minutes / 60.0);
    co.instability_threshold = config.instability_threshold;
    co.trajectory = config.trajectory;
    co.low.samples = config.samples;
    co.low.search.iterations = config.mcts_iterations;
    co.low.search.exploration = config.uct_c;
    co.low.rollout.discount = config.discount;
    co.low.rollout.joint_action_limit = config.joint_action_limit;
    co.low.planning_horizon = from_hours(config.planning_horizon_hours);
    co.low.service = ServiceTimeLaw{config.service_law, from_hours(config.service_minutes / 60.0)};
    co.low.threads = config.threads;

    out.report.mode = std::string(to_string(config.mode));
    IncidentId offset = 0;
    for (const auto seed : config.seeds) {
        SeedRun run;
        run.inputs = make_seed_inputs(config, sc, seed);
        co.seed = derive_seed(seed, 4);
        Coordinator coordinator(sc.world, sc.partition, run.inputs.model, make_state(sc.world, depots, regions), co);
        run.result = coordinator.run(run.inputs.chain, run.inputs.failures);

        std::vector<IncidentRow> rows;
        for (const auto& rec : run.result.dispatches) {
            IncidentRow row;
            row.incident_id = rec.incident + offset;
            row.report_time_s = to_seconds(rec.report_time);
            row.cell = rec.cell;
            row.dispatch_time_s = to_seconds(rec.dispatch_time);
            row.arrival_time_s = to_seconds(rec.arrival_time);
            row.response_time_s = to_seconds(rec.response_time());
            row.agent_id = rec.agent;
            row.region_id = sc.partition.cell_region[static_cast<std::size_t>(rec.cell)];
            rows.push_back(row);
        }
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.incident_id < b.incident_id; });
        out.report.incidents.insert(out.report.incidents.end(), rows.begin(), rows.end());
        out.report.planner_seconds.insert(out.report.planner_seconds.end(), run.result.planner_seconds.begin(),
                                          run.result.planner_seconds.end());
        offset += static_cast<IncidentId>(run.inputs.chain.incidents.size());
        out.runs.push_back(std::move(run));
    }
    out.report.summarize();
    return out;
}

namespace {

void write_incidents(const std::filesystem::path& path, const std::vector<IncidentRow>& rows)
{
    auto out = csv::open_for_write(path);
    out << "incident_id,report_time_s,cell,dispatch_time_s,arrival_time_s,response_time_s,agent_id,region_id\n";
    for (const auto& r : rows)
        out << r.incident_id << ',' << csv::format_double(r.report_time_s, 3) << ',' << r.cell << ','
            << csv::format_double(r.dispatch_time_s, 3) << ',' << csv::format_double(r.arrival_time_s, 3) << ','
            << csv::format_double(r.response_time_s, 3) << ',' << r.agent_id << ',' << r.region_id << '\n';
}

} // namespace

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    const auto& rep = result.report;
    write_incidents(dir / "incidents.csv", rep.incidents);
    {
        auto out = csv::open_for_write(dir / "summary.csv");
        out << "mode,mean_rt_s,q1,q3,iqr,n,planner_mean_s\n";
        const double planner = result.config.record_timing ? rep.planner_mean : std::nan("");
        out << rep.mode << ',' << csv::format_double(rep.mean, 3) << ',' << csv::format_double(rep.q1, 3) << ','
            << csv::format_double(rep.q3, 3) << ',' << csv::format_double(rep.iqr, 3) << ',' << rep.n << ','
            << csv::format_double(planner, 6) << '\n';
    }
    {
        auto out = csv::open_for_write(dir / "checks.csv");
        out << "seed,incidents,dispatched,invariant_checks,teleport_violations,capacity_violations,"
               "dominance_violations,low_level_calls,high_level_calls,transfers\n";
        for (const auto& run : result.runs) {
            const auto& r = run.result;
            out << run.inputs.seed << ',' << run.inputs.chain.incidents.size() << ',' << r.dispatches.size() << ','
                << r.invariants.checks << ',' << r.invariants.teleport << ',' << r.invariants.capacity << ','
                << r.invariants.dominance << ',' << r.low_level_calls << ',' << r.high_level_calls << ','
                << r.transfers.size() << '\n';
        }
    }
    {
        auto out = csv::open_for_write(dir / "regions.csv");
        write_partition(out, result.scenario);
    }
    for (const auto& run : result.runs) {
        const auto tag = std::to_string(run.inputs.seed);
        write_chain_file(dir / ("chain_seed" + tag + ".csv"), result.scenario.world.grid, run.inputs.chain);
        if (!run.inputs.failures.empty())
            write_failure_file(dir / ("failures_seed" + tag + ".csv"), run.inputs.failures);
        if (result.config.trajectory) {
            auto out = csv::open_for_write(dir / ("trajectory_seed" + tag + ".csv"));
            out << "time_s,kind,agent_id,incident_id,detail\n";
            for (const auto& line : run.result.trajectory)
                out << csv::format_double(to_seconds(line.time), 3) << ',' << to_string(line.kind) << ','
                    << line.agent << ',' << line.incident << ',' << line.detail << '\n';
        }
        if (result.config.record_timing) {
            auto out = csv::open_for_write(dir / ("timings_seed" + tag + ".csv"));
            out << "decision,planner_s\n";
            for (std::size_t i = 0; i < run.result.planner_seconds.size(); ++i)
                out << i << ',' << csv::format_double(run.result.planner_seconds[i], 6) << '\n';
        }
    }
}

MetricsReport read_report(const std::filesystem::path& incidents_file, std::string label)
{
    const auto table = csv::read(incidents_file);
    const auto c_id = table.column("incident_id");
    const auto c_rt = table.column("report_time_s");
    const auto c_cell = table.column("cell");
    const auto c_dt = table.column("dispatch_time_s");
    const auto c_at = table.column("arrival_time_s");
    const auto c_resp = table.column("response_time_s");
    const auto c_agent = table.column("agent_id");
    const auto c_region = table.column("region_id");
    MetricsReport rep;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string ctx = incidents_file.string() + " row " + std::to_string(i + 1);
        IncidentRow r;
        r.incident_id = csv::to_int(row[c_id], ctx);
        r.report_time_s = csv::to_double(row[c_rt], ctx);
        r.cell = static_cast<CellId>(csv::to_int(row[c_cell], ctx));
        r.dispatch_time_s = csv::to_double(row[c_dt], ctx);
        r.arrival_time_s = csv::to_double(row[c_at], ctx);
        r.response_time_s = csv::to_double(row[c_resp], ctx);
        r.agent_id = static_cast<AgentId>(csv::to_int(row[c_agent], ctx));
        r.region_id = static_cast<RegionId>(csv::to_int(row[c_region], ctx));
        rep.incidents.push_back(r);
    }
    if (label.empty()) {
        const auto summary = incidents_file.parent_path() / "summary.csv";
        std::string dir_name = incidents_file.parent_path().filename().string();
        label = dir_name.empty() ? incidents_file.stem().string() : dir_name;
        if (std::filesystem::exists(summary)) {
            const auto s = csv::read(summary);
            if (!s.rows.empty())
                rep.mode = s.rows.front()[s.column("mode")];
        }
    }
    if (rep.mode.empty())
        rep.mode = label;
    rep.summarize();
    rep.mode = label.empty() ? rep.mode : label;
    return rep;
}

std::vector<ComparisonRow> compare(const std::vector<MetricsReport>& reports)
{
    if (reports.size() < 2)
        throw std::invalid_argument("compare: need at least two reports");
    auto keyed = [](const MetricsReport& r) {
        std::map<IncidentId, const IncidentRow*> m;
        for (const auto& row : r.incidents)
            m[row.incident_id] = &row;
        return m;
    };
    const auto ref = keyed(reports.front());
    std::vector<ComparisonRow> out;
    for (const auto& rep : reports) {
        const auto cur = keyed(rep);
        if (cur.size() != ref.size())
            throw ChainMismatch("compare: '" + rep.mode + "' covers " + std::to_string(cur.size()) +
                                " incidents, reference covers " + std::to_string(ref.size()));
        double paired = 0;
        long better = 0;
        for (const auto& [id, row] : cur) {
            const auto it = ref.find(id);
            if (it == ref.end() || it->second->cell != row->cell ||
                std::abs(it->second->report_time_s - row->report_time_s) > 5e-4)
                throw ChainMismatch("compare: incident " + std::to_string(id) + " differs between '" + rep.mode +
                                    "' and '" + reports.front().mode + "'");
            const double d = row->response_time_s - it->second->response_time_s;
            paired += d;
            if (d < 0)
                ++better;
        }
        ComparisonRow c;
        c.label = rep.mode;
        c.n = rep.n;
        c.mean = rep.mean;
        c.q1 = rep.q1;
        c.median = rep.median;
        c.q3 = rep.q3;
        c.iqr = rep.iqr;
        const auto& base = reports.front();
        c.delta_mean = rep.mean - base.mean;
        c.delta_q1 = rep.q1 - base.q1;
        c.delta_median = rep.median - base.median;
        c.delta_q3 = rep.q3 - base.q3;
        c.mean_paired_delta = cur.empty() ? 0.0 : paired / static_cast<double>(cur.size());
        c.share_improved = cur.empty() ? 0.0 : static_cast<double>(better) / static_cast<double>(cur.size());
        out.push_back(c);
    }
    return out;
}

void write_comparison(const std::filesystem::path& path, const std::vector<ComparisonRow>& rows)
{
    auto out = csv::open_for_write(path);
    out << "label,n,mean_rt_s,q1,median,q3,iqr,delta_mean_s,delta_q1_s,delta_median_s,delta_q3_s,"
           "mean_paired_delta_s,share_improved\n";
    for (const auto& r : rows)
        out << r.label << ',' << r.n << ',' << csv::format_double(r.mean, 3) << ',' << csv::format_double(r.q1, 3)
            << ',' << csv::format_double(r.median, 3) << ',' << csv::format_double(r.q3, 3) << ','
            << csv::format_double(r.iqr, 3) << ',' << csv::format_double(r.delta_mean, 3) << ','
            << csv::format_double(r.delta_q1, 3) << ',' << csv::format_double(r.delta_median, 3) << ','
            << csv::format_double(r.delta_q3, 3) << ',' << csv::format_double(r.mean_paired_delta, 3) << ','
            << csv::format_double(r.share_improved, 4) << '\n';
}

void write_partition(std::ostream& out, const Scenario& scenario)
{
    const auto& grid = scenario.world.grid;
    out << "gx,gy,cell_id,region_id,rate_per_hour\n";
    for (const auto& c : grid.cells())
        out << c.gx << ',' << c.gy << ',' << c.id << ',' << scenario.partition.cell_region[static_cast<std::size_t>(c.id)]
            << ',' << csv::format_double(scenario.base.rates[static_cast<std::size_t>(c.id)], 6) << '\n';
    out << "\ndepot_id,gx,gy,capacity,region_id\n";
    for (const auto& d : scenario.world.depots) {
        const auto& c = grid.cell(d.cell);
        out << d.id << ',' << c.gx << ',' << c.gy << ',' << d.capacity << ','
            << scenario.partition.depot_region[static_cast<std::size_t>(d.id)] << '\n';
    }
    out << "\nregion_id,cells,depots,capacity,rate_per_hour\n";
    for (RegionId r = 0; r < scenario.partition.k; ++r)
        out << r << ',' << scenario.partition.cells_of(r).size() << ','
            << scenario.partition.region_depots[static_cast<std::size_t>(r)].size() << ','
            << scenario.partition.capacity(r, scenario.world.depots) << ','
            << csv::format_double(scenario.partition.region_rate[static_cast<std::size_t>(r)], 6) << '\n';
}

} // namespace hierplan
