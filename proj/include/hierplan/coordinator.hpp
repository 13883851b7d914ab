#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierplan/common.hpp"
#include "hierplan/demand.hpp"
#include "hierplan/highlevel.hpp"
#include "hierplan/lowlevel.hpp"
#include "hierplan/simulator.hpp"
#include "hierplan/spatial.hpp"

namespace hierplan {

enum class PolicyMode { baseline_static, low_level_only, hierarchical };

std::string_view to_string(PolicyMode m);
/// Accepts `baseline`, `lowlevel`, `hierarchical` (and the enum spellings).
PolicyMode parse_policy_mode(std::string_view text);

struct FailureEvent {
    AgentId agent = 0;
    Millis start = 0;
    Millis duration = 8 * kMillisPerHour;
};

/// Failure schedule with header `agent_id,start_time_s,duration_s`.
std::vector<FailureEvent> read_failure_file(const std::filesystem::path& path);
void write_failure_file(const std::filesystem::path& path, std::span<const FailureEvent> failures);

/// Event kinds in tie-break priority order.
enum class EventKind { agent_available, agent_recovery, agent_failure, incident_occurrence, planning_step };

std::string_view to_string(EventKind k);

/// Greedy dispatch of a newly reported incident: the nearest idle agent goes, otherwise it queues.
std::optional<DispatchRecord> on_incident(SystemState& state, const Incident& incident, const World& world);

struct ReplanContext {
    PolicyMode mode = PolicyMode::baseline_static;
    EventKind trigger = EventKind::incident_occurrence;
    Millis clock = 0;
    Millis last_plan_time = 0;
    Millis replan_interval = 60 * kMillisPerMinute;
    bool region_unstable = false;   // some region's utilization crossed the threshold
    bool rates_changed = false;     // effective region rates differ from the last high-level run
    bool rebalance_deferred = false;
};

struct ReplanDecision {
    bool high_level = false;
    bool low_level = false;
};

/// Which planners run after an event.
ReplanDecision maybe_replan(const ReplanContext& ctx);

struct Transfer {
    AgentId agent = kNone;
    RegionId from = kNone;
    RegionId to = kNone;
    DepotId depot = kNone;
};

struct RebalanceResult {
    std::vector<Transfer> transfers;
    int deferred = 0;   // moves that found no idle agent or open depot
};

/// Non-offline agents per region.
std::vector<int> region_counts(const SystemState& state, int region_count);

/// Moves idle agents out of regions that lose agents, choosing at each step the
/// (agent, gaining region, open depot) triple with the least travel.
RebalanceResult apply_region_rebalance(SystemState& state, const RegionPartition& partition, const World& world,
                                       std::span<const int> old_x, std::span<const int> new_x);

/// Greedy depot placement: within each region, repeatedly opens the depot that most reduces
/// rate-weighted distance from the region's cells to their nearest opened depot.
/// Returns one depot per agent (agents ordered by region) and the agents' regions.
std::pair<std::vector<DepotId>, std::vector<RegionId>> initial_placement(const World& world,
                                                                         const RegionPartition& partition,
                                                                         std::span<const double> cell_rates,
                                                                         std::span<const int> x);

struct CoordinatorOptions {
    PolicyMode mode = PolicyMode::baseline_static;
    LowLevelOptions low;
    double service_rate_eta = 3.0;
    Millis replan_interval = 60 * kMillisPerMinute;
    double instability_threshold = 1.0;
    std::uint64_t seed = 0;
    bool trajectory = false;
    bool check_invariants = true;
};

struct TrajectoryLine {
    Millis time = 0;
    EventKind kind = EventKind::incident_occurrence;
    AgentId agent = kNone;
    IncidentId incident = kNone;
    std::string detail;
};

struct InvariantReport {
    long checks = 0;
    long teleport = 0;
    long capacity = 0;
    long dominance = 0;

    bool ok() const { return teleport == 0 && capacity == 0 && dominance == 0; }
};

struct RunResult {
    std::vector<DispatchRecord> dispatches;
    std::vector<double> planner_seconds;
    long low_level_calls = 0;
    long high_level_calls = 0;
    std::vector<Transfer> transfers;
    InvariantReport invariants;
    std::vector<TrajectoryLine> trajectory;
    SystemState final_state;
};

/// Owns the live state and drives one evaluation run in event order.
class Coordinator {
public:
    Coordinator(const World& world, const RegionPartition& partition, const DemandModel& model, SystemState initial,
                CoordinatorOptions options);

    /// Processes every chain incident plus failures and planner triggers, then keeps
    /// serving until the queue is empty.
    RunResult run(const IncidentChain& chain, std::span<const FailureEvent> failures = {});

private:
    void fail(AgentId id, Millis until);
    void recover(AgentId id);
    void plan(EventKind trigger);
    void check_invariants();
    void log(EventKind kind, AgentId agent, IncidentId incident, std::string detail);
    std::vector<double> current_region_rates() const;

    const World& world_;
    const RegionPartition& partition_;
    const DemandModel& model_;
    CoordinatorOptions options_;
    SystemState state_;
    RunResult result_;

    Millis last_plan_time_ = 0;
    std::vector<double> last_high_rates_;
    bool rebalance_deferred_ = false;
    std::uint64_t decisions_ = 0;
    std::vector<Position> last_positions_;
    Millis last_check_time_ = 0;
};

} // namespace hierplan
