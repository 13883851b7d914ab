#pragma once

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hierplan/common.hpp"
#include "hierplan/demand.hpp"
#include "hierplan/mcts.hpp"
#include "hierplan/simulator.hpp"
#include "hierplan/spatial.hpp"

namespace hierplan {

/// Depot assignment for a region's idle agents; `agents` is sorted and parallel to `depots`.
struct AllocationAction {
    std::vector<AgentId> agents;
    std::vector<DepotId> depots;

    auto operator<=>(const AllocationAction&) const = default;
    bool empty() const { return agents.empty(); }
};

/// Per-action scores across root-parallel trees (one entry per tree that scored the action).
struct ActionScore {
    std::vector<double> scores;
    double mean = 0;
};
using ActionScoreMap = std::map<AllocationAction, ActionScore>;

/// P(n, k) = n!/(n-k)! as a double, for action-space sizing.
double permutations(int n, int k);

/// Projection of the system onto one region: its non-offline agents and pending incidents.
SystemState decompose(const SystemState& state, const RegionPartition& partition, RegionId region);

/// Idle agents of `state` (sorted by id).
std::vector<AgentId> idle_agents(const SystemState& state);

/// Slots at `depots` not held by busy agents; each depot id repeated once per free slot.
std::vector<DepotId> open_slots(const SystemState& state, std::span<const DepotId> depots, const World& world);

/// Every injection of the idle agents into open slots, in lexicographic depot order.
std::vector<AllocationAction> enumerate_allocations(const SystemState& state, std::span<const DepotId> depots,
                                                    const World& world);

/// Re-points idle agents as a unit, so swaps within full depots are legal.
void apply_allocation(SystemState& state, const AllocationAction& action, const World& world);

/// Sum of straight-line miles from each agent's position to its assigned depot.
double allocation_travel(const SystemState& state, const AllocationAction& action, const World& world);

/// Current depots of the idle agents, as an action.
AllocationAction current_allocation(const SystemState& state);

struct RolloutParams {
    double discount = 0.99995;           // per second of planning horizon
    std::size_t joint_action_limit = 10000;
};

/// Discounted cost of one dispatch: discount^(seconds since origin) * response seconds.
double discounted_cost(const DispatchRecord& rec, Millis origin, double discount);

/// Greedy dispatch with no reallocation from `state` through `chain`, then until the queue empties.
double rollout(SystemState state, std::span<const Incident> chain, Millis horizon, Millis origin, double discount,
               const World& world);

/// Search environment for one region and one sampled chain. Decision epochs are the root and
/// each incident report. When the joint action count exceeds the limit, agents are assigned
/// one per tree level instead.
class RegionSearchEnv {
public:
    struct State {
        SystemState sim;
        std::size_t next = 0;          // next chain incident to report
        bool root = true;
        std::vector<DepotId> partial;  // per-agent assignments made so far this epoch
    };
    using Action = AllocationAction;

    RegionSearchEnv(const World& world, std::vector<DepotId> depots, std::vector<Incident> chain, Millis origin,
                    Millis horizon, RolloutParams params);

    std::vector<Action> actions(const State& s) const;
    double step(State& s, const Action& a) const;
    double rollout(State& s) const;

    State initial(SystemState region_state) const;
    bool decomposed(const State& s) const;
    const std::vector<Incident>& chain() const { return chain_; }

private:
    const World* world_;
    std::vector<DepotId> depots_;
    std::vector<Incident> chain_;
    Millis origin_;
    Millis horizon_;
    RolloutParams params_;
};

static_assert(SearchEnvironment<RegionSearchEnv>);

struct RegionSearchResult {
    std::vector<UctSearch<RegionSearchEnv>::RootScore> scores;   // one per full root allocation
    bool visits_conserved = true;
};

/// One UCT tree over one chain. Returns no scores when the region has no idle agents.
RegionSearchResult mcts_search(const World& world, std::span<const DepotId> region_depots,
                               const SystemState& region_state, const IncidentChain& chain,
                               const SearchOptions& options, const RolloutParams& params = {},
                               Millis planning_horizon = 2 * kMillisPerHour, std::vector<TraceEntry>* trace = nullptr);

struct LowLevelOptions {
    int samples = 50;
    SearchOptions search;                        // seed here is the base seed
    RolloutParams rollout;
    Millis planning_horizon = 2 * kMillisPerHour;
    ServiceTimeLaw service;
    int threads = 1;
};

struct RegionPlan {
    RegionId region = kNone;
    std::optional<AllocationAction> action;     // empty when the region has no idle agents
    ActionScoreMap scores;
};

/// Picks the lowest mean-cost action; ties keep the current assignment, then the least travel,
/// then the lexicographically smallest action.
std::optional<AllocationAction> best_action(const ActionScoreMap& scores, const SystemState& region_state,
                                            const World& world);

/// Root-parallel planning for one region: samples `samples` region-restricted chains, runs a
/// tree per chain, and averages scores per action.
RegionPlan plan_region(const World& world, const RegionPartition& partition, const SystemState& state,
                       const DemandModel& model, RegionId region, const LowLevelOptions& options);

/// plan_region for every region.
std::vector<RegionPlan> plan_region_allocations(const World& world, const RegionPartition& partition,
                                                const SystemState& state, const DemandModel& model,
                                                const LowLevelOptions& options);

} // namespace hierplan
