#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hierplan/common.hpp"
#include "hierplan/demand.hpp"
#include "hierplan/spatial.hpp"

namespace hierplan {

/// `failed` is the offline pseudo-state used for responder breakdowns.
enum class AgentStatus { waiting, in_transit, responding, servicing, failed };

std::string_view to_string(AgentStatus s);

struct Agent {
    AgentId id = 0;
    Position position = Position::Zero();    // at the owning state's clock
    Position destination = Position::Zero();
    AgentStatus status = AgentStatus::waiting;
    RegionId region = 0;
    DepotId depot = kNone;

    // Current straight-line leg; meaningful while in_transit or responding.
    Position origin = Position::Zero();
    Millis depart_time = 0;
    Millis arrive_time = 0;

    Millis busy_until = kNone;       // set while servicing
    Millis service_duration = 0;     // of the incident being handled
    IncidentId incident = kNone;

    bool failure_pending = false;    // goes offline once the current incident is done
    Millis offline_until = kNone;
    DepotId home_depot = kNone;      // depot held before going offline

    /// Dispatchable: waiting or in transit between depots.
    bool idle() const { return status == AgentStatus::waiting || status == AgentStatus::in_transit; }
    bool busy() const { return status == AgentStatus::responding || status == AgentStatus::servicing; }
    /// Time the current incident completes, if responding or servicing.
    Millis available_at() const;
};

struct SystemState {
    Millis clock = 0;
    std::vector<Incident> pending;   // FIFO by report time
    std::vector<Agent> agents;       // sorted by id

    Agent& agent(AgentId id);
    const Agent& agent(AgentId id) const;
    bool has_agent(AgentId id) const;
};

/// Result of sending one responder to one incident.
struct DispatchRecord {
    IncidentId incident = kNone;
    CellId cell = 0;
    Millis report_time = 0;
    Millis dispatch_time = 0;
    Millis arrival_time = 0;
    AgentId agent = kNone;
    RegionId region = kNone;

    Millis response_time() const { return arrival_time - report_time; }
};

/// Places `n` waiting agents; agent i sits at `depots[i]` in `regions[i]`.
SystemState make_state(const World& world, std::span<const DepotId> depots, std::span<const RegionId> regions);

/// Moves every agent forward to time `to` along its current leg, chaining
/// responding -> servicing -> in_transit -> waiting transitions that complete by then.
void advance(SystemState& state, Millis to, const World& world);

/// Appends a newly reported incident to the pending queue.
void report(SystemState& state, const Incident& incident);

/// Sends an idle agent to a pending incident and removes the incident from the queue.
/// Response time = queueing delay + travel time from the agent's current position.
DispatchRecord dispatch(SystemState& state, AgentId agent, IncidentId incident, const World& world);

/// Points an idle agent at a depot, honouring capacity counted over all non-offline agents.
void assign_depot(SystemState& state, AgentId agent, DepotId depot, const World& world);

/// Re-labels an agent's region; depot choice is a separate decision.
void assign_region(SystemState& state, AgentId agent, RegionId region, int region_count);

/// Agents (non-offline) currently holding a slot at `depot`.
int depot_occupancy(const SystemState& state, DepotId depot);

/// Nearest idle agent to `target` by travel time; ties go to the lower id.
std::optional<AgentId> nearest_idle_agent(const SystemState& state, const Position& target, const World& world);

/// Greedily serves the pending queue head-first until it empties or no idle agent remains.
std::vector<DispatchRecord> dispatch_pending(SystemState& state, const World& world);

/// Earliest completion among busy agents, if any.
std::optional<Millis> next_completion(const SystemState& state);

/// Runs the no-reallocation default policy: reports chain incidents with index >= `next`
/// and report time < `end`, dispatching greedily; afterwards keeps serving the queue until it
/// is empty. Calls `sink(record)` for every dispatch and returns the index of the first unreported incident.
template <class Sink>
std::size_t run_greedy(SystemState& state, std::span<const Incident> incidents, std::size_t next, Millis end,
                       const World& world, Sink&& sink)
{
    while (true) {
        const bool have_incident = next < incidents.size() && incidents[next].report_time < end;
        const auto completion = state.pending.empty() ? std::nullopt : next_completion(state);
        if (!have_incident && !completion)
            break;
        if (have_incident && (!completion || incidents[next].report_time < *completion)) {
            advance(state, incidents[next].report_time, world);
            report(state, incidents[next]);
            ++next;
        } else {
            advance(state, *completion, world);
        }
        for (const auto& rec : dispatch_pending(state, world))
            sink(rec);
    }
    return next;
}

} // namespace hierplan
