#include "hierplan/simulator.hpp"

#include <algorithm>

namespace hierplan {

std::string_view to_string(AgentStatus s)
{
    switch (s) {
    case AgentStatus::waiting: return "waiting";
    case AgentStatus::in_transit: return "in_transit";
    case AgentStatus::responding: return "responding";
    case AgentStatus::servicing: return "servicing";
    case AgentStatus::failed: return "failed";
    }
    return "unknown";
}

Millis Agent::available_at() const
{
    if (status == AgentStatus::responding)
        return arrive_time + service_duration;
    if (status == AgentStatus::servicing)
        return busy_until;
    return kNone;
}

Agent& SystemState::agent(AgentId id)
{
    auto it = std::lower_bound(agents.begin(), agents.end(), id, [](const Agent& a, AgentId v) { return a.id < v; });
    if (it == agents.end() || it->id != id)
        throw std::out_of_range("unknown agent " + std::to_string(id));
    return *it;
}

const Agent& SystemState::agent(AgentId id) const
{
    return const_cast<SystemState&>(*this).agent(id);
}

bool SystemState::has_agent(AgentId id) const
{
    auto it = std::lower_bound(agents.begin(), agents.end(), id, [](const Agent& a, AgentId v) { return a.id < v; });
    return it != agents.end() && it->id == id;
}

SystemState make_state(const World& world, std::span<const DepotId> depots, std::span<const RegionId> regions)
{
    if (depots.size() != regions.size())
        throw std::invalid_argument("make_state: one region per agent required");
    SystemState state;
    for (std::size_t i = 0; i < depots.size(); ++i) {
        Agent a;
        a.id = static_cast<AgentId>(i);
        a.depot = depots[i];
        a.home_depot = depots[i];
        a.region = regions[i];
        a.position = world.depot_position(depots[i]);
        a.destination = a.position;
        a.origin = a.position;
        state.agents.push_back(a);
    }
    for (const auto& a : state.agents)
        if (depot_occupancy(state, a.depot) > world.depots.at(static_cast<std::size_t>(a.depot)).capacity)
            throw DepotFull("make_state: depot " + std::to_string(a.depot) + " over capacity");
    return state;
}

namespace {

Position interpolate(const Agent& a, Millis t)
{
    if (a.arrive_time <= a.depart_time)
        return a.destination;
    const double frac = static_cast<double>(t - a.depart_time) / static_cast<double>(a.arrive_time - a.depart_time);
    return a.origin + (a.destination - a.origin) * std::clamp(frac, 0.0, 1.0);
}

void start_leg(Agent& a, const Position& to, Millis now, const World& world)
{
    a.origin = a.position;
    a.destination = to;
    a.depart_time = now;
    a.arrive_time = now + world.travel.travel_millis(a.position, to);
}

void advance_agent(Agent& a, Millis to, const World& world)
{
    while (true) {
        switch (a.status) {
        case AgentStatus::waiting:
        case AgentStatus::failed:
            return;
        case AgentStatus::in_transit:
            if (a.arrive_time <= to) {
                a.position = a.destination;
                a.status = AgentStatus::waiting;
            } else {
                a.position = interpolate(a, to);
            }
            return;
        case AgentStatus::responding:
            if (a.arrive_time > to) {
                a.position = interpolate(a, to);
                return;
            }
            a.position = a.destination;
            a.status = AgentStatus::servicing;
            a.busy_until = a.arrive_time + a.service_duration;
            break;
        case AgentStatus::servicing: {
            if (a.busy_until > to)
                return;
            const Millis done = a.busy_until;
            a.busy_until = kNone;
            a.incident = kNone;
            if (a.failure_pending) {
                a.failure_pending = false;
                a.status = AgentStatus::failed;
                a.home_depot = a.depot;
                a.depot = kNone;
                a.destination = a.position;
                return;
            }
            a.status = AgentStatus::in_transit;
            start_leg(a, world.depot_position(a.depot), done, world);
            break;
        }
        }
    }
}

} // namespace

void advance(SystemState& state, Millis to, const World& world)
{
    if (to < state.clock)
        throw std::invalid_argument("advance: cannot move the clock backwards");
    for (auto& a : state.agents)
        advance_agent(a, to, world);
    state.clock = to;
}

void report(SystemState& state, const Incident& incident)
{
    auto it = std::upper_bound(state.pending.begin(), state.pending.end(), incident.report_time,
                               [](Millis t, const Incident& i) { return t < i.report_time; });
    state.pending.insert(it, incident);
}

DispatchRecord dispatch(SystemState& state, AgentId agent_id, IncidentId incident_id, const World& world)
{
    auto& a = state.agent(agent_id);
    if (!a.idle())
        throw AgentBusy("dispatch: agent " + std::to_string(agent_id) + " is " + std::string(to_string(a.status)));
    auto it = std::find_if(state.pending.begin(), state.pending.end(),
                           [&](const Incident& i) { return i.id == incident_id; });
    if (it == state.pending.end())
        throw UnknownIncident("dispatch: incident " + std::to_string(incident_id) + " is not pending");
    const Incident inc = *it;
    state.pending.erase(it);

    start_leg(a, world.grid.centroid(inc.cell), state.clock, world);
    a.status = AgentStatus::responding;
    a.service_duration = inc.service_duration;
    a.incident = inc.id;
    a.busy_until = kNone;

    DispatchRecord rec;
    rec.incident = inc.id;
    rec.cell = inc.cell;
    rec.report_time = inc.report_time;
    rec.dispatch_time = state.clock;
    rec.arrival_time = a.arrive_time;
    rec.agent = a.id;
    rec.region = a.region;
    // A zero-length leg completes immediately.
    if (a.arrive_time == state.clock)
        advance_agent(a, state.clock, world);
    return rec;
}

int depot_occupancy(const SystemState& state, DepotId depot)
{
    int n = 0;
    for (const auto& a : state.agents)
        if (a.depot == depot && a.status != AgentStatus::failed)
            ++n;
    return n;
}

void assign_depot(SystemState& state, AgentId agent_id, DepotId depot, const World& world)
{
    auto& a = state.agent(agent_id);
    if (!a.idle())
        throw AgentBusy("assign_depot: agent " + std::to_string(agent_id) + " is " +
                        std::string(to_string(a.status)));
    if (depot < 0 || static_cast<std::size_t>(depot) >= world.depots.size())
        throw std::out_of_range("assign_depot: unknown depot " + std::to_string(depot));
    if (a.depot != depot) {
        const int used = depot_occupancy(state, depot);
        if (used + 1 > world.depots[static_cast<std::size_t>(depot)].capacity)
            throw DepotFull("assign_depot: depot " + std::to_string(depot) + " is full");
    }
    a.depot = depot;
    const Position& target = world.depot_position(depot);
    if (a.position == target) {
        a.status = AgentStatus::waiting;
        a.destination = target;
        return;
    }
    if (a.status == AgentStatus::in_transit && a.destination == target)
        return;
    start_leg(a, target, state.clock, world);
    a.status = AgentStatus::in_transit;
}

void assign_region(SystemState& state, AgentId agent_id, RegionId region, int region_count)
{
    if (region < 0 || region >= region_count)
        throw UnknownRegion("assign_region: region " + std::to_string(region) + " does not exist");
    state.agent(agent_id).region = region;
}

std::optional<AgentId> nearest_idle_agent(const SystemState& state, const Position& target, const World& world)
{
    std::optional<AgentId> best;
    Millis best_t = 0;
    for (const auto& a : state.agents) {
        if (!a.idle())
            continue;
        const Millis t = world.travel.travel_millis(a.position, target);
        if (!best || t < best_t) {
            best = a.id;
            best_t = t;
        }
    }
    return best;
}

std::vector<DispatchRecord> dispatch_pending(SystemState& state, const World& world)
{
    std::vector<DispatchRecord> out;
    while (!state.pending.empty()) {
        const Incident& head = state.pending.front();
        const auto agent = nearest_idle_agent(state, world.grid.centroid(head.cell), world);
        if (!agent)
            break;
        out.push_back(dispatch(state, *agent, head.id, world));
    }
    return out;
}

std::optional<Millis> next_completion(const SystemState& state)
{
    std::optional<Millis> best;
    for (const auto& a : state.agents)
        if (a.busy()) {
            const Millis t = a.available_at();
            if (!best || t < *best)
                best = t;
        }
    return best;
}

} // namespace hierplan
