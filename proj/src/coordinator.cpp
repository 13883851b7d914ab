#include "hierplan/coordinator.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "hierplan/csv.hpp"

namespace hierplan {

std::string_view to_string(PolicyMode m)
{
    switch (m) {
    case PolicyMode::baseline_static: return "baseline";
    case PolicyMode::low_level_only: return "lowlevel";
    case PolicyMode::hierarchical: return "hierarchical";
    }
    return "unknown";
}

PolicyMode parse_policy_mode(std::string_view text)
{
    if (text == "baseline" || text == "baseline_static")
        return PolicyMode::baseline_static;
    if (text == "lowlevel" || text == "low_level_only" || text == "low_level")
        return PolicyMode::low_level_only;
    if (text == "hierarchical")
        return PolicyMode::hierarchical;
    throw ConfigError("mode: expected baseline|lowlevel|hierarchical, got '" + std::string(text) + "'");
}

std::string_view to_string(EventKind k)
{
    switch (k) {
    case EventKind::agent_available: return "agent_available";
    case EventKind::agent_recovery: return "agent_recovery";
    case EventKind::agent_failure: return "agent_failure";
    case EventKind::incident_occurrence: return "incident_occurrence";
    case EventKind::planning_step: return "planning_step";
    }
    return "unknown";
}

std::vector<FailureEvent> read_failure_file(const std::filesystem::path& path)
{
    const auto table = csv::read(path);
    const auto c_a = table.column("agent_id");
    const auto c_s = table.column("start_time_s");
    const auto c_d = table.column("duration_s");
    std::vector<FailureEvent> out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string ctx = path.string() + " row " + std::to_string(i + 1);
        FailureEvent f;
        f.agent = static_cast<AgentId>(csv::to_int(row[c_a], ctx));
        f.start = from_seconds(csv::to_double(row[c_s], ctx));
        f.duration = from_seconds(csv::to_double(row[c_d], ctx));
        if (f.duration <= 0 || f.start < 0)
            throw ParseError(ctx + ": need start >= 0 and duration > 0");
        out.push_back(f);
    }
    return out;
}

void write_failure_file(const std::filesystem::path& path, std::span<const FailureEvent> failures)
{
    auto out = csv::open_for_write(path);
    out << "agent_id,start_time_s,duration_s\n";
    for (const auto& f : failures)
        out << f.agent << ',' << csv::format_double(to_seconds(f.start), 3) << ','
            << csv::format_double(to_seconds(f.duration), 3) << '\n';
}

std::optional<DispatchRecord> on_incident(SystemState& state, const Incident& incident, const World& world)
{
    report(state, incident);
    std::optional<DispatchRecord> mine;
    for (const auto& rec : dispatch_pending(state, world))
        if (rec.incident == incident.id)
            mine = rec;
    return mine;
}

ReplanDecision maybe_replan(const ReplanContext& ctx)
{
    ReplanDecision d;
    if (ctx.mode == PolicyMode::baseline_static)
        return d;
    const bool stale = ctx.clock - ctx.last_plan_time >= ctx.replan_interval;
    d.low_level = ctx.trigger == EventKind::incident_occurrence || stale;
    if (ctx.mode == PolicyMode::hierarchical) {
        d.high_level = ctx.trigger == EventKind::agent_failure || ctx.trigger == EventKind::agent_recovery || stale ||
                       ctx.region_unstable || ctx.rates_changed || ctx.rebalance_deferred;
        d.low_level = d.low_level || d.high_level;
    }
    return d;
}

std::vector<int> region_counts(const SystemState& state, int region_count)
{
    std::vector<int> x(static_cast<std::size_t>(region_count), 0);
    for (const auto& a : state.agents)
        if (a.status != AgentStatus::failed)
            ++x.at(static_cast<std::size_t>(a.region));
    return x;
}

RebalanceResult apply_region_rebalance(SystemState& state, const RegionPartition& partition, const World& world,
                                       std::span<const int> old_x, std::span<const int> new_x)
{
    if (old_x.size() != new_x.size() || old_x.size() != static_cast<std::size_t>(partition.k))
        throw std::invalid_argument("apply_region_rebalance: one count per region required");
    if (std::accumulate(old_x.begin(), old_x.end(), 0) != std::accumulate(new_x.begin(), new_x.end(), 0))
        throw std::invalid_argument("apply_region_rebalance: allocations must have equal totals");

    std::vector<int> surplus(old_x.size()), deficit(old_x.size());
    int moves = 0;
    for (std::size_t r = 0; r < old_x.size(); ++r) {
        surplus[r] = std::max(0, old_x[r] - new_x[r]);
        deficit[r] = std::max(0, new_x[r] - old_x[r]);
        moves += surplus[r];
    }

    RebalanceResult out;
    for (int m = 0; m < moves; ++m) {
        double best_cost = std::numeric_limits<double>::infinity();
        Transfer best;
        for (const auto& a : state.agents) {
            if (!a.idle() || surplus[static_cast<std::size_t>(a.region)] == 0)
                continue;
            for (RegionId g = 0; g < partition.k; ++g) {
                if (deficit[static_cast<std::size_t>(g)] == 0)
                    continue;
                for (DepotId d : partition.region_depots[static_cast<std::size_t>(g)]) {
                    if (depot_occupancy(state, d) >= world.depots[static_cast<std::size_t>(d)].capacity)
                        continue;
                    const double cost = (world.depot_position(d) - a.position).norm();
                    if (cost < best_cost) {
                        best_cost = cost;
                        best = Transfer{a.id, a.region, g, d};
                    }
                }
            }
        }
        if (best.agent == kNone) {
            out.deferred = moves - m;
            break;
        }
        assign_region(state, best.agent, best.to, partition.k);
        assign_depot(state, best.agent, best.depot, world);
        --surplus[static_cast<std::size_t>(best.from)];
        --deficit[static_cast<std::size_t>(best.to)];
        out.transfers.push_back(best);
    }
    return out;
}

std::pair<std::vector<DepotId>, std::vector<RegionId>> initial_placement(const World& world,
                                                                         const RegionPartition& partition,
                                                                         std::span<const double> cell_rates,
                                                                         std::span<const int> x)
{
    std::vector<DepotId> depots;
    std::vector<RegionId> regions;
    for (RegionId r = 0; r < partition.k; ++r) {
        const int want = x[static_cast<std::size_t>(r)];
        if (want > partition.capacity(r, world.depots))
            throw ConfigError("initial_placement: region " + std::to_string(r) + " needs " + std::to_string(want) +
                              " depot slots");
        const auto cells = partition.cells_of(r);
        const auto& candidates = partition.region_depots[static_cast<std::size_t>(r)];
        std::vector<double> nearest(cells.size(), std::numeric_limits<double>::infinity());
        std::vector<int> used(candidates.size(), 0);

        auto cost_with = [&](DepotId d) {
            double cost = 0;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                const double dist = (world.grid.centroid(cells[i]) - world.depot_position(d)).norm();
                const double rate = cell_rates[static_cast<std::size_t>(cells[i])];
                if (rate > 0)
                    cost += rate * std::min(nearest[i], dist);
            }
            return cost;
        };

        for (int n = 0; n < want; ++n) {
            std::size_t pick = candidates.size();
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < candidates.size(); ++j) {
                const DepotId d = candidates[j];
                if (used[j] >= world.depots[static_cast<std::size_t>(d)].capacity)
                    continue;
                // Prefer unopened depots when the gain ties.
                const double cost = cost_with(d) + (used[j] > 0 ? 1e-9 : 0.0);
                if (pick == candidates.size() || cost < best) {
                    best = cost;
                    pick = j;
                }
            }
            const DepotId d = candidates[pick];
            ++used[pick];
            for (std::size_t i = 0; i < cells.size(); ++i)
                nearest[i] = std::min(nearest[i], (world.grid.centroid(cells[i]) - world.depot_position(d)).norm());
            depots.push_back(d);
            regions.push_back(r);
        }
    }
    return {depots, regions};
}

Coordinator::Coordinator(const World& world, const RegionPartition& partition, const DemandModel& model,
                         SystemState initial, CoordinatorOptions options)
    : world_(world), partition_(partition), model_(model), options_(std::move(options)), state_(std::move(initial))
{
    last_plan_time_ = state_.clock;
    last_high_rates_ = current_region_rates();
}

std::vector<double> Coordinator::current_region_rates() const
{
    return aggregate_rates(partition_, model_.rates_at(state_.clock));
}

void Coordinator::log(EventKind kind, AgentId agent, IncidentId incident, std::string detail)
{
    if (options_.trajectory)
        result_.trajectory.push_back(TrajectoryLine{state_.clock, kind, agent, incident, std::move(detail)});
}

void Coordinator::fail(AgentId id, Millis until)
{
    auto& a = state_.agent(id);
    if (a.status == AgentStatus::failed || a.failure_pending) {
        a.offline_until = std::max(a.offline_until, until);
        return;
    }
    a.offline_until = until;
    if (a.busy()) {
        a.failure_pending = true;
        return;
    }
    a.status = AgentStatus::failed;
    a.home_depot = a.depot;
    a.depot = kNone;
    a.destination = a.position;
}

void Coordinator::recover(AgentId id)
{
    auto& a = state_.agent(id);
    if (a.offline_until > state_.clock)
        return;  // window was extended by an overlapping failure
    a.offline_until = kNone;
    if (a.failure_pending) {
        a.failure_pending = false;
        return;
    }
    if (a.status != AgentStatus::failed)
        return;

    auto open = [&](DepotId d) {
        return d != kNone && depot_occupancy(state_, d) < world_.depots[static_cast<std::size_t>(d)].capacity;
    };
    DepotId target = open(a.home_depot) && partition_.depot_region[static_cast<std::size_t>(a.home_depot)] == a.region
                         ? a.home_depot
                         : kNone;
    auto nearest_open = [&](bool same_region) {
        DepotId best = kNone;
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& d : world_.depots) {
            if (!open(d.id) || (same_region && partition_.depot_region[static_cast<std::size_t>(d.id)] != a.region))
                continue;
            const double dist = (world_.depot_position(d.id) - a.position).norm();
            if (dist < best_d) {
                best_d = dist;
                best = d.id;
            }
        }
        return best;
    };
    if (target == kNone)
        target = nearest_open(true);
    if (target == kNone)
        target = nearest_open(false);
    if (target == kNone)
        throw DepotFull("recover: no open depot for agent " + std::to_string(id));
    a.status = AgentStatus::in_transit;
    a.region = partition_.depot_region[static_cast<std::size_t>(target)];
    assign_depot(state_, id, target, world_);
}

void Coordinator::plan(EventKind trigger)
{
    const auto rates = current_region_rates();
    const auto counts = region_counts(state_, partition_.k);

    ReplanContext ctx;
    ctx.mode = options_.mode;
    ctx.trigger = trigger;
    ctx.clock = state_.clock;
    ctx.last_plan_time = last_plan_time_;
    ctx.replan_interval = options_.replan_interval;
    ctx.rebalance_deferred = rebalance_deferred_;
    for (std::size_t r = 0; r < rates.size(); ++r) {
        const double cap = options_.service_rate_eta * counts[r];
        if (rates[r] > 0 && (cap <= 0 || rates[r] / cap >= options_.instability_threshold))
            ctx.region_unstable = true;
        if (std::abs(rates[r] - last_high_rates_[r]) > 1e-9 * std::max(1.0, std::abs(rates[r])))
            ctx.rates_changed = true;
    }
    const auto decision = maybe_replan(ctx);
    if (!decision.high_level && !decision.low_level)
        return;

    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    if (decision.high_level) {
        ++result_.high_level_calls;
        last_high_rates_ = rates;
        const int total = std::accumulate(counts.begin(), counts.end(), 0);
        rebalance_deferred_ = false;
        if (total > 0) {
            std::vector<int> caps;
            for (RegionId r = 0; r < partition_.k; ++r)
                caps.push_back(partition_.capacity(r, world_.depots));
            const auto target = allocate(rates, total, options_.service_rate_eta, AllocateOptions{caps});
            if (target.x != counts && target.total() == total) {
                const auto moved = apply_region_rebalance(state_, partition_, world_, counts, target.x);
                result_.transfers.insert(result_.transfers.end(), moved.transfers.begin(), moved.transfers.end());
                rebalance_deferred_ = moved.deferred > 0;
                detail += "high:" + std::to_string(moved.transfers.size()) + " transfers;";
            } else {
                detail += "high:0 transfers;";
            }
        }
    }
    if (decision.low_level) {
        ++result_.low_level_calls;
        LowLevelOptions lo = options_.low;
        lo.search.seed = derive_seed(options_.seed, decisions_++);
        const auto plans = plan_region_allocations(world_, partition_, state_, model_, lo);
        int moved = 0;
        for (const auto& p : plans)
            if (p.action) {
                const auto before = current_allocation(decompose(state_, partition_, p.region));
                apply_allocation(state_, *p.action, world_);
                if (before != *p.action)
                    ++moved;
            }
        detail += "low:" + std::to_string(moved) + " regions changed";
    }
    last_plan_time_ = state_.clock;
    const auto t1 = std::chrono::steady_clock::now();
    result_.planner_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    log(EventKind::planning_step, kNone, kNone, detail);
}

void Coordinator::check_invariants()
{
    if (!options_.check_invariants)
        return;
    auto& inv = result_.invariants;
    ++inv.checks;
    const double max_miles = world_.travel.speed_mph * to_hours(state_.clock - last_check_time_);
    for (std::size_t i = 0; i < state_.agents.size(); ++i) {
        const auto& a = state_.agents[i];
        if ((a.position - last_positions_[i]).norm() > max_miles + 1e-9)
            ++inv.teleport;
        last_positions_[i] = a.position;
    }
    last_check_time_ = state_.clock;
    for (const auto& d : world_.depots)
        if (depot_occupancy(state_, d.id) > d.capacity)
            ++inv.capacity;
    if (!state_.pending.empty() && std::any_of(state_.agents.begin(), state_.agents.end(), [](const Agent& a) { return a.idle(); }))
        ++inv.dominance;
}

RunResult Coordinator::run(const IncidentChain& chain, std::span<const FailureEvent> failures)
{
    result_ = RunResult{};
    last_positions_.clear();
    for (const auto& a : state_.agents)
        last_positions_.push_back(a.position);
    last_check_time_ = state_.clock;

    std::vector<FailureEvent> fails(failures.begin(), failures.end());
    std::stable_sort(fails.begin(), fails.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    std::vector<std::pair<Millis, AgentId>> recoveries;  // kept sorted
    std::size_t next_incident = 0;
    std::size_t next_failure = 0;
    const auto& incidents = chain.incidents;
    const bool planning = options_.mode != PolicyMode::baseline_static;

    auto keep = [&](const DispatchRecord& rec) {
        result_.dispatches.push_back(rec);
        log(EventKind::incident_occurrence, rec.agent, rec.incident, "dispatch");
    };

    while (next_incident < incidents.size() || !state_.pending.empty()) {
        struct Candidate {
            Millis time;
            EventKind kind;
        };
        std::optional<Candidate> next;
        auto offer = [&](std::optional<Millis> t, EventKind k) {
            if (!t)
                return;
            if (!next || *t < next->time || (*t == next->time && k < next->kind))
                next = Candidate{*t, k};
        };
        offer(next_completion(state_), EventKind::agent_available);
        if (!recoveries.empty())
            offer(recoveries.front().first, EventKind::agent_recovery);
        if (next_failure < fails.size())
            offer(std::max(fails[next_failure].start, state_.clock), EventKind::agent_failure);
        if (next_incident < incidents.size())
            offer(incidents[next_incident].report_time, EventKind::incident_occurrence);
        if (planning && next_incident < incidents.size())
            offer(last_plan_time_ + options_.replan_interval, EventKind::planning_step);
        if (!next)
            break;  // queue non-empty but nobody can ever serve it

        std::vector<AgentId> finishing;
        if (next->kind == EventKind::agent_available)
            for (const auto& a : state_.agents)
                if (a.busy() && a.available_at() == next->time)
                    finishing.push_back(a.id);
        advance(state_, next->time, world_);

        switch (next->kind) {
        case EventKind::agent_available:
            for (AgentId id : finishing)
                log(EventKind::agent_available, id, kNone, std::string(to_string(state_.agent(id).status)));
            break;
        case EventKind::agent_recovery: {
            const AgentId id = recoveries.front().second;
            recoveries.erase(recoveries.begin());
            recover(id);
            log(EventKind::agent_recovery, id, kNone, std::string(to_string(state_.agent(id).status)));
            for (const auto& rec : dispatch_pending(state_, world_))
                keep(rec);
            if (planning)
                plan(EventKind::agent_recovery);
            break;
        }
        case EventKind::agent_failure: {
            const auto f = fails[next_failure++];
            fail(f.agent, state_.clock + f.duration);
            const auto at = std::upper_bound(recoveries.begin(), recoveries.end(), std::make_pair(state_.clock + f.duration, f.agent));
            recoveries.insert(at, {state_.clock + f.duration, f.agent});
            log(EventKind::agent_failure, f.agent, kNone, state_.agent(f.agent).failure_pending ? "pending" : "offline");
            if (planning)
                plan(EventKind::agent_failure);
            break;
        }
        case EventKind::incident_occurrence: {
            const auto& inc = incidents[next_incident++];
            if (const auto rec = on_incident(state_, inc, world_))
                keep(*rec);
            else
                log(EventKind::incident_occurrence, kNone, inc.id, "queued");
            if (planning)
                plan(EventKind::incident_occurrence);
            break;
        }
        case EventKind::planning_step:
            plan(EventKind::planning_step);
            break;
        }
        for (const auto& rec : dispatch_pending(state_, world_))
            keep(rec);
        check_invariants();
    }
    result_.final_state = state_;
    return result_;
}

} // namespace hierplan
