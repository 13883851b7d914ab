#include "hierplan/lowlevel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace hierplan {

double permutations(int n, int k)
{
    if (k < 0 || n < 0 || k > n)
        return 0;
    long double p = 1;
    for (int i = 0; i < k; ++i)
        p *= static_cast<long double>(n - i);
    return static_cast<double>(p);
}

SystemState decompose(const SystemState& state, const RegionPartition& partition, RegionId region)
{
    SystemState out;
    out.clock = state.clock;
    for (const auto& a : state.agents)
        if (a.region == region && a.status != AgentStatus::failed)
            out.agents.push_back(a);
    for (const auto& inc : state.pending)
        if (partition.cell_region.at(static_cast<std::size_t>(inc.cell)) == region)
            out.pending.push_back(inc);
    return out;
}

std::vector<AgentId> idle_agents(const SystemState& state)
{
    std::vector<AgentId> out;
    for (const auto& a : state.agents)
        if (a.idle())
            out.push_back(a.id);
    return out;
}

namespace {

// Free slots per depot (parallel to `depots`) once busy agents keep theirs.
std::vector<int> free_slots(const SystemState& state, std::span<const DepotId> depots, const World& world)
{
    std::vector<int> free;
    free.reserve(depots.size());
    for (DepotId d : depots) {
        int held = 0;
        for (const auto& a : state.agents)
            if (a.depot == d && a.busy())
                ++held;
        free.push_back(std::max(0, world.depots.at(static_cast<std::size_t>(d)).capacity - held));
    }
    return free;
}

template <class Visit>
bool for_each_assignment(std::size_t agent, std::size_t agents, std::span<const DepotId> depots, std::vector<int>& free,
                         std::vector<DepotId>& chosen, Visit& visit)
{
    if (agent == agents)
        return visit(chosen);
    for (std::size_t i = 0; i < depots.size(); ++i) {
        if (free[i] == 0)
            continue;
        --free[i];
        chosen.push_back(depots[i]);
        const bool more = for_each_assignment(agent + 1, agents, depots, free, chosen, visit);
        chosen.pop_back();
        ++free[i];
        if (!more)
            return false;
    }
    return true;
}

std::size_t count_assignments(std::size_t agents, std::span<const DepotId> depots, std::vector<int> free,
                              std::size_t cap)
{
    std::size_t n = 0;
    std::vector<DepotId> chosen;
    auto visit = [&](const std::vector<DepotId>&) { return ++n <= cap; };
    for_each_assignment(0, agents, depots, free, chosen, visit);
    return n;
}

std::vector<DepotId> sorted_depots(std::vector<DepotId> depots)
{
    std::sort(depots.begin(), depots.end());
    depots.erase(std::unique(depots.begin(), depots.end()), depots.end());
    return depots;
}

} // namespace

std::vector<DepotId> open_slots(const SystemState& state, std::span<const DepotId> depots, const World& world)
{
    const auto ds = sorted_depots({depots.begin(), depots.end()});
    const auto free = free_slots(state, ds, world);
    std::vector<DepotId> out;
    for (std::size_t i = 0; i < ds.size(); ++i)
        out.insert(out.end(), static_cast<std::size_t>(free[i]), ds[i]);
    return out;
}

std::vector<AllocationAction> enumerate_allocations(const SystemState& state, std::span<const DepotId> depots,
                                                    const World& world)
{
    const auto agents = idle_agents(state);
    const auto ds = sorted_depots({depots.begin(), depots.end()});
    auto free = free_slots(state, ds, world);
    std::vector<AllocationAction> out;
    if (agents.empty())
        return out;
    std::vector<DepotId> chosen;
    auto visit = [&](const std::vector<DepotId>& assignment) {
        out.push_back(AllocationAction{agents, assignment});
        return true;
    };
    for_each_assignment(0, agents.size(), ds, free, chosen, visit);
    return out;
}

void apply_allocation(SystemState& state, const AllocationAction& action, const World& world)
{
    if (action.agents.size() != action.depots.size())
        throw std::invalid_argument("apply_allocation: agents and depots differ in length");
    for (AgentId id : action.agents) {
        auto& a = state.agent(id);
        if (!a.idle())
            throw AgentBusy("apply_allocation: agent " + std::to_string(id) + " is " + std::string(to_string(a.status)));
    }
    std::vector<DepotId> previous;
    for (AgentId id : action.agents) {
        previous.push_back(state.agent(id).depot);
        state.agent(id).depot = kNone;
    }
    try {
        for (std::size_t i = 0; i < action.agents.size(); ++i)
            assign_depot(state, action.agents[i], action.depots[i], world);
    } catch (...) {
        for (std::size_t i = 0; i < action.agents.size(); ++i)
            state.agent(action.agents[i]).depot = previous[i];
        throw;
    }
}

double allocation_travel(const SystemState& state, const AllocationAction& action, const World& world)
{
    double miles = 0;
    for (std::size_t i = 0; i < action.agents.size(); ++i)
        miles += (world.depot_position(action.depots[i]) - state.agent(action.agents[i]).position).norm();
    return miles;
}

AllocationAction current_allocation(const SystemState& state)
{
    AllocationAction out;
    for (const auto& a : state.agents)
        if (a.idle()) {
            out.agents.push_back(a.id);
            out.depots.push_back(a.depot);
        }
    return out;
}

double discounted_cost(const DispatchRecord& rec, Millis origin, double discount)
{
    return std::pow(discount, to_seconds(rec.dispatch_time - origin)) * to_seconds(rec.response_time());
}

double rollout(SystemState state, std::span<const Incident> chain, Millis horizon, Millis origin, double discount,
               const World& world)
{
    double cost = 0;
    run_greedy(state, chain, 0, horizon, world,
               [&](const DispatchRecord& rec) { cost += discounted_cost(rec, origin, discount); });
    return cost;
}

RegionSearchEnv::RegionSearchEnv(const World& world, std::vector<DepotId> depots, std::vector<Incident> chain,
                                 Millis origin, Millis horizon, RolloutParams params)
    : world_(&world), depots_(sorted_depots(std::move(depots))), chain_(std::move(chain)), origin_(origin),
      horizon_(horizon), params_(params)
{
}

RegionSearchEnv::State RegionSearchEnv::initial(SystemState region_state) const
{
    State s;
    s.sim = std::move(region_state);
    return s;
}

bool RegionSearchEnv::decomposed(const State& s) const
{
    const auto agents = idle_agents(s.sim);
    const auto free = free_slots(s.sim, depots_, *world_);
    return count_assignments(agents.size(), depots_, free, params_.joint_action_limit) > params_.joint_action_limit;
}

std::vector<RegionSearchEnv::Action> RegionSearchEnv::actions(const State& s) const
{
    if (!s.root && s.next >= chain_.size())
        return {};
    const auto agents = idle_agents(s.sim);
    if (agents.empty())
        return s.root ? std::vector<Action>{} : std::vector<Action>{Action{}};
    if (s.partial.empty() && !decomposed(s))
        return enumerate_allocations(s.sim, depots_, *world_);

    // One agent per level: the next unassigned agent may take any slot still free.
    auto free = free_slots(s.sim, depots_, *world_);
    for (DepotId d : s.partial)
        --free[static_cast<std::size_t>(std::lower_bound(depots_.begin(), depots_.end(), d) - depots_.begin())];
    const AgentId next_agent = agents[s.partial.size()];
    std::vector<Action> out;
    for (std::size_t i = 0; i < depots_.size(); ++i)
        if (free[i] > 0)
            out.push_back(Action{{next_agent}, {depots_[i]}});
    return out;
}

double RegionSearchEnv::step(State& s, const Action& a) const
{
    if (!a.empty()) {
        const auto agents = idle_agents(s.sim);
        if (a.agents.size() == 1 && agents.size() > 1) {
            s.partial.push_back(a.depots.front());
            if (s.partial.size() < agents.size())
                return 0.0;
            apply_allocation(s.sim, AllocationAction{agents, s.partial}, *world_);
            s.partial.clear();
        } else {
            apply_allocation(s.sim, a, *world_);
        }
    }
    s.root = false;
    if (s.next >= chain_.size())
        return 0.0;

    // Advance to the next incident report and serve it greedily.
    double cost = 0;
    auto sink = [&](const DispatchRecord& rec) { cost += discounted_cost(rec, origin_, params_.discount); };
    const Incident& inc = chain_[s.next];
    while (!s.sim.pending.empty()) {
        const auto done = next_completion(s.sim);
        if (!done || *done > inc.report_time)
            break;
        advance(s.sim, *done, *world_);
        for (const auto& rec : dispatch_pending(s.sim, *world_))
            sink(rec);
    }
    advance(s.sim, inc.report_time, *world_);
    report(s.sim, inc);
    for (const auto& rec : dispatch_pending(s.sim, *world_))
        sink(rec);
    ++s.next;
    return cost;
}

double RegionSearchEnv::rollout(State& s) const
{
    double cost = 0;
    s.next = run_greedy(s.sim, chain_, s.next, horizon_, *world_,
                        [&](const DispatchRecord& rec) { cost += discounted_cost(rec, origin_, params_.discount); });
    return cost;
}

RegionSearchResult mcts_search(const World& world, std::span<const DepotId> region_depots,
                               const SystemState& region_state, const IncidentChain& chain,
                               const SearchOptions& options, const RolloutParams& params, Millis planning_horizon,
                               std::vector<TraceEntry>* trace)
{
    if (options.iterations < 1)
        throw std::invalid_argument("mcts_search: iterations must be >= 1");
    RegionSearchResult result;
    if (idle_agents(region_state).empty())
        return result;

    const Millis horizon = region_state.clock + planning_horizon;
    std::vector<Incident> tail;
    for (const auto& inc : chain.incidents)
        if (inc.report_time >= region_state.clock && inc.report_time < horizon)
            tail.push_back(inc);

    RegionSearchEnv env(world, {region_depots.begin(), region_depots.end()}, std::move(tail), region_state.clock,
                        horizon, params);
    const auto root_state = env.initial(region_state);
    const bool per_agent = env.decomposed(root_state);

    UctSearch<RegionSearchEnv> search(env, root_state, options);
    search.run(trace);
    result.visits_conserved = search.visits_conserved();

    if (!per_agent) {
        result.scores = search.root_scores();
        return result;
    }
    // Per-agent levels: report the best complete assignment found in this tree.
    const int leaf = search.descend_best(0, [](const auto& node) { return node.state.root; });
    const auto& nodes = search.nodes();
    if (nodes[static_cast<std::size_t>(leaf)].state.root)
        return result;
    AllocationAction full;
    full.agents = idle_agents(region_state);
    for (int n = leaf; nodes[static_cast<std::size_t>(n)].parent >= 0; n = nodes[static_cast<std::size_t>(n)].parent)
        full.depots.push_back(nodes[static_cast<std::size_t>(n)].action.depots.front());
    std::reverse(full.depots.begin(), full.depots.end());
    result.scores.push_back({full, nodes[static_cast<std::size_t>(leaf)].mean_cost(),
                             nodes[static_cast<std::size_t>(leaf)].visits});
    return result;
}

std::optional<AllocationAction> best_action(const ActionScoreMap& scores, const SystemState& region_state,
                                            const World& world)
{
    if (scores.empty())
        return std::nullopt;
    const auto current = current_allocation(region_state);
    auto tied = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); };
    const ActionScoreMap::value_type* best = nullptr;
    for (const auto& entry : scores) {
        if (!best) {
            best = &entry;
            continue;
        }
        const double m = entry.second.mean;
        const double bm = best->second.mean;
        if (!tied(m, bm)) {
            if (m < bm)
                best = &entry;
            continue;
        }
        if (best->first == current)
            continue;
        if (entry.first == current) {
            best = &entry;
            continue;
        }
        const double t = allocation_travel(region_state, entry.first, world);
        const double bt = allocation_travel(region_state, best->first, world);
        if (t < bt - 1e-12)
            best = &entry;
    }
    return best->first;
}

RegionPlan plan_region(const World& world, const RegionPartition& partition, const SystemState& state,
                       const DemandModel& model, RegionId region, const LowLevelOptions& options)
{
    if (options.samples < 1)
        throw std::invalid_argument("plan_region: samples must be >= 1");
    RegionPlan plan;
    plan.region = region;
    const auto region_state = decompose(state, partition, region);
    if (idle_agents(region_state).empty())
        return plan;

    std::vector<std::uint8_t> cell_mask(partition.cell_region.size());
    for (std::size_t c = 0; c < cell_mask.size(); ++c)
        cell_mask[c] = partition.cell_region[c] == region;

    const auto& depots = partition.region_depots.at(static_cast<std::size_t>(region));
    const auto n = static_cast<std::size_t>(options.samples);
    std::vector<RegionSearchResult> results(n);

    auto run_tree = [&](std::size_t i) {
        const auto stream = static_cast<std::uint64_t>(region) * 1000003ULL + i;
        auto chain = sample_chain(model, state.clock, state.clock + options.planning_horizon,
                                  derive_seed(options.search.seed, stream), options.service, cell_mask);
        // Sampled ids must not collide with real pending incidents.
        for (auto& inc : chain.incidents)
            inc.id += IncidentId{1} << 40;
        SearchOptions so = options.search;
        so.seed = derive_seed(options.search.seed ^ 0x5bd1e995ULL, stream);
        results[i] = mcts_search(world, depots, region_state, chain, so, options.rollout, options.planning_horizon);
    };

    const auto workers = static_cast<std::size_t>(std::max(1, options.threads));
    if (workers == 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i)
            run_tree(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, n); ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++)
                    run_tree(i);
            });
    }

    for (const auto& r : results)
        for (const auto& s : r.scores)
            plan.scores[s.action].scores.push_back(s.mean_cost);
    for (auto& [action, score] : plan.scores) {
        double sum = 0;
        for (double v : score.scores)
            sum += v;
        score.mean = sum / static_cast<double>(score.scores.size());
    }
    plan.action = best_action(plan.scores, region_state, world);
    return plan;
}

std::vector<RegionPlan> plan_region_allocations(const World& world, const RegionPartition& partition,
                                                const SystemState& state, const DemandModel& model,
                                                const LowLevelOptions& options)
{
    std::vector<RegionPlan> out;
    for (RegionId r = 0; r < partition.k; ++r)
        out.push_back(plan_region(world, partition, state, model, r, options));
    return out;
}

} // namespace hierplan
