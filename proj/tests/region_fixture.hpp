#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "hierplan/lowlevel.hpp"

namespace hierplan::testing {

/// Small region search problem: up to 3 depot slots for the idle agents and up to 3 incidents.
struct RegionInstance {
    World world;
    std::vector<DepotId> depots;
    SystemState state;
    IncidentChain chain;
};

inline RegionInstance random_region_instance(std::uint64_t seed)
{
    Rng rng(seed);
    RegionInstance in;
    in.world.grid = Grid(6, 6);
    std::vector<CellId> cells(36);
    for (int i = 0; i < 36; ++i)
        cells[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = cells.size() - 1; i > 0; --i)
        std::swap(cells[i], cells[rng.below(i + 1)]);
    const int agents = 1 + static_cast<int>(rng.below(2));
    const int ndepots = agents == 1 ? 3 : 2;
    for (int d = 0; d < ndepots; ++d) {
        in.world.depots.push_back({d, cells[static_cast<std::size_t>(d)], 1});
        in.depots.push_back(d);
    }
    std::vector<DepotId> start(in.depots.begin(), in.depots.begin() + agents);
    std::vector<RegionId> regions(static_cast<std::size_t>(agents), 0);
    in.state = make_state(in.world, start, regions);
    const int incidents = 1 + static_cast<int>(rng.below(3));
    std::vector<Millis> times;
    for (int i = 0; i < incidents; ++i)
        times.push_back(from_seconds(rng.uniform(0.0, 3600.0)));
    std::sort(times.begin(), times.end());
    for (int i = 0; i < incidents; ++i)
        in.chain.incidents.push_back(Incident{i, cells[static_cast<std::size_t>(ndepots + i)],
                                              times[static_cast<std::size_t>(i)], 20 * kMillisPerMinute});
    in.chain.horizon = 2 * kMillisPerHour;
    return in;
}

/// Minimum total cost over every action sequence; leaves are scored by the default policy.
template <class Env>
double expectimax(const Env& env, const typename Env::State& s)
{
    const auto actions = env.actions(s);
    if (actions.empty()) {
        auto leaf = s;
        return env.rollout(leaf);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : actions) {
        auto next = s;
        const double c = env.step(next, a);
        best = std::min(best, c + expectimax(env, next));
    }
    return best;
}

/// Exhaustive value of each root action of an instance.
inline std::vector<std::pair<AllocationAction, double>> root_values(const RegionInstance& in, const RolloutParams& p = {})
{
    RegionSearchEnv env(in.world, in.depots, in.chain.incidents, in.state.clock, in.state.clock + in.chain.horizon, p);
    const auto root = env.initial(in.state);
    std::vector<std::pair<AllocationAction, double>> out;
    for (const auto& a : env.actions(root)) {
        auto next = root;
        const double c = env.step(next, a);
        out.emplace_back(a, c + expectimax(env, next));
    }
    return out;
}

} // namespace hierplan::testing
