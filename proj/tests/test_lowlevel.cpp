#include <doctest.h>

#include <cmath>
#include <limits>

#include "hierplan/lowlevel.hpp"
#include "region_fixture.hpp"

using namespace hierplan;

namespace {

World line_world(int far_capacity = 1)
{
    World w;
    w.grid = Grid(10, 1);
    w.depots = {{0, 0, 1}, {1, 5, 1}, {2, 9, far_capacity}};
    return w;
}

RegionPartition single_region(const World& w)
{
    RegionPartition p;
    p.k = 1;
    p.cell_region.assign(static_cast<std::size_t>(w.grid.size()), 0);
    p.depot_region.assign(w.depots.size(), 0);
    p.region_depots = {{}};
    for (const auto& d : w.depots)
        p.region_depots[0].push_back(d.id);
    p.region_rate = {0.0};
    p.region_center = {Position::Zero()};
    return p;
}

AllocationAction pick_lowest(const RegionSearchResult& r)
{
    double best = std::numeric_limits<double>::infinity();
    AllocationAction out;
    for (const auto& s : r.scores)
        if (s.mean_cost < best) {
            best = s.mean_cost;
            out = s.action;
        }
    return out;
}

} // namespace

TEST_CASE("action space sizes")
{
    CHECK(permutations(30, 20) == doctest::Approx(7.3096577329197e25).epsilon(1e-9));
    CHECK(permutations(6, 4) == 360.0);
    CHECK(5 * permutations(6, 4) == 1800.0);
    CHECK(permutations(3, 0) == 1.0);
    CHECK(permutations(2, 3) == 0.0);
}

TEST_CASE("enumerated allocations")
{
    const auto w = line_world();
    const std::vector<DepotId> all{0, 1, 2};
    auto s = make_state(w, std::vector<DepotId>{0, 1}, std::vector<RegionId>{0, 0});
    const auto acts = enumerate_allocations(s, all, w);
    REQUIRE(acts.size() == 6);
    CHECK(acts.front().depots == std::vector<DepotId>{0, 1});
    CHECK(acts.back().depots == std::vector<DepotId>{2, 1});
    for (const auto& a : acts)
        CHECK(a.agents == std::vector<AgentId>{0, 1});

    const auto w2 = line_world(2);
    auto s2 = make_state(w2, std::vector<DepotId>{0, 1}, std::vector<RegionId>{0, 0});
    CHECK(enumerate_allocations(s2, all, w2).size() == 7);
    CHECK(open_slots(s2, all, w2) == std::vector<DepotId>{0, 1, 2, 2});

    report(s2, Incident{0, 4, 0, 1200000});
    dispatch(s2, 1, 0, w2);
    CHECK(open_slots(s2, all, w2) == std::vector<DepotId>{0, 2, 2});
    CHECK(enumerate_allocations(s2, all, w2).size() == 2);
    CHECK(idle_agents(s2) == std::vector<AgentId>{0});
}

TEST_CASE("allocation applies as a unit")
{
    const auto w = line_world();
    auto s = make_state(w, std::vector<DepotId>{0, 1}, std::vector<RegionId>{0, 0});
    const AllocationAction swap{{0, 1}, {1, 0}};
    CHECK(allocation_travel(s, swap, w) == doctest::Approx(10.0));
    apply_allocation(s, swap, w);
    CHECK(s.agent(0).depot == 1);
    CHECK(s.agent(1).depot == 0);
    CHECK(current_allocation(s) == swap);

    report(s, Incident{0, 4, 0, 1200000});
    dispatch(s, 0, 0, w);
    CHECK_THROWS_AS(apply_allocation(s, AllocationAction{{0}, {2}}, w), AgentBusy);
    CHECK_THROWS_AS(apply_allocation(s, AllocationAction{{1}, {1}}, w), DepotFull);
    CHECK(s.agent(1).depot == 0);
}

TEST_CASE("decompose keeps one region's live agents and incidents")
{
    const auto w = line_world();
    auto p = single_region(w);
    p.k = 2;
    for (int c = 5; c < 10; ++c)
        p.cell_region[static_cast<std::size_t>(c)] = 1;
    auto s = make_state(w, std::vector<DepotId>{0, 1, 2}, std::vector<RegionId>{0, 1, 1});
    s.agent(2).status = AgentStatus::failed;
    report(s, Incident{0, 2, 0, 1000});
    report(s, Incident{1, 7, 1, 1000});
    const auto r1 = decompose(s, p, 1);
    REQUIRE(r1.agents.size() == 1);
    CHECK(r1.agents[0].id == 1);
    REQUIRE(r1.pending.size() == 1);
    CHECK(r1.pending[0].id == 1);
}

TEST_CASE("rollout cost of a single call")
{
    const auto w = line_world();
    auto s = make_state(w, std::vector<DepotId>{0}, std::vector<RegionId>{0});
    const std::vector<Incident> now{{0, 5, 0, 1200000}};
    CHECK(rollout(s, now, kMillisPerHour, 0, 0.99995, w) == doctest::Approx(600.0));
    const std::vector<Incident> later{{0, 5, kMillisPerHour, 1200000}};
    CHECK(rollout(s, later, 2 * kMillisPerHour, 0, 0.99995, w) == doctest::Approx(501.1598715));
    CHECK(rollout(s, later, 2 * kMillisPerHour, 0, 1.0, w) == doctest::Approx(600.0));
    CHECK(s.agent(0).status == AgentStatus::waiting);
}

TEST_CASE("search prefers the depot next to the calls")
{
    const auto w = line_world();
    const std::vector<DepotId> all{0, 1, 2};
    auto s = make_state(w, std::vector<DepotId>{0}, std::vector<RegionId>{0});
    IncidentChain chain;
    for (int i = 0; i < 3; ++i)
        chain.incidents.push_back({i, 9, (i + 1) * 30 * kMillisPerMinute, 10 * kMillisPerMinute});
    const auto r = mcts_search(w, all, s, chain, SearchOptions{500, 1.44, 7});
    CHECK(r.visits_conserved);
    CHECK(r.scores.size() == 3);
    CHECK(pick_lowest(r).depots == std::vector<DepotId>{2});
}

TEST_CASE("no idle agents yields no scores")
{
    const auto w = line_world();
    const std::vector<DepotId> all{0, 1, 2};
    auto s = make_state(w, std::vector<DepotId>{0}, std::vector<RegionId>{0});
    report(s, Incident{0, 3, 0, 1200000});
    dispatch(s, 0, 0, w);
    IncidentChain chain;
    CHECK(mcts_search(w, all, s, chain, SearchOptions{100, 1.44, 1}).scores.empty());
    CHECK_THROWS_AS(mcts_search(w, all, s, chain, SearchOptions{0, 1.44, 1}), std::invalid_argument);
}

TEST_CASE("recommendation equals exhaustive expectimax on small regions")
{
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        const auto in = testing::random_region_instance(seed);
        const auto values = testing::root_values(in);
        REQUIRE(values.size() <= 3);
        REQUIRE(in.chain.incidents.size() <= 3);
        double opt = std::numeric_limits<double>::infinity();
        for (const auto& [a, v] : values)
            opt = std::min(opt, v);
        const auto r = mcts_search(in.world, in.depots, in.state, in.chain, SearchOptions{1000, 1.44, seed});
        CHECK(r.visits_conserved);
        const auto pick = pick_lowest(r);
        double picked = std::numeric_limits<double>::infinity();
        for (const auto& [a, v] : values)
            if (a == pick)
                picked = v;
        CAPTURE(seed);
        CHECK(picked == doctest::Approx(opt).epsilon(1e-9));
    }
}

TEST_CASE("large joint spaces are searched one agent at a time")
{
    const auto w = line_world();
    const std::vector<DepotId> all{0, 1, 2};
    auto s = make_state(w, std::vector<DepotId>{0, 1}, std::vector<RegionId>{0, 0});
    IncidentChain chain;
    chain.incidents.push_back({0, 9, 20 * kMillisPerMinute, 10 * kMillisPerMinute});
    chain.incidents.push_back({1, 8, 50 * kMillisPerMinute, 10 * kMillisPerMinute});
    RolloutParams params;
    params.joint_action_limit = 2;
    RegionSearchEnv env(w, all, chain.incidents, 0, 2 * kMillisPerHour, params);
    const auto root = env.initial(s);
    CHECK(env.decomposed(root));
    const auto first = env.actions(root);
    REQUIRE(first.size() == 3);
    for (const auto& a : first)
        CHECK(a.agents == std::vector<AgentId>{0});

    const auto r = mcts_search(w, all, s, chain, SearchOptions{800, 1.44, 3}, params);
    CHECK(r.visits_conserved);
    REQUIRE(r.scores.size() == 1);
    const auto& full = r.scores[0].action;
    CHECK(full.agents == std::vector<AgentId>{0, 1});
    REQUIRE(full.depots.size() == 2);
    CHECK(full.depots[0] != full.depots[1]);
    CHECK(std::count(full.depots.begin(), full.depots.end(), DepotId{2}) == 1);
}

TEST_CASE("best action tie-breaks")
{
    const auto w = line_world();
    auto s = make_state(w, std::vector<DepotId>{1}, std::vector<RegionId>{0});
    const AllocationAction at0{{0}, {0}}, at1{{0}, {1}}, at2{{0}, {2}};

    ActionScoreMap m;
    m[at0].mean = 5;
    m[at2].mean = 4;
    CHECK(*best_action(m, s, w) == at2);

    m[at2].mean = 5;
    m[at1].mean = 5;
    CHECK(*best_action(m, s, w) == at1);

    m.erase(at1);
    s.agent(0).position = w.depot_position(2) + Position(-1.0, 0.0);
    CHECK(*best_action(m, s, w) == at2);

    s.agent(0).position = Position(3.0, 0.5);
    CHECK(*best_action(m, s, w) == at0);

    CHECK_FALSE(best_action(ActionScoreMap{}, s, w).has_value());
}

TEST_CASE("region planning follows demand")
{
    const auto w = line_world();
    const auto p = single_region(w);
    auto s = make_state(w, std::vector<DepotId>{0}, std::vector<RegionId>{0});
    DemandModel model;
    model.rates.assign(10, 0.0);
    model.rates[9] = 3.0;
    LowLevelOptions opt;
    opt.samples = 8;
    opt.search = SearchOptions{300, 1.44, 11};
    const auto plan = plan_region(w, p, s, model, 0, opt);
    REQUIRE(plan.action.has_value());
    CHECK(plan.action->depots == std::vector<DepotId>{2});
    for (const auto& [a, score] : plan.scores)
        CHECK(score.scores.size() == 8);

    const auto again = plan_region(w, p, s, model, 0, opt);
    CHECK(again.action == plan.action);
    REQUIRE(again.scores.size() == plan.scores.size());
    for (const auto& [a, score] : plan.scores)
        CHECK(again.scores.at(a).scores == score.scores);

    opt.threads = 3;
    const auto threaded = plan_region(w, p, s, model, 0, opt);
    for (const auto& [a, score] : plan.scores)
        CHECK(threaded.scores.at(a).scores == score.scores);

    model.rates.assign(10, 0.0);
    const auto idle = plan_region(w, p, s, model, 0, opt);
    REQUIRE(idle.action.has_value());
    CHECK(*idle.action == current_allocation(s));

    opt.samples = 0;
    CHECK_THROWS_AS(plan_region(w, p, s, model, 0, opt), std::invalid_argument);
}
