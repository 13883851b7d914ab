#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <limits>
#include <numeric>

#include "hierplan/spatial.hpp"

using namespace hierplan;

namespace {

double weighted_sse(const Grid& grid, const std::vector<double>& w, const std::vector<int>& label, int k)
{
    double sse = 0;
    for (int r = 0; r < k; ++r) {
        Position c = Position::Zero();
        double mass = 0;
        for (int i = 0; i < grid.size(); ++i)
            if (label[i] == r) {
                c += w[i] * grid.centroid(i);
                mass += w[i];
            }
        if (mass == 0)
            continue;
        c /= mass;
        for (int i = 0; i < grid.size(); ++i)
            if (label[i] == r)
                sse += w[i] * (grid.centroid(i) - c).squaredNorm();
    }
    return sse;
}

double brute_force_two_way(const Grid& grid, const std::vector<double>& w)
{
    const int n = grid.size();
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> label(n);
    for (long mask = 1; mask < (1L << n) - 1; ++mask) {
        for (int i = 0; i < n; ++i)
            label[i] = (mask >> i) & 1;
        best = std::min(best, weighted_sse(grid, w, label, 2));
    }
    return best;
}

} // namespace

TEST_CASE("grid geometry")
{
    const Grid g(4, 3, 0.5);
    CHECK(g.size() == 12);
    CHECK(g.cell_id(2, 1) == 6);
    CHECK(g.cell(6).gx == 2);
    CHECK(g.cell(6).gy == 1);
    CHECK(g.centroid(6).x() == doctest::Approx(1.25));
    CHECK(g.centroid(6).y() == doctest::Approx(0.75));
    CHECK_THROWS(g.cell_id(4, 0));
    CHECK_THROWS_AS(Grid(0, 3), ConfigError);
}

TEST_CASE("euclidean travel time")
{
    const TravelModel t{30.0};
    CHECK(t.travel_seconds({0, 0}, {3, 4}) == doctest::Approx(600.0));
    CHECK(t.travel_millis({0, 0}, {3, 4}) == 600000);
    CHECK(t.travel_millis({0, 0}, {2, 0}) == 240000);
    CHECK(t.travel_millis({1, 1}, {1, 1}) == 0);
}

TEST_CASE("two-region partition matches brute force on a line")
{
    const Grid g(6, 1);
    const std::vector<double> w{5, 4, 0.5, 0.2, 3, 6};
    const std::vector<Depot> depots{{0, 0, 1}, {1, 5, 1}};
    const auto p = partition_regions(g, w, depots, 2, 11);
    std::vector<int> label(p.cell_region.begin(), p.cell_region.end());
    CHECK(weighted_sse(g, w, label, 2) == doctest::Approx(brute_force_two_way(g, w)).epsilon(1e-12));
    CHECK(p.cell_region[0] == p.cell_region[1]);
    CHECK(p.cell_region[4] == p.cell_region[5]);
    CHECK(p.cell_region[0] != p.cell_region[5]);
}

TEST_CASE("two-region partition matches brute force on a 4x4 grid")
{
    const Grid g(4, 4);
    std::vector<double> w(16, 0.05);
    for (int c : {0, 1, 4, 5})
        w[c] = 2.0;
    for (int c : {11, 14, 15})
        w[c] = 3.0;
    const std::vector<Depot> depots{{0, 0, 1}, {1, 15, 1}, {2, 6, 1}};
    const auto p = partition_regions(g, w, depots, 2, 3);
    std::vector<int> label(p.cell_region.begin(), p.cell_region.end());
    CHECK(weighted_sse(g, w, label, 2) == doctest::Approx(brute_force_two_way(g, w)).epsilon(1e-9));
}

TEST_CASE("region bookkeeping")
{
    const Grid g(10, 10);
    std::vector<double> w(100);
    for (int i = 0; i < 100; ++i)
        w[i] = 0.01 * (1 + i % 7);
    std::vector<Depot> depots;
    for (int i = 0; i < 12; ++i)
        depots.push_back({i, (i * 37) % 100, 1 + i % 2});
    const auto p = partition_regions(g, w, depots, 3, 0);
    CHECK(p.k == 3);
    double total = 0;
    for (int r = 0; r < 3; ++r) {
        CHECK_FALSE(p.region_depots[r].empty());
        CHECK(std::is_sorted(p.region_depots[r].begin(), p.region_depots[r].end()));
        for (DepotId d : p.region_depots[r])
            CHECK(p.cell_region[depots[d].cell] == r);
        total += p.region_rate[r];
    }
    CHECK(total == doctest::Approx(std::accumulate(w.begin(), w.end(), 0.0)));
    CHECK(aggregate_rates(p, w) == p.region_rate);
    int cap = 0;
    for (int r = 0; r < 3; ++r)
        cap += p.capacity(r, depots);
    CHECK(cap == 18);

    const auto again = partition_regions(g, w, depots, 3, 0);
    CHECK(again.cell_region == p.cell_region);
}

TEST_CASE("depot repair and infeasible partitions")
{
    const Grid g(8, 1);
    const std::vector<double> w{1, 1, 1, 0, 0, 1, 1, 1};
    const std::vector<Depot> clustered{{0, 0, 1}, {1, 1, 1}};
    const auto p = partition_regions(g, w, clustered, 2, 5);
    for (int r = 0; r < 2; ++r)
        CHECK(p.region_depots[r].size() == 1);

    const std::vector<Depot> two{{0, 0, 1}, {1, 7, 1}};
    CHECK_THROWS_AS(partition_regions(g, w, two, 3, 0), InfeasiblePartition);
    CHECK_THROWS(partition_regions(g, w, two, 0, 0));
}

TEST_CASE("depot file round trip")
{
    const Grid g(5, 5);
    const std::vector<Depot> depots{{0, g.cell_id(1, 2), 2}, {1, g.cell_id(4, 4), 1}};
    const auto path = std::filesystem::temp_directory_path() / "hierplan_test_depots.csv";
    write_depot_file(path, g, depots);
    const auto back = read_depot_file(path, g);
    REQUIRE(back.size() == 2);
    CHECK(back[0].cell == depots[0].cell);
    CHECK(back[0].capacity == 2);
    CHECK(back[1].cell == depots[1].cell);
    std::filesystem::remove(path);
}
