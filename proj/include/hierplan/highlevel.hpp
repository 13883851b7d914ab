#pragma once

#include <span>
#include <vector>

#include "hierplan/common.hpp"

namespace hierplan {

struct AllocationVector {
    std::vector<int> x;               // agents per region
    std::vector<bool> unstable;       // demand but utilization >= 1 (or no agents)
    bool starved = false;             // any region unstable

    int total() const;
};

struct AllocateOptions {
    /// Per-region agent limit (depot slots); empty means unlimited.
    std::span<const int> capacity = {};
};

/// Greedy inter-region allocator: regions in decreasing rate order receive agents until
/// eta * x >= rate, then each surplus agent goes to the region with the largest drop in
/// M/M/c mean wait. Budget is met exactly unless every region is at capacity.
AllocationVector allocate(std::span<const double> region_rates, int total_agents, double service_rate_eta = 3.0,
                          const AllocateOptions& options = {});

/// Objective of the allocation program: sum of per-region mean waits (hours).
double total_wait(std::span<const double> region_rates, std::span<const int> x, double service_rate_eta);

} // namespace hierplan
