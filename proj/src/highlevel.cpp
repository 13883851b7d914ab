#include "hierplan/highlevel.hpp"

#include <algorithm>
#include <numeric>

#include "hierplan/queueing.hpp"

namespace hierplan {

int AllocationVector::total() const
{
    return std::accumulate(x.begin(), x.end(), 0);
}

double total_wait(std::span<const double> region_rates, std::span<const int> x, double service_rate_eta)
{
    double sum = 0;
    for (std::size_t i = 0; i < region_rates.size(); ++i)
        sum += mean_wait_or_inf(region_rates[i], service_rate_eta, x[i]);
    return sum;
}

AllocationVector allocate(std::span<const double> region_rates, int total_agents, double eta,
                          const AllocateOptions& options)
{
    const auto k = region_rates.size();
    if (k == 0)
        throw std::invalid_argument("allocate: no regions");
    if (total_agents < 1)
        throw std::invalid_argument("allocate: total_agents must be >= 1");
    if (!(eta > 0))
        throw std::invalid_argument("allocate: service rate must be positive");
    if (!options.capacity.empty() && options.capacity.size() != k)
        throw std::invalid_argument("allocate: capacity must list every region");

    auto cap = [&](std::size_t i) {
        return options.capacity.empty() ? std::numeric_limits<int>::max() : options.capacity[i];
    };

    AllocationVector out;
    out.x.assign(k, 0);
    int assigned = 0;

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return region_rates[a] > region_rates[b]; });

    // Phase 1: cover each region's arrival rate, busiest first.
    for (std::size_t pos = 0; pos < k && assigned < total_agents;) {
        const auto i = order[pos];
        if (out.x[i] >= cap(i)) {
            ++pos;
            continue;
        }
        ++out.x[i];
        ++assigned;
        if (eta * out.x[i] >= region_rates[i])
            ++pos;
    }

    // Phase 2: surplus by largest marginal reduction in mean wait.
    const double inf = std::numeric_limits<double>::infinity();
    while (assigned < total_agents) {
        std::size_t best = k;
        double best_gain = -inf;
        double best_rho = -inf;
        for (std::size_t i = 0; i < k; ++i) {
            if (out.x[i] >= cap(i))
                continue;
            const double now = mean_wait_or_inf(region_rates[i], eta, out.x[i]);
            const double next = mean_wait_or_inf(region_rates[i], eta, out.x[i] + 1);
            const double gain = std::isinf(now) ? inf : now - next;
            const double rho = out.x[i] == 0 ? inf : region_rates[i] / (eta * out.x[i]);
            const bool better = best == k || gain > best_gain || (std::isinf(gain) && std::isinf(best_gain) && rho > best_rho);
            if (better) {
                best = i;
                best_gain = gain;
                best_rho = rho;
            }
        }
        if (best == k)
            break;
        ++out.x[best];
        ++assigned;
    }

    out.unstable.assign(k, false);
    for (std::size_t i = 0; i < k; ++i) {
        out.unstable[i] = std::isinf(mean_wait_or_inf(region_rates[i], eta, out.x[i]));
        if (out.unstable[i])
            out.starved = true;
    }
    return out;
}

} // namespace hierplan
