#pragma once

#include "hierplan/common.hpp"

namespace hierplan {

/// M/M/c parameters: arrivals/hour, completions/hour per server, server count.
struct QueueParams {
    double lambda = 0;
    double mu = 1;
    int c = 1;

    double offered_load() const { return lambda / mu; }
    double utilization() const { return lambda / (c * mu); }
    bool stable() const { return utilization() < 1; }
};

/// Probability of an empty system. Throws Unstable when utilization >= 1.
double p0(const QueueParams& q);

/// Erlang-C probability that an arrival has to queue.
double erlang_c(const QueueParams& q);

/// Mean time in queue (hours) before service starts. Throws Unstable when utilization >= 1.
double mean_wait(const QueueParams& q);

/// As mean_wait, but +inf for unstable queues (including c == 0 with demand); 0 without demand.
double mean_wait_or_inf(double lambda, double mu, int c);

} // namespace hierplan
