#include "hierplan/queueing.hpp"

#include <string>

namespace hierplan {

namespace {

void check(const QueueParams& q, const char* what)
{
    if (!(q.lambda >= 0) || !(q.mu > 0) || q.c < 1)
        throw std::invalid_argument(std::string(what) + ": need lambda >= 0, mu > 0, c >= 1");
    if (!q.stable())
        throw Unstable(std::string(what) + ": utilization " + std::to_string(q.utilization()) + " >= 1");
}

// log of a^m / m!; products below c=20 are exact enough, lgamma beyond.
double log_term(double a, int m)
{
    if (m <= 20) {
        double t = 1;
        for (int i = 1; i <= m; ++i)
            t *= a / i;
        return std::log(t);
    }
    return m * std::log(a) - std::lgamma(m + 1.0);
}

// Returns log of the tail term (a^c / (c! (1-rho))) and log of the normalising sum.
std::pair<double, double> log_terms(const QueueParams& q)
{
    const double a = q.offered_load();
    const double rho = q.utilization();
    const double log_tail = log_term(a, q.c) - std::log1p(-rho);
    // log-sum-exp over m = 0..c-1 plus the tail.
    double peak = log_tail;
    for (int m = 0; m < q.c; ++m)
        peak = std::max(peak, log_term(a, m));
    double sum = std::exp(log_tail - peak);
    for (int m = 0; m < q.c; ++m)
        sum += std::exp(log_term(a, m) - peak);
    return {log_tail, peak + std::log(sum)};
}

} // namespace

double p0(const QueueParams& q)
{
    check(q, "p0");
    if (q.lambda == 0)
        return 1.0;
    return std::exp(-log_terms(q).second);
}

double erlang_c(const QueueParams& q)
{
    check(q, "erlang_c");
    if (q.lambda == 0)
        return 0.0;
    const auto [log_tail, log_norm] = log_terms(q);
    return std::exp(log_tail - log_norm);
}

double mean_wait(const QueueParams& q)
{
    check(q, "mean_wait");
    if (q.lambda == 0)
        return 0.0;
    return erlang_c(q) / (q.c * q.mu - q.lambda);
}

double mean_wait_or_inf(double lambda, double mu, int c)
{
    const QueueParams q{lambda, mu, c};
    if (lambda == 0)
        return 0.0;
    if (c < 1 || !q.stable())
        return std::numeric_limits<double>::infinity();
    return mean_wait(q);
}

} // namespace hierplan
