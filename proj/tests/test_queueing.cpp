#include <doctest.h>

#include <cmath>

#include "hierplan/queueing.hpp"

using namespace hierplan;

namespace {

// Erlang-B recursion, converted to Erlang-C.
double recursion_wait(double lambda, double mu, int c)
{
    const double a = lambda / mu;
    double b = 1.0;
    for (int k = 1; k <= c; ++k)
        b = a * b / (k + a * b);
    const double pc = c * b / (c - a * (1 - b));
    return pc / (c * mu - lambda);
}

} // namespace

TEST_CASE("empty-system probability")
{
    CHECK(p0({1.0, 1.0, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(p0({0.5, 1.0, 1}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mean wait hand values")
{
    CHECK(mean_wait({2.0, 3.0, 1}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(mean_wait({1.0, 1.0, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(erlang_c({1.0, 1.0, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("mean wait against erlang-b recursion")
{
    for (int c : {1, 2, 3, 5, 8, 20, 25, 60, 150})
        for (double rho : {0.05, 0.3, 0.6, 0.9, 0.99}) {
            const double mu = 3.0;
            const double lambda = rho * c * mu;
            CAPTURE(c);
            CAPTURE(rho);
            CHECK(mean_wait({lambda, mu, c}) == doctest::Approx(recursion_wait(lambda, mu, c)).epsilon(1e-9));
        }
}

TEST_CASE("unstable and degenerate queues")
{
    CHECK_THROWS_AS(mean_wait({3.0, 1.0, 3}), Unstable);
    CHECK_THROWS_AS(mean_wait({4.0, 1.0, 3}), Unstable);
    CHECK(std::isinf(mean_wait_or_inf(4.0, 1.0, 3)));
    CHECK(std::isinf(mean_wait_or_inf(1.0, 1.0, 0)));
    CHECK(mean_wait_or_inf(0.0, 1.0, 0) == 0.0);
    CHECK(mean_wait_or_inf(0.0, 1.0, 2) == 0.0);
    CHECK_THROWS(mean_wait({1.0, 0.0, 1}));
    CHECK_THROWS(mean_wait({1.0, 1.0, 0}));
}

TEST_CASE("queue parameters")
{
    const QueueParams q{3.0, 2.0, 2};
    CHECK(q.offered_load() == doctest::Approx(1.5));
    CHECK(q.utilization() == doctest::Approx(0.75));
    CHECK(q.stable());
    CHECK_FALSE(QueueParams{4.0, 2.0, 2}.stable());
}
