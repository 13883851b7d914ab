#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace hierplan {

/// Simulation time and durations are integer milliseconds.
using Millis = std::int64_t;

constexpr Millis kMillisPerSecond = 1000;
constexpr Millis kMillisPerMinute = 60 * kMillisPerSecond;
constexpr Millis kMillisPerHour = 60 * kMillisPerMinute;

inline double to_seconds(Millis t) { return static_cast<double>(t) / kMillisPerSecond; }
inline double to_hours(Millis t) { return static_cast<double>(t) / kMillisPerHour; }
inline Millis from_seconds(double s) { return static_cast<Millis>(std::llround(s * kMillisPerSecond)); }
inline Millis from_hours(double h) { return static_cast<Millis>(std::llround(h * kMillisPerHour)); }

/// Planar position in miles.
using Position = Eigen::Vector2d;

using CellId = int;
using DepotId = int;
using RegionId = int;
using AgentId = int;
using IncidentId = std::int64_t;

constexpr int kNone = -1;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define HIERPLAN_DEFINE_ERROR(Name)                   \
    class Name : public Error {                       \
    public:                                           \
        using Error::Error;                           \
    }

HIERPLAN_DEFINE_ERROR(InfeasiblePartition);
HIERPLAN_DEFINE_ERROR(EmptyHistory);
HIERPLAN_DEFINE_ERROR(AgentBusy);
HIERPLAN_DEFINE_ERROR(UnknownIncident);
HIERPLAN_DEFINE_ERROR(DepotFull);
HIERPLAN_DEFINE_ERROR(UnknownRegion);
HIERPLAN_DEFINE_ERROR(Unstable);
HIERPLAN_DEFINE_ERROR(ChainMismatch);
HIERPLAN_DEFINE_ERROR(ConfigError);
HIERPLAN_DEFINE_ERROR(ParseError);

#undef HIERPLAN_DEFINE_ERROR

/// 64-bit mixer used to derive independent stream seeds from (seed, index) pairs.
inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Seeded generator with portable conversions (std distributions differ across
/// standard libraries, so byte-identical outputs need our own).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n)
    {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

private:
    std::mt19937_64 engine_;
};

} // namespace hierplan
