#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hierplan/common.hpp"
#include "hierplan/spatial.hpp"

namespace hierplan {

/// Rate multiplier applied to `cells` during [start, end).
struct SpikeWindow {
    std::vector<CellId> cells;
    Millis start = 0;
    Millis end = 0;
    double multiplier = 1.0;
};

/// Per-cell Poisson rates (events/hour) plus time-windowed multipliers.
struct DemandModel {
    std::vector<double> rates;
    std::vector<SpikeWindow> spikes;

    /// Effective rate of `cell` at time t; overlapping windows multiply.
    double rate_at(CellId cell, Millis t) const;
    /// Effective per-cell rates at time t.
    std::vector<double> rates_at(Millis t) const;
    void validate() const;
};

struct ServiceTimeLaw {
    enum class Kind { deterministic, exponential };
    Kind kind = Kind::deterministic;
    Millis mean = 20 * kMillisPerMinute;

    Millis sample(Rng& rng) const;
};

struct Incident {
    IncidentId id = 0;
    CellId cell = 0;
    Millis report_time = 0;
    Millis service_duration = 0;
};

/// Time-ordered incident stream with distinct report times.
struct IncidentChain {
    std::vector<Incident> incidents;
    Millis horizon = 0;
};

struct HistoryRecord {
    CellId cell = 0;
    Millis timestamp = 0;
};

/// Empirical-mean Poisson fit: rate = count / horizon_hours, zero for unseen cells.
DemandModel fit_rates(std::span<const HistoryRecord> history, int num_cells, double horizon_hours);

/// Samples every cell's (piecewise-constant) Poisson process on [start, end), merges, and
/// perturbs equal timestamps by +1 ms until unique. Ids are 0..n-1 in time order.
/// An empty `cell_mask` samples every cell; otherwise only cells with a true entry.
IncidentChain sample_chain(const DemandModel& model, Millis start, Millis end, std::uint64_t seed,
                           const ServiceTimeLaw& service = {}, std::span<const std::uint8_t> cell_mask = {});

inline IncidentChain sample_chain(const DemandModel& model, Millis horizon, std::uint64_t seed,
                                  const ServiceTimeLaw& service = {})
{
    return sample_chain(model, 0, horizon, seed, service);
}

/// Parses `incident_id,timestamp_iso8601,gx,gy`; timestamps become milliseconds since the earliest record.
/// `span_hours` receives the covered period (last - first timestamp).
std::vector<HistoryRecord> read_history_file(const std::filesystem::path& path, const Grid& grid,
                                             double* span_hours = nullptr);

/// Seconds since the Unix epoch for `YYYY-MM-DD[T ]HH:MM[:SS[.fff]][Z]`.
double parse_iso8601(const std::string& text);

void write_chain_file(const std::filesystem::path& path, const Grid& grid, const IncidentChain& chain);
IncidentChain read_chain_file(const std::filesystem::path& path, const Grid& grid);

/// Per-cell rate table `gx,gy,rate_per_hour`; unlisted cells get rate 0.
std::vector<double> read_rate_file(const std::filesystem::path& path, const Grid& grid);

} // namespace hierplan
