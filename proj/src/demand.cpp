#include "hierplan/demand.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "hierplan/csv.hpp"

namespace hierplan {

double DemandModel::rate_at(CellId cell, Millis t) const
{
    double rate = rates.at(static_cast<std::size_t>(cell));
    for (const auto& s : spikes)
        if (t >= s.start && t < s.end && std::find(s.cells.begin(), s.cells.end(), cell) != s.cells.end())
            rate *= s.multiplier;
    return rate;
}

std::vector<double> DemandModel::rates_at(Millis t) const
{
    std::vector<double> out = rates;
    for (const auto& s : spikes)
        if (t >= s.start && t < s.end)
            for (CellId c : s.cells)
                out.at(static_cast<std::size_t>(c)) *= s.multiplier;
    return out;
}

void DemandModel::validate() const
{
    for (double r : rates)
        if (!(r >= 0) || !std::isfinite(r))
            throw ConfigError("demand rates must be finite and non-negative");
    for (const auto& s : spikes) {
        if (!(s.start < s.end))
            throw ConfigError("spike window requires start < end");
        if (!(s.multiplier >= 1))
            throw ConfigError("spike multiplier must be >= 1");
        for (CellId c : s.cells)
            if (c < 0 || static_cast<std::size_t>(c) >= rates.size())
                throw ConfigError("spike window targets unknown cell " + std::to_string(c));
    }
}

Millis ServiceTimeLaw::sample(Rng& rng) const
{
    if (kind == Kind::deterministic)
        return mean;
    const auto d = static_cast<Millis>(std::llround(rng.exponential(1.0) * static_cast<double>(mean)));
    return std::max<Millis>(d, 1);
}

DemandModel fit_rates(std::span<const HistoryRecord> history, int num_cells, double horizon_hours)
{
    if (!(horizon_hours > 0))
        throw std::invalid_argument("fit_rates: horizon_hours must be positive");
    if (history.empty())
        throw EmptyHistory("fit_rates: no history records");
    DemandModel model;
    model.rates.assign(static_cast<std::size_t>(num_cells), 0.0);
    std::vector<long long> counts(static_cast<std::size_t>(num_cells), 0);
    for (const auto& rec : history)
        ++counts.at(static_cast<std::size_t>(rec.cell));
    for (std::size_t c = 0; c < counts.size(); ++c)
        model.rates[c] = static_cast<double>(counts[c]) / horizon_hours;
    return model;
}

namespace {

struct Draft {
    Millis time;
    CellId cell;
    std::size_t order;
    Millis service;
};

void sample_cell(const DemandModel& model, CellId cell, Millis start, Millis end, std::uint64_t seed,
                 const ServiceTimeLaw& service, std::vector<Draft>& out)
{
    const double base = model.rates[static_cast<std::size_t>(cell)];
    if (!(base > 0))
        return;

    std::vector<Millis> cuts{start, end};
    for (const auto& s : model.spikes) {
        if (std::find(s.cells.begin(), s.cells.end(), cell) == s.cells.end())
            continue;
        for (Millis t : {s.start, s.end})
            if (t > start && t < end)
                cuts.push_back(t);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cell)));
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double per_ms = model.rate_at(cell, cuts[s]) / static_cast<double>(kMillisPerHour);
        double t = static_cast<double>(cuts[s]);
        const auto seg_end = static_cast<double>(cuts[s + 1]);
        while (true) {
            t += rng.exponential(per_ms);
            if (t >= seg_end)
                break;
            out.push_back(Draft{static_cast<Millis>(std::floor(t)), cell, out.size(), service.sample(rng)});
        }
    }
}

} // namespace

IncidentChain sample_chain(const DemandModel& model, Millis start, Millis end, std::uint64_t seed,
                           const ServiceTimeLaw& service, std::span<const std::uint8_t> cell_mask)
{
    if (!(end > start))
        throw std::invalid_argument("sample_chain: horizon must be positive");
    std::vector<Draft> drafts;
    for (std::size_t c = 0; c < model.rates.size(); ++c) {
        if (!cell_mask.empty() && !cell_mask[c])
            continue;
        sample_cell(model, static_cast<CellId>(c), start, end, seed, service, drafts);
    }
    std::sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) {
        if (a.time != b.time)
            return a.time < b.time;
        if (a.cell != b.cell)
            return a.cell < b.cell;
        return a.order < b.order;
    });

    IncidentChain chain;
    chain.horizon = end;
    chain.incidents.reserve(drafts.size());
    Millis prev = std::numeric_limits<Millis>::min();
    for (const auto& d : drafts) {
        const Millis t = d.time <= prev ? prev + 1 : d.time;
        chain.incidents.push_back(
            Incident{static_cast<IncidentId>(chain.incidents.size()), d.cell, t, d.service});
        prev = t;
    }
    return chain;
}

double parse_iso8601(const std::string& text)
{
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0;
    char sep = 0;
    int consumed = 0;
    const int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
    if (n < 6 || (sep != 'T' && sep != ' '))
        throw ParseError("bad ISO-8601 timestamp '" + text + "'");
    std::string rest = text.substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest.front() == ':') {
        std::size_t used = 0;
        try {
            sec = std::stod(rest.substr(1), &used);
        } catch (const std::logic_error&) {
            throw ParseError("bad ISO-8601 seconds in '" + text + "'");
        }
        rest = rest.substr(1 + used);
    }
    if (!(rest.empty() || rest == "Z"))
        throw ParseError("unsupported ISO-8601 suffix in '" + text + "' (only UTC 'Z' is accepted)");
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec >= 61)
        throw ParseError("invalid date/time '" + text + "'");
    const auto days = sys_days(ymd).time_since_epoch().count();
    return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
}

std::vector<HistoryRecord> read_history_file(const std::filesystem::path& path, const Grid& grid, double* span_hours)
{
    const auto table = csv::read(path);
    const auto c_ts = table.column("timestamp_iso8601");
    const auto c_gx = table.column("gx");
    const auto c_gy = table.column("gy");
    table.column("incident_id");
    std::vector<double> secs;
    std::vector<CellId> cells;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string ctx = path.string() + " row " + std::to_string(i + 1);
        const auto gx = static_cast<int>(csv::to_int(row[c_gx], ctx));
        const auto gy = static_cast<int>(csv::to_int(row[c_gy], ctx));
        if (!grid.contains(gx, gy))
            throw ParseError(ctx + ": incident outside grid");
        secs.push_back(parse_iso8601(row[c_ts]));
        cells.push_back(grid.cell_id(gx, gy));
    }
    std::vector<HistoryRecord> out;
    if (secs.empty()) {
        if (span_hours)
            *span_hours = 0;
        return out;
    }
    const double first = *std::min_element(secs.begin(), secs.end());
    const double last = *std::max_element(secs.begin(), secs.end());
    for (std::size_t i = 0; i < secs.size(); ++i)
        out.push_back(HistoryRecord{cells[i], from_seconds(secs[i] - first)});
    if (span_hours)
        *span_hours = (last - first) / 3600.0;
    return out;
}

void write_chain_file(const std::filesystem::path& path, const Grid& grid, const IncidentChain& chain)
{
    auto out = csv::open_for_write(path);
    out << "incident_id,report_time_s,gx,gy,service_duration_s\n";
    for (const auto& inc : chain.incidents) {
        const auto& c = grid.cell(inc.cell);
        out << inc.id << ',' << csv::format_double(to_seconds(inc.report_time), 3) << ',' << c.gx << ',' << c.gy
            << ',' << csv::format_double(to_seconds(inc.service_duration), 3) << '\n';
    }
}

IncidentChain read_chain_file(const std::filesystem::path& path, const Grid& grid)
{
    const auto table = csv::read(path);
    const auto c_id = table.column("incident_id");
    const auto c_t = table.column("report_time_s");
    const auto c_gx = table.column("gx");
    const auto c_gy = table.column("gy");
    const auto c_s = table.column("service_duration_s");
    IncidentChain chain;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string ctx = path.string() + " row " + std::to_string(i + 1);
        Incident inc;
        inc.id = csv::to_int(row[c_id], ctx);
        inc.report_time = from_seconds(csv::to_double(row[c_t], ctx));
        const auto gx = static_cast<int>(csv::to_int(row[c_gx], ctx));
        const auto gy = static_cast<int>(csv::to_int(row[c_gy], ctx));
        if (!grid.contains(gx, gy))
            throw ParseError(ctx + ": incident outside grid");
        inc.cell = grid.cell_id(gx, gy);
        inc.service_duration = from_seconds(csv::to_double(row[c_s], ctx));
        if (inc.service_duration <= 0 || inc.report_time < 0)
            throw ParseError(ctx + ": times must be non-negative and service positive");
        if (!chain.incidents.empty() && inc.report_time <= chain.incidents.back().report_time)
            throw ParseError(ctx + ": report times must be strictly increasing");
        chain.incidents.push_back(inc);
    }
    chain.horizon = chain.incidents.empty() ? 0 : chain.incidents.back().report_time + 1;
    return chain;
}

std::vector<double> read_rate_file(const std::filesystem::path& path, const Grid& grid)
{
    const auto table = csv::read(path);
    const auto c_gx = table.column("gx");
    const auto c_gy = table.column("gy");
    const auto c_r = table.column("rate_per_hour");
    std::vector<double> rates(static_cast<std::size_t>(grid.size()), 0.0);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string ctx = path.string() + " row " + std::to_string(i + 1);
        const auto gx = static_cast<int>(csv::to_int(row[c_gx], ctx));
        const auto gy = static_cast<int>(csv::to_int(row[c_gy], ctx));
        if (!grid.contains(gx, gy))
            throw ParseError(ctx + ": cell outside grid");
        const double r = csv::to_double(row[c_r], ctx);
        if (!(r >= 0))
            throw ParseError(ctx + ": rate must be non-negative");
        rates[static_cast<std::size_t>(grid.cell_id(gx, gy))] = r;
    }
    return rates;
}

} // namespace hierplan
