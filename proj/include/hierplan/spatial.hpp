#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hierplan/common.hpp"

namespace hierplan {

struct Cell {
    CellId id = 0;
    int gx = 0;
    int gy = 0;
    Position centroid = Position::Zero();
};

struct Depot {
    DepotId id = 0;
    CellId cell = 0;
    int capacity = 1;
};

/// Straight-line router at constant speed.
struct TravelModel {
    double speed_mph = 30.0;

    double travel_seconds(const Position& from, const Position& to) const;
    /// Rounded up to whole milliseconds so simulated agents never exceed the speed.
    Millis travel_millis(const Position& from, const Position& to) const;
};

/// Rectangular grid of equally sized square cells. Cell ids are row-major.
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, double cell_size = 1.0);

    int width() const { return width_; }
    int height() const { return height_; }
    double cell_size() const { return cell_size_; }
    int size() const { return static_cast<int>(cells_.size()); }

    bool contains(int gx, int gy) const { return gx >= 0 && gy >= 0 && gx < width_ && gy < height_; }
    CellId cell_id(int gx, int gy) const;
    const Cell& cell(CellId id) const { return cells_.at(static_cast<std::size_t>(id)); }
    const Position& centroid(CellId id) const { return cell(id).centroid; }
    std::span<const Cell> cells() const { return cells_; }

private:
    int width_ = 0;
    int height_ = 0;
    double cell_size_ = 1.0;
    std::vector<Cell> cells_;
};

/// Static geography shared read-only by the simulator and planners.
struct World {
    Grid grid;
    std::vector<Depot> depots;
    TravelModel travel;

    const Position& depot_position(DepotId d) const { return grid.centroid(depots.at(static_cast<std::size_t>(d)).cell); }
    int total_capacity() const;
};

struct RegionPartition {
    int k = 0;
    std::vector<RegionId> cell_region;              // indexed by CellId
    std::vector<RegionId> depot_region;             // indexed by DepotId
    std::vector<std::vector<DepotId>> region_depots; // sorted ascending
    std::vector<double> region_rate;                // events/hour
    std::vector<Position> region_center;            // cluster centroid in miles

    std::vector<CellId> cells_of(RegionId r) const;
    int capacity(RegionId r, std::span<const Depot> depots) const;
};

/// Weighted k-means over cell centroids. `weights` are per-cell incident counts
/// or rates; region_rate is their per-region sum.
RegionPartition partition_regions(const Grid& grid, std::span<const double> weights, std::span<const Depot> depots,
                                  int k, std::uint64_t seed);

/// Sums per-cell rates into per-region rates for an existing partition.
std::vector<double> aggregate_rates(const RegionPartition& partition, std::span<const double> cell_rates);

/// Depot table with header `depot_id,gx,gy,capacity`. Ids must be 0..n-1.
std::vector<Depot> read_depot_file(const std::filesystem::path& path, const Grid& grid);
void write_depot_file(const std::filesystem::path& path, const Grid& grid, std::span<const Depot> depots);

} // namespace hierplan
