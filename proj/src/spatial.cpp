#include "hierplan/spatial.hpp"

#include <algorithm>
#include <numeric>

#include <Eigen/Dense>

#include "hierplan/csv.hpp"

namespace hierplan {

double TravelModel::travel_seconds(const Position& from, const Position& to) const
{
    return (to - from).norm() * 3600.0 / speed_mph;
}

Millis TravelModel::travel_millis(const Position& from, const Position& to) const
{
    const double ms = (to - from).norm() * static_cast<double>(kMillisPerHour) / speed_mph;
    // Absorb representation error so exact distances (2 mi at 30 mph) land on whole milliseconds.
    return static_cast<Millis>(std::ceil(ms - 1e-6));
}

Grid::Grid(int width, int height, double cell_size) : width_(width), height_(height), cell_size_(cell_size)
{
    if (width <= 0 || height <= 0)
        throw ConfigError("grid dimensions must be positive");
    if (!(cell_size > 0))
        throw ConfigError("cell_size must be positive");
    cells_.reserve(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (int gy = 0; gy < height; ++gy)
        for (int gx = 0; gx < width; ++gx)
            cells_.push_back(Cell{static_cast<CellId>(cells_.size()), gx, gy,
                                  Position((gx + 0.5) * cell_size, (gy + 0.5) * cell_size)});
}

CellId Grid::cell_id(int gx, int gy) const
{
    if (!contains(gx, gy))
        throw std::out_of_range("cell (" + std::to_string(gx) + "," + std::to_string(gy) + ") outside grid");
    return gy * width_ + gx;
}

int World::total_capacity() const
{
    int total = 0;
    for (const auto& d : depots)
        total += d.capacity;
    return total;
}

std::vector<CellId> RegionPartition::cells_of(RegionId r) const
{
    std::vector<CellId> out;
    for (std::size_t c = 0; c < cell_region.size(); ++c)
        if (cell_region[c] == r)
            out.push_back(static_cast<CellId>(c));
    return out;
}

int RegionPartition::capacity(RegionId r, std::span<const Depot> depots) const
{
    int total = 0;
    for (DepotId d : region_depots.at(static_cast<std::size_t>(r)))
        total += depots[static_cast<std::size_t>(d)].capacity;
    return total;
}

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 2>;

RegionId nearest_center(const Points& centers, const Eigen::RowVector2d& p)
{
    RegionId best = 0;
    double best_d = (centers.row(0) - p).squaredNorm();
    for (Eigen::Index r = 1; r < centers.rows(); ++r) {
        const double d = (centers.row(r) - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<RegionId>(r);
        }
    }
    return best;
}

// k-means++ seeding; falls back to the farthest point once every weighted cell coincides with a center.
Points seed_centers(const Points& pts, const Eigen::VectorXd& w, int k, Rng& rng)
{
    const Eigen::Index n = pts.rows();
    Points centers(k, 2);
    Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());

    auto sample = [&](const Eigen::VectorXd& mass) -> Eigen::Index {
        const double total = mass.sum();
        if (!(total > 0)) {
            Eigen::Index far = 0;
            d2.maxCoeff(&far);
            return far;
        }
        double target = rng.uniform() * total;
        for (Eigen::Index i = 0; i < n; ++i) {
            target -= mass[i];
            if (target < 0 && mass[i] > 0)
                return i;
        }
        Eigen::Index last = n - 1;
        while (last > 0 && !(mass[last] > 0))
            --last;
        return last;
    };

    for (int c = 0; c < k; ++c) {
        const Eigen::Index pick = c == 0 ? sample(w) : sample(w.cwiseProduct(d2));
        centers.row(c) = pts.row(pick);
        for (Eigen::Index i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], (pts.row(i) - centers.row(c)).squaredNorm());
    }
    return centers;
}

} // namespace

RegionPartition partition_regions(const Grid& grid, std::span<const double> weights, std::span<const Depot> depots,
                                  int k, std::uint64_t seed)
{
    const auto n = static_cast<Eigen::Index>(grid.size());
    if (k < 1)
        throw std::invalid_argument("partition_regions: k must be >= 1");
    if (static_cast<Eigen::Index>(weights.size()) != n)
        throw std::invalid_argument("partition_regions: one weight per cell required");
    if (static_cast<std::size_t>(k) > depots.size())
        throw InfeasiblePartition("partition_regions: k=" + std::to_string(k) + " exceeds depot count " +
                                  std::to_string(depots.size()));

    Points pts(n, 2);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        pts.row(i) = grid.centroid(static_cast<CellId>(i)).transpose();
        if (!(weights[static_cast<std::size_t>(i)] >= 0))
            throw std::invalid_argument("partition_regions: weights must be non-negative");
        w[i] = weights[static_cast<std::size_t>(i)];
    }
    if (!(w.sum() > 0))
        throw std::invalid_argument("partition_regions: total weight must be positive");

    Rng rng(seed);
    Points centers = seed_centers(pts, w, k, rng);
    std::vector<RegionId> assign(static_cast<std::size_t>(n), kNone);

    for (int iter = 0; iter < 300; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const RegionId r = nearest_center(centers, pts.row(i));
            if (assign[static_cast<std::size_t>(i)] != r) {
                assign[static_cast<std::size_t>(i)] = r;
                changed = true;
            }
        }
        if (!changed)
            break;
        Points sums = Points::Zero(k, 2);
        Eigen::VectorXd mass = Eigen::VectorXd::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto r = assign[static_cast<std::size_t>(i)];
            sums.row(r) += w[i] * pts.row(i);
            mass[r] += w[i];
        }
        for (int r = 0; r < k; ++r)
            if (mass[r] > 0)
                centers.row(r) = sums.row(r) / mass[r];
    }

    RegionPartition out;
    out.k = k;
    out.cell_region = assign;
    out.region_center.resize(static_cast<std::size_t>(k));
    for (int r = 0; r < k; ++r)
        out.region_center[static_cast<std::size_t>(r)] = centers.row(r).transpose();

    auto rebuild_depots = [&] {
        out.depot_region.assign(depots.size(), kNone);
        out.region_depots.assign(static_cast<std::size_t>(k), {});
        for (const auto& d : depots) {
            const RegionId r = out.cell_region[static_cast<std::size_t>(d.cell)];
            out.depot_region[static_cast<std::size_t>(d.id)] = r;
            out.region_depots[static_cast<std::size_t>(r)].push_back(d.id);
        }
        for (auto& v : out.region_depots)
            std::sort(v.begin(), v.end());
    };
    rebuild_depots();

    // Repair depot-less regions by pulling in the nearest depot cell whose removal leaves its donor non-empty.
    for (RegionId r = 0; r < k; ++r) {
        if (!out.region_depots[static_cast<std::size_t>(r)].empty())
            continue;
        DepotId best = kNone;
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& d : depots) {
            const RegionId donor = out.depot_region[static_cast<std::size_t>(d.id)];
            const auto& donor_depots = out.region_depots[static_cast<std::size_t>(donor)];
            const auto same_cell = std::count_if(donor_depots.begin(), donor_depots.end(), [&](DepotId o) {
                return depots[static_cast<std::size_t>(o)].cell == d.cell;
            });
            if (static_cast<std::size_t>(same_cell) >= donor_depots.size())
                continue;
            const double dist = (grid.centroid(d.cell) - out.region_center[static_cast<std::size_t>(r)]).norm();
            if (dist < best_d) {
                best_d = dist;
                best = d.id;
            }
        }
        if (best == kNone)
            throw InfeasiblePartition("partition_regions: region " + std::to_string(r) +
                                      " has no depot and none can be moved into it");
        out.cell_region[static_cast<std::size_t>(depots[static_cast<std::size_t>(best)].cell)] = r;
        rebuild_depots();
    }

    out.region_rate = aggregate_rates(out, weights);
    return out;
}

std::vector<double> aggregate_rates(const RegionPartition& partition, std::span<const double> cell_rates)
{
    std::vector<double> out(static_cast<std::size_t>(partition.k), 0.0);
    for (std::size_t c = 0; c < cell_rates.size(); ++c)
        out[static_cast<std::size_t>(partition.cell_region.at(c))] += cell_rates[c];
    return out;
}

std::vector<Depot> read_depot_file(const std::filesystem::path& path, const Grid& grid)
{
    const auto table = csv::read(path);
    const auto c_id = table.column("depot_id");
    const auto c_gx = table.column("gx");
    const auto c_gy = table.column("gy");
    const auto c_cap = table.column("capacity");
    std::vector<Depot> depots;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string ctx = path.string() + " row " + std::to_string(i + 1);
        Depot d;
        d.id = static_cast<DepotId>(csv::to_int(row[c_id], ctx));
        const auto gx = static_cast<int>(csv::to_int(row[c_gx], ctx));
        const auto gy = static_cast<int>(csv::to_int(row[c_gy], ctx));
        d.capacity = static_cast<int>(csv::to_int(row[c_cap], ctx));
        if (!grid.contains(gx, gy))
            throw ParseError(ctx + ": depot outside grid");
        if (d.capacity < 1)
            throw ParseError(ctx + ": capacity must be >= 1");
        d.cell = grid.cell_id(gx, gy);
        depots.push_back(d);
    }
    std::sort(depots.begin(), depots.end(), [](const Depot& a, const Depot& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < depots.size(); ++i)
        if (depots[i].id != static_cast<DepotId>(i))
            throw ParseError(path.string() + ": depot ids must be 0..n-1 without gaps");
    return depots;
}

void write_depot_file(const std::filesystem::path& path, const Grid& grid, std::span<const Depot> depots)
{
    auto out = csv::open_for_write(path);
    out << "depot_id,gx,gy,capacity\n";
    for (const auto& d : depots) {
        const auto& c = grid.cell(d.cell);
        out << d.id << ',' << c.gx << ',' << c.gy << ',' << d.capacity << '\n';
    }
}

} // namespace hierplan
