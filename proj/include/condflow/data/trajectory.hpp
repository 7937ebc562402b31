#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "condflow/nn/layers.hpp"

namespace condflow::data {

// Social grid: 13 longitudinal cells x 3 lanes, F features per cell,
// flattened as (longitudinal, lane, feature).
inline constexpr std::size_t kGridLong = 13;
inline constexpr std::size_t kGridLanes = 3;

// Past and future 2-D sequences for B cases, stored flat:
// past is B x past_len x 2, future is B x future_len x 2.
struct TrajectoryBatch {
    std::size_t past_len = 0;
    std::size_t future_len = 0;
    std::size_t grid_features = 0;  // 0 => no neighbour grid
    std::vector<double> past;
    std::vector<double> future;
    std::vector<double> grid;  // B x 13 x 3 x F when grid_features > 0
    std::vector<int> modes;    // generator mode per case, -1 when unknown

    std::size_t size() const { return past_len == 0 ? 0 : past.size() / (past_len * 2); }
    std::size_t grid_width() const { return kGridLong * kGridLanes * grid_features; }

    // InputError on empty past or future, inconsistent sizes or non-finite data.
    void validate() const;
    // Cases [begin, end).
    TrajectoryBatch slice(std::size_t begin, std::size_t end) const;
    // Cases at the given indices, in order.
    TrajectoryBatch select(const std::vector<std::size_t>& idx) const;
    void append(const TrajectoryBatch& other);
};

// Isotropic normalisation: p' = (p - mean) / scale with one scale for both axes
// so headings and angles survive.
struct NormStats {
    double mean_x = 0.0;
    double mean_y = 0.0;
    double scale = 1.0;
};

// Mean and pooled standard deviation over every past and future point.
NormStats compute_norm(const TrajectoryBatch& batch);
void normalize(TrajectoryBatch& batch, const NormStats& stats);
void denormalize(TrajectoryBatch& batch, const NormStats& stats);

struct StrokeMode {
    double direction = 0.0;  // initial heading of the continuation, radians
    double curvature = 0.0;  // heading change per step, radians
    double probability = 1.0;
};

struct StrokeSpec {
    std::size_t past_len = 8;
    std::size_t future_len = 12;
    double step = 1.0;
    std::vector<StrokeMode> modes{{0.9, 0.0, 0.4}, {0.0, 0.0, 0.35}, {-0.9, 0.0, 0.25}};
    double noise = 0.05;             // per-coordinate Gaussian noise
    double curvature_jitter = 0.0;   // per-case curvature noise within a mode
    double origin_x = 0.0;
    double origin_y = 0.0;
};

// Shared straight prefix from the origin along +x, then the continuation of
// a randomly drawn mode. modes[] records the mode index.
TrajectoryBatch gen_strokes(const StrokeSpec& spec, std::size_t n, nn::Rng& rng);

enum class HighwayMode : int { straight = 0, left = 1, right = 2 };

struct HighwaySpec {
    std::size_t past_len = 8;
    std::size_t future_len = 12;
    double speed = 1.0;          // distance per step
    double speed_jitter = 0.1;   // relative
    double lane_width = 1.0;
    double p_major = 0.9;        // probability of keeping the lane
    double noise = 0.02;
    std::size_t max_neighbors = 6;
    double cell_length = 2.0;
    std::size_t grid_features = 3;  // occupancy, offset in cell, relative speed
};

struct Neighbour {
    double dx = 0.0;  // longitudinal offset from the ego vehicle
    int lane = 0;     // -1 right, 0 ego lane, +1 left
    double rel_speed = 0.0;
};

// 13 x 3 x F grid centred on the ego vehicle. Cell (i, j) covers
// dx in [(i - 6.5) L, (i - 5.5) L) of lane j - 1; occupancy accumulates,
// the remaining features hold the in-cell offset and relative speed.
// Neighbours outside the grid are dropped.
std::vector<double> rasterize_neighbours(const std::vector<Neighbour>& neighbours, const HighwaySpec& spec);

// Ego vehicle in the middle lane moving along +x. With probability p_major it
// keeps its lane, otherwise it changes lane left or right with a smooth
// lateral profile completing at the horizon. Neighbours are drawn into
// distinct grid cells; feature 0 of each cell is its occupancy.
// When `neighbours` is given it receives the per-case neighbour lists.
TrajectoryBatch gen_highway(const HighwaySpec& spec, std::size_t n, nn::Rng& rng,
                            std::vector<std::vector<Neighbour>>* neighbours = nullptr);

// Mode basin of a future given its final lateral displacement from the last
// past point.
HighwayMode classify_lateral(double final_lateral, double lane_width);

struct WindowSpec {
    std::size_t past_len = 8;
    std::size_t future_len = 12;
    std::size_t stride = 1;
};

// CSV with header track_id,frame,x,y. Rows are grouped by track (in order of
// first appearance) and sorted by frame; every track needs a uniform frame
// step. FormatError names the offending line for duplicate or ragged frames
// and malformed rows.
TrajectoryBatch read_csv(std::istream& in, const WindowSpec& window);
TrajectoryBatch load_csv(const std::string& path, const WindowSpec& window);

// One track per case, frames 0..T-1, full precision.
void write_csv(std::ostream& out, const TrajectoryBatch& batch);
void save_csv(const std::string& path, const TrajectoryBatch& batch);

}  // namespace condflow::data
