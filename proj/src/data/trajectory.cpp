#include "condflow/data/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>

#include "condflow/errors.hpp"

namespace condflow::data {

// ---------------------------------------------------------------- batch

void TrajectoryBatch::validate() const {
    if (past_len == 0) throw InputError("trajectory batch: empty past");
    if (future_len == 0) throw InputError("trajectory batch: empty future");
    const std::size_t b = size();
    if (past.size() != b * past_len * 2 || future.size() != b * future_len * 2)
        throw InputError("trajectory batch: past/future sizes disagree");
    if (grid_features > 0 && grid.size() != b * grid_width())
        throw InputError("trajectory batch: grid size does not match 13x3xF per case");
    if (!modes.empty() && modes.size() != b) throw InputError("trajectory batch: mode labels do not match cases");
    for (const auto* v : {&past, &future, &grid})
        for (double x : *v)
            if (!std::isfinite(x)) throw InputError("trajectory batch: non-finite coordinate");
}

TrajectoryBatch TrajectoryBatch::select(const std::vector<std::size_t>& idx) const {
    TrajectoryBatch out;
    out.past_len = past_len;
    out.future_len = future_len;
    out.grid_features = grid_features;
    const std::size_t pw = past_len * 2, fw = future_len * 2, gw = grid_width();
    for (std::size_t i : idx) {
        if (i >= size()) throw InputError("trajectory batch: case index out of range");
        out.past.insert(out.past.end(), past.begin() + i * pw, past.begin() + (i + 1) * pw);
        out.future.insert(out.future.end(), future.begin() + i * fw, future.begin() + (i + 1) * fw);
        if (gw > 0) out.grid.insert(out.grid.end(), grid.begin() + i * gw, grid.begin() + (i + 1) * gw);
        if (!modes.empty()) out.modes.push_back(modes[i]);
    }
    return out;
}

TrajectoryBatch TrajectoryBatch::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size()) throw InputError("trajectory batch: slice out of range");
    std::vector<std::size_t> idx(end - begin);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
    return select(idx);
}

void TrajectoryBatch::append(const TrajectoryBatch& other) {
    if (size() == 0 && past.empty()) {
        *this = other;
        return;
    }
    if (other.past_len != past_len || other.future_len != future_len || other.grid_features != grid_features)
        throw InputError("trajectory batch: cannot append batches of different shape");
    if (modes.empty() != other.modes.empty()) {
        modes.resize(size(), -1);
        std::vector<int> extra = other.modes;
        extra.resize(other.size(), -1);
        past.insert(past.end(), other.past.begin(), other.past.end());
        future.insert(future.end(), other.future.begin(), other.future.end());
        grid.insert(grid.end(), other.grid.begin(), other.grid.end());
        modes.insert(modes.end(), extra.begin(), extra.end());
        return;
    }
    past.insert(past.end(), other.past.begin(), other.past.end());
    future.insert(future.end(), other.future.begin(), other.future.end());
    grid.insert(grid.end(), other.grid.begin(), other.grid.end());
    modes.insert(modes.end(), other.modes.begin(), other.modes.end());
}

// ---------------------------------------------------------------- normalisation

NormStats compute_norm(const TrajectoryBatch& batch) {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (const auto* v : {&batch.past, &batch.future})
        for (std::size_t i = 0; i + 1 < v->size(); i += 2) {
            sx += (*v)[i];
            sy += (*v)[i + 1];
            ++n;
        }
    if (n == 0) throw InputError("compute_norm: empty batch");
    NormStats s;
    s.mean_x = sx / static_cast<double>(n);
    s.mean_y = sy / static_cast<double>(n);
    double ss = 0.0;
    for (const auto* v : {&batch.past, &batch.future})
        for (std::size_t i = 0; i + 1 < v->size(); i += 2) {
            const double dx = (*v)[i] - s.mean_x, dy = (*v)[i + 1] - s.mean_y;
            ss += dx * dx + dy * dy;
        }
    const double var = ss / static_cast<double>(2 * n);
    s.scale = var > 0.0 ? std::sqrt(var) : 1.0;
    return s;
}

namespace {

void map_points(TrajectoryBatch& batch, double ox, double oy, double mul, double addx, double addy) {
    for (auto* v : {&batch.past, &batch.future})
        for (std::size_t i = 0; i + 1 < v->size(); i += 2) {
            (*v)[i] = ((*v)[i] - ox) * mul + addx;
            (*v)[i + 1] = ((*v)[i + 1] - oy) * mul + addy;
        }
}

}  // namespace

void normalize(TrajectoryBatch& batch, const NormStats& s) {
    if (!(s.scale > 0.0)) throw InputError("normalize: scale must be positive");
    map_points(batch, s.mean_x, s.mean_y, 1.0 / s.scale, 0.0, 0.0);
}

void denormalize(TrajectoryBatch& batch, const NormStats& s) {
    map_points(batch, 0.0, 0.0, s.scale, s.mean_x, s.mean_y);
}

// ---------------------------------------------------------------- strokes

TrajectoryBatch gen_strokes(const StrokeSpec& spec, std::size_t n, nn::Rng& rng) {
    if (spec.past_len == 0 || spec.future_len == 0) throw InputError("gen_strokes: empty past or future");
    if (spec.modes.empty()) throw InputError("gen_strokes: no modes");
    double total = 0.0;
    std::vector<double> weights;
    for (const auto& m : spec.modes) {
        if (m.probability < 0.0) throw InputError("gen_strokes: negative mode probability");
        total += m.probability;
        weights.push_back(m.probability);
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("gen_strokes: mode probabilities must sum to 1");

    std::discrete_distribution<int> pick(weights.begin(), weights.end());
    std::normal_distribution<double> unit(0.0, 1.0);
    TrajectoryBatch b;
    b.past_len = spec.past_len;
    b.future_len = spec.future_len;
    b.past.reserve(n * spec.past_len * 2);
    b.future.reserve(n * spec.future_len * 2);
    for (std::size_t c = 0; c < n; ++c) {
        const int mode = pick(rng);
        const StrokeMode& m = spec.modes[static_cast<std::size_t>(mode)];
        const double curvature = m.curvature + spec.curvature_jitter * unit(rng);
        for (std::size_t i = 0; i < spec.past_len; ++i) {
            b.past.push_back(spec.origin_x + spec.step * static_cast<double>(i) + spec.noise * unit(rng));
            b.past.push_back(spec.origin_y + spec.noise * unit(rng));
        }
        double x = spec.origin_x + spec.step * static_cast<double>(spec.past_len - 1);
        double y = spec.origin_y;
        for (std::size_t j = 0; j < spec.future_len; ++j) {
            const double heading = m.direction + curvature * static_cast<double>(j);
            x += spec.step * std::cos(heading);
            y += spec.step * std::sin(heading);
            b.future.push_back(x + spec.noise * unit(rng));
            b.future.push_back(y + spec.noise * unit(rng));
        }
        b.modes.push_back(mode);
    }
    return b;
}

// ---------------------------------------------------------------- highway

std::vector<double> rasterize_neighbours(const std::vector<Neighbour>& neighbours, const HighwaySpec& spec) {
    const std::size_t f = spec.grid_features;
    std::vector<double> g(kGridLong * kGridLanes * f, 0.0);
    for (const auto& nb : neighbours) {
        const double pos = nb.dx / spec.cell_length + 6.5;
        const double row = std::floor(pos);
        if (row < 0.0 || row >= static_cast<double>(kGridLong) || nb.lane < -1 || nb.lane > 1) continue;
        double* cell = g.data() + (static_cast<std::size_t>(row) * kGridLanes + static_cast<std::size_t>(nb.lane + 1)) * f;
        cell[0] += 1.0;
        if (f > 1) cell[1] = pos - row - 0.5;
        if (f > 2) cell[2] = nb.rel_speed;
    }
    return g;
}

TrajectoryBatch gen_highway(const HighwaySpec& spec, std::size_t n, nn::Rng& rng,
                            std::vector<std::vector<Neighbour>>* neighbours) {
    if (spec.past_len == 0 || spec.future_len == 0) throw InputError("gen_highway: empty past or future");
    if (spec.p_major < 0.0 || spec.p_major > 1.0) throw InputError("gen_highway: p_major must be in [0, 1]");
    if (spec.grid_features < 1) throw InputError("gen_highway: grid needs at least the occupancy feature");
    constexpr std::size_t cells = kGridLong * kGridLanes;
    constexpr std::size_t ego_cell = (kGridLong / 2) * kGridLanes + kGridLanes / 2;
    if (spec.max_neighbors > cells - 1) throw InputError("gen_highway: more neighbours than grid cells");

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> count(0, spec.max_neighbors);
    const std::size_t f = spec.grid_features;
    if (neighbours) neighbours->clear();

    TrajectoryBatch b;
    b.past_len = spec.past_len;
    b.future_len = spec.future_len;
    b.grid_features = f;
    b.grid.assign(n * cells * f, 0.0);
    std::vector<std::size_t> free_cells;
    for (std::size_t c = 0; c < n; ++c) {
        const double v = spec.speed * std::max(0.1, 1.0 + spec.speed_jitter * unit(rng));
        HighwayMode mode = HighwayMode::straight;
        if (u01(rng) >= spec.p_major) mode = u01(rng) < 0.5 ? HighwayMode::left : HighwayMode::right;
        const double side = mode == HighwayMode::left ? 1.0 : mode == HighwayMode::right ? -1.0 : 0.0;

        for (std::size_t i = 0; i < spec.past_len; ++i) {
            b.past.push_back(v * static_cast<double>(i) + spec.noise * unit(rng));
            b.past.push_back(spec.noise * unit(rng));
        }
        const double x0 = v * static_cast<double>(spec.past_len - 1);
        for (std::size_t j = 1; j <= spec.future_len; ++j) {
            const double s = static_cast<double>(j) / static_cast<double>(spec.future_len);
            const double lateral = side * spec.lane_width * 0.5 * (1.0 - std::cos(std::numbers::pi * s));
            b.future.push_back(x0 + v * static_cast<double>(j) + spec.noise * unit(rng));
            b.future.push_back(lateral + spec.noise * unit(rng));
        }
        b.modes.push_back(static_cast<int>(mode));

        free_cells.clear();
        for (std::size_t k = 0; k < cells; ++k)
            if (k != ego_cell) free_cells.push_back(k);
        const std::size_t count_here = count(rng);
        std::vector<Neighbour> near;
        for (std::size_t k = 0; k < count_here; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, free_cells.size() - 1);
            std::swap(free_cells[k], free_cells[pick(rng)]);
            const std::size_t cell = free_cells[k];
            const double along = static_cast<double>(cell / kGridLanes) - 6.0 + u01(rng) - 0.5;
            near.push_back({along * spec.cell_length, static_cast<int>(cell % kGridLanes) - 1,
                            spec.speed_jitter * unit(rng)});
        }
        const auto g = rasterize_neighbours(near, spec);
        std::copy(g.begin(), g.end(), b.grid.begin() + static_cast<std::ptrdiff_t>(c * cells * f));
        if (neighbours) neighbours->push_back(std::move(near));
    }
    return b;
}

HighwayMode classify_lateral(double final_lateral, double lane_width) {
    if (final_lateral > 0.5 * lane_width) return HighwayMode::left;
    if (final_lateral < -0.5 * lane_width) return HighwayMode::right;
    return HighwayMode::straight;
}

// ---------------------------------------------------------------- csv

namespace {

struct CsvRow {
    long long frame;
    double x, y;
    std::size_t line;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t line, const char* what) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw FormatError("line " + std::to_string(line) + ": invalid " + what + " '" + s + "'");
    return v;
}

}  // namespace

TrajectoryBatch read_csv(std::istream& in, const WindowSpec& window) {
    if (window.past_len == 0 || window.future_len == 0) throw InputError("read_csv: empty past or future window");
    if (window.stride == 0) throw InputError("read_csv: stride must be positive");
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<CsvRow>> tracks;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cols = split(line);
        if (!header) {
            if (cols != std::vector<std::string>{"track_id", "frame", "x", "y"})
                throw FormatError("line " + std::to_string(lineno) + ": expected header track_id,frame,x,y");
            header = true;
            continue;
        }
        if (cols.size() != 4)
            throw FormatError("line " + std::to_string(lineno) + ": expected 4 columns, got " +
                              std::to_string(cols.size()));
        if (cols[0].empty()) throw FormatError("line " + std::to_string(lineno) + ": empty track_id");
        CsvRow row{parse_number<long long>(cols[1], lineno, "frame"), parse_number<double>(cols[2], lineno, "x"),
                   parse_number<double>(cols[3], lineno, "y"), lineno};
        if (!std::isfinite(row.x) || !std::isfinite(row.y))
            throw FormatError("line " + std::to_string(lineno) + ": non-finite coordinate");
        auto [it, inserted] = tracks.try_emplace(cols[0]);
        if (inserted) order.push_back(cols[0]);
        it->second.push_back(row);
    }
    if (!header) throw FormatError("line 1: missing header track_id,frame,x,y");

    TrajectoryBatch b;
    b.past_len = window.past_len;
    b.future_len = window.future_len;
    const std::size_t w = window.past_len + window.future_len;
    for (const auto& id : order) {
        auto& rows = tracks[id];
        std::stable_sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& c) { return a.frame < c.frame; });
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const CsvRow& later = rows[i].line > rows[i - 1].line ? rows[i] : rows[i - 1];
            if (rows[i].frame == rows[i - 1].frame)
                throw FormatError("line " + std::to_string(later.line) + ": duplicate frame " +
                                  std::to_string(rows[i].frame) + " in track " + id);
            if (i >= 2 && rows[i].frame - rows[i - 1].frame != rows[1].frame - rows[0].frame)
                throw FormatError("line " + std::to_string(rows[i].line) + ": ragged frame step in track " + id);
        }
        if (rows.size() < w) continue;
        for (std::size_t start = 0; start + w <= rows.size(); start += window.stride) {
            for (std::size_t k = 0; k < w; ++k) {
                auto& dst = k < window.past_len ? b.past : b.future;
                dst.push_back(rows[start + k].x);
                dst.push_back(rows[start + k].y);
            }
            b.modes.push_back(-1);
        }
    }
    return b;
}

TrajectoryBatch load_csv(const std::string& path, const WindowSpec& window) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_csv(in, window);
}

void write_csv(std::ostream& out, const TrajectoryBatch& batch) {
    out << "track_id,frame,x,y\n";
    char buf[96];
    for (std::size_t c = 0; c < batch.size(); ++c) {
        std::size_t frame = 0;
        auto emit = [&](const std::vector<double>& v, std::size_t len) {
            for (std::size_t i = 0; i < len; ++i) {
                const double* p = v.data() + (c * len + i) * 2;
                std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", c, frame++, p[0], p[1]);
                out << buf;
            }
        };
        emit(batch.past, batch.past_len);
        emit(batch.future, batch.future_len);
    }
}

void save_csv(const std::string& path, const TrajectoryBatch& batch) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    write_csv(out, batch);
    if (!out) throw InputError("failed writing '" + path + "'");
}

}  // namespace condflow::data
