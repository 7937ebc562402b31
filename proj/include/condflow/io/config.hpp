#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "condflow/model/cfvae.hpp"
#include "condflow/model/train.hpp"

namespace condflow::io {

// Trajectory data, either generated in process from the seed or read from CSV.
struct DataConfig {
    std::string source = "strokes";  // strokes | highway | csv
    std::string train_path;
    std::string test_path;
    std::size_t train_cases = 1024;
    std::size_t test_cases = 256;
    std::size_t past_len = 8;
    std::size_t stride = 1;
    double noise = 0.05;
    double curvature_jitter = 0.0;
    double p_major = 0.9;
    std::size_t max_neighbors = 6;
    bool social = false;  // feed the highway neighbour grid to the model
};

struct EvalConfig {
    std::string baseline;  // empty => evaluate a checkpoint
    std::size_t samples = 50;
    std::size_t cll_samples = 100;  // 0 skips -CLL
    std::vector<std::size_t> horizons{3, 6, 9, 12};
    double top_pct = 0.1;
    double frame_rate = 1.0;
    double theta_max = 90.0;
    std::size_t baseline_k = 50;
};

struct DensityConfig {
    std::string name = "cond_ring2d";
    std::size_t train_size = 4000;
    std::size_t test_size = 2000;
    std::size_t grid_w = 100;
    std::size_t grid_h = 100;
    double extent = 3.5;
    model::DensityFitConfig fit;
};

struct LatentGridConfig {
    std::size_t size = 80;
    double extent = 4.0;
    std::size_t cases = 4;
};

struct RunConfig {
    std::uint64_t seed = 1;
    DataConfig data;
    model::ModelConfig model;
    model::TrainConfig train;
    EvalConfig eval;
    DensityConfig density;
    LatentGridConfig grid;
};

// Sets one key from its text form. ConfigError for unknown keys (listing the
// valid ones) and unparsable values.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_key(const RunConfig& cfg, const std::string& key);
std::vector<std::string> config_keys();

// Flat "key = value" lines; '#' starts a comment; "include = path" splices
// another file relative to the including one. Later assignments win.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
void apply_config_text(RunConfig& cfg, const std::string& text, const std::filesystem::path& base_dir = ".");

// Every key with its current value, one per line, in registry order.
std::string format_config(const RunConfig& cfg);
std::map<std::string, std::string> config_map(const RunConfig& cfg);
RunConfig config_from_map(const std::map<std::string, std::string>& values);

}  // namespace condflow::io
