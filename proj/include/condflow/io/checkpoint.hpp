#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "condflow/data/trajectory.hpp"
#include "condflow/io/config.hpp"
#include "condflow/model/cfvae.hpp"
#include "condflow/model/train.hpp"
#include "condflow/priors/prior.hpp"

namespace condflow::io {

inline constexpr int kCheckpointVersion = 1;

// JSON container shared by trained models and fitted densities. The header
// holds kind, n (flow layers), D, conditioner widths and the prior kind; the
// named parameter arrays follow in registration order.
struct ModelCheckpoint {
    RunConfig config;
    data::NormStats norm;
    model::TrainState state;
    std::unique_ptr<model::CfVae> model;
};

struct DensityCheckpoint {
    RunConfig config;
    priors::PriorConfig prior_config;
    std::vector<double> trace;
    std::unique_ptr<priors::Prior> prior;
};

std::string serialize_model(const model::CfVae& model, const RunConfig& cfg, const data::NormStats& norm,
                            const model::TrainState& state);
ModelCheckpoint deserialize_model(const std::string& text);

std::string serialize_density(const priors::Prior& prior, const RunConfig& cfg, const std::vector<double>& trace);
DensityCheckpoint deserialize_density(const std::string& text);

// Throws FormatError (or InputError when the file is missing).
ModelCheckpoint load_model(const std::filesystem::path& path);
DensityCheckpoint load_density(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_sha1(const std::string& content);

}  // namespace condflow::io
