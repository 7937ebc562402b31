#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "condflow/io/config.hpp"

namespace condflow::io {

struct RunManifest {
    std::string command;
    std::string status = "ok";  // ok | error
    std::string error;          // "<CODE>: message" when status is error
    RunConfig config;
    std::uint64_t seed = 0;
    std::string checkpoint_path;
    std::string checkpoint_sha1;
    nlohmann::ordered_json dataset = nlohmann::ordered_json::object();
    std::string started_utc;
    double wall_seconds = 0.0;
    std::vector<std::string> outputs;  // metric, trace and grid files
};

nlohmann::ordered_json manifest_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);

std::string utc_timestamp();

}  // namespace condflow::io
