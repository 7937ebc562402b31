#include "condflow/io/manifest.hpp"

#include <chrono>
#include <ctime>

#include "condflow/errors.hpp"
#include "condflow/io/checkpoint.hpp"

namespace condflow::io {

nlohmann::ordered_json manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["status"] = m.status;
    if (!m.error.empty()) j["error"] = m.error;
    j["seed"] = m.seed;
    j["config"] = config_map(m.config);
    j["checkpoint"] = {{"path", m.checkpoint_path}, {"sha1", m.checkpoint_sha1}};
    j["dataset"] = m.dataset;
    j["started_utc"] = m.started_utc;
    j["wall_seconds"] = m.wall_seconds;
    j["outputs"] = m.outputs;
    return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    try {
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.status = j.at("status").get<std::string>();
        m.error = j.value("error", "");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config = config_from_map(j.at("config").get<std::map<std::string, std::string>>());
        m.checkpoint_path = j.at("checkpoint").at("path").get<std::string>();
        m.checkpoint_sha1 = j.at("checkpoint").at("sha1").get<std::string>();
        m.dataset = j.at("dataset");
        m.started_utc = j.at("started_utc").get<std::string>();
        m.wall_seconds = j.at("wall_seconds").get<double>();
        m.outputs = j.at("outputs").get<std::vector<std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
    write_atomic(path, manifest_json(m).dump(2) + "\n");
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace condflow::io
