#include "condflow/io/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "condflow/errors.hpp"

namespace condflow::io {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "condflow-checkpoint";

ordered_json params_json(const nn::ParamSet& params) {
    ordered_json out = ordered_json::array();
    for (const auto& [name, t] : params.items()) {
        out.push_back({{"name", name},
                       {"rows", t.rows()},
                       {"cols", t.cols()},
                       {"data", std::vector<double>(t.data().begin(), t.data().end())}});
    }
    return out;
}

void load_params(const nn::ParamSet& params, const json& arr) {
    const auto& items = params.items();
    if (!arr.is_array() || arr.size() != items.size())
        throw FormatError("checkpoint: expected " + std::to_string(items.size()) + " parameter arrays, found " +
                          std::to_string(arr.is_array() ? arr.size() : 0));
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& [name, tensor] = items[i];
        const json& p = arr[i];
        if (p.at("name").get<std::string>() != name)
            throw FormatError("checkpoint: parameter " + std::to_string(i) + " is '" + p.at("name").get<std::string>() +
                              "', expected '" + name + "'");
        const auto data = p.at("data").get<std::vector<double>>();
        if (p.at("rows").get<std::size_t>() != tensor.rows() || p.at("cols").get<std::size_t>() != tensor.cols() ||
            data.size() != tensor.size())
            throw FormatError("checkpoint: shape mismatch for '" + name + "'");
        ad::Tensor t = tensor;
        std::copy(data.begin(), data.end(), t.mutable_data().begin());
    }
}

ordered_json adam_json(const ad::AdamState& s) {
    return {{"step", s.step}, {"m", s.m}, {"v", s.v}};
}

ad::AdamState adam_from_json(const json& j) {
    ad::AdamState s;
    s.step = j.at("step").get<std::int64_t>();
    s.m = j.at("m").get<std::vector<std::vector<double>>>();
    s.v = j.at("v").get<std::vector<std::vector<double>>>();
    return s;
}

json parse_checkpoint(const std::string& text, const std::string& kind) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: not valid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != kFormat) throw FormatError("checkpoint: missing format tag");
    if (j.value("version", 0) != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + j.value("version", json()).dump());
    if (j.value("kind", "") != kind)
        throw FormatError("checkpoint: expected kind '" + kind + "', found '" + j.value("kind", "") + "'");
    return j;
}

template <class F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

}  // namespace

std::string serialize_model(const model::CfVae& m, const RunConfig& cfg, const data::NormStats& norm,
                            const model::TrainState& state) {
    const auto& mc = m.config();
    ordered_json j;
    j["format"] = kFormat;
    j["version"] = kCheckpointVersion;
    j["kind"] = "cfvae";
    j["prior"] = priors::to_string(mc.prior);
    j["flow"] = flows::to_string(mc.flow_kind);
    j["n"] = mc.flow_layers;
    j["D"] = mc.latent_dim;
    j["widths"] = mc.flow_hidden;
    j["grid_features"] = mc.grid_features;
    j["config"] = config_map(cfg);
    j["norm"] = {{"mean_x", norm.mean_x}, {"mean_y", norm.mean_y}, {"scale", norm.scale}};
    j["params"] = params_json(m.params());
    j["train"] = {{"step", state.step},
                  {"model_opt", adam_json(state.model_opt)},
                  {"prior_opt", adam_json(state.prior_opt)},
                  {"trace", state.trace}};
    return j.dump() + "\n";
}

ModelCheckpoint deserialize_model(const std::string& text) {
    const json j = parse_checkpoint(text, "cfvae");
    return guarded([&] {
        ModelCheckpoint out;
        out.config = config_from_map(j.at("config").get<std::map<std::string, std::string>>());
        out.config.model.grid_features = j.at("grid_features").get<std::size_t>();
        const auto& mc = out.config.model;
        if (mc.flow_layers != j.at("n").get<std::size_t>() || mc.latent_dim != j.at("D").get<std::size_t>() ||
            mc.flow_hidden != j.at("widths").get<std::vector<std::size_t>>())
            throw FormatError("checkpoint: header disagrees with stored config");
        const auto& n = j.at("norm");
        out.norm = {n.at("mean_x").get<double>(), n.at("mean_y").get<double>(), n.at("scale").get<double>()};
        nn::Rng rng(0);
        out.model = std::make_unique<model::CfVae>(mc, rng);
        load_params(out.model->params(), j.at("params"));
        const auto& t = j.at("train");
        out.state.step = t.at("step").get<std::size_t>();
        out.state.model_opt = adam_from_json(t.at("model_opt"));
        out.state.prior_opt = adam_from_json(t.at("prior_opt"));
        out.state.trace = t.at("trace").get<std::vector<double>>();
        return out;
    });
}

std::string serialize_density(const priors::Prior& prior, const RunConfig& cfg, const std::vector<double>& trace) {
    const auto& pc = prior.config();
    ordered_json j;
    j["format"] = kFormat;
    j["version"] = kCheckpointVersion;
    j["kind"] = "density";
    j["prior"] = priors::to_string(pc.kind);
    j["flow"] = flows::to_string(pc.flow_kind);
    j["n"] = pc.flow_layers;
    j["D"] = pc.latent_dim;
    j["widths"] = pc.flow_hidden;
    j["cond_dim"] = pc.cond_dim;
    j["mog_components"] = pc.mog_components;
    j["mog_hidden"] = pc.mog_hidden;
    j["config"] = config_map(cfg);
    j["params"] = params_json(prior.params());
    j["trace"] = trace;
    return j.dump() + "\n";
}

DensityCheckpoint deserialize_density(const std::string& text) {
    const json j = parse_checkpoint(text, "density");
    return guarded([&] {
        DensityCheckpoint out;
        out.config = config_from_map(j.at("config").get<std::map<std::string, std::string>>());
        auto& pc = out.prior_config;
        pc.kind = priors::prior_kind_from_string(j.at("prior").get<std::string>());
        pc.flow_kind = flows::flow_kind_from_string(j.at("flow").get<std::string>());
        pc.flow_layers = j.at("n").get<std::size_t>();
        pc.latent_dim = j.at("D").get<std::size_t>();
        pc.flow_hidden = j.at("widths").get<std::vector<std::size_t>>();
        pc.cond_dim = j.at("cond_dim").get<std::size_t>();
        pc.mog_components = j.at("mog_components").get<std::size_t>();
        pc.mog_hidden = j.at("mog_hidden").get<std::vector<std::size_t>>();
        nn::Rng rng(0);
        out.prior = priors::make_prior(pc, rng);
        load_params(out.prior->params(), j.at("params"));
        out.trace = j.at("trace").get<std::vector<double>>();
        return out;
    });
}

ModelCheckpoint load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }
DensityCheckpoint load_density(const std::filesystem::path& path) { return deserialize_density(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw InputError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw InputError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string git_blob_sha1(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
    EVP_DigestUpdate(ctx, header.data(), header.size());
    EVP_DigestUpdate(ctx, content.data(), content.size());
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char byte[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(byte, sizeof byte, "%02x", digest[i]);
        hex += byte;
    }
    return hex;
}

}  // namespace condflow::io
