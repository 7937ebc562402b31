#include "condflow/io/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "condflow/errors.hpp"

namespace condflow::io {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

std::string fmt(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
    throw ConfigError("key '" + key + "': invalid value '" + value + "' (expected " + expected + ")");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "non-negative integer");
    return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(parse_u64(key, v));
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "number");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "true|false");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    if (trim(v).empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
    return out;
}

std::string parse_choice(const std::string& key, const std::string& v, std::initializer_list<const char*> valid) {
    for (const char* c : valid)
        if (v == c) return v;
    std::string expected;
    for (const char* c : valid) expected += (expected.empty() ? "" : "|") + std::string(c);
    bad_value(key, v, expected);
}

struct Entry {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define CF_SIZE(name, field) \
    Entry{name, [](const RunConfig& c) { return fmt(c.field); }, \
          [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_size(k, v); }}
#define CF_DOUBLE(name, field) \
    Entry{name, [](const RunConfig& c) { return fmt(c.field); }, \
          [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); }}
#define CF_BOOL(name, field) \
    Entry{name, [](const RunConfig& c) { return fmt(c.field); }, \
          [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); }}
#define CF_LIST(name, field) \
    Entry{name, [](const RunConfig& c) { return fmt(c.field); }, \
          [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_list(k, v); }}
#define CF_STRING(name, field) \
    Entry{name, [](const RunConfig& c) { return c.field; }, \
          [](RunConfig& c, const std::string&, const std::string& v) { c.field = v; }}

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = {
        Entry{"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
              [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},

        Entry{"data.source", [](const RunConfig& c) { return c.data.source; },
              [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.data.source = parse_choice(k, v, {"strokes", "highway", "csv"});
              }},
        CF_STRING("data.train_path", data.train_path),
        CF_STRING("data.test_path", data.test_path),
        CF_SIZE("data.train_cases", data.train_cases),
        CF_SIZE("data.test_cases", data.test_cases),
        CF_SIZE("data.past_len", data.past_len),
        CF_SIZE("data.future_len", model.future_len),
        CF_SIZE("data.stride", data.stride),
        CF_DOUBLE("data.noise", data.noise),
        CF_DOUBLE("data.curvature_jitter", data.curvature_jitter),
        CF_DOUBLE("data.p_major", data.p_major),
        CF_SIZE("data.max_neighbors", data.max_neighbors),
        CF_BOOL("data.social", data.social),

        CF_SIZE("model.latent_dim", model.latent_dim),
        Entry{"model.prior", [](const RunConfig& c) { return priors::to_string(c.model.prior); },
              [](RunConfig& c, const std::string&, const std::string& v) {
                  c.model.prior = priors::prior_kind_from_string(v);
              }},
        Entry{"model.flow_kind", [](const RunConfig& c) { return flows::to_string(c.model.flow_kind); },
              [](RunConfig& c, const std::string&, const std::string& v) {
                  c.model.flow_kind = flows::flow_kind_from_string(v);
              }},
        CF_SIZE("model.flow_layers", model.flow_layers),
        CF_LIST("model.flow_hidden", model.flow_hidden),
        CF_SIZE("model.mog_components", model.mog_components),
        CF_LIST("model.mog_hidden", model.mog_hidden),
        CF_SIZE("model.encoder_hidden", model.encoder_hidden),
        CF_SIZE("model.recognition_hidden", model.recognition_hidden),
        CF_SIZE("model.decoder_hidden", model.decoder_hidden),
        CF_BOOL("model.posterior_reg", model.posterior_reg),
        CF_DOUBLE("model.c_var", model.c_var),
        CF_BOOL("model.conditioned_decoder", model.conditioned_decoder),
        CF_DOUBLE("model.sigma_y", model.sigma_y),
        CF_SIZE("model.social_channels", model.social_channels),
        CF_SIZE("model.social_out", model.social_out),

        CF_SIZE("train.steps", train.steps),
        CF_SIZE("train.batch_size", train.batch_size),
        CF_DOUBLE("train.lr", train.lr),
        Entry{"train.mode", [](const RunConfig& c) { return model::to_string(c.train.mode); },
              [](RunConfig& c, const std::string&, const std::string& v) {
                  c.train.mode = model::train_mode_from_string(v);
              }},
        CF_SIZE("train.kl_cycle", train.kl_cycle),
        CF_DOUBLE("train.kl_ramp", train.kl_ramp),

        CF_STRING("eval.baseline", eval.baseline),
        CF_SIZE("eval.samples", eval.samples),
        CF_SIZE("eval.cll_samples", eval.cll_samples),
        CF_LIST("eval.horizons", eval.horizons),
        CF_DOUBLE("eval.top_pct", eval.top_pct),
        CF_DOUBLE("eval.frame_rate", eval.frame_rate),
        CF_DOUBLE("eval.theta_max", eval.theta_max),
        CF_SIZE("eval.baseline_k", eval.baseline_k),

        Entry{"density.name", [](const RunConfig& c) { return c.density.name; },
              [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.density.name = parse_choice(k, v, {"cond_ring2d", "cond_mog2d"});
              }},
        CF_SIZE("density.train_size", density.train_size),
        CF_SIZE("density.test_size", density.test_size),
        CF_SIZE("density.steps", density.fit.steps),
        CF_SIZE("density.batch_size", density.fit.batch_size),
        CF_DOUBLE("density.lr", density.fit.lr),
        CF_SIZE("density.grid_w", density.grid_w),
        CF_SIZE("density.grid_h", density.grid_h),
        CF_DOUBLE("density.extent", density.extent),

        CF_SIZE("grid.size", grid.size),
        CF_DOUBLE("grid.extent", grid.extent),
        CF_SIZE("grid.cases", grid.cases),
    };
    return entries;
}

#undef CF_SIZE
#undef CF_DOUBLE
#undef CF_BOOL
#undef CF_LIST
#undef CF_STRING

const Entry& find(const std::string& key) {
    for (const auto& e : registry())
        if (e.key == key) return e;
    std::string valid;
    for (const auto& e : registry()) valid += (valid.empty() ? "" : ", ") + e.key;
    throw ConfigError("unknown key '" + key + "' (valid keys: " + valid + ")");
}

void apply_stream(RunConfig& cfg, std::istream& in, const std::string& origin,
                  const std::filesystem::path& base_dir, std::set<std::filesystem::path>& open) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "include") {
            const auto path = std::filesystem::weakly_canonical(base_dir / value);
            if (open.count(path)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": include cycle at " + value);
            std::ifstream sub(path);
            if (!sub) throw ConfigError(origin + ":" + std::to_string(lineno) + ": cannot open include " + value);
            open.insert(path);
            apply_stream(cfg, sub, path.string(), path.parent_path(), open);
            open.erase(path);
            continue;
        }
        try {
            find(key).set(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

}  // namespace

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    find(key).set(cfg, key, trim(value));
}

std::string get_key(const RunConfig& cfg, const std::string& key) { return find(key).get(cfg); }

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& e : registry()) keys.push_back(e.key);
    return keys;
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::set<std::filesystem::path> open{std::filesystem::weakly_canonical(path)};
    apply_stream(cfg, in, path.string(), path.parent_path(), open);
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::filesystem::path& base_dir) {
    std::istringstream in(text);
    std::set<std::filesystem::path> open;
    apply_stream(cfg, in, "<config>", base_dir, open);
}

std::string format_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& e : registry()) out += e.key + " = " + e.get(cfg) + "\n";
    return out;
}

std::map<std::string, std::string> config_map(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& e : registry()) out[e.key] = e.get(cfg);
    return out;
}

RunConfig config_from_map(const std::map<std::string, std::string>& values) {
    RunConfig cfg;
    for (const auto& [k, v] : values) set_key(cfg, k, v);
    return cfg;
}

}  // namespace condflow::io
