#include "condflow/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "condflow/data/density.hpp"
#include "condflow/errors.hpp"
#include "condflow/eval/baselines.hpp"
#include "condflow/eval/metrics.hpp"
#include "condflow/io/checkpoint.hpp"
#include "condflow/io/manifest.hpp"
#include "condflow/kernels/threads.hpp"
#include "condflow/model/train.hpp"

namespace condflow::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kTrainStream = 0x7472;
constexpr std::uint64_t kTestStream = 0x7465;
constexpr std::uint64_t kCllStream = 0x636c;

struct Options {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::string prior;
    bool cr = false;
    std::optional<double> c_var;
    std::optional<std::size_t> layers;
    std::string mode;
    std::string checkpoint;
    std::string resume;
    std::string baseline;
};

io::RunConfig resolve_config(const Options& o) {
    io::RunConfig cfg;
    if (!o.config_path.empty()) io::apply_config_file(cfg, o.config_path);
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        io::set_key(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (o.seed) cfg.seed = *o.seed;
    if (!o.prior.empty()) cfg.model.prior = priors::prior_kind_from_string(o.prior);
    if (o.cr) cfg.model.conditioned_decoder = false;
    if (o.c_var) cfg.model.c_var = *o.c_var;
    if (o.layers) cfg.model.flow_layers = *o.layers;
    if (!o.mode.empty()) cfg.train.mode = model::train_mode_from_string(o.mode);
    if (!o.baseline.empty()) cfg.eval.baseline = o.baseline;
    return cfg;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Run {
public:
    Run(std::string command, const io::RunConfig& cfg, fs::path out_dir)
        : out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
        manifest_.command = std::move(command);
        manifest_.config = cfg;
        manifest_.seed = cfg.seed;
        manifest_.started_utc = io::utc_timestamp();
        fs::create_directories(out_dir_);
    }

    fs::path path(const std::string& name) const { return out_dir_ / name; }

    void output(const std::string& name, const std::string& content) {
        io::write_atomic(path(name), content);
        manifest_.outputs.push_back(name);
    }

    void checkpoint(const std::string& name, const std::string& content) {
        io::write_atomic(path(name), content);
        manifest_.checkpoint_path = name;
        manifest_.checkpoint_sha1 = io::git_blob_sha1(content);
    }

    ordered_json& dataset() { return manifest_.dataset; }

    void finish(const std::string& error = {}) {
        if (!error.empty()) {
            manifest_.status = "error";
            manifest_.error = error;
        }
        manifest_.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        io::write_manifest(path("manifest.json"), manifest_);
    }

private:
    fs::path out_dir_;
    std::chrono::steady_clock::time_point start_;
    io::RunManifest manifest_;
};

// Runs body and always leaves a manifest behind, marked as failed when body throws.
template <class F>
void with_manifest(Run& run, F&& body) {
    try {
        body();
    } catch (const Error& e) {
        run.finish(e.code() + ": " + e.what());
        throw;
    }
    run.finish();
}

ordered_json batch_stats(const data::TrajectoryBatch& b) {
    return {{"cases", b.size()}, {"past_len", b.past_len}, {"future_len", b.future_len},
            {"grid_features", b.grid_features}};
}

std::string trace_csv(const std::vector<double>& trace) {
    std::string out = "step,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) out += std::to_string(i) + "," + fmt_double(trace[i]) + "\n";
    return out;
}

void denormalize_points(std::vector<double>& pts, const data::NormStats& s) {
    for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
        pts[i] = pts[i] * s.scale + s.mean_x;
        pts[i + 1] = pts[i + 1] * s.scale + s.mean_y;
    }
}

void check_compatible(const model::ModelConfig& mc, const data::TrajectoryBatch& test) {
    if (mc.future_len != test.future_len)
        throw ConfigError("checkpoint predicts " + std::to_string(mc.future_len) + " steps, dataset has " +
                          std::to_string(test.future_len));
    if (mc.grid_features != test.grid_features)
        throw ConfigError("checkpoint expects " + std::to_string(mc.grid_features) +
                          " grid features, dataset has " + std::to_string(test.grid_features));
}

// Candidates [B][n][F][2] in raw coordinates, plus the candidate count.
struct Candidates {
    std::vector<double> points;
    std::size_t n = 0;
    std::vector<double> neg_cll;
};

Candidates candidates_for(const io::RunConfig& cfg, const Options& o, const data::TrajectoryBatch& test,
                          bool with_cll) {
    Candidates c;
    if (!cfg.eval.baseline.empty()) {
        if (!o.checkpoint.empty()) throw ConfigError("give either a checkpoint or eval.baseline, not both");
        const eval::BaselineSpec spec{cfg.eval.baseline, cfg.eval.theta_max, cfg.eval.baseline_k};
        c.n = eval::baseline_count(spec);
        c.points = eval::baseline_predictions(spec, test);
        return c;
    }
    if (o.checkpoint.empty()) throw ConfigError("eval needs --checkpoint or eval.baseline");
    const auto ck = io::load_model(o.checkpoint);
    check_compatible(ck.model->config(), test);
    auto norm_test = test;
    data::normalize(norm_test, ck.norm);
    c.n = cfg.eval.samples;
    c.points = ck.model->predict(norm_test, c.n, cfg.seed);
    denormalize_points(c.points, ck.norm);
    if (with_cll && cfg.eval.cll_samples > 0)
        c.neg_cll = ck.model->estimate_cll(norm_test, cfg.eval.cll_samples, model::stream_seed(cfg.seed, kCllStream));
    return c;
}

// ---------------------------------------------------------------- commands

void cmd_print_config(const io::RunConfig& cfg, std::ostream& out) { out << io::format_config(cfg); }

void cmd_gen_data(const io::RunConfig& cfg, const Options& o, std::ostream& out) {
    Run run("gen-data", cfg, o.out_dir);
    with_manifest(run, [&] {
        const auto sets = load_datasets(cfg);
        std::ostringstream tr, te;
        data::write_csv(tr, sets.train);
        data::write_csv(te, sets.test);
        run.output("train.csv", tr.str());
        run.output("test.csv", te.str());
        run.dataset() = {{"train", batch_stats(sets.train)}, {"test", batch_stats(sets.test)}};
        out << "wrote " << sets.train.size() << " train and " << sets.test.size() << " test cases\n";
    });
}

void cmd_train(const io::RunConfig& cfg, const Options& o, std::ostream& out) {
    Run run("train", cfg, o.out_dir);
    with_manifest(run, [&] {
        const auto sets = load_datasets(cfg);
        run.dataset() = {{"train", batch_stats(sets.train)}};
        model::TrainConfig tc = cfg.train;
        tc.seed = cfg.seed;

        std::unique_ptr<model::CfVae> m;
        model::TrainState state;
        data::NormStats norm;
        if (!o.resume.empty()) {
            auto ck = io::load_model(o.resume);
            for (const auto& key : io::config_keys()) {
                if ((key.rfind("model.", 0) == 0 || key.rfind("data.", 0) == 0 || key == "seed") &&
                    io::get_key(ck.config, key) != io::get_key(cfg, key))
                    throw ConfigError("resume: '" + key + "' differs from the checkpoint (" +
                                      io::get_key(ck.config, key) + " vs " + io::get_key(cfg, key) + ")");
            }
            m = std::move(ck.model);
            state = std::move(ck.state);
            norm = ck.norm;
        } else {
            norm = data::compute_norm(sets.train);
            nn::Rng rng(model::stream_seed(cfg.seed, 0));
            m = std::make_unique<model::CfVae>(effective_model(cfg), rng);
        }
        auto train = sets.train;
        data::normalize(train, norm);
        run.dataset()["norm"] = {{"mean_x", norm.mean_x}, {"mean_y", norm.mean_y}, {"scale", norm.scale}};

        state = model::train(*m, train, tc, std::move(state));
        run.checkpoint("model.json", io::serialize_model(*m, cfg, norm, state));
        run.output("trace.csv", trace_csv(state.trace));
        out << "trained " << state.step << " steps, final loss " << fmt_double(state.trace.empty() ? NAN : state.trace.back())
            << "\n";
    });
}

void cmd_eval(const io::RunConfig& cfg, const Options& o, std::ostream& out) {
    Run run("eval", cfg, o.out_dir);
    with_manifest(run, [&] {
        const auto test = load_datasets(cfg).test;
        run.dataset() = {{"test", batch_stats(test)}};
        const auto c = candidates_for(cfg, o, test, true);
        const eval::ReportConfig rc{cfg.eval.horizons, cfg.eval.top_pct, cfg.eval.frame_rate};
        const auto report = eval::metric_report(test, c.points, c.n, rc, c.neg_cll);
        std::ostringstream csv;
        eval::write_report_csv(csv, report);
        run.output("metrics.csv", csv.str());
        run.output("metrics.json", eval::report_json(report));
        out << eval::report_json(report);
    });
}

void cmd_predict(const io::RunConfig& cfg, const Options& o, std::ostream& out) {
    Run run("predict", cfg, o.out_dir);
    with_manifest(run, [&] {
        const auto test = load_datasets(cfg).test;
        run.dataset() = {{"test", batch_stats(test)}};
        const auto c = candidates_for(cfg, o, test, false);
        const std::size_t f = test.future_len;
        std::string csv = "case,sample,step,x,y\n";
        for (std::size_t b = 0; b < test.size(); ++b)
            for (std::size_t k = 0; k < c.n; ++k)
                for (std::size_t j = 0; j < f; ++j) {
                    const double* p = c.points.data() + ((b * c.n + k) * f + j) * 2;
                    csv += std::to_string(b) + "," + std::to_string(k) + "," + std::to_string(j) + "," +
                           fmt_double(p[0]) + "," + fmt_double(p[1]) + "\n";
                }
        run.output("predictions.csv", csv);
        out << "wrote " << c.n << " predictions for " << test.size() << " cases\n";
    });
}

// Cell-centred grid over [-extent, extent]^2; returns x-major points.
std::vector<double> grid_points(std::size_t w, std::size_t h, double extent_x, double extent_y) {
    std::vector<double> pts;
    pts.reserve(w * h * 2);
    for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j < h; ++j) {
            pts.push_back(-extent_x + (i + 0.5) * 2 * extent_x / w);
            pts.push_back(-extent_y + (j + 0.5) * 2 * extent_y / h);
        }
    return pts;
}

std::vector<double> grid_density(const priors::Prior& prior, const std::vector<double>& cond,
                                 const std::vector<double>& pts) {
    ad::NoGradGuard guard;
    const std::size_t n = pts.size() / 2;
    ad::Tensor c;
    if (!cond.empty()) {
        std::vector<double> rep;
        rep.reserve(n * cond.size());
        for (std::size_t i = 0; i < n; ++i) rep.insert(rep.end(), cond.begin(), cond.end());
        c = ad::Tensor::from(n, cond.size(), std::move(rep));
    }
    const auto lp = prior.log_prob(ad::Tensor::from(n, 2, pts), c);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(lp.data()[i]);
    return out;
}

void cmd_fit_density(const io::RunConfig& cfg, const Options& o, std::ostream& out) {
    Run run("fit-density", cfg, o.out_dir);
    with_manifest(run, [&] {
        const auto truth = data::make_density(cfg.density.name);
        nn::Rng train_rng(model::stream_seed(cfg.seed, kTrainStream)), test_rng(model::stream_seed(cfg.seed, kTestStream));
        const auto train = truth->draw(cfg.density.train_size, train_rng);
        const auto test = truth->draw(cfg.density.test_size, test_rng);
        run.dataset() = {{"name", cfg.density.name}, {"train", train.y.rows()}, {"test", test.y.rows()}};

        priors::PriorConfig pc;
        pc.kind = cfg.model.prior;
        pc.latent_dim = 2;
        pc.cond_dim = truth->cond_dim();
        pc.flow_kind = cfg.model.flow_kind;
        pc.flow_layers = cfg.model.flow_layers;
        pc.flow_hidden = cfg.model.flow_hidden;
        pc.mog_components = cfg.model.mog_components;
        pc.mog_hidden = cfg.model.mog_hidden;
        nn::Rng rng(model::stream_seed(cfg.seed, 0));
        const auto prior = priors::make_prior(pc, rng);

        auto fc = cfg.density.fit;
        fc.seed = cfg.seed;
        const auto trace = model::fit_density(*prior, train, fc);
        const double nll = model::mean_nll(*prior, test);
        double true_nll = 0.0;
        for (std::size_t i = 0; i < test.labels.size(); ++i) {
            const auto y = ad::Tensor::from(1, 2, {test.y.at(i, 0), test.y.at(i, 1)});
            true_nll -= truth->log_prob(test.labels[i], y)[0];
        }
        true_nll /= static_cast<double>(test.labels.size());

        run.checkpoint("density.json", io::serialize_density(*prior, cfg, trace));
        run.output("trace.csv", trace_csv(trace));

        const auto& d = cfg.density;
        const auto pts = grid_points(d.grid_w, d.grid_h, d.extent, d.extent);
        const double cell = (2 * d.extent / d.grid_w) * (2 * d.extent / d.grid_h);
        std::string csv = "label,x,y,density\n";
        ordered_json mass = ordered_json::object();
        for (std::size_t label : truth->labels()) {
            const auto dens = grid_density(*prior, truth->condition(label), pts);
            double total = 0.0;
            for (std::size_t i = 0; i < dens.size(); ++i) {
                total += dens[i] * cell;
                csv += std::to_string(label) + "," + fmt_double(pts[2 * i]) + "," + fmt_double(pts[2 * i + 1]) + "," +
                       fmt_double(dens[i]) + "\n";
            }
            mass[std::to_string(label)] = total;
        }
        run.output("grid.csv", csv);
        ordered_json summary = {{"density", cfg.density.name},
                                {"prior", priors::to_string(pc.kind)},
                                {"flow", flows::to_string(pc.flow_kind)},
                                {"layers", pc.flow_layers},
                                {"heldout_nll", nll},
                                {"true_nll", true_nll},
                                {"grid_mass", mass}};
        run.output("metrics.json", summary.dump(2) + "\n");
        out << summary.dump(2) << "\n";
    });
}

void cmd_latent_grid(const io::RunConfig& cfg, const Options& o, std::ostream& out) {
    Run run("latent-grid", cfg, o.out_dir);
    with_manifest(run, [&] {
        if (o.checkpoint.empty()) throw ConfigError("latent-grid needs --checkpoint");
        const auto ck = io::load_model(o.checkpoint);
        const auto& mc = ck.model->config();
        if (mc.latent_dim != 2)
            throw ConfigError("latent-grid needs a 2-dimensional latent space, checkpoint has D=" +
                              std::to_string(mc.latent_dim));
        auto test = load_datasets(cfg).test;
        check_compatible(mc, test);
        data::normalize(test, ck.norm);
        const std::size_t cases = std::min(cfg.grid.cases, test.size());
        test = test.slice(0, cases);
        run.dataset() = {{"test", batch_stats(test)}};

        ad::NoGradGuard guard;
        const auto enc = ck.model->encode_condition(test);
        const auto& g = cfg.grid;
        const auto pts = grid_points(g.size, g.size, g.extent, g.extent);
        const double cell = std::pow(2 * g.extent / g.size, 2);
        std::string csv = "case,z0,z1,density\n";
        ordered_json mass = ordered_json::array();
        for (std::size_t b = 0; b < cases; ++b) {
            const std::size_t w = enc.x.cols();
            const std::vector<double> cond(enc.x.data().begin() + b * w, enc.x.data().begin() + (b + 1) * w);
            const auto dens = grid_density(ck.model->prior(), cond, pts);
            double total = 0.0;
            for (std::size_t i = 0; i < dens.size(); ++i) {
                total += dens[i] * cell;
                csv += std::to_string(b) + "," + fmt_double(pts[2 * i]) + "," + fmt_double(pts[2 * i + 1]) + "," +
                       fmt_double(dens[i]) + "\n";
            }
            mass.push_back(total);
        }
        run.output("latent_grid.csv", csv);
        out << ordered_json{{"grid_mass", mass}}.dump() << "\n";
    });
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", o.sets, "override one key, key=value (repeatable)");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out-dir", o.out_dir, "directory for outputs and the run manifest (default: out)");
    sub->add_option("--prior", o.prior, "latent prior")->check(CLI::IsMember({"flow", "mog", "gauss", "uflow"}));
    sub->add_flag("--cr", o.cr, "decoder sees z only");
    sub->add_option("--c-var", o.c_var, "fixed posterior variance under pR");
    sub->add_option("--layers", o.layers, "flow layers");
    sub->add_option("--mode", o.mode, "training schedule")->check(CLI::IsMember({"joint", "alternating"}));
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace

model::ModelConfig effective_model(const io::RunConfig& cfg) {
    model::ModelConfig mc = cfg.model;
    mc.grid_features = cfg.data.source == "highway" && cfg.data.social ? data::HighwaySpec{}.grid_features : 0;
    return mc;
}

Datasets load_datasets(const io::RunConfig& cfg) {
    const auto& d = cfg.data;
    Datasets out;
    if (d.source == "csv") {
        if (d.train_path.empty() && d.test_path.empty()) throw ConfigError("data.source = csv needs data.train_path or data.test_path");
        const data::WindowSpec w{d.past_len, cfg.model.future_len, d.stride};
        if (!d.train_path.empty()) out.train = data::load_csv(d.train_path, w);
        if (!d.test_path.empty()) out.test = data::load_csv(d.test_path, w);
        return out;
    }
    nn::Rng train_rng(model::stream_seed(cfg.seed, kTrainStream)), test_rng(model::stream_seed(cfg.seed, kTestStream));
    if (d.source == "strokes") {
        data::StrokeSpec spec;
        spec.past_len = d.past_len;
        spec.future_len = cfg.model.future_len;
        spec.noise = d.noise;
        spec.curvature_jitter = d.curvature_jitter;
        out.train = data::gen_strokes(spec, d.train_cases, train_rng);
        out.test = data::gen_strokes(spec, d.test_cases, test_rng);
    } else if (d.source == "highway") {
        data::HighwaySpec spec;
        spec.past_len = d.past_len;
        spec.future_len = cfg.model.future_len;
        spec.noise = d.noise;
        spec.p_major = d.p_major;
        spec.max_neighbors = d.max_neighbors;
        out.train = data::gen_highway(spec, d.train_cases, train_rng);
        out.test = data::gen_highway(spec, d.test_cases, test_rng);
        if (!d.social)
            for (auto* b : {&out.train, &out.test}) {
                b->grid_features = 0;
                b->grid.clear();
            }
    } else {
        throw ConfigError("unknown data.source '" + d.source + "'");
    }
    return out;
}

int exit_code(const std::string& code) {
    if (code.empty()) return 0;
    if (code == "USAGE_ERROR") return 2;
    if (code == "CONFIG_ERROR") return 3;
    if (code == "INPUT_ERROR") return 4;
    if (code == "FORMAT_ERROR") return 5;
    if (code == "TRAINING_ERROR") return 6;
    return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    kernels::apply_thread_env();
    CLI::App app{"Conditional flow VAE experiments"};
    app.require_subcommand(1);
    Options o;
    struct Sub {
        const char* name;
        const char* help;
        void (*fn)(const io::RunConfig&, const Options&, std::ostream&);
    };
    const Sub subs[] = {
        {"fit-density", "fit a conditional density and export its grid", cmd_fit_density},
        {"train", "train a model and write a checkpoint", cmd_train},
        {"eval", "score a checkpoint or baseline on the test set", cmd_eval},
        {"predict", "write sampled futures for the test set", cmd_predict},
        {"latent-grid", "export the latent prior density of a D=2 checkpoint", cmd_latent_grid},
        {"gen-data", "write the configured train and test sets as CSV", cmd_gen_data},
    };
    std::vector<std::pair<CLI::App*, const Sub*>> registered;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, o);
        if (std::string(s.name) != "fit-density" && std::string(s.name) != "gen-data") {
            sub->add_option("--checkpoint", o.checkpoint, "model checkpoint");
            sub->add_option("--baseline", o.baseline, "shotgun | shotgun_uniform | constant_velocity");
        }
        if (std::string(s.name) == "train") sub->add_option("--resume", o.resume, "continue from a checkpoint");
        registered.emplace_back(sub, &s);
    }
    auto* print = app.add_subcommand("print-config", "print every config key with its value");
    add_common(print, o);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error USAGE_ERROR: " << one_line(e.what()) << "\n";
        return exit_code("USAGE_ERROR");
    }

    try {
        const io::RunConfig cfg = resolve_config(o);
        if (print->parsed()) {
            cmd_print_config(cfg, out);
            return 0;
        }
        for (const auto& [sub, s] : registered)
            if (sub->parsed()) s->fn(cfg, o, out);
        return 0;
    } catch (const Error& e) {
        err << "error " << e.code() << ": " << one_line(e.what()) << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        err << "error INTERNAL_ERROR: " << one_line(e.what()) << "\n";
        return 1;
    }
}

}  // namespace condflow::cli
