#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "json.hpp"

#include "condflow/cli/commands.hpp"
#include "condflow/io/checkpoint.hpp"
#include "condflow/io/config.hpp"

using namespace condflow;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("condflow_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

const std::vector<std::string> kSmall = {
    "--set", "model.latent_dim=2", "--set", "model.flow_layers=2",  "--set", "model.flow_hidden=8",
    "--set", "model.encoder_hidden=8", "--set", "model.recognition_hidden=8", "--set", "model.decoder_hidden=8",
    "--set", "data.past_len=4",        "--set", "data.future_len=6",   "--set", "eval.horizons=2,4,6",
    "--set", "data.train_cases=64",    "--set", "data.test_cases=12",  "--set", "eval.samples=8",
    "--set", "eval.cll_samples=8",     "--set", "train.batch_size=16"};

std::vector<std::string> with(std::vector<std::string> head, std::vector<std::string> tail = {}) {
    head.insert(head.end(), kSmall.begin(), kSmall.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
}

bool single_error_line(const std::string& err, const std::string& code) {
    return err.rfind("error " + code + ": ", 0) == 0 && err.find('\n') == err.size() - 1;
}

}  // namespace

TEST(Cli, PrintConfigListsParsableDefaults) {
    const auto r = invoke({"print-config"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, io::format_config(io::RunConfig{}));
    io::RunConfig back;
    io::apply_config_text(back, r.out);
    EXPECT_EQ(io::format_config(back), r.out);
}

TEST(Cli, FlagsOverrideConfig) {
    const auto dir = fresh("flags");
    fs::create_directories(dir);
    io::write_atomic(dir / "run.conf", "seed = 3\nmodel.prior = gauss\n");
    const auto r = invoke({"print-config", "--config", (dir / "run.conf").string(), "--prior", "mog", "--cr", "--c-var",
                        "0.5", "--layers", "4", "--mode", "alternating", "--seed", "9"});
    ASSERT_EQ(r.code, 0) << r.err;
    io::RunConfig c;
    io::apply_config_text(c, r.out);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.model.prior, priors::PriorKind::conditional_mog);
    EXPECT_FALSE(c.model.conditioned_decoder);
    EXPECT_EQ(c.model.c_var, 0.5);
    EXPECT_EQ(c.model.flow_layers, 4u);
    EXPECT_EQ(c.train.mode, model::TrainMode::alternating);
}

TEST(Cli, ErrorsAreSingleMachineParsableLines) {
    auto r = invoke({"train", "--prior", "vamp"});
    EXPECT_NE(r.code, 0);
    EXPECT_TRUE(single_error_line(r.err, "USAGE_ERROR")) << r.err;

    r = invoke({"print-config", "--set", "model.nope=1"});
    EXPECT_EQ(r.code, cli::exit_code("CONFIG_ERROR"));
    EXPECT_TRUE(single_error_line(r.err, "CONFIG_ERROR")) << r.err;
    EXPECT_NE(r.err.find("model.latent_dim"), std::string::npos);

    r = invoke({"frobnicate"});
    EXPECT_NE(r.code, 0);
    r = invoke({"eval", "--out-dir", fresh("nockpt").string()});
    EXPECT_TRUE(single_error_line(r.err, "CONFIG_ERROR")) << r.err;
}

TEST(Cli, BaselineEvalNeedsNoCheckpointAndIsDeterministic) {
    const auto a = fresh("cv_a"), b = fresh("cv_b");
    ASSERT_EQ(invoke(with({"eval", "--baseline", "constant_velocity", "--out-dir", a.string()})).code, 0);
    ASSERT_EQ(invoke(with({"eval", "--baseline", "constant_velocity", "--out-dir", b.string()})).code, 0);
    const auto csv = io::read_file(a / "metrics.csv");
    EXPECT_EQ(csv, io::read_file(b / "metrics.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12 + 2);
    const auto j = nlohmann::json::parse(io::read_file(a / "metrics.json"));
    EXPECT_EQ(j["n"], 1);
    const auto m = nlohmann::json::parse(io::read_file(a / "manifest.json"));
    EXPECT_EQ(m["status"], "ok");
    EXPECT_EQ(m["outputs"], nlohmann::json({"metrics.csv", "metrics.json"}));
}

TEST(Cli, TrainEvalResumeAndManifest) {
    const auto t20 = fresh("t20"), t40 = fresh("t40"), resumed = fresh("t20_40");
    ASSERT_EQ(invoke(with({"train", "--out-dir", t20.string(), "--set", "train.steps=20"})).code, 0);
    ASSERT_EQ(invoke(with({"train", "--out-dir", t40.string(), "--set", "train.steps=40"})).code, 0);
    const auto r = invoke(with({"train", "--out-dir", resumed.string(), "--set", "train.steps=40", "--resume",
                             (t20 / "model.json").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(io::read_file(resumed / "trace.csv"), io::read_file(t40 / "trace.csv"));
    const std::string ckpt = io::read_file(t40 / "model.json");
    EXPECT_EQ(io::read_file(resumed / "model.json"), ckpt);

    const auto manifest = nlohmann::json::parse(io::read_file(t40 / "manifest.json"));
    EXPECT_EQ(manifest["checkpoint"]["sha1"], io::git_blob_sha1(ckpt));
    EXPECT_EQ(manifest["seed"], 1);
    EXPECT_EQ(manifest["dataset"]["train"]["cases"], 64);

    // Re-running from the manifest's config snapshot reproduces the checkpoint.
    const auto again = fresh("t40_again");
    fs::create_directories(again);
    std::string conf;
    for (const auto& [k, v] : manifest["config"].items()) conf += k + " = " + v.get<std::string>() + "\n";
    io::write_atomic(again / "run.conf", conf);
    ASSERT_EQ(invoke({"train", "--config", (again / "run.conf").string(), "--out-dir", again.string()}).code, 0);
    EXPECT_EQ(io::read_file(again / "model.json"), ckpt);

    const auto e1 = fresh("eval1"), e2 = fresh("eval2");
    const std::string ck = (t40 / "model.json").string();
    ASSERT_EQ(invoke(with({"eval", "--checkpoint", ck, "--out-dir", e1.string()})).code, 0);
    ASSERT_EQ(invoke(with({"eval", "--checkpoint", ck, "--out-dir", e2.string()})).code, 0);
    EXPECT_EQ(io::read_file(e1 / "metrics.csv"), io::read_file(e2 / "metrics.csv"));
    EXPECT_NE(io::read_file(e1 / "metrics.csv").find("neg_cll"), std::string::npos);

    const auto mismatch = invoke(with({"eval", "--checkpoint", ck, "--out-dir", fresh("mm").string()},
                                   {"--set", "data.future_len=8"}));
    EXPECT_TRUE(single_error_line(mismatch.err, "CONFIG_ERROR")) << mismatch.err;

    const auto p = fresh("pred");
    ASSERT_EQ(invoke(with({"predict", "--checkpoint", ck, "--out-dir", p.string()})).code, 0);
    const auto pred = io::read_file(p / "predictions.csv");
    EXPECT_EQ(std::count(pred.begin(), pred.end(), '\n'), 1 + 12 * 8 * 6);

    const auto g = fresh("grid");
    ASSERT_EQ(invoke(with({"latent-grid", "--checkpoint", ck, "--out-dir", g.string()},
                       {"--set", "grid.size=40", "--set", "grid.cases=2"}))
                  .code,
              0);
    const auto grid = io::read_file(g / "latent_grid.csv");
    EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 1 + 2 * 40 * 40);
}

TEST(Cli, LatentGridRejectsWideLatents) {
    const auto d = fresh("wide");
    ASSERT_EQ(invoke(with({"train", "--out-dir", d.string()}, {"--set", "model.latent_dim=3", "--set", "train.steps=2"})).code, 0);
    const auto r = invoke(with({"latent-grid", "--checkpoint", (d / "model.json").string(), "--out-dir", d.string()},
                            {"--set", "model.latent_dim=3"}));
    EXPECT_EQ(r.code, cli::exit_code("CONFIG_ERROR"));
    EXPECT_NE(r.err.find("D=3"), std::string::npos);
}

TEST(Cli, FailedRunLeavesErrorManifest) {
    const auto d = fresh("failed");
    const auto r = invoke({"train", "--set", "data.source=csv", "--out-dir", d.string()});
    EXPECT_EQ(r.code, cli::exit_code("CONFIG_ERROR"));
    const auto m = nlohmann::json::parse(io::read_file(d / "manifest.json"));
    EXPECT_EQ(m["status"], "error");
    EXPECT_EQ(m["error"].get<std::string>().rfind("CONFIG_ERROR", 0), 0u);
}

TEST(Cli, FitDensityExportsNormalizedGrid) {
    const auto d = fresh("density");
    const auto r = invoke({"fit-density", "--out-dir", d.string(), "--layers", "2", "--set", "model.flow_hidden=8",
                        "--set", "density.name=cond_mog2d", "--set", "density.steps=20", "--set", "density.train_size=256",
                        "--set", "density.test_size=64", "--set", "density.grid_w=50", "--set", "density.grid_h=40",
                        "--set", "density.extent=6"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto grid = io::read_file(d / "grid.csv");
    EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 1 + 4 * 50 * 40);
    const auto j = nlohmann::json::parse(io::read_file(d / "metrics.json"));
    for (const auto& [label, mass] : j["grid_mass"].items()) EXPECT_NEAR(mass.get<double>(), 1.0, 1e-2) << label;
    EXPECT_TRUE(std::isfinite(j["heldout_nll"].get<double>()));
    const auto back = io::load_density(d / "density.json");
    EXPECT_EQ(back.prior_config.flow_layers, 2u);
}

TEST(Cli, GenDataWritesLoadableCsv) {
    const auto d = fresh("gen");
    ASSERT_EQ(invoke({"gen-data", "--out-dir", d.string(), "--set", "data.train_cases=7", "--set", "data.test_cases=3"}).code, 0);
    const auto test = data::load_csv((d / "test.csv").string(), {8, 12, 20});
    EXPECT_EQ(test.size(), 3u);
    const auto r = invoke({"eval", "--baseline", "shotgun", "--set", "data.source=csv", "--set",
                        "data.test_path=" + (d / "test.csv").string(), "--set", "data.stride=20", "--out-dir",
                        (d / "eval").string()});
    ASSERT_EQ(r.code, 0) << r.err;
}
