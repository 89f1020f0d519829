// driveperc command-line tool. All functionality goes through the C API in
// driveperc.h; this file only parses arguments and maps statuses to exit
// codes (0 success, 1 usage/config error, 2 partial data failure).

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "driveperc.h"

namespace {

struct ConfigDeleter {
    void operator()(dp_config* c) const { dp_config_free(c); }
};
using ConfigPtr = std::unique_ptr<dp_config, ConfigDeleter>;

[[noreturn]] void fail(const char* what, dp_status status) {
    std::fprintf(stderr, "driveperc: %s failed (%d): %s\n", what, status, dp_last_error());
    std::exit(status == DP_ERR_PARTIAL ? 2 : 1);
}

void check(dp_status status, const char* what) {
    if (status != DP_OK) fail(what, status);
}

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> sets;
    bool dump_config = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_file, "configuration file (key = value sections)");
    cmd->add_option("--set", opts.sets, "override one config key, e.g. --set pipeline.canny_low=40")
        ->type_name("KEY=VALUE");
    cmd->add_flag("--dump-config", opts.dump_config, "print the effective configuration and exit");
}

ConfigPtr make_config(const CommonOpts& opts, const std::string& task = "") {
    dp_config* raw = nullptr;
    check(dp_config_create(&raw), "config");
    ConfigPtr cfg(raw);
    if (!task.empty()) check(dp_config_apply_task_defaults(cfg.get(), task.c_str()), "task defaults");
    if (!opts.config_file.empty()) check(dp_config_load_file(cfg.get(), opts.config_file.c_str()), "config file");
    for (const std::string& kv : opts.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "driveperc: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
            std::exit(1);
        }
        check(dp_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set");
    }
    return cfg;
}

// Prints the effective config to stdout; the text re-ingests as a config file.
bool maybe_dump(const CommonOpts& opts, const ConfigPtr& cfg) {
    if (!opts.dump_config) return false;
    size_t required = 0;
    check(dp_config_dump(cfg.get(), nullptr, 0, &required), "dump-config");
    std::string buffer(required, '\0');
    check(dp_config_dump(cfg.get(), buffer.data(), buffer.size(), nullptr), "dump-config");
    std::fputs(buffer.c_str(), stdout);
    return true;
}

uint64_t default_seed() {
    const char* env = std::getenv("DRIVEPERC_SEED");
    if (!env) return 0;
    return std::strtoull(env, nullptr, 10);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"from-scratch driving perception toolkit"};
    app.require_subcommand(1);

    // lane-detect
    auto* lane = app.add_subcommand("lane-detect", "run the classical lane pipeline over images");
    std::string lane_input, lane_output = ".";
    bool lane_stages = false;
    int lane_jobs = 1;
    CommonOpts lane_opts;
    lane->add_option("--input", lane_input, "input .ppm file or directory")->required();
    lane->add_option("--output", lane_output, "output directory");
    lane->add_flag("--stages", lane_stages, "write per-stage intermediate images");
    lane->add_option("--jobs", lane_jobs, "parallel frame workers");
    add_common(lane, lane_opts);

    // train
    auto* train = app.add_subcommand("train", "train a factory model on a dataset");
    std::string train_task, train_data, train_out = "model.nnw";
    uint64_t train_seed = default_seed();
    CommonOpts train_opts;
    train->add_option("--task", train_task, "signs|clone|segment|vehicles")->required();
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "checkpoint output path");
    train->add_option("--seed", train_seed, "random seed (default $DRIVEPERC_SEED or 0)");
    add_common(train, train_opts);

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint and write a metrics report");
    std::string eval_task, eval_data, eval_ckpt, eval_report = "report.txt", eval_format = "text";
    CommonOpts eval_opts;
    eval->add_option("--task", eval_task, "signs|clone|segment|vehicles")->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval->add_option("--report", eval_report, "report output path");
    eval->add_option("--format", eval_format, "text|csv");
    add_common(eval, eval_opts);

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    uint64_t gc_seed = default_seed();
    int gc_rounds = 20;
    gradcheck->add_option("--seed", gc_seed, "random seed");
    gradcheck->add_option("--rounds", gc_rounds, "random seeds per case");

    // preprocess
    auto* preprocess = app.add_subcommand("preprocess", "materialize preprocessed driving tensors");
    std::string pp_task = "clone", pp_log, pp_images, pp_out;
    CommonOpts pp_opts;
    preprocess->add_option("--task", pp_task, "only 'clone' is supported");
    preprocess->add_option("--log", pp_log, "driving_log.csv path")->required();
    preprocess->add_option("--images", pp_images, "image directory the log paths resolve against")->required();
    preprocess->add_option("--out", pp_out, "output directory")->required();
    add_common(preprocess, pp_opts);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with known ground truth");
    std::string synth_task, synth_out;
    int synth_n = 10;
    uint64_t synth_seed = default_seed();
    synth->add_option("--task", synth_task, "signs|vehicles|segmentation|lanes")->required();
    synth->add_option("--n", synth_n, "count (per class where classes exist)");
    synth->add_option("--seed", synth_seed, "random seed");
    synth->add_option("--out", synth_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (lane->parsed()) {
        ConfigPtr cfg = make_config(lane_opts);
        if (maybe_dump(lane_opts, cfg)) return 0;
        dp_lane_summary summary{};
        const dp_status s = dp_lane_detect(cfg.get(), lane_input.c_str(), lane_output.c_str(),
                                           lane_stages ? 1 : 0, lane_jobs, &summary);
        std::fprintf(stderr, "lane-detect: %d processed, %d failed\n", summary.processed, summary.failed);
        if (s == DP_ERR_PARTIAL) return 2;
        if (s != DP_OK) fail("lane-detect", s);
        return 0;
    }

    if (train->parsed()) {
        ConfigPtr cfg = make_config(train_opts, train_task);
        if (maybe_dump(train_opts, cfg)) return 0;
        auto on_epoch = [](int32_t epoch, double loss, void*) {
            std::fprintf(stderr, "epoch %d loss %.6f\n", epoch, loss);
        };
        check(dp_train(cfg.get(), train_task.c_str(), train_data.c_str(), train_out.c_str(),
                       train_seed, on_epoch, nullptr),
              "train");
        return 0;
    }

    if (eval->parsed()) {
        ConfigPtr cfg = make_config(eval_opts, eval_task);
        if (maybe_dump(eval_opts, cfg)) return 0;
        check(dp_eval(cfg.get(), eval_task.c_str(), eval_data.c_str(), eval_ckpt.c_str(),
                      eval_report.c_str(), eval_format.c_str()),
              "eval");
        return 0;
    }

    if (gradcheck->parsed()) {
        double worst = 0.0;
        check(dp_gradcheck(gc_seed, gc_rounds, &worst), "gradcheck");
        std::fprintf(stderr, "gradcheck worst max_rel_err %.3e\n", worst);
        return worst < 1e-6 ? 0 : 1;
    }

    if (preprocess->parsed()) {
        if (pp_task != "clone") {
            std::fprintf(stderr, "driveperc: preprocess supports only --task clone\n");
            return 1;
        }
        ConfigPtr cfg = make_config(pp_opts);
        if (maybe_dump(pp_opts, cfg)) return 0;
        int32_t count = 0;
        check(dp_preprocess(cfg.get(), pp_log.c_str(), pp_images.c_str(), pp_out.c_str(), &count),
              "preprocess");
        std::fprintf(stderr, "preprocess: %d samples\n", count);
        return 0;
    }

    if (synth->parsed()) {
        check(dp_synth(synth_task.c_str(), synth_n, synth_seed, synth_out.c_str()), "synth");
        return 0;
    }

    return 1;
}
