// Command-line front end for the saliency-guided multi-stream video
// classification pipeline. Stages persist their artifacts under the work
// directory; progress goes to stderr, results to files (and accuracy to
// stdout for `evaluate`).

#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "vsal/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"saliency-guided multi-stream video classification pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string data_root = "data";
    std::string work_root = "work";
    long long seed = -1;
    int jobs = -1;
    app.add_option("--config", config_path, "pipeline config file (key = value sections)");
    app.add_option("--data", data_root, "dataset root directory");
    app.add_option("--work", work_root, "artifact/work directory");
    app.add_option("--seed", seed, "override pipeline.seed");
    app.add_option("--jobs", jobs, "override pipeline.jobs (videos processed in parallel)");

    std::string train_stream = "sal3d";
    CLI::App* train = nullptr;
    for (const char* verb : {"ingest", "flow", "egomotion", "saliency", "train", "score",
                             "learn-weights", "predict", "evaluate", "synth-make"}) {
        CLI::App* sub = app.add_subcommand(verb);
        if (std::string(verb) == "train") {
            train = sub;
            train->add_option("--stream", train_stream, "sal3d | flow3d | bg2d")->required();
        }
    }

    CLI11_PARSE(app, argc, argv);

    try {
        vsal::StageContext ctx;
        ctx.data_root = data_root;
        ctx.work_root = work_root;
        if (!config_path.empty()) ctx.config = vsal::load_config(config_path);
        if (seed >= 0) ctx.config.seed = static_cast<std::uint64_t>(seed);
        if (jobs >= 1) ctx.config.jobs = jobs;

        if (train && train->parsed()) {
            if (train_stream == "sal3d")
                ctx.train_stream = vsal::StreamKind::SalientFrames3D;
            else if (train_stream == "flow3d")
                ctx.train_stream = vsal::StreamKind::SalientFlow3D;
            else if (train_stream == "bg2d")
                ctx.train_stream = vsal::StreamKind::Background2D;
            else {
                fprintf(stderr, "unknown stream: %s\n", train_stream.c_str());
                return 1;
            }
        }

        std::string stage = app.get_subcommands().front()->get_name();
        fprintf(stderr, "running stage %s\n", stage.c_str());
        vsal::run_stage(stage, ctx);
        fprintf(stderr, "stage %s done\n", stage.c_str());
        return 0;
    } catch (const vsal::DependencyError& e) {
        fprintf(stderr, "dependency error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
