// Command-line front end: truth / twin / criterion / determining / lab / replay.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "nse/harness.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitInstability = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config) {
    auto* c = cmd->add_option("--config", args.config_path, "experiment config file");
    if (needs_config) c->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override init.seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

nse::HarnessOptions options_of(const CommonArgs& args) {
    nse::HarnessOptions opt;
    opt.out_dir = args.out_dir;
    if (args.seed_set) opt.seed_override = args.seed;
    opt.quiet = args.quiet;
    return opt;
}

int finish(const nse::RunOutcome& out, const CommonArgs& args) {
    if (!args.quiet) {
        for (const auto& p : out.files) std::printf("wrote %s\n", p.string().c_str());
    }
    if (out.instability) {
        std::fprintf(stderr, "error: %s\n", out.message.c_str());
        return kExitInstability;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"periodic-box Navier-Stokes assimilation experiments"};
    app.require_subcommand(1);

    const char* names[] = {"truth", "twin", "criterion", "determining", "lab"};
    const char* descs[] = {"reference solution run", "nudged twin experiment",
                           "finite-observation regularity criterion scan",
                           "two-seed determining-observables experiment",
                           "interpolant-inequality constant estimation"};
    CommonArgs run_args;
    for (int i = 0; i < 5; ++i) add_common(app.add_subcommand(names[i], descs[i]), run_args, true);

    CommonArgs replay_args;
    std::string manifest_path;
    auto* replay = app.add_subcommand("replay", "re-execute a run from its manifest");
    replay->add_option("--manifest", manifest_path, "manifest.json of a previous run")
        ->required();
    add_common(replay, replay_args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitParse;
    }

    try {
        (void)nse::requested_threads();   // validated; kernels run serially

        if (replay->parsed()) {
            const nse::ReplayResult res =
                nse::replay_run(manifest_path, options_of(replay_args));
            const int code = finish(res.outcome, replay_args);
            if (code != 0) return code;
            if (res.compared) {
                if (!res.identical) {
                    std::fprintf(stderr, "replay mismatch:");
                    for (const auto& f : res.mismatches) std::fprintf(stderr, " %s", f.c_str());
                    std::fprintf(stderr, "\n");
                    return 1;
                }
                if (!replay_args.quiet) std::printf("replay identical\n");
            }
            return 0;
        }

        const std::string command = app.get_subcommands().front()->get_name();
        const nse::KeyValueConfig kv =
            nse::KeyValueConfig::parse(nse::read_file(run_args.config_path));
        const nse::RunOutcome out = nse::dispatch(command, kv, options_of(run_args));
        return finish(out, run_args);
    } catch (const nse::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitParse;
    } catch (const nse::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
