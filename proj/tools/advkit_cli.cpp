// Command-line driver. Talks to the toolkit exclusively through the C API in
// advkit.h, the same surface other language bindings would use.
#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "advkit.h"

namespace {

struct CommonFlags {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool has_seed = false;
    int precision = 0;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", flags.out, "output directory (overrides the config)");
    cmd->add_option("--seed", flags.seed, "root seed (overrides the config)")
        ->each([&flags](const std::string&) { flags.has_seed = true; });
    cmd->add_option("--precision", flags.precision, "working precision")
        ->check(CLI::IsMember({32, 64}));
    cmd->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
}

int dispatch(const char* command, const CommonFlags& flags) {
    advk_run_options opts{};
    opts.out_dir = flags.out.empty() ? nullptr : flags.out.c_str();
    opts.has_seed = flags.has_seed ? 1 : 0;
    opts.seed = flags.seed;
    opts.precision = flags.precision;
    opts.threads = flags.threads;
    const advk_status status = advk_run_command(command, flags.config.c_str(), &opts);
    if (status != ADVK_OK) {
        std::fprintf(stderr, "advkit %s failed: %s\n", command, advk_last_error());
        return static_cast<int>(status);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"advkit: gradient-based adversarial attacks, desk-scale victim models and "
                 "robustness diagnostics"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(advk_version()));

    CommonFlags train_flags, attack_flags, analyze_flags, report_flags;
    CLI::App* train = app.add_subcommand("train", "train victim models and save weight files");
    add_common(train, train_flags);
    CLI::App* attack =
        app.add_subcommand("attack", "run the configured attacks and emit results.csv");
    add_common(attack, attack_flags);
    CLI::App* analyze =
        app.add_subcommand("analyze", "compute diagnostics over attack results");
    add_common(analyze, analyze_flags);
    CLI::App* report = app.add_subcommand("report", "render CSV summary tables");
    add_common(report, report_flags);

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) return dispatch("train", train_flags);
    if (attack->parsed()) return dispatch("attack", attack_flags);
    if (analyze->parsed()) return dispatch("analyze", analyze_flags);
    if (report->parsed()) return dispatch("report", report_flags);
    return 1;
}
