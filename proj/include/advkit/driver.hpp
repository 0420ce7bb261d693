#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace advkit {

struct RunOptions {
    std::string config_path;
    std::string out_dir;  // empty: use the config's "out"
    std::optional<std::uint64_t> seed;
    std::optional<int> precision;
    std::optional<int> threads;
};

// Dispatches one CLI subcommand: train, attack, analyze or report.
void run_command(const std::string& command, const RunOptions& opts);

} // namespace advkit
