#pragma once

#include "config.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hartree::cli {

struct Context {
    Config cfg;
    std::filesystem::path out;
    std::uint64_t seed = 0;
    int threads = 1;
    bool verbose = true;  // progress and check lines on the console
    std::vector<std::string> artifacts;  // names relative to out, in write order

    bool wants(const std::string& format) const;
    // Path of an artifact in the output directory; recorded in the manifest.
    std::string file(const std::string& name);
};

// One acceptance-style check carried in every summary.
struct Check {
    int criterion = 0;
    std::string name;
    bool pass = false;
    double value = 0, limit = 0;
};
nlohmann::json to_json(const std::vector<Check>& checks);

const std::vector<std::string>& subcommands();
// Runs one subcommand; returns the process exit status. Throws on validation / dependency / numerical errors.
int run_subcommand(const std::string& name, Context& ctx);

}  // namespace hartree::cli
