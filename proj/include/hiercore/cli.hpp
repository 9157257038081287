#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "hiercore/synth.hpp"
#include "json.hpp"

namespace hiercore::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kData = 3,
    kIo = 4,
};

// Environment variable naming the default output directory.
inline constexpr const char* kOutputEnv = "HIERCORE_OUTPUT_DIR";

struct RunConfig {
    std::string command;
    std::string archive;
    std::string bank;
    std::string output;
    double ratio = 0.10;
    std::uint64_t seed = 0;
    std::uint32_t projection_dim = 0;
    std::string mode = "pseudo";
    std::string scenario = "uk";
    std::string grouping;  // empty: derived from the scenario
    bool smoothing = false;
    double smoothing_sigma = 4.0;
    double fpr_cap = 0.3;
    std::size_t threads = 0;
    bool write_maps = false;
    bool unlabeled = false;
    SynthSpec synth;
};

// Keys not present in `j` keep their current value; unknown keys are a
// usage error.
void apply_config_json(RunConfig& config, const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

// Runs one command line (args excludes the program name). Data goes to
// files, logs and the final error line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hiercore::cli
