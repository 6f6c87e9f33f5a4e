#pragma once

#include <ostream>
#include <string>

namespace cylheat {

enum ExitCode : int { kExitPass = 0, kExitCheckFailure = 2, kExitConfigError = 3, kExitNumericFailure = 4 };

struct RunOptions {
    std::string command;  // density, parametrix, verify, simulate, report
    std::string config_path;
    std::string out_dir;  // overrides CYLHEAT_OUT_DIR and the config
    int threads = 0;      // 0: take the config value
    bool refine = false;  // force the refined table even if the config disables it
};

// Runs one stage, writing artifacts into the output directory. Errors are
// reported on `log` and in error.json; the return value is an ExitCode.
int run(const RunOptions& options, std::ostream& log);

}  // namespace cylheat
