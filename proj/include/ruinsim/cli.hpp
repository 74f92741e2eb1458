#pragma once

// Subcommand dispatch: runs one pipeline from a RunConfig and writes
// report.json, effective_config.json and CSV tables into the output directory.

#include <string>
#include <vector>

#include "ruinsim/config.hpp"

namespace ruinsim {

enum ExitStatus : int { kExitPass = 0, kExitError = 1, kExitStatFail = 2 };

const std::vector<std::string>& subcommands();

/// Returns kExitPass or kExitStatFail; module errors propagate as exceptions.
int run(const std::string& subcommand, const RunConfig& cfg, const std::string& out_dir);

}  // namespace ruinsim
