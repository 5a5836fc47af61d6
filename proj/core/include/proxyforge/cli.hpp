#pragma once

#include <string>
#include <vector>

namespace proxyforge::cli {

/// Entry point behind the proxyforge binary. Subcommands:
///   bench build --n <k> --steps <t> --seed <s> --out <path>
///   search run    --bench <path> [--config <path>] --out <path>
///   search random --bench <path> [--config <path>] --out <path>
///   proxy eval --proxy <id|expr> --bench <path> --out <path>
///   report --in <paths...> --csv <path>
/// Exit codes: 0 success, 1 usage error, 2 data error.
int run(const std::vector<std::string>& args);

int run(int argc, const char* const* argv);

}  // namespace proxyforge::cli
