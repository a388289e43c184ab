#pragma once

#include <string>

#include "mapcontent/config.hpp"

namespace mapcontent {

struct RunOutcome {
    int exit_code = 0;          // 0 ok, 1 error, 2 structured failure
    std::string manifest;       // JSON text, also written to <out_dir>/run-manifest.json
};

/// Executes one CLI command. Artifacts (JSON, CSV, SVG) land under the
/// config's out_dir; the same config and seed produce byte-identical output
/// at any thread count.
RunOutcome run_command(const RunConfig& config);

}  // namespace mapcontent
