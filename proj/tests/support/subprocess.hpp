#pragma once

#include <string>

namespace testutil {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr interleaved
};

// Runs a shell command, capturing combined output.
RunResult run_command(const std::string& command);

// Byte-level file equality.
bool files_identical(const std::string& a, const std::string& b);

std::string read_file(const std::string& path);

} // namespace testutil
