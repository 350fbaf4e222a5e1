#pragma once

namespace hvt::cli {

// Entry point behind tools/main.cpp. Exit codes: 0 success, 1 runtime
// failure, 2 usage error.
int run(int argc, char** argv);

}  // namespace hvt::cli
