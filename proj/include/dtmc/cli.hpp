#pragma once

#include <string>
#include <vector>

namespace dtmc {

/// Run the dtmc command line. `args` excludes the program name.
/// Exit codes: 0 success, 2 usage or configuration error, 3 empty data,
/// 4 calibration failure, 1 unexpected error.
int run_cli(std::vector<std::string> args);

}
