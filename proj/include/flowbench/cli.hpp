#pragma once

namespace flowbench {

// Exit codes: 0 success, 1 generic failure, 2 malformed input (message names
// the line), 3 class-selection shortfall, 4 non-finite training loss, 5
// leakage-guard rejection, 6 empty run directory.
int run_cli(int argc, char** argv);

}  // namespace flowbench
