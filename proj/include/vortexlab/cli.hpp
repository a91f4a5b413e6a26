#pragma once

namespace vortexlab {

// Command-line driver.  Parses `argv` (subcommand + flags), loads the JSON
// run configuration, executes the requested computation, and writes the
// output files.  Returns the process exit code: 0 on success, 2 on a
// configuration error, 3 on a numerical failure.  Callable in-process for
// testing; it never calls exit().
int cli_main(int argc, const char* const* argv);

}  // namespace vortexlab
