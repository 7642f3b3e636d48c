#pragma once

namespace plumekit {

// Entry point of the `plumekit` command. Returns 0 on success, 1 on a module error
// (message on stderr), 2 on a usage error.
int run_cli(int argc, char** argv);

}  // namespace plumekit
