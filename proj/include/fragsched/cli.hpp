#pragma once

#include <iosfwd>

namespace fragsched {

/// Entry point for the `fragsched` tool. Subcommands: plan, simulate,
/// compare, synth-profile. Returns 0 on success, 1 on usage, I/O or
/// validation errors, 2 when planning is infeasible.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fragsched
