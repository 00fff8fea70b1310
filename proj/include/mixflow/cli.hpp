#pragma once

#include <ostream>

namespace mixflow {

/// Entry point of the `mixflow` tool. Returns 0 on success, 2 on usage or
/// validation errors and 1 when a run fails; errors are reported on `err` as
/// a single line `error: <kind>: <message>`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mixflow
