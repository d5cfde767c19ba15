#pragma once

#include <iosfwd>

namespace dvoc {

/// Entry point of the dvocsim command. Returns 0 on success, 2 on invalid
/// input, 3 on numeric failure; errors go to `err` as one JSON object.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dvoc
