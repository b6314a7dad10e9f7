#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qarag::cli {

// Exit codes: 0 ok, 1 usage or configuration error, 2 runtime failure.
// args excludes the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace qarag::cli
