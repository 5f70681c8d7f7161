#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sentinel::cli {

// Runs one `sentinel` invocation. args[0] is the program name. Exit codes:
// 0 success, 1 usage/validation/config errors, 2 I/O errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sentinel::cli
