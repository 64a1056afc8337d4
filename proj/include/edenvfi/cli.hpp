// command-line front end
#ifndef EDENVFI_CLI_HPP
#define EDENVFI_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace edenvfi {

// args excludes the program name. Exit codes: 0 success, 1 usage,
// 2 IO / file format, 3 numeric or contract failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace edenvfi

#endif
