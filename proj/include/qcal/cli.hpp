#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qcal::cli {

/// Parses and runs one command line (argv without the program name) and
/// returns the process exit status. Everything human-readable goes to the
/// given streams, so tests can drive the whole surface in process.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qcal::cli
