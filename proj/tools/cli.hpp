#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tsgmm::cli {

/// Runs one command. Returns the process exit code: 0 on success, 2 for
/// configuration or input errors, 3 for numerical failures. Errors are
/// reported as a single "error: <kind>: <message>" line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsgmm::cli
