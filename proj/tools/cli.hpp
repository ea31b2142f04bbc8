#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aoi::cli {

/// Entry point shared by the executable and the tests. Returns the process
/// exit code: 0 on success, 1 on failed checks or runtime errors, 2 on usage
/// errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aoi::cli
