// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace binosplat {

/// Entry point of the `binosplat` tool. Returns 0 on success, 1 on a runtime
/// failure and 2 on a usage error; failures print one "error: <class>: ..." line.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace binosplat
