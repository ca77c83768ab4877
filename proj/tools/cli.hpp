// Copyright 2026 The SceneCap Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 1 runtime error, 2 usage error.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scenecap::cli {

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scenecap::cli
