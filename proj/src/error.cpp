// SPDX-License-Identifier: Apache-2.0

#include "cv/error.hpp"

namespace cv {
namespace {

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i != 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

CycleError::CycleError(std::vector<std::string> cycle)
    : Error("dependency cycle: " + join(cycle, " -> ")), cycle_(std::move(cycle)) {}

ConflictError::ConflictError(std::vector<std::string> keys)
    : Error("merge conflict on: " + join(keys, ", ")), keys_(std::move(keys)) {}

}  // namespace cv
