// SPDX-License-Identifier: Apache-2.0

#include "cv/accessor.hpp"

namespace cv {

CVSpec parse_single_spec(std::string_view section_text) {
  const ConfigStore store = parse_config(section_text);
  const auto sections = store.sections();
  if (sections.size() != 1 || store.entry_count() != 0) {
    throw SpecError("expected exactly one [section], got " + std::to_string(sections.size()));
  }
  return make_spec(*sections.front());
}

}  // namespace cv
