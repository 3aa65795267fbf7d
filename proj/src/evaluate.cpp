// SPDX-License-Identifier: Apache-2.0

#include "cv/context.hpp"

namespace cv {

Evaluation evaluate(const CVSpec& spec, const LayerMap& layers, const ConfigStore& store) {
  const auto& segments = spec.key.segments();
  std::vector<std::string_view> parts;
  parts.reserve(segments.size());
  // Segment indices holding an active layer's value, left to right.
  std::vector<std::size_t> substituted;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    if (seg.is_literal()) {
      parts.emplace_back(seg.text);
    } else if (seg.is_wildcard()) {
      parts.emplace_back("*");
    } else {
      const auto it = layers.find(seg.text);
      if (it != layers.end() && !it->second.empty()) {
        parts.emplace_back(it->second);
        substituted.push_back(i);
      } else {
        parts.emplace_back("*");
      }
    }
  }

  auto join = [&parts] {
    std::string out;
    std::size_t len = parts.size();
    for (auto p : parts) len += p.size();
    out.reserve(len);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i != 0) out += '/';
      out += parts[i];
    }
    return out;
  };

  Evaluation ev;
  ev.key = join();
  const std::string* found = store.lookup(ev.key);
  if (found != nullptr) {
    ev.matched_key = ev.key;
  } else {
    for (auto it = substituted.rbegin(); it != substituted.rend() && found == nullptr; ++it) {
      parts[*it] = "*";
      std::string candidate = join();
      found = store.lookup(candidate);
      if (found != nullptr) ev.matched_key = std::move(candidate);
    }
  }
  ev.value = from_text(spec.type, found != nullptr ? *found : spec.default_value);
  return ev;
}

}  // namespace cv
