// SPDX-License-Identifier: Apache-2.0

#include "cv/keypath.hpp"

#include "cv/error.hpp"

namespace cv {
namespace {

bool is_blank(char c) noexcept { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

void check_segment_text(std::string_view seg, std::string_view whole) {
  if (seg.empty()) {
    throw ParseError(0, "empty segment in key '" + std::string(whole) + "'");
  }
  if (is_blank(seg.front()) || is_blank(seg.back())) {
    throw ParseError(0, "segment with surrounding whitespace in key '" + std::string(whole) + "'");
  }
  for (char c : seg) {
    if (c == '[' || c == ']' || c == '=' || c == '\n' || c == '\r') {
      throw ParseError(0, std::string("forbidden character '") + c + "' in key '" + std::string(whole) + "'");
    }
  }
}

}  // namespace

std::string Segment::str() const {
  switch (kind) {
    case Kind::wildcard:
      return "*";
    case Kind::placeholder:
      return "%" + text + "%";
    case Kind::literal:
      break;
  }
  return text;
}

KeyPath KeyPath::parse(std::string_view text) {
  if (text.empty()) {
    throw ParseError(0, "empty key");
  }
  if (text.front() == '#') {
    throw ParseError(0, "key may not start with '#': '" + std::string(text) + "'");
  }
  std::vector<Segment> segments;
  std::size_t start = 0;
  while (true) {
    const std::size_t slash = text.find('/', start);
    const std::string_view seg = text.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
    check_segment_text(seg, text);
    if (seg == "*") {
      segments.push_back(Segment::wildcard());
    } else if (seg.size() >= 2 && seg.front() == '%' && seg.back() == '%') {
      const std::string_view name = seg.substr(1, seg.size() - 2);
      if (name.empty() || name.find('%') != std::string_view::npos) {
        throw ParseError(0, "malformed placeholder '" + std::string(seg) + "' in key '" + std::string(text) + "'");
      }
      check_segment_text(name, text);
      segments.push_back(Segment::placeholder(std::string(name)));
    } else {
      segments.push_back(Segment::literal(std::string(seg)));
    }
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return KeyPath(std::move(segments));
}

bool KeyPath::has_placeholders() const noexcept {
  for (const auto& s : segments_) {
    if (s.is_placeholder()) return true;
  }
  return false;
}

std::vector<std::string> KeyPath::placeholder_names() const {
  std::vector<std::string> names;
  for (const auto& s : segments_) {
    if (s.is_placeholder()) names.push_back(s.text);
  }
  return names;
}

std::string KeyPath::last_literal() const {
  for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
    if (it->is_literal()) return it->text;
  }
  return {};
}

std::string KeyPath::literal_name() const {
  std::string out;
  for (const auto& s : segments_) {
    if (!s.is_literal()) continue;
    if (!out.empty()) out += '/';
    out += s.text;
  }
  return out;
}

bool KeyPath::matches(const KeyPath& concrete) const {
  if (concrete.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    const Segment& p = segments_[i];
    if (p.is_placeholder()) continue;
    if (p != concrete.segments_[i]) return false;
  }
  return true;
}

std::string KeyPath::str() const {
  std::string out;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (i != 0) out += '/';
    out += segments_[i].str();
  }
  return out;
}

bool is_storable_value(std::string_view text) noexcept {
  if (!text.empty() && (is_blank(text.front()) || is_blank(text.back()))) return false;
  return text.find_first_of("\r\n") == std::string_view::npos;
}

std::string_view trim(std::string_view text) noexcept {
  while (!text.empty() && is_blank(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_blank(text.back())) text.remove_suffix(1);
  return text;
}

}  // namespace cv
