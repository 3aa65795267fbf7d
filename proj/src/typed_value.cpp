// SPDX-License-Identifier: Apache-2.0

#include "cv/typed_value.hpp"

#include <charconv>
#include <cmath>

#include "cv/error.hpp"

namespace cv {

ValueType parse_value_type(std::string_view name) {
  if (name == "string") return ValueType::string;
  if (name == "long") return ValueType::long_;
  if (name == "double") return ValueType::double_;
  if (name == "boolean") return ValueType::boolean;
  throw SpecError("unknown type '" + std::string(name) + "'");
}

std::string_view type_name(ValueType type) noexcept {
  switch (type) {
    case ValueType::string:
      return "string";
    case ValueType::long_:
      return "long";
    case ValueType::double_:
      return "double";
    case ValueType::boolean:
      return "boolean";
  }
  return "string";
}

ValueType type_of(const TypedValue& value) noexcept { return static_cast<ValueType>(value.index()); }

std::string to_text(const TypedValue& value) {
  switch (value.index()) {
    case 0:
      return std::get<std::string>(value);
    case 1:
      return std::to_string(std::get<std::int64_t>(value));
    case 2: {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, std::get<double>(value));
      return std::string(buf, res.ptr);
    }
    default:
      return std::get<bool>(value) ? "1" : "0";
  }
}

TypedValue from_text(ValueType type, std::string_view text) {
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto bad = [&](const char* what) {
    return TypeError("'" + std::string(text) + "' is not a valid " + what);
  };
  switch (type) {
    case ValueType::string:
      return std::string(text);
    case ValueType::long_: {
      if (text.empty()) return std::int64_t{0};
      std::int64_t v = 0;
      const auto res = std::from_chars(begin, end, v);
      if (res.ec != std::errc() || res.ptr != end) throw bad("long");
      return v;
    }
    case ValueType::double_: {
      if (text.empty()) return 0.0;
      double v = 0;
      const auto res = std::from_chars(begin, end, v);
      if (res.ec != std::errc() || res.ptr != end) throw bad("double");
      return v;
    }
    case ValueType::boolean:
      if (text.empty() || text == "0") return false;
      if (text == "1") return true;
      throw bad("boolean (expected 0 or 1)");
  }
  return std::string(text);
}

}  // namespace cv
