// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

namespace cv {

enum class ValueType { string, long_, double_, boolean };

/// Value of a contextual value: text, 64-bit integer, double or boolean.
using TypedValue = std::variant<std::string, std::int64_t, double, bool>;

/// `string`, `long`, `double` or `boolean`; throws SpecError otherwise.
ValueType parse_value_type(std::string_view name);
std::string_view type_name(ValueType type) noexcept;
ValueType type_of(const TypedValue& value) noexcept;

/// Decimal for long, shortest round-trip text for double, `0`/`1` for boolean.
std::string to_text(const TypedValue& value);

/// Inverse of to_text. An empty text yields the type's zero value so that
/// unset entries and empty defaults are readable for every type.
/// Throws TypeError on malformed or out-of-range text.
TypedValue from_text(ValueType type, std::string_view text);

}  // namespace cv
