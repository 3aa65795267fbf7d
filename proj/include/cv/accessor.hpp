// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>

#include "cv/context.hpp"
#include "cv/error.hpp"

namespace cv {

template <class T>
constexpr ValueType value_type_of() {
  if constexpr (std::is_same_v<T, std::string>) {
    return ValueType::string;
  } else if constexpr (std::is_same_v<T, std::int64_t>) {
    return ValueType::long_;
  } else if constexpr (std::is_same_v<T, double>) {
    return ValueType::double_;
  } else {
    static_assert(std::is_same_v<T, bool>, "unsupported contextual value type");
    return ValueType::boolean;
  }
}

/// Parses text holding exactly one `[key]` section into a CVSpec.
CVSpec parse_single_spec(std::string_view section_text);

/// Typed front end over a ContextualValue; base class of generated accessors.
template <class T>
class Accessor {
 public:
  explicit Accessor(std::string_view section_text) : cv_(parse_single_spec(section_text)) {
    if (cv_.spec().type != value_type_of<T>()) {
      throw SpecError("[" + cv_.spec().key.str() + "] is declared as " + std::string(type_name(cv_.spec().type)));
    }
  }

  Accessor(const Accessor&) = delete;
  Accessor& operator=(const Accessor&) = delete;

  const T& get() const noexcept { return *std::get_if<T>(&cv_.read()); }
  operator const T&() const noexcept { return get(); }  // NOLINT

  Accessor& operator=(const T& value) {
    context().assign(cv_, value);
    return *this;
  }

  void bind(Context& ctx) { ctx.add(cv_); }
  void activate() { context().activate(cv_); }
  void deactivate() { context().deactivate(cv_); }
  bool activated() const noexcept { return cv_.activated(); }

  const std::string& layer_name() const noexcept { return cv_.layer_name(); }
  ContextualValue& value() noexcept { return cv_; }
  const ContextualValue& value() const noexcept { return cv_; }

 private:
  Context& context() {
    if (cv_.context() == nullptr) throw Error("[" + cv_.spec().key.str() + "] is not bound to a context");
    return *cv_.context();
  }

  ContextualValue cv_;
};

}  // namespace cv
