// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cv {

/// One `/`-separated component of a key.
struct Segment {
  enum class Kind { literal, wildcard, placeholder };

  Kind kind = Kind::literal;
  /// Literal text, or the placeholder's layer name. Empty for wildcards.
  std::string text;

  static Segment literal(std::string text) { return {Kind::literal, std::move(text)}; }
  static Segment wildcard() { return {Kind::wildcard, {}}; }
  static Segment placeholder(std::string name) { return {Kind::placeholder, std::move(name)}; }

  bool is_literal() const noexcept { return kind == Kind::literal; }
  bool is_wildcard() const noexcept { return kind == Kind::wildcard; }
  bool is_placeholder() const noexcept { return kind == Kind::placeholder; }

  /// `*`, `%name%`, or the literal text.
  std::string str() const;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Hierarchical key such as `greeting/%language%` or `greeting/*`.
///
/// A segment equal to `*` is a wildcard and a segment of the form `%name%`
/// is a placeholder; anything else is literal. Keys are never empty and
/// segments never carry whitespace at their edges, `[`, `]`, `=`, or line
/// breaks, so every key can be written back to a configuration file.
class KeyPath {
 public:
  KeyPath() = default;

  /// Throws ParseError on an empty key, an empty segment, or a forbidden character.
  static KeyPath parse(std::string_view text);

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return segments_.size(); }
  bool empty() const noexcept { return segments_.empty(); }

  bool has_placeholders() const noexcept;
  std::vector<std::string> placeholder_names() const;

  /// Last literal segment, or an empty string if there is none.
  std::string last_literal() const;

  /// Literal segments only, joined with `/` (placeholders and wildcards dropped).
  std::string literal_name() const;

  /// True if `concrete` could be produced from this pattern by substituting
  /// placeholders; literals and wildcards must match exactly.
  bool matches(const KeyPath& concrete) const;

  std::string str() const;

  friend bool operator==(const KeyPath&, const KeyPath&) = default;

 private:
  explicit KeyPath(std::vector<Segment> segments) : segments_(std::move(segments)) {}

  std::vector<Segment> segments_;
};

/// True if `text` has no leading or trailing blanks and no line breaks.
bool is_storable_value(std::string_view text) noexcept;

std::string_view trim(std::string_view text) noexcept;

}  // namespace cv
