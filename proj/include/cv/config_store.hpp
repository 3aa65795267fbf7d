// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "cv/keypath.hpp"

namespace cv {

/// `key = value` line. Keys never contain placeholders.
struct ConfigEntry {
  std::string key;
  std::string value;

  friend bool operator==(const ConfigEntry&, const ConfigEntry&) = default;
};

/// `[key]` header followed by `name := value` property lines.
struct SpecSection {
  KeyPath key;
  std::vector<std::pair<std::string, std::string>> properties;

  const std::string* property(std::string_view name) const;

  friend bool operator==(const SpecSection&, const SpecSection&) = default;
};

/// In-memory key-value database: configuration entries and specification
/// sections, kept in file order so serialization round-trips.
class ConfigStore {
 public:
  using Item = std::variant<ConfigEntry, SpecSection>;

  const std::vector<Item>& items() const noexcept { return items_; }
  bool empty() const noexcept { return items_.empty(); }
  std::size_t entry_count() const noexcept { return index_.size(); }
  std::size_t section_count() const noexcept { return items_.size() - index_.size(); }

  /// Exact match on the rendered key; `*` segments are not expanded here.
  const std::string* lookup(const std::string& key) const;

  /// Inserts at the end or replaces in place. Throws ParseError for keys with
  /// placeholders or values that would not survive a write/read cycle.
  void set(std::string_view key, std::string value);
  bool erase(const std::string& key);

  /// Throws ParseError if a section with the same key exists.
  void add_section(SpecSection section);
  std::vector<const SpecSection*> sections() const;
  std::vector<const ConfigEntry*> entries() const;

  friend bool operator==(const ConfigStore& a, const ConfigStore& b) { return a.items_ == b.items_; }

 private:
  friend ConfigStore parse_config(std::string_view text);
  void push_entry(ConfigEntry entry, std::size_t line);
  void reindex();

  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

using StorePtr = std::shared_ptr<const ConfigStore>;

/// Line grammar: `#` comments and blank lines are skipped, `[key]` opens a
/// section, `name := value` adds a property to the latest section, and
/// `key = value` adds an entry. Keys, names and values are trimmed.
ConfigStore parse_config(std::string_view text);

/// Canonical text: `key = value`, `[key]`, `name := value`, one per line.
/// Empty values are written as `key =` and `name :=`.
std::string serialize_config(const ConfigStore& store);

/// Per-item three-way merge. Entries are identified by key, sections by
/// `[key]`; an absent item is a distinct state from an empty value.
/// Throws ConflictError listing every key changed differently on both sides.
ConfigStore three_way_merge(const ConfigStore& base, const ConfigStore& ours, const ConfigStore& theirs);

}  // namespace cv
