// SPDX-License-Identifier: Apache-2.0

#include "cv/config_store.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "cv/error.hpp"

namespace cv {

const std::string* SpecSection::property(std::string_view name) const {
  for (const auto& [k, v] : properties) {
    if (k == name) return &v;
  }
  return nullptr;
}

const std::string* ConfigStore::lookup(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) return nullptr;
  return &std::get<ConfigEntry>(items_[it->second]).value;
}

void ConfigStore::set(std::string_view key, std::string value) {
  const KeyPath path = KeyPath::parse(key);
  if (path.has_placeholders()) {
    throw ParseError(0, "placeholder in configuration key '" + std::string(key) + "'");
  }
  if (!is_storable_value(value)) {
    throw ParseError(0, "value for '" + std::string(key) + "' has line breaks or surrounding whitespace");
  }
  std::string rendered = path.str();
  if (const auto it = index_.find(rendered); it != index_.end()) {
    std::get<ConfigEntry>(items_[it->second]).value = std::move(value);
    return;
  }
  index_.emplace(rendered, items_.size());
  items_.emplace_back(ConfigEntry{std::move(rendered), std::move(value)});
}

bool ConfigStore::erase(const std::string& key) {
  const auto it = index_.find(key);
  if (it == index_.end()) return false;
  items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(it->second));
  reindex();
  return true;
}

void ConfigStore::add_section(SpecSection section) {
  for (const auto& item : items_) {
    if (const auto* s = std::get_if<SpecSection>(&item); s != nullptr && s->key == section.key) {
      throw ParseError(0, "duplicate section [" + section.key.str() + "]");
    }
  }
  items_.emplace_back(std::move(section));
}

std::vector<const SpecSection*> ConfigStore::sections() const {
  std::vector<const SpecSection*> out;
  for (const auto& item : items_) {
    if (const auto* s = std::get_if<SpecSection>(&item)) out.push_back(s);
  }
  return out;
}

std::vector<const ConfigEntry*> ConfigStore::entries() const {
  std::vector<const ConfigEntry*> out;
  for (const auto& item : items_) {
    if (const auto* e = std::get_if<ConfigEntry>(&item)) out.push_back(e);
  }
  return out;
}

void ConfigStore::push_entry(ConfigEntry entry, std::size_t line) {
  if (!index_.emplace(entry.key, items_.size()).second) {
    throw ParseError(line, "duplicate key '" + entry.key + "'");
  }
  items_.emplace_back(std::move(entry));
}

void ConfigStore::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (const auto* e = std::get_if<ConfigEntry>(&items_[i])) index_.emplace(e->key, i);
  }
}

ConfigStore parse_config(std::string_view text) {
  ConfigStore store;
  std::optional<std::size_t> current;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line_no;
    const std::size_t eol = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;

    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError(line_no, "section header without closing ']'");
        const std::string_view inner = trim(line.substr(1, line.size() - 2));
        SpecSection section{KeyPath::parse(inner), {}};
        store.add_section(std::move(section));
        current = store.items_.size() - 1;
        continue;
      }

      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError(line_no, "expected '=', ':=' or '[key]'");

      if (eq > 0 && line[eq - 1] == ':') {
        if (!current) throw ParseError(line_no, "property outside of any [section]");
        auto& section = std::get<SpecSection>(store.items_[*current]);
        const std::string_view name = trim(line.substr(0, eq - 1));
        if (name.empty()) throw ParseError(line_no, "empty property name");
        if (section.property(name) != nullptr) {
          throw ParseError(line_no, "duplicate property '" + std::string(name) + "'");
        }
        section.properties.emplace_back(std::string(name), std::string(trim(line.substr(eq + 1))));
        continue;
      }

      const std::string_view key_text = trim(line.substr(0, eq));
      const KeyPath key = KeyPath::parse(key_text);
      if (key.has_placeholders()) throw ParseError(line_no, "placeholder in configuration key '" + key.str() + "'");
      store.push_entry(ConfigEntry{key.str(), std::string(trim(line.substr(eq + 1)))}, line_no);
    } catch (const ParseError& e) {
      if (e.line() != 0) throw;
      throw ParseError(line_no, e.what());
    }
  }
  return store;
}

std::string serialize_config(const ConfigStore& store) {
  std::string out;
  for (const auto& item : store.items()) {
    if (const auto* e = std::get_if<ConfigEntry>(&item)) {
      out += e->key;
      out += e->value.empty() ? " =" : " = ";
      out += e->value;
      out += '\n';
      continue;
    }
    const auto& s = std::get<SpecSection>(item);
    out += '[';
    out += s.key.str();
    out += "]\n";
    for (const auto& [name, value] : s.properties) {
      out += name;
      out += value.empty() ? " :=" : " := ";
      out += value;
      out += '\n';
    }
  }
  return out;
}

namespace {

std::string identity(const ConfigStore::Item& item) {
  if (const auto* e = std::get_if<ConfigEntry>(&item)) return e->key;
  return "[" + std::get<SpecSection>(item).key.str() + "]";
}

std::map<std::string, const ConfigStore::Item*> by_identity(const ConfigStore& store) {
  std::map<std::string, const ConfigStore::Item*> out;
  for (const auto& item : store.items()) out.emplace(identity(item), &item);
  return out;
}

bool same(const ConfigStore::Item* a, const ConfigStore::Item* b) {
  if (a == nullptr || b == nullptr) return a == b;
  return *a == *b;
}

const ConfigStore::Item* find(const std::map<std::string, const ConfigStore::Item*>& m, const std::string& key) {
  const auto it = m.find(key);
  return it == m.end() ? nullptr : it->second;
}

}  // namespace

ConfigStore three_way_merge(const ConfigStore& base, const ConfigStore& ours, const ConfigStore& theirs) {
  if (ours == base) return theirs;
  if (theirs == base) return ours;

  const auto b = by_identity(base);
  const auto o = by_identity(ours);
  const auto t = by_identity(theirs);

  std::set<std::string> keys;
  for (const auto* m : {&b, &o, &t}) {
    for (const auto& kv : *m) keys.insert(kv.first);
  }

  std::map<std::string, const ConfigStore::Item*> resolved;
  std::vector<std::string> conflicts;
  for (const auto& key : keys) {
    const auto* bi = find(b, key);
    const auto* oi = find(o, key);
    const auto* ti = find(t, key);
    const ConfigStore::Item* pick = nullptr;
    if (same(oi, bi)) {
      pick = ti;
    } else if (same(ti, bi) || same(oi, ti)) {
      pick = oi;
    } else {
      conflicts.push_back(key);
      continue;
    }
    if (pick != nullptr) resolved.emplace(key, pick);
  }
  if (!conflicts.empty()) throw ConflictError(std::move(conflicts));

  // Surviving base items keep base order; additions follow in key order, which
  // keeps the result independent of which side is "ours".
  ConfigStore result;
  auto append = [&result](const ConfigStore::Item& item) {
    if (const auto* e = std::get_if<ConfigEntry>(&item)) {
      result.set(e->key, e->value);
    } else {
      result.add_section(std::get<SpecSection>(item));
    }
  };
  for (const auto& item : base.items()) {
    const std::string key = identity(item);
    if (const auto it = resolved.find(key); it != resolved.end()) {
      append(*it->second);
      resolved.erase(it);
    }
  }
  for (const auto& [key, item] : resolved) append(*item);
  return result;
}

}  // namespace cv
