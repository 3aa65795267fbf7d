// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cv/config_store.hpp"
#include "cv/keypath.hpp"
#include "cv/typed_value.hpp"

namespace cv {

/// Specification of one contextual value, taken from a `[key]` section.
///
/// Recognized properties: `type`, `default`, `layer/name`, `layer/order`.
/// Without `layer/name` the layer is named after the key's last literal
/// segment, so `[location/country]` provides layer `country`.
struct CVSpec {
  KeyPath key;
  ValueType type = ValueType::string;
  std::string layer_name;
  std::optional<std::int64_t> order;
  std::string default_value;
  /// Placeholder names in `key`, i.e. the layers this value is evaluated under.
  std::set<std::string> dependencies;

  /// Key with placeholders dropped, e.g. `person/visits`.
  std::string name() const { return key.literal_name(); }

  friend bool operator==(const CVSpec&, const CVSpec&) = default;
};

/// Throws SpecError for an unknown type, a bad layer name or order, or a
/// default that does not convert to the type.
CVSpec make_spec(const SpecSection& section);

/// One spec per section, in file order. Throws SpecError if two specs
/// provide the same layer.
std::vector<CVSpec> extract_specs(const ConfigStore& store);

/// Edges run from the spec providing layer L to every spec with `%L%` in
/// its key. Placeholders nobody provides are external layers.
struct DependencyGraph {
  std::vector<CVSpec> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::set<std::string> external_layers;

  std::vector<std::size_t> consumers_of(std::size_t provider) const;
};

/// Throws CycleError naming one cycle (self-references included) unless
/// `allow_cycles`, which only exists so the runtime guard can be exercised.
DependencyGraph build_dependency_graph(std::vector<CVSpec> specs, bool allow_cycles = false);

struct UpdateOrder {
  std::vector<CVSpec> specs;
  std::vector<std::string> warnings;

  std::vector<std::string> layer_names() const;
};

/// Kahn's algorithm. Among ready nodes the one whose own or downstream
/// `layer/order` is smallest goes first (unset sorts last), ties broken by
/// layer name. Each preference pair that the dependencies force into the
/// opposite order produces one warning. Nodes left on a cycle (only
/// possible with allow_cycles) are appended by layer name.
std::vector<std::size_t> topo_indices(const DependencyGraph& graph, std::vector<std::string>* warnings = nullptr);
UpdateOrder topo_order(const DependencyGraph& graph);

}  // namespace cv
