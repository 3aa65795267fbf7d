// SPDX-License-Identifier: Apache-2.0

#include "cv/spec.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <map>
#include <tuple>

#include "cv/error.hpp"

namespace cv {

CVSpec make_spec(const SpecSection& section) {
  CVSpec spec;
  spec.key = section.key;
  const std::string where = "[" + section.key.str() + "]: ";

  if (const auto* type = section.property("type")) {
    try {
      spec.type = parse_value_type(*type);
    } catch (const SpecError& e) {
      throw SpecError(where + e.what());
    }
  }

  if (const auto* name = section.property("layer/name")) {
    spec.layer_name = *name;
  } else {
    spec.layer_name = section.key.last_literal();
  }
  if (spec.layer_name.empty()) throw SpecError(where + "no layer name (key has no literal segment)");
  if (spec.layer_name.find_first_of("/%") != std::string::npos) {
    throw SpecError(where + "layer name '" + spec.layer_name + "' contains '/' or '%'");
  }

  if (const auto* order = section.property("layer/order")) {
    std::int64_t value = 0;
    const auto res = std::from_chars(order->data(), order->data() + order->size(), value);
    if (order->empty() || res.ec != std::errc() || res.ptr != order->data() + order->size()) {
      throw SpecError(where + "layer/order '" + *order + "' is not an integer");
    }
    spec.order = value;
  }

  if (const auto* def = section.property("default")) spec.default_value = *def;
  try {
    from_text(spec.type, spec.default_value);
  } catch (const TypeError& e) {
    throw SpecError(where + "default: " + e.what());
  }

  for (auto& name : section.key.placeholder_names()) spec.dependencies.insert(std::move(name));
  return spec;
}

std::vector<CVSpec> extract_specs(const ConfigStore& store) {
  std::vector<CVSpec> specs;
  std::map<std::string, std::string> providers;
  for (const auto* section : store.sections()) {
    CVSpec spec = make_spec(*section);
    const auto [it, inserted] = providers.emplace(spec.layer_name, spec.key.str());
    if (!inserted) {
      throw SpecError("layer '" + spec.layer_name + "' provided by both [" + it->second + "] and [" + spec.key.str() + "]");
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<std::size_t> DependencyGraph::consumers_of(std::size_t provider) const {
  std::vector<std::size_t> out;
  for (const auto& [from, to] : edges) {
    if (from == provider) out.push_back(to);
  }
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> adjacency(const DependencyGraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.nodes.size());
  for (const auto& [from, to] : g.edges) adj[from].push_back(to);
  for (auto& out : adj) {
    std::sort(out.begin(), out.end(), [&g](std::size_t a, std::size_t b) {
      return g.nodes[a].layer_name < g.nodes[b].layer_name;
    });
  }
  return adj;
}

std::vector<std::size_t> by_layer_name(const DependencyGraph& g) {
  std::vector<std::size_t> idx(g.nodes.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&g](std::size_t a, std::size_t b) {
    return g.nodes[a].layer_name < g.nodes[b].layer_name;
  });
  return idx;
}

std::optional<std::vector<std::string>> find_cycle(const DependencyGraph& g) {
  enum class Mark { white, grey, black };
  const auto adj = adjacency(g);
  std::vector<Mark> mark(g.nodes.size(), Mark::white);
  std::vector<std::size_t> path;

  std::optional<std::vector<std::string>> found;
  auto visit = [&](auto&& self, std::size_t n) -> bool {
    mark[n] = Mark::grey;
    path.push_back(n);
    for (std::size_t next : adj[n]) {
      if (mark[next] == Mark::grey) {
        std::vector<std::string> cycle;
        auto it = std::find(path.begin(), path.end(), next);
        for (; it != path.end(); ++it) cycle.push_back(g.nodes[*it].layer_name);
        cycle.push_back(g.nodes[next].layer_name);
        found = std::move(cycle);
        return true;
      }
      if (mark[next] == Mark::white && self(self, next)) return true;
    }
    path.pop_back();
    mark[n] = Mark::black;
    return false;
  };
  for (std::size_t n : by_layer_name(g)) {
    if (mark[n] == Mark::white && visit(visit, n)) break;
  }
  return found;
}

}  // namespace

DependencyGraph build_dependency_graph(std::vector<CVSpec> specs, bool allow_cycles) {
  DependencyGraph g;
  g.nodes = std::move(specs);
  std::map<std::string, std::size_t> provider;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!provider.emplace(g.nodes[i].layer_name, i).second) {
      throw SpecError("layer '" + g.nodes[i].layer_name + "' has more than one provider");
    }
  }
  for (std::size_t consumer = 0; consumer < g.nodes.size(); ++consumer) {
    for (const auto& dep : g.nodes[consumer].dependencies) {
      const auto it = provider.find(dep);
      if (it == provider.end()) {
        g.external_layers.insert(dep);
        continue;
      }
      if (it->second == consumer && !allow_cycles) throw CycleError({dep, dep});
      g.edges.emplace_back(it->second, consumer);
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  if (!allow_cycles) {
    if (auto cycle = find_cycle(g)) throw CycleError(std::move(*cycle));
  }
  return g;
}

std::vector<std::size_t> topo_indices(const DependencyGraph& g, std::vector<std::string>* warnings) {
  const std::size_t n = g.nodes.size();
  static constexpr std::int64_t kUnset = std::numeric_limits<std::int64_t>::max();
  const auto adj = adjacency(g);

  auto own = [&g](std::size_t i) { return g.nodes[i].order.value_or(kUnset); };

  // A node inherits the most urgent preference found downstream of it, so
  // it is scheduled early enough for the node that actually asked.
  std::vector<std::int64_t> effective(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{i};
    seen[i] = true;
    std::int64_t best = own(i);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      best = std::min(best, own(cur));
      for (std::size_t next : adj[cur]) {
        if (!seen[next]) {
          seen[next] = true;
          stack.push_back(next);
        }
      }
    }
    effective[i] = best;
  }

  auto key = [&](std::size_t i) {
    return std::tuple<std::int64_t, std::int64_t, const std::string&>(effective[i], own(i), g.nodes[i].layer_name);
  };
  auto before = [&](std::size_t a, std::size_t b) { return key(a) < key(b); };

  std::vector<std::size_t> indegree(n, 0);
  for (const auto& [from, to] : g.edges) ++indegree[to];
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }

  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<bool> placed(n, false);
  while (!ready.empty()) {
    const auto best = std::min_element(ready.begin(), ready.end(), before);
    const std::size_t node = *best;
    ready.erase(best);
    order.push_back(node);
    placed[node] = true;
    for (std::size_t next : adj[node]) {
      if (--indegree[next] == 0) ready.push_back(next);
    }
  }
  if (order.size() != n) {
    std::vector<std::size_t> rest;
    for (std::size_t i : by_layer_name(g)) {
      if (!placed[i]) rest.push_back(i);
    }
    order.insert(order.end(), rest.begin(), rest.end());
  }

  if (warnings != nullptr) {
    for (std::size_t pos_b = 0; pos_b < order.size(); ++pos_b) {
      for (std::size_t pos_a = pos_b + 1; pos_a < order.size(); ++pos_a) {
        const CVSpec& a = g.nodes[order[pos_a]];
        const CVSpec& b = g.nodes[order[pos_b]];
        if (a.order && b.order && *a.order < *b.order) {
          warnings->push_back("layer/order of '" + a.layer_name + "' (" + std::to_string(*a.order) +
                              ") before '" + b.layer_name + "' (" + std::to_string(*b.order) +
                              ") cannot be honored: dependencies require '" + b.layer_name + "' first");
        }
      }
    }
  }
  return order;
}

UpdateOrder topo_order(const DependencyGraph& graph) {
  UpdateOrder out;
  for (std::size_t i : topo_indices(graph, &out.warnings)) out.specs.push_back(graph.nodes[i]);
  return out;
}

std::vector<std::string> UpdateOrder::layer_names() const {
  std::vector<std::string> names;
  names.reserve(specs.size());
  for (const auto& s : specs) names.push_back(s.layer_name);
  return names;
}

}  // namespace cv
