// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cv/spec.hpp"

namespace cv::codegen {

/// One node of the `/` hierarchy. Placeholder and wildcard segments do not
/// create nodes, so `person/%country%/visits` lives at person -> visits.
struct GenNode {
  std::string segment;
  /// Member name in the parent type.
  std::string member;
  /// CamelCase of the literal path, e.g. `PersonVisits`.
  std::string type_name;
  std::optional<CVSpec> spec;
  std::vector<GenNode> children;
};

struct GenModel {
  GenNode root;
  /// Literal path (`person/visits`) to generated type name, for every node.
  std::vector<std::pair<std::string, std::string>> type_names;
  /// Literal paths of the contextual values in update order.
  std::vector<std::string> registration_order;

  std::size_t value_count() const noexcept { return registration_order.size(); }
};

struct Options {
  std::string namespace_name = "cvgen";
  std::string root_type = "Environment";
};

/// Throws SpecError when two paths map to type names that differ only in
/// case (e.g. `a/bc` and `ab/c`), or two specs land on the same node.
GenModel build_model(const std::vector<CVSpec>& specs, const Options& options = {});

struct GeneratedFile {
  std::string name;
  std::string contents;
};

/// One header per top-level node, `<root>.hpp` with the root type that binds
/// every value to a Context in update order, and `manifest.txt`.
std::vector<GeneratedFile> generate(const GenModel& model, const Options& options = {});

/// Writes `files` into `dir` (created if needed). Returns the total line count.
std::size_t write_files(const std::filesystem::path& dir, const std::vector<GeneratedFile>& files);

/// `Camel` + `Case` for each part split on `/`, `_`, `-` and other non-alphanumerics.
std::string camel_case(std::string_view literal_path);
/// Valid C++ identifier for a member: lower case, sanitized, keywords suffixed with `_`.
std::string member_name(std::string_view segment);

}  // namespace cv::codegen
