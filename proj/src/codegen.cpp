// SPDX-License-Identifier: Apache-2.0

#include "cv/codegen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "cv/error.hpp"

namespace cv::codegen {
namespace {

constexpr std::array kKeywords = {
    "alignas",  "alignof",   "and",      "asm",       "auto",     "bool",     "break",    "case",
    "catch",    "char",      "class",    "concept",   "const",    "consteval", "constexpr", "constinit",
    "continue", "co_await",  "co_return", "co_yield", "decltype", "default",  "delete",   "do",
    "double",   "else",      "enum",     "explicit",  "export",   "extern",   "false",    "float",
    "for",      "friend",    "goto",     "if",        "inline",   "int",      "long",     "mutable",
    "namespace", "new",      "noexcept", "not",       "nullptr",  "operator", "or",       "private",
    "protected", "public",   "register", "requires",  "return",   "short",    "signed",   "sizeof",
    "static",   "struct",    "switch",   "template",  "this",     "throw",    "true",     "try",
    "typedef",  "typeid",    "typename", "union",     "unsigned", "using",    "virtual",  "void",
    "volatile", "while",     "xor",      "get",       "value",    "bind",     "activate", "deactivate",
    "activated", "layer_name", "context"};

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string cpp_type(ValueType type) {
  switch (type) {
    case ValueType::string:
      return "std::string";
    case ValueType::long_:
      return "std::int64_t";
    case ValueType::double_:
      return "double";
    case ValueType::boolean:
      return "bool";
  }
  return "std::string";
}

std::string quote(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

/// Canonical `[key]` section for `spec`, the text the accessor re-parses.
std::string section_text(const CVSpec& spec) {
  std::string out = "[" + spec.key.str() + "]\n";
  out += "type := " + std::string(type_name(spec.type)) + "\n";
  if (spec.layer_name != spec.key.last_literal()) out += "layer/name := " + spec.layer_name + "\n";
  if (spec.order) out += "layer/order := " + std::to_string(*spec.order) + "\n";
  if (!spec.default_value.empty()) out += "default := " + spec.default_value + "\n";
  return out;
}

GenNode& child(GenNode& parent, const std::string& segment) {
  for (auto& c : parent.children) {
    if (c.segment == segment) return c;
  }
  GenNode node;
  node.segment = segment;
  node.member = member_name(segment);
  parent.children.push_back(std::move(node));
  return parent.children.back();
}

void assign_type_names(GenNode& node, const std::string& path, GenModel& model,
                       std::map<std::string, std::string>& seen_lower) {
  for (auto& c : node.children) {
    const std::string child_path = path.empty() ? c.segment : path + "/" + c.segment;
    c.type_name = camel_case(child_path);
    const auto [it, inserted] = seen_lower.emplace(lower(c.type_name), child_path);
    if (!inserted) {
      throw SpecError("generated type name " + c.type_name + " for '" + child_path + "' collides with '" +
                      it->second + "'");
    }
    model.type_names.emplace_back(child_path, c.type_name);
    assign_type_names(c, child_path, model, seen_lower);
  }
  std::set<std::string> members;
  for (const auto& c : node.children) {
    if (!members.insert(c.member).second) {
      throw SpecError("member name '" + c.member + "' used twice below '" + (path.empty() ? "/" : path) + "'");
    }
  }
}

void emit_node(const GenNode& node, std::string& out) {
  for (const auto& c : node.children) emit_node(c, out);

  if (node.spec) {
    const CVSpec& spec = *node.spec;
    const std::string base = "::cv::Accessor<" + cpp_type(spec.type) + ">";
    out += "/// [" + spec.key.str() + "] " + std::string(type_name(spec.type)) + ", layer `" + spec.layer_name + "`\n";
    out += "class " + node.type_name + " : public " + base + " {\n";
    out += " public:\n";
    out += "  static constexpr std::string_view kKey = " + quote(spec.key.str()) + ";\n";
    out += "  static constexpr std::string_view kLayerName = " + quote(spec.layer_name) + ";\n";
    out += "  static constexpr std::string_view kSpec = " + quote(section_text(spec)) + ";\n\n";
    out += "  " + node.type_name + "() : " + base + "(kSpec) {}\n";
    out += "  using " + base + "::operator=;\n";
    if (!node.children.empty()) out += "\n";
  } else {
    out += "struct " + node.type_name + " {\n";
  }
  for (const auto& c : node.children) out += "  " + c.type_name + " " + c.member + ";\n";
  out += "};\n\n";
}

std::string guard_for(const std::string& ns, const std::string& file) {
  std::string g = ns + "_" + file;
  for (char& c : g) c = is_alnum(c) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : '_';
  return g + "_";
}

std::string file_header(const std::string& ns, const std::string& file) {
  std::string out = "// Generated by `cv gen`. Do not edit.\n\n";
  out += "#ifndef " + guard_for(ns, file) + "\n#define " + guard_for(ns, file) + "\n\n";
  return out;
}

void collect_members(const GenNode& node, const std::string& prefix, std::map<std::string, std::string>& out) {
  for (const auto& c : node.children) {
    const std::string access = prefix.empty() ? c.member : prefix + "." + c.member;
    if (c.spec) out.emplace(c.spec->name(), access);
    collect_members(c, access, out);
  }
}

}  // namespace

std::string camel_case(std::string_view literal_path) {
  std::string out;
  bool upper_next = true;
  for (char c : literal_path) {
    if (!is_alnum(c)) {
      upper_next = true;
      continue;
    }
    out += upper_next ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
    upper_next = false;
  }
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out.front())) != 0) out.insert(0, "V");
  return out;
}

std::string member_name(std::string_view segment) {
  std::string out;
  for (char c : segment) out += is_alnum(c) ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : '_';
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out.front())) != 0) out.insert(0, "_");
  if (std::find(kKeywords.begin(), kKeywords.end(), out) != kKeywords.end()) out += '_';
  return out;
}

GenModel build_model(const std::vector<CVSpec>& specs, const Options& options) {
  GenModel model;
  for (const auto& spec : specs) {
    GenNode* node = &model.root;
    for (const auto& seg : spec.key.segments()) {
      if (seg.is_literal()) node = &child(*node, seg.text);
    }
    if (node == &model.root) throw SpecError("[" + spec.key.str() + "] has no literal segment");
    if (node->spec) {
      throw SpecError("[" + spec.key.str() + "] and [" + node->spec->key.str() + "] map to the same accessor");
    }
    node->spec = spec;
  }

  std::map<std::string, std::string> seen_lower{{lower(options.root_type), "<root>"}};
  assign_type_names(model.root, "", model, seen_lower);

  for (const auto& spec : topo_order(build_dependency_graph(specs)).specs) {
    model.registration_order.push_back(spec.name());
  }
  return model;
}

std::vector<GeneratedFile> generate(const GenModel& model, const Options& options) {
  const std::string& ns = options.namespace_name;
  std::vector<GeneratedFile> files;

  for (const auto& top : model.root.children) {
    const std::string file = top.member + ".hpp";
    std::string out = file_header(ns, file);
    out += "#include <cstdint>\n#include <string>\n#include <string_view>\n\n#include \"cv/accessor.hpp\"\n\n";
    out += "namespace " + ns + " {\n\n";
    emit_node(top, out);
    out += "}  // namespace " + ns + "\n\n#endif\n";
    files.push_back({file, std::move(out)});
  }

  std::map<std::string, std::string> members;
  collect_members(model.root, "", members);

  const std::string root_file = member_name(options.root_type) + ".hpp";
  std::string out = file_header(ns, root_file);
  out += "#include <cstddef>\n\n#include \"cv/context.hpp\"\n";
  for (const auto& top : model.root.children) out += "#include \"" + top.member + ".hpp\"\n";
  out += "\nnamespace " + ns + " {\n\n";
  out += "/// Every contextual value of the specification, bound to one context.\n";
  out += "class " + options.root_type + " {\n public:\n";
  out += "  static constexpr std::size_t kValueCount = " + std::to_string(model.value_count()) + ";\n\n";
  out += "  explicit " + options.root_type + "(::cv::Context& ctx) : ctx_(ctx) {\n";
  for (const auto& name : model.registration_order) out += "    " + members.at(name) + ".bind(ctx);\n";
  out += "  }\n\n";
  out += "  ::cv::Context& context() noexcept { return ctx_; }\n\n";
  for (const auto& top : model.root.children) out += "  " + top.type_name + " " + top.member + ";\n";
  out += "\n private:\n  ::cv::Context& ctx_;\n};\n\n";
  out += "}  // namespace " + ns + "\n\n#endif\n";
  files.push_back({root_file, std::move(out)});

  std::string manifest;
  for (const auto& [path, type] : model.type_names) manifest += type + " " + path + "\n";
  files.push_back({"manifest.txt", std::move(manifest)});
  return files;
}

std::size_t write_files(const std::filesystem::path& dir, const std::vector<GeneratedFile>& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  std::size_t lines = 0;
  for (const auto& f : files) {
    std::ofstream os(dir / f.name, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write '" + (dir / f.name).string() + "'");
    os << f.contents;
    lines += static_cast<std::size_t>(std::count(f.contents.begin(), f.contents.end(), '\n'));
  }
  return lines;
}

}  // namespace cv::codegen
