// Native parsers that turn raw config text into ordered intermediate trees.
#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace confex {

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

enum class Format { Httpd, Nginx, Ini, FstabTable, ColonTable };

/// One node of an intermediate tree. `ordinal` is the 1-based index among
/// siblings that share the same key, in source order.
struct ConfigNode {
    std::string key;
    std::optional<std::string> value;
    std::vector<ConfigNode> children;
    int ordinal = 1;

    bool is_leaf() const { return children.empty(); }
};

struct ConfigTree {
    ConfigNode root;  // synthetic, key ""
    Format format = Format::Ini;
    std::string source_path;
};

ConfigTree parse_httpd(const std::string& content, const std::string& source_path = "");
ConfigTree parse_nginx(const std::string& content, const std::string& source_path = "");
ConfigTree parse_ini(const std::string& content, const std::string& source_path = "");
ConfigTree parse_fstab_table(const std::string& content, const std::string& source_path = "");
ConfigTree parse_colon_table(const std::string& content, const std::vector<std::string>& schema,
                             const std::string& source_path = "");

ConfigTree parse_as(Format format, const std::string& content, const std::string& source_path = "");

const std::vector<std::string>& passwd_schema();
const std::vector<std::string>& group_schema();

Format format_from_name(const std::string& name);
std::string format_name(Format f);

/// Indented dump, one node per line, "key[ordinal] (value)".
std::string debug_dump(const ConfigTree& tree);

/// Renders the tree back to source text in its own format (httpd, nginx,
/// ini only); re-parsing the result yields an equal tree.
std::string render_source(const ConfigTree& tree);

bool trees_equal(const ConfigNode& a, const ConfigNode& b);

}  // namespace confex
