// Canonicalizing parsed trees into stable (key, value) records.
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "confex/parsers.hpp"

namespace confex {

struct TransformError : std::runtime_error {
    explicit TransformError(const std::string& what) : std::runtime_error(what) {}
};

enum class TransformAction {
    PromoteValueToKey,
    CommandKeyWithFirstArg,
    SectionKeyWithArgs,
    Passthrough,
    Drop
};

/// One ordered rewrite rule. Rules are tried in order; the first whose
/// match fields all hold is applied to the node.
struct TransformRule {
    std::string key;                      // exact node key; empty matches any
    std::optional<bool> has_value;        // constrain value presence
    std::string requires_child;           // require a child with this key; empty = no constraint
    TransformAction action = TransformAction::Passthrough;
    std::vector<std::string> parameters;  // action-specific (command names, ...)
};

/// Canonical flattened entry; the unit every later stage consumes.
struct ConfigRecord {
    std::string application;
    std::string file_path;
    std::string key;
    std::string value;
    int entry_ordinal = 0;  // dense 1..n position within the file

    bool operator==(const ConfigRecord&) const = default;
};

/// The httpd directives whose first argument is part of the parameter
/// identity rather than the value.
const std::vector<std::string>& httpd_command_names();

/// Built-in rule sets per parse format.
std::vector<TransformRule> builtin_rules(Format format);

/// Rewrites every node with the first matching rule. A node that no rule
/// matches is an error naming the node path.
ConfigTree disambiguate(const ConfigTree& tree, const std::vector<TransformRule>& rules);

/// Emits one record per leaf, keys slash-joined from the ancestor chain
/// below the root, entry ordinals dense 1..n in source order.
std::vector<ConfigRecord> flatten(const ConfigTree& tree, const std::string& application,
                                  const std::string& file_path);

/// Flattens without disambiguation, spelling every path component as
/// "key[ordinal]"; exists to show what instability looks like.
std::vector<ConfigRecord> flatten_raw(const ConfigTree& tree, const std::string& application,
                                      const std::string& file_path);

/// Records whose keys still contain positional components such as
/// "directive[2]" or "arg[1]"; disambiguated corpora must yield none.
std::vector<ConfigRecord> key_stability_check(const std::vector<ConfigRecord>& corpus);

void save_rules(const std::vector<TransformRule>& rules, const std::string& path);
std::vector<TransformRule> load_rules(const std::string& path);

void save_records(const std::vector<ConfigRecord>& records, const std::string& path);
std::vector<ConfigRecord> load_records(const std::string& path);
std::string records_to_jsonl(const std::vector<ConfigRecord>& records);
std::vector<ConfigRecord> records_from_jsonl(const std::string& text, const std::string& origin);

}  // namespace confex
