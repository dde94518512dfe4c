#include "confex/disambiguate.hpp"

#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace confex {

const std::vector<std::string>& httpd_command_names() {
    static const std::vector<std::string> names = {
        "Redirect",    "RedirectMatch",    "RedirectPermanent", "RedirectTemp",
        "Alias",       "AliasMatch",       "ScriptAlias",       "ScriptAliasMatch",
        "SetEnv",      "SetEnvIf",         "RewriteRule",       "RewriteCond",
        "Header",      "RequestHeader",    "ErrorDocument"};
    return names;
}

std::vector<TransformRule> builtin_rules(Format format) {
    std::vector<TransformRule> rules;
    switch (format) {
        case Format::Httpd: {
            TransformRule command;
            command.key = "directive";
            command.has_value = true;
            command.action = TransformAction::CommandKeyWithFirstArg;
            command.parameters = httpd_command_names();
            rules.push_back(std::move(command));

            TransformRule promote;
            promote.key = "directive";
            promote.has_value = true;
            promote.action = TransformAction::PromoteValueToKey;
            rules.push_back(std::move(promote));

            TransformRule section;
            section.has_value = false;
            section.action = TransformAction::SectionKeyWithArgs;
            rules.push_back(std::move(section));
            break;
        }
        case Format::Nginx: {
            TransformRule promote;
            promote.key = "directive";
            promote.has_value = true;
            promote.action = TransformAction::PromoteValueToKey;
            rules.push_back(std::move(promote));

            TransformRule section;
            section.has_value = false;
            section.action = TransformAction::SectionKeyWithArgs;
            rules.push_back(std::move(section));
            break;
        }
        case Format::Ini:
        case Format::FstabTable:
        case Format::ColonTable: {
            TransformRule pass;
            pass.action = TransformAction::Passthrough;
            rules.push_back(std::move(pass));
            break;
        }
    }
    return rules;
}

namespace {

bool rule_matches(const TransformRule& rule, const ConfigNode& node) {
    if (!rule.key.empty() && rule.key != node.key) return false;
    if (rule.has_value && *rule.has_value != node.value.has_value()) return false;
    if (!rule.requires_child.empty()) {
        bool found = false;
        for (const auto& c : node.children)
            if (c.key == rule.requires_child) {
                found = true;
                break;
            }
        if (!found) return false;
    }
    if (rule.action == TransformAction::CommandKeyWithFirstArg) {
        if (!node.value) return false;
        bool listed = false;
        for (const auto& name : rule.parameters)
            if (name == *node.value) {
                listed = true;
                break;
            }
        if (!listed) return false;
    }
    return true;
}

std::string join_values(const std::vector<const ConfigNode*>& nodes, std::size_t from = 0) {
    std::string out;
    for (std::size_t i = from; i < nodes.size(); ++i) {
        if (i > from) out += " ";
        out += nodes[i]->value.value_or("");
    }
    return out;
}

void transform_children(const ConfigNode& node, const std::vector<TransformRule>& rules,
                        const std::string& path, std::vector<ConfigNode>& out);

std::optional<ConfigNode> transform_node(const ConfigNode& node,
                                         const std::vector<TransformRule>& rules,
                                         const std::string& path) {
    const TransformRule* rule = nullptr;
    for (const auto& r : rules)
        if (rule_matches(r, node)) {
            rule = &r;
            break;
        }
    std::string here = path + "/" + node.key + "[" + std::to_string(node.ordinal) + "]";
    if (!rule) throw TransformError("no transform rule matches node " + here);

    std::vector<const ConfigNode*> args;
    for (const auto& c : node.children)
        if (c.key == "arg") args.push_back(&c);

    ConfigNode out;
    switch (rule->action) {
        case TransformAction::PromoteValueToKey: {
            out.key = node.value.value_or("");
            out.value = join_values(args);
            break;
        }
        case TransformAction::CommandKeyWithFirstArg: {
            if (args.empty())
                throw TransformError("command node without arguments at " + here);
            out.key = node.value.value_or("") + " " + args[0]->value.value_or("");
            out.value = join_values(args, 1);
            break;
        }
        case TransformAction::SectionKeyWithArgs: {
            out.key = node.key;
            if (!args.empty()) out.key += " " + join_values(args);
            transform_children(node, rules, here, out.children);
            break;
        }
        case TransformAction::Passthrough: {
            out.key = node.key;
            out.value = node.value;
            transform_children(node, rules, here, out.children);
            break;
        }
        case TransformAction::Drop:
            return std::nullopt;
    }
    return out;
}

void transform_children(const ConfigNode& node, const std::vector<TransformRule>& rules,
                        const std::string& path, std::vector<ConfigNode>& out) {
    for (const auto& child : node.children) {
        if (child.key == "arg") continue;  // consumed by the parent's action
        auto t = transform_node(child, rules, path);
        if (t) out.push_back(std::move(*t));
    }
}

void assign_ordinals_rec(ConfigNode& node) {
    std::map<std::string, int> seen;
    for (auto& child : node.children) {
        child.ordinal = ++seen[child.key];
        assign_ordinals_rec(child);
    }
}

void flatten_walk(const ConfigNode& node, const std::string& prefix, bool raw,
                  const std::string& application, const std::string& file_path,
                  std::vector<ConfigRecord>& out) {
    std::string component =
        raw ? node.key + "[" + std::to_string(node.ordinal) + "]" : node.key;
    std::string full = prefix.empty() ? component : prefix + "/" + component;
    if (node.is_leaf()) {
        ConfigRecord rec;
        rec.application = application;
        rec.file_path = file_path;
        rec.key = full;
        rec.value = node.value.value_or("");
        rec.entry_ordinal = static_cast<int>(out.size()) + 1;
        out.push_back(std::move(rec));
        return;
    }
    for (const auto& child : node.children)
        flatten_walk(child, full, raw, application, file_path, out);
}

}  // namespace

ConfigTree disambiguate(const ConfigTree& tree, const std::vector<TransformRule>& rules) {
    ConfigTree out;
    out.format = tree.format;
    out.source_path = tree.source_path;
    transform_children(tree.root, rules, "", out.root.children);
    assign_ordinals_rec(out.root);
    return out;
}

std::vector<ConfigRecord> flatten(const ConfigTree& tree, const std::string& application,
                                  const std::string& file_path) {
    std::vector<ConfigRecord> records;
    for (const auto& child : tree.root.children)
        flatten_walk(child, "", false, application, file_path, records);
    return records;
}

std::vector<ConfigRecord> flatten_raw(const ConfigTree& tree, const std::string& application,
                                      const std::string& file_path) {
    std::vector<ConfigRecord> records;
    for (const auto& child : tree.root.children)
        flatten_walk(child, "", true, application, file_path, records);
    return records;
}

namespace {

bool positional_component(const std::string& comp) {
    for (const char* stem : {"directive", "arg"}) {
        std::size_t n = std::strlen(stem);
        if (comp.size() > n + 2 && comp.compare(0, n, stem) == 0 && comp[n] == '[' &&
            comp.back() == ']') {
            bool digits = comp.size() > n + 2;
            for (std::size_t i = n + 1; i + 1 < comp.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(comp[i]))) digits = false;
            if (digits) return true;
        }
        if (comp == stem) return true;
    }
    return false;
}

}  // namespace

std::vector<ConfigRecord> key_stability_check(const std::vector<ConfigRecord>& corpus) {
    std::vector<ConfigRecord> offending;
    for (const auto& rec : corpus) {
        std::size_t start = 0;
        bool bad = false;
        while (start <= rec.key.size() && !bad) {
            std::size_t slash = rec.key.find('/', start);
            std::string comp = rec.key.substr(
                start, slash == std::string::npos ? std::string::npos : slash - start);
            if (positional_component(comp)) bad = true;
            if (slash == std::string::npos) break;
            start = slash + 1;
        }
        if (bad) offending.push_back(rec);
    }
    return offending;
}

namespace {

std::string action_name(TransformAction a) {
    switch (a) {
        case TransformAction::PromoteValueToKey: return "promote_value_to_key";
        case TransformAction::CommandKeyWithFirstArg: return "command_key_with_first_arg";
        case TransformAction::SectionKeyWithArgs: return "section_key_with_args";
        case TransformAction::Passthrough: return "passthrough";
        case TransformAction::Drop: return "drop";
    }
    return "passthrough";
}

TransformAction action_from_name(const std::string& name) {
    if (name == "promote_value_to_key") return TransformAction::PromoteValueToKey;
    if (name == "command_key_with_first_arg") return TransformAction::CommandKeyWithFirstArg;
    if (name == "section_key_with_args") return TransformAction::SectionKeyWithArgs;
    if (name == "passthrough") return TransformAction::Passthrough;
    if (name == "drop") return TransformAction::Drop;
    throw std::invalid_argument("unknown transform action: " + name);
}

}  // namespace

void save_rules(const std::vector<TransformRule>& rules, const std::string& path) {
    json arr = json::array();
    for (const auto& r : rules) {
        json j = {{"key", r.key},
                  {"requires_child", r.requires_child},
                  {"action", action_name(r.action)},
                  {"parameters", r.parameters}};
        if (r.has_value) j["has_value"] = *r.has_value;
        arr.push_back(std::move(j));
    }
    json doc = {{"format_version", 1}, {"rules", arr}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write rules: " + path);
    out << doc.dump(2) << "\n";
}

std::vector<TransformRule> load_rules(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read rules: " + path);
    json doc = json::parse(in);
    if (doc.value("format_version", 0) != 1)
        throw std::runtime_error("unsupported rules format_version in " + path);
    std::vector<TransformRule> rules;
    for (const auto& j : doc.at("rules")) {
        TransformRule r;
        r.key = j.value("key", "");
        r.requires_child = j.value("requires_child", "");
        if (j.contains("has_value")) r.has_value = j.at("has_value").get<bool>();
        r.action = action_from_name(j.at("action").get<std::string>());
        if (j.contains("parameters"))
            r.parameters = j.at("parameters").get<std::vector<std::string>>();
        rules.push_back(std::move(r));
    }
    return rules;
}

std::string records_to_jsonl(const std::vector<ConfigRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        json j = {{"application", rec.application},
                  {"file_path", rec.file_path},
                  {"key", rec.key},
                  {"value", rec.value},
                  {"entry_ordinal", rec.entry_ordinal}};
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<ConfigRecord> records_from_jsonl(const std::string& text, const std::string& origin) {
    std::vector<ConfigRecord> records;
    std::size_t pos = 0;
    std::size_t lineno = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string line =
            text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = eol == std::string::npos ? text.size() : eol + 1;
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw std::runtime_error(origin + " line " + std::to_string(lineno) +
                                     ": malformed record");
        ConfigRecord rec;
        rec.application = j.at("application").get<std::string>();
        rec.file_path = j.at("file_path").get<std::string>();
        rec.key = j.at("key").get<std::string>();
        rec.value = j.at("value").get<std::string>();
        rec.entry_ordinal = j.at("entry_ordinal").get<int>();
        records.push_back(std::move(rec));
    }
    return records;
}

void save_records(const std::vector<ConfigRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write records: " + path);
    out << records_to_jsonl(records);
}

std::vector<ConfigRecord> load_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read records: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return records_from_jsonl(buf.str(), path);
}

}  // namespace confex
