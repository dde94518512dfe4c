#include "confex/parsers.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace confex {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct Line {
    std::string text;
    int number;  // 1-based line of the first physical line
};

std::vector<Line> split_lines(const std::string& content) {
    std::vector<Line> lines;
    std::string cur;
    int number = 1;
    int start = 1;
    for (char c : content) {
        if (c == '\n') {
            lines.push_back({cur, start});
            cur.clear();
            ++number;
            start = number;
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back({cur, start});
    return lines;
}

// Joins physical lines that end with a backslash into one logical line.
std::vector<Line> join_continuations(std::vector<Line> lines) {
    std::vector<Line> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string text = lines[i].text;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        int number = lines[i].number;
        while (!text.empty() && text.back() == '\\' && i + 1 < lines.size()) {
            text.pop_back();
            ++i;
            std::string next = lines[i].text;
            if (!next.empty() && next.back() == '\r') next.pop_back();
            text += " " + trim(next);
        }
        out.push_back({text, number});
    }
    return out;
}

bool is_comment(const std::string& line, const std::vector<std::string>& markers) {
    std::string t = trim(line);
    for (const auto& m : markers)
        if (t.rfind(m, 0) == 0) return true;
    return false;
}

// Whitespace tokenizer; a double quote at token start groups one argument
// and is stripped.
std::vector<std::string> tokenize_quoted(const std::string& line, int lineno, const std::string& origin) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i >= line.size()) break;
        std::string tok;
        if (line[i] == '"') {
            ++i;
            bool closed = false;
            while (i < line.size()) {
                if (line[i] == '"') {
                    closed = true;
                    ++i;
                    break;
                }
                tok.push_back(line[i++]);
            }
            if (!closed)
                throw ParseError(origin + " line " + std::to_string(lineno) + ": unterminated quote");
            // glue any trailing unspaced characters onto the same token
            while (i < line.size() && line[i] != ' ' && line[i] != '\t') tok.push_back(line[i++]);
        } else {
            while (i < line.size() && line[i] != ' ' && line[i] != '\t') tok.push_back(line[i++]);
        }
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

void assign_ordinals(ConfigNode& node) {
    std::map<std::string, int> seen;
    for (auto& child : node.children) {
        child.ordinal = ++seen[child.key];
        assign_ordinals(child);
    }
}

ConfigNode make_directive(const std::string& name, const std::vector<std::string>& args) {
    ConfigNode node;
    node.key = "directive";
    node.value = name;
    for (const auto& a : args) {
        ConfigNode arg;
        arg.key = "arg";
        arg.value = a;
        node.children.push_back(std::move(arg));
    }
    return node;
}

std::string err_at(const std::string& origin, int lineno, const std::string& why) {
    std::string where = origin.empty() ? "input" : origin;
    return where + " line " + std::to_string(lineno) + ": " + why;
}

}  // namespace

ConfigTree parse_httpd(const std::string& content, const std::string& source_path) {
    ConfigTree tree;
    tree.format = Format::Httpd;
    tree.source_path = source_path;

    std::vector<ConfigNode*> stack = {&tree.root};
    std::vector<std::string> open_names;
    std::vector<int> open_lines;

    for (const auto& [raw, lineno] : join_continuations(split_lines(content))) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;

        if (line[0] == '<') {
            if (line.back() != '>')
                throw ParseError(err_at(source_path, lineno, "tag does not end with '>'"));
            std::string inner = trim(line.substr(1, line.size() - 2));
            if (inner.empty()) throw ParseError(err_at(source_path, lineno, "empty tag"));
            if (inner[0] == '/') {
                std::string name = trim(inner.substr(1));
                if (open_names.empty())
                    throw ParseError(err_at(source_path, lineno, "closing tag without open section"));
                auto eq_ci = [](const std::string& a, const std::string& b) {
                    return a.size() == b.size() &&
                           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
                               return std::tolower(static_cast<unsigned char>(x)) ==
                                      std::tolower(static_cast<unsigned char>(y));
                           });
                };
                if (!eq_ci(name, open_names.back()))
                    throw ParseError(err_at(source_path, lineno,
                                            "mismatched closing tag </" + name + ">, expected </" +
                                                open_names.back() + ">"));
                open_names.pop_back();
                open_lines.pop_back();
                stack.pop_back();
            } else {
                auto tokens = tokenize_quoted(inner, lineno, source_path);
                if (tokens.empty()) throw ParseError(err_at(source_path, lineno, "empty tag"));
                ConfigNode section;
                section.key = tokens[0];
                for (std::size_t i = 1; i < tokens.size(); ++i) {
                    ConfigNode arg;
                    arg.key = "arg";
                    arg.value = tokens[i];
                    section.children.push_back(std::move(arg));
                }
                stack.back()->children.push_back(std::move(section));
                stack.push_back(&stack.back()->children.back());
                open_names.push_back(tokens[0]);
                open_lines.push_back(lineno);
            }
            continue;
        }

        auto tokens = tokenize_quoted(line, lineno, source_path);
        if (tokens.empty()) continue;
        std::vector<std::string> args(tokens.begin() + 1, tokens.end());
        stack.back()->children.push_back(make_directive(tokens[0], args));
    }

    if (!open_names.empty())
        throw ParseError(err_at(source_path, open_lines.back(),
                                "section <" + open_names.back() + "> is never closed"));
    assign_ordinals(tree.root);
    return tree;
}

ConfigTree parse_nginx(const std::string& content, const std::string& source_path) {
    ConfigTree tree;
    tree.format = Format::Nginx;
    tree.source_path = source_path;

    // token scan with ';' '{' '}' as punctuation and '#' comments
    struct Tok {
        std::string text;
        char punct = 0;  // ';', '{', '}' or 0 for a word
        int line = 1;
    };
    std::vector<Tok> toks;
    int line = 1;
    std::size_t i = 0;
    while (i < content.size()) {
        char c = content[i];
        if (c == '\n') {
            ++line;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < content.size() && content[i] != '\n') ++i;
            continue;
        }
        if (c == ';' || c == '{' || c == '}') {
            toks.push_back({std::string(1, c), c, line});
            ++i;
            continue;
        }
        if (c == '"' || c == '\'') {
            char q = c;
            ++i;
            std::string word;
            bool closed = false;
            while (i < content.size()) {
                if (content[i] == q) {
                    closed = true;
                    ++i;
                    break;
                }
                if (content[i] == '\n') ++line;
                word.push_back(content[i++]);
            }
            if (!closed) throw ParseError(err_at(source_path, line, "unterminated quote"));
            toks.push_back({word, 0, line});
            continue;
        }
        std::string word;
        while (i < content.size()) {
            char d = content[i];
            if (d == ' ' || d == '\t' || d == '\r' || d == '\n' || d == ';' || d == '{' || d == '}' ||
                d == '#')
                break;
            word.push_back(d);
            ++i;
        }
        toks.push_back({word, 0, line});
    }

    std::vector<ConfigNode*> stack = {&tree.root};
    std::vector<int> open_lines;
    std::vector<std::string> pending;
    int pending_line = 1;

    for (const auto& t : toks) {
        if (t.punct == 0) {
            if (pending.empty()) pending_line = t.line;
            pending.push_back(t.text);
            continue;
        }
        if (t.punct == ';') {
            if (pending.empty())
                throw ParseError(err_at(source_path, t.line, "';' without a directive"));
            std::vector<std::string> args(pending.begin() + 1, pending.end());
            stack.back()->children.push_back(make_directive(pending[0], args));
            pending.clear();
        } else if (t.punct == '{') {
            if (pending.empty())
                throw ParseError(err_at(source_path, t.line, "'{' without a block name"));
            ConfigNode section;
            section.key = pending[0];
            for (std::size_t k = 1; k < pending.size(); ++k) {
                ConfigNode arg;
                arg.key = "arg";
                arg.value = pending[k];
                section.children.push_back(std::move(arg));
            }
            stack.back()->children.push_back(std::move(section));
            stack.push_back(&stack.back()->children.back());
            open_lines.push_back(t.line);
            pending.clear();
        } else {  // '}'
            if (!pending.empty())
                throw ParseError(err_at(source_path, t.line,
                                        "directive '" + pending[0] + "' is missing ';'"));
            if (stack.size() == 1)
                throw ParseError(err_at(source_path, t.line, "'}' without an open block"));
            stack.pop_back();
            open_lines.pop_back();
        }
    }
    if (!pending.empty())
        throw ParseError(
            err_at(source_path, pending_line, "directive '" + pending[0] + "' is missing ';'"));
    if (stack.size() != 1)
        throw ParseError(err_at(source_path, open_lines.back(), "block is never closed"));

    assign_ordinals(tree.root);
    return tree;
}

ConfigTree parse_ini(const std::string& content, const std::string& source_path) {
    ConfigTree tree;
    tree.format = Format::Ini;
    tree.source_path = source_path;

    ConfigNode* current = &tree.root;
    for (const auto& [raw, lineno] : join_continuations(split_lines(content))) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;

        if (line[0] == '[') {
            if (line.back() != ']')
                throw ParseError(err_at(source_path, lineno, "section header does not end with ']'"));
            std::string name = trim(line.substr(1, line.size() - 2));
            if (name.empty()) throw ParseError(err_at(source_path, lineno, "empty section name"));
            ConfigNode section;
            section.key = name;
            tree.root.children.push_back(std::move(section));
            current = &tree.root.children.back();
            continue;
        }

        if (line[0] == '!') {
            std::size_t sp = line.find_first_of(" \t");
            ConfigNode leaf;
            leaf.key = sp == std::string::npos ? line : line.substr(0, sp);
            if (sp != std::string::npos) leaf.value = trim(line.substr(sp));
            current->children.push_back(std::move(leaf));
            continue;
        }

        std::size_t eq = line.find('=');
        if (eq != std::string::npos) {
            std::string key = trim(line.substr(0, eq));
            if (key.empty())
                throw ParseError(err_at(source_path, lineno, "assignment with empty key"));
            std::string value = trim(line.substr(eq + 1));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            ConfigNode leaf;
            leaf.key = key;
            leaf.value = value;
            current->children.push_back(std::move(leaf));
            continue;
        }

        if (line.find_first_of(" \t") != std::string::npos)
            throw ParseError(err_at(source_path, lineno,
                                    "not a section header, assignment, or bare key: '" + line + "'"));
        ConfigNode leaf;
        leaf.key = line;
        current->children.push_back(std::move(leaf));
    }

    assign_ordinals(tree.root);
    return tree;
}

ConfigTree parse_fstab_table(const std::string& content, const std::string& source_path) {
    ConfigTree tree;
    tree.format = Format::FstabTable;
    tree.source_path = source_path;

    static const char* column_names[] = {"file", "vfstype", nullptr, "freq", "passno"};

    for (const auto& [raw, lineno] : split_lines(content)) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::vector<std::string> cols;
        std::string col;
        while (ss >> col) cols.push_back(col);
        if (cols.size() < 4)
            throw ParseError(err_at(source_path, lineno,
                                    "expected at least 4 columns, got " + std::to_string(cols.size())));
        if (cols.size() > 6)
            throw ParseError(err_at(source_path, lineno,
                                    "expected at most 6 columns, got " + std::to_string(cols.size())));

        ConfigNode row;
        row.key = cols[0];
        for (std::size_t c = 1; c < cols.size(); ++c) {
            if (c == 3) {  // options column, comma separated
                std::string opts = cols[3];
                std::size_t start = 0;
                while (start <= opts.size()) {
                    std::size_t comma = opts.find(',', start);
                    std::string opt = opts.substr(
                        start, comma == std::string::npos ? std::string::npos : comma - start);
                    if (!opt.empty()) {
                        ConfigNode leaf;
                        std::size_t eq = opt.find('=');
                        if (eq != std::string::npos) {
                            leaf.key = opt.substr(0, eq);
                            leaf.value = opt.substr(eq + 1);
                        } else {
                            leaf.key = opt;
                        }
                        row.children.push_back(std::move(leaf));
                    }
                    if (comma == std::string::npos) break;
                    start = comma + 1;
                }
            } else {
                ConfigNode leaf;
                leaf.key = column_names[c - 1];
                leaf.value = cols[c];
                row.children.push_back(std::move(leaf));
            }
        }
        tree.root.children.push_back(std::move(row));
    }

    assign_ordinals(tree.root);
    return tree;
}

ConfigTree parse_colon_table(const std::string& content, const std::vector<std::string>& schema,
                             const std::string& source_path) {
    if (schema.empty()) throw std::invalid_argument("colon table schema must not be empty");
    ConfigTree tree;
    tree.format = Format::ColonTable;
    tree.source_path = source_path;

    for (const auto& [raw, lineno] : split_lines(content)) {
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;

        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t colon = line.find(':', start);
            if (colon == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, colon - start));
            start = colon + 1;
        }
        if (fields.size() != schema.size())
            throw ParseError(err_at(source_path, lineno,
                                    "expected " + std::to_string(schema.size()) + " fields, got " +
                                        std::to_string(fields.size())));

        ConfigNode row;
        row.key = fields[0];
        for (std::size_t i = 0; i < schema.size(); ++i) {
            ConfigNode leaf;
            leaf.key = schema[i];
            leaf.value = fields[i];
            row.children.push_back(std::move(leaf));
        }
        tree.root.children.push_back(std::move(row));
    }

    assign_ordinals(tree.root);
    return tree;
}

ConfigTree parse_as(Format format, const std::string& content, const std::string& source_path) {
    switch (format) {
        case Format::Httpd: return parse_httpd(content, source_path);
        case Format::Nginx: return parse_nginx(content, source_path);
        case Format::Ini: return parse_ini(content, source_path);
        case Format::FstabTable: return parse_fstab_table(content, source_path);
        case Format::ColonTable: return parse_colon_table(content, passwd_schema(), source_path);
    }
    throw std::invalid_argument("unknown format");
}

const std::vector<std::string>& passwd_schema() {
    static const std::vector<std::string> s = {"name", "password", "uid", "gid",
                                               "gecos", "home", "shell"};
    return s;
}

const std::vector<std::string>& group_schema() {
    static const std::vector<std::string> s = {"name", "password", "gid", "members"};
    return s;
}

Format format_from_name(const std::string& name) {
    if (name == "httpd") return Format::Httpd;
    if (name == "nginx") return Format::Nginx;
    if (name == "ini") return Format::Ini;
    if (name == "fstab_table") return Format::FstabTable;
    if (name == "colon_table") return Format::ColonTable;
    throw std::invalid_argument("unknown format name: " + name);
}

std::string format_name(Format f) {
    switch (f) {
        case Format::Httpd: return "httpd";
        case Format::Nginx: return "nginx";
        case Format::Ini: return "ini";
        case Format::FstabTable: return "fstab_table";
        case Format::ColonTable: return "colon_table";
    }
    return "ini";
}

namespace {

void dump_node(const ConfigNode& node, int depth, std::string& out) {
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
    out += node.key + "[" + std::to_string(node.ordinal) + "]";
    if (node.value) out += " (" + *node.value + ")";
    out += "\n";
    for (const auto& child : node.children) dump_node(child, depth + 1, out);
}

std::string quote_if_needed(const std::string& s) {
    if (s.empty() || s.find_first_of(" \t") != std::string::npos) return "\"" + s + "\"";
    return s;
}

void render_httpd_node(const ConfigNode& node, int depth, std::string& out) {
    std::string indent(static_cast<std::size_t>(depth) * 4, ' ');
    if (node.key == "directive") {
        out += indent + quote_if_needed(node.value.value_or(""));
        for (const auto& arg : node.children) out += " " + quote_if_needed(arg.value.value_or(""));
        out += "\n";
        return;
    }
    out += indent + "<" + node.key;
    for (const auto& child : node.children)
        if (child.key == "arg") out += " " + quote_if_needed(child.value.value_or(""));
    out += ">\n";
    for (const auto& child : node.children)
        if (child.key != "arg") render_httpd_node(child, depth + 1, out);
    out += indent + "</" + node.key + ">\n";
}

std::string nginx_token(const std::string& s) {
    if (s.empty() || s.find_first_of(" \t\r\n;{}#'\"") != std::string::npos) return "\"" + s + "\"";
    return s;
}

void render_nginx_node(const ConfigNode& node, int depth, std::string& out) {
    std::string indent(static_cast<std::size_t>(depth) * 4, ' ');
    if (node.key == "directive") {
        out += indent + nginx_token(node.value.value_or(""));
        for (const auto& arg : node.children) out += " " + nginx_token(arg.value.value_or(""));
        out += ";\n";
        return;
    }
    out += indent + nginx_token(node.key);
    for (const auto& child : node.children)
        if (child.key == "arg") out += " " + nginx_token(child.value.value_or(""));
    out += " {\n";
    for (const auto& child : node.children)
        if (child.key != "arg") render_nginx_node(child, depth + 1, out);
    out += indent + "}\n";
}

void render_ini_leaf(const ConfigNode& leaf, std::string& out) {
    if (!leaf.key.empty() && leaf.key[0] == '!') {
        out += leaf.key;
        if (leaf.value) out += " " + *leaf.value;
        out += "\n";
    } else if (leaf.value) {
        out += leaf.key + "=" + *leaf.value + "\n";
    } else {
        out += leaf.key + "\n";
    }
}

}  // namespace

std::string debug_dump(const ConfigTree& tree) {
    std::string out;
    for (const auto& child : tree.root.children) dump_node(child, 0, out);
    return out;
}

std::string render_source(const ConfigTree& tree) {
    std::string out;
    switch (tree.format) {
        case Format::Httpd:
            for (const auto& child : tree.root.children) render_httpd_node(child, 0, out);
            return out;
        case Format::Nginx:
            for (const auto& child : tree.root.children) render_nginx_node(child, 0, out);
            return out;
        case Format::Ini:
            // Root children without a value are sections; valued leaves and
            // '!' directives may precede them.
            for (const auto& child : tree.root.children) {
                if (child.value || (!child.key.empty() && child.key[0] == '!')) {
                    render_ini_leaf(child, out);
                } else {
                    out += "[" + child.key + "]\n";
                    for (const auto& leaf : child.children) render_ini_leaf(leaf, out);
                }
            }
            return out;
        default:
            throw std::invalid_argument("render_source supports httpd, nginx, and ini trees");
    }
}

bool trees_equal(const ConfigNode& a, const ConfigNode& b) {
    if (a.key != b.key || a.value != b.value || a.ordinal != b.ordinal ||
        a.children.size() != b.children.size())
        return false;
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!trees_equal(a.children[i], b.children[i])) return false;
    return true;
}

}  // namespace confex
