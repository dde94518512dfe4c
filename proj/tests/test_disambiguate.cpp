#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "confex/disambiguate.hpp"
#include "confex/generator.hpp"
#include "confex/parsers.hpp"
#include "confex/rng.hpp"

using namespace confex;
namespace fs = std::filesystem;

namespace {

const std::string kHttpdSnippet =
    "ServerRoot \"/var/www\"\n"
    "Listen 80\n"
    "<IfModule unixd_module>\n"
    "    User daemon\n"
    "    Group daemon\n"
    "</IfModule>\n";

std::vector<ConfigRecord> httpd_records(const std::string& content) {
    auto tree = parse_httpd(content);
    return flatten(disambiguate(tree, builtin_rules(Format::Httpd)), "httpd", "/etc/httpd.conf");
}

std::multiset<std::pair<std::string, std::string>> kv_multiset(
    const std::vector<ConfigRecord>& records) {
    std::multiset<std::pair<std::string, std::string>> out;
    for (const auto& r : records) out.insert({r.key, r.value});
    return out;
}

std::size_t count_leaves(const ConfigNode& node) {
    if (node.is_leaf()) return 1;
    std::size_t n = 0;
    for (const auto& c : node.children) n += count_leaves(c);
    return n;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("confex-dis-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("plain directives promote their name to the key") {
    auto records = httpd_records("Listen 80\n");
    REQUIRE(records.size() == 1);
    CHECK(records[0].key == "Listen");
    CHECK(records[0].value == "80");
    CHECK(records[0].entry_ordinal == 1);
}

TEST_CASE("command directives absorb their first argument into the key") {
    auto records = httpd_records("Redirect /Foo /Bar\n");
    REQUIRE(records.size() == 1);
    CHECK(records[0].key == "Redirect /Foo");
    CHECK(records[0].value == "/Bar");

    auto alias = httpd_records("Alias /img /srv/images more\n");
    REQUIRE(alias.size() == 1);
    CHECK(alias[0].key == "Alias /img");
    CHECK(alias[0].value == "/srv/images more");
}

TEST_CASE("a command directive with no argument cannot be keyed") {
    auto tree = parse_httpd("Redirect\n");
    CHECK_THROWS_WITH_AS(disambiguate(tree, builtin_rules(Format::Httpd)),
                         doctest::Contains("without arguments"), TransformError);
}

TEST_CASE("sections contribute their arguments to the key path") {
    auto records = httpd_records(kHttpdSnippet);
    REQUIRE(records.size() == 4);
    CHECK(records[0].key == "ServerRoot");
    CHECK(records[0].value == "/var/www");
    CHECK(records[0].entry_ordinal == 1);
    CHECK(records[1].key == "Listen");
    CHECK(records[1].value == "80");
    CHECK(records[1].entry_ordinal == 2);
    CHECK(records[2].key == "IfModule unixd_module/User");
    CHECK(records[2].value == "daemon");
    CHECK(records[2].entry_ordinal == 3);
    CHECK(records[3].key == "IfModule unixd_module/Group");
    CHECK(records[3].value == "daemon");
    CHECK(records[3].entry_ordinal == 4);
}

TEST_CASE("multi-value directives join their arguments with spaces") {
    auto records = httpd_records("DirectoryIndex index.html index.htm\n");
    REQUIRE(records.size() == 1);
    CHECK(records[0].key == "DirectoryIndex");
    CHECK(records[0].value == "index.html index.htm");

    auto bare = httpd_records("ServerSignature\n");
    REQUIRE(bare.size() == 1);
    CHECK(bare[0].key == "ServerSignature");
    CHECK(bare[0].value == "");
}

TEST_CASE("nginx trees flatten to nested slash-joined keys") {
    std::string content =
        "worker_processes 4;\n"
        "http {\n"
        "    server {\n"
        "        listen 80;\n"
        "        root /srv/www;\n"
        "    }\n"
        "}\n";
    auto tree = parse_nginx(content);
    auto records = flatten(disambiguate(tree, builtin_rules(Format::Nginx)), "nginx", "/n.conf");
    REQUIRE(records.size() == 3);
    CHECK(records[0].key == "worker_processes");
    CHECK(records[0].value == "4");
    CHECK(records[1].key == "http/server/listen");
    CHECK(records[1].value == "80");
    CHECK(records[2].key == "http/server/root");
    CHECK(records[2].value == "/srv/www");
    for (int i = 0; i < 3; ++i) CHECK(records[i].entry_ordinal == i + 1);
}

TEST_CASE("ini and table formats pass through with section-qualified keys") {
    auto ini = parse_ini("[mysqld]\ndatadir=/var/lib/mysql\nport=3306\n");
    auto ini_recs = flatten(disambiguate(ini, builtin_rules(Format::Ini)), "mysql", "/etc/my.cnf");
    REQUIRE(ini_recs.size() == 2);
    CHECK(ini_recs[0].key == "mysqld/datadir");
    CHECK(ini_recs[0].value == "/var/lib/mysql");
    CHECK(ini_recs[1].key == "mysqld/port");
    CHECK(ini_recs[1].value == "3306");

    auto fstab = parse_fstab_table("proc /proc proc defaults,rw 0 0\n");
    auto fs_recs =
        flatten(disambiguate(fstab, builtin_rules(Format::FstabTable)), "sys.fstab", "/etc/fstab");
    std::vector<std::string> keys;
    for (const auto& r : fs_recs) keys.push_back(r.key);
    CHECK(keys == std::vector<std::string>{"proc/file", "proc/vfstype", "proc/defaults",
                                           "proc/rw", "proc/freq", "proc/passno"});
    CHECK(fs_recs[0].value == "/proc");
    CHECK(fs_recs[2].value == "");
}

TEST_CASE("raw flattening exposes positional keys that disambiguation removes") {
    auto tree = parse_httpd(kHttpdSnippet);
    auto raw = flatten_raw(tree, "httpd", "/f");
    CHECK_FALSE(key_stability_check(raw).empty());

    auto stable = flatten(disambiguate(tree, builtin_rules(Format::Httpd)), "httpd", "/f");
    CHECK(key_stability_check(stable).empty());

    ConfigRecord planted;
    planted.key = "IfModule something/directive[3]";
    CHECK(key_stability_check({planted}).size() == 1);
    ConfigRecord benign;
    benign.key = "DirectiveLike/argument";
    CHECK(key_stability_check({benign}).empty());
}

TEST_CASE("swapping two file lines changes only the ordinals") {
    Rng rng(404);
    for (int trial = 0; trial < 40; ++trial) {
        std::string content = generate_app_file("httpd", trial % species_count("httpd"), rng);
        std::size_t first_end = content.find('\n');
        REQUIRE(first_end != std::string::npos);
        std::size_t second_end = content.find('\n', first_end + 1);
        REQUIRE(second_end != std::string::npos);
        std::string swapped = content.substr(first_end + 1, second_end - first_end - 1) + "\n" +
                              content.substr(0, first_end + 1) + content.substr(second_end + 1);

        auto original = httpd_records(content);
        auto permuted = httpd_records(swapped);
        REQUIRE(original.size() == permuted.size());
        CHECK(kv_multiset(original) == kv_multiset(permuted));
        CHECK(original[0].key == permuted[1].key);
        CHECK(original[1].key == permuted[0].key);
        for (std::size_t i = 0; i < original.size(); ++i) {
            CHECK(original[i].entry_ordinal == int(i) + 1);
            CHECK(permuted[i].entry_ordinal == int(i) + 1);
        }
    }
}

TEST_CASE("every leaf of a disambiguated tree becomes exactly one record") {
    Rng rng(77);
    for (const std::string app : {"httpd", "nginx", "mysql"}) {
        Format format = app == "httpd" ? Format::Httpd
                       : app == "nginx" ? Format::Nginx
                                        : Format::Ini;
        for (int species = 0; species < species_count(app); ++species) {
            std::string content = generate_app_file(app, species, rng);
            auto tree = disambiguate(parse_as(format, content), builtin_rules(format));
            auto records = flatten(tree, app, "/f");
            CHECK(records.size() == count_leaves(tree.root));
            CHECK(key_stability_check(records).empty());
            auto again = flatten(tree, app, "/f");
            CHECK(records == again);
        }
    }
}

TEST_CASE("rule matching honors key, value presence, and required children") {
    auto tree = parse_httpd("Listen 80\nServerSignature\n<Files log>\nOrder deny\n</Files>\n");

    TransformRule keep_with_args;
    keep_with_args.key = "directive";
    keep_with_args.requires_child = "arg";
    keep_with_args.action = TransformAction::PromoteValueToKey;
    TransformRule drop_rest;
    drop_rest.key = "directive";
    drop_rest.action = TransformAction::Drop;
    TransformRule section;
    section.has_value = false;
    section.action = TransformAction::SectionKeyWithArgs;

    auto records = flatten(disambiguate(tree, {keep_with_args, drop_rest, section}), "a", "/f");
    std::vector<std::string> keys;
    for (const auto& r : records) keys.push_back(r.key);
    CHECK(keys == std::vector<std::string>{"Listen", "Files log/Order"});
    for (std::size_t i = 0; i < records.size(); ++i)
        CHECK(records[i].entry_ordinal == int(i) + 1);
}

TEST_CASE("a node no rule matches is reported by path") {
    auto tree = parse_httpd("Listen 80\n");
    CHECK_THROWS_WITH_AS(disambiguate(tree, {}),
                         doctest::Contains("no transform rule matches node"), TransformError);

    TransformRule sections_only;
    sections_only.has_value = false;
    sections_only.action = TransformAction::SectionKeyWithArgs;
    CHECK_THROWS_WITH_AS(disambiguate(tree, {sections_only}),
                         doctest::Contains("directive[1]"), TransformError);
}

TEST_CASE("the built-in command list covers the two-part httpd directives") {
    const auto& names = httpd_command_names();
    CHECK(names.size() == 15);
    for (const char* expected : {"Redirect", "Alias", "ScriptAlias", "SetEnv", "RewriteRule",
                                 "Header", "ErrorDocument"})
        CHECK(std::find(names.begin(), names.end(), expected) != names.end());

    CHECK(builtin_rules(Format::Httpd).size() == 3);
    CHECK(builtin_rules(Format::Nginx).size() == 2);
    CHECK(builtin_rules(Format::Ini).size() == 1);
    CHECK(builtin_rules(Format::FstabTable).size() == 1);
    CHECK(builtin_rules(Format::ColonTable).size() == 1);
    CHECK(builtin_rules(Format::Ini)[0].action == TransformAction::Passthrough);
}

TEST_CASE("transform rules survive a save/load round trip") {
    TempDir tmp;
    auto rules = builtin_rules(Format::Httpd);
    std::string path = tmp.file("httpd.rules.json");
    save_rules(rules, path);
    auto loaded = load_rules(path);
    REQUIRE(loaded.size() == rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        CHECK(loaded[i].key == rules[i].key);
        CHECK(loaded[i].has_value == rules[i].has_value);
        CHECK(loaded[i].requires_child == rules[i].requires_child);
        CHECK(loaded[i].action == rules[i].action);
        CHECK(loaded[i].parameters == rules[i].parameters);
    }

    auto tree = parse_httpd(kHttpdSnippet);
    CHECK(flatten(disambiguate(tree, loaded), "httpd", "/f") ==
          flatten(disambiguate(tree, rules), "httpd", "/f"));
}

TEST_CASE("rule loading rejects bad files") {
    TempDir tmp;
    CHECK_THROWS_AS(load_rules(tmp.file("missing.rules.json")), std::runtime_error);

    std::string stale = tmp.file("stale.rules.json");
    std::ofstream(stale) << R"({"format_version": 2, "rules": []})";
    CHECK_THROWS_WITH_AS(load_rules(stale), doctest::Contains("format_version"),
                         std::runtime_error);

    std::string odd = tmp.file("odd.rules.json");
    std::ofstream(odd) << R"({"format_version": 1,
                              "rules": [{"action": "rename_all_the_things"}]})";
    CHECK_THROWS_WITH_AS(load_rules(odd), doctest::Contains("unknown transform action"),
                         std::invalid_argument);
}

TEST_CASE("records survive jsonl round trips") {
    auto records = httpd_records(kHttpdSnippet);
    auto back = records_from_jsonl(records_to_jsonl(records), "buffer");
    CHECK(back == records);

    TempDir tmp;
    std::string path = tmp.file("recs.jsonl");
    save_records(records, path);
    CHECK(load_records(path) == records);
    CHECK(records_from_jsonl("", "empty").empty());
    CHECK(records_from_jsonl("\n\n", "blanks").empty());
}

TEST_CASE("malformed record lines are reported with their line number") {
    std::string text = records_to_jsonl(httpd_records("Listen 80\n")) + "{oops\n";
    CHECK_THROWS_WITH_AS(records_from_jsonl(text, "feed"), doctest::Contains("line 2"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(records_from_jsonl("{broken", "feed"),
                         doctest::Contains("malformed record"), std::runtime_error);
}
