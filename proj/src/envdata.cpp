#include "confex/envdata.hpp"

#include <json.hpp>

#include "confex/parsers.hpp"

using nlohmann::json;

namespace confex {

namespace {

void warn(std::vector<std::string>* warnings, const std::string& msg) {
    if (warnings) warnings->push_back(msg);
}

const std::string* entry_content(const InstanceSnapshot& snap, const std::string& path) {
    auto it = snap.entries.find(path);
    if (it == snap.entries.end() || !it->second.content) return nullptr;
    return &*it->second.content;
}

std::string field(const ConfigNode& row, const std::string& name) {
    for (const auto& leaf : row.children)
        if (leaf.key == name) return leaf.value.value_or("");
    return "";
}

}  // namespace

EnvironmentProfile collect_environment(const InstanceSnapshot& snapshot,
                                       std::vector<std::string>* warnings) {
    EnvironmentProfile profile;

    if (const std::string* passwd = entry_content(snapshot, "/etc/passwd")) {
        try {
            ConfigTree tree = parse_colon_table(*passwd, passwd_schema(), "/etc/passwd");
            for (const auto& row : tree.root.children) {
                UserRow u;
                u.name = field(row, "name");
                u.password = field(row, "password");
                u.uid = field(row, "uid");
                u.gid = field(row, "gid");
                u.gecos = field(row, "gecos");
                u.home = field(row, "home");
                u.shell = field(row, "shell");
                profile.users.push_back(std::move(u));
            }
        } catch (const ParseError& e) {
            warn(warnings, std::string("passwd not usable: ") + e.what());
        }
    } else {
        warn(warnings, "no /etc/passwd content in instance " + snapshot.instance_id);
    }

    if (const std::string* group = entry_content(snapshot, "/etc/group")) {
        try {
            ConfigTree tree = parse_colon_table(*group, group_schema(), "/etc/group");
            for (const auto& row : tree.root.children) {
                GroupRow g;
                g.name = field(row, "name");
                g.password = field(row, "password");
                g.gid = field(row, "gid");
                g.members = field(row, "members");
                profile.groups.push_back(std::move(g));
            }
        } catch (const ParseError& e) {
            warn(warnings, std::string("group not usable: ") + e.what());
        }
    } else {
        warn(warnings, "no /etc/group content in instance " + snapshot.instance_id);
    }

    if (const std::string* manifest = entry_content(snapshot, kEnvManifestPath)) {
        json doc = json::parse(*manifest, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            warn(warnings, std::string(kEnvManifestPath) + " is not valid structured text");
        } else if (doc.contains("env") && doc["env"].is_object()) {
            for (const auto& [k, v] : doc["env"].items())
                profile.env_vars[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
    }

    for (const auto& [path, e] : snapshot.entries)
        profile.file_meta[path] = {e.mode_bits, e.owner_uid, e.owner_gid};

    return profile;
}

std::vector<ConfigRecord> env_to_records(const EnvironmentProfile& profile) {
    std::vector<ConfigRecord> records;

    int ordinal = 0;
    for (const auto& u : profile.users) {
        const std::pair<const char*, const std::string*> fields[] = {
            {"name", &u.name},   {"password", &u.password}, {"uid", &u.uid},  {"gid", &u.gid},
            {"gecos", &u.gecos}, {"home", &u.home},         {"shell", &u.shell}};
        for (const auto& [fname, fval] : fields) {
            ConfigRecord rec;
            rec.application = "sys.passwd";
            rec.file_path = "/etc/passwd";
            rec.key = "passwd/" + u.name + "/" + fname;
            rec.value = *fval;
            rec.entry_ordinal = ++ordinal;
            records.push_back(std::move(rec));
        }
    }

    ordinal = 0;
    for (const auto& g : profile.groups) {
        const std::pair<const char*, const std::string*> fields[] = {{"name", &g.name},
                                                                     {"password", &g.password},
                                                                     {"gid", &g.gid},
                                                                     {"members", &g.members}};
        for (const auto& [fname, fval] : fields) {
            ConfigRecord rec;
            rec.application = "sys.group";
            rec.file_path = "/etc/group";
            rec.key = "group/" + g.name + "/" + fname;
            rec.value = *fval;
            rec.entry_ordinal = ++ordinal;
            records.push_back(std::move(rec));
        }
    }

    ordinal = 0;
    for (const auto& [name, value] : profile.env_vars) {
        ConfigRecord rec;
        rec.application = "sys.env";
        rec.file_path = kEnvManifestPath;
        rec.key = "env/" + name;
        rec.value = value;
        rec.entry_ordinal = ++ordinal;
        records.push_back(std::move(rec));
    }

    return records;
}

}  // namespace confex
