// Environmental data: users, groups, env vars, and file metadata.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "confex/corpus.hpp"
#include "confex/disambiguate.hpp"

namespace confex {

struct UserRow {
    std::string name, password, uid, gid, gecos, home, shell;
};

struct GroupRow {
    std::string name, password, gid, members;
};

struct FileMeta {
    std::uint32_t mode_bits = 0;
    std::uint32_t owner_uid = 0;
    std::uint32_t owner_gid = 0;
};

struct EnvironmentProfile {
    std::vector<UserRow> users;
    std::vector<GroupRow> groups;
    std::map<std::string, std::string> env_vars;
    std::map<std::string, FileMeta> file_meta;
};

inline constexpr const char* kEnvManifestPath = "/.confex/manifest";

/// Reads /etc/passwd and /etc/group plus the optional env manifest out of a
/// snapshot. Missing or unparseable sources degrade to empty lists with a
/// warning; malformed field values are recorded verbatim.
EnvironmentProfile collect_environment(const InstanceSnapshot& snapshot,
                                       std::vector<std::string>* warnings = nullptr);

/// Renders the profile as records under the pseudo-applications sys.passwd,
/// sys.group, and sys.env so the analysis stage can treat environment state
/// like any other configuration.
std::vector<ConfigRecord> env_to_records(const EnvironmentProfile& profile);

}  // namespace confex
