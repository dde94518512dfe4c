// Seeded synthetic corpus generation with ground-truth manifests.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "confex/rng.hpp"

namespace confex {

struct GenProfile {
    std::uint64_t seed = 1;
    int instances = 100;
    std::vector<std::string> apps = {"httpd", "nginx", "mysql"};
    int planted_per_app = 1;             // config files per app per instance
    double nonstandard_fraction = 0.5;   // planted files placed off default paths
    int decoys_per_instance = 25;        // non-config text files
    double inject_fraction = 0.0;        // instances that get exactly one fault
    int bulk_files = 0;                  // extra plain files (large instances)
    enum class Touch { All, None, Count } touch_mode = Touch::All;
    int touched_files = 0;               // Touch::Count only
    bool write_access_log = false;
    int logged_reads = 0;                // read events inside the window
    int logged_writes = 0;               // write events inside the window
    int late_reads = 0;                  // read events after the window
    int window_seconds = 10;
    bool with_env_files = true;          // /etc/passwd, /etc/group, env manifest
};

struct PlantedFile {
    std::string path;
    std::string application;
    int species = 0;
    bool standard_path = false;
};

struct InjectedFault {
    std::string path;
    std::string application;
    std::string kind;  // "placeholder", "winpath", "outlier"
    std::string key;
    std::string value;
};

struct InstancePlan {
    std::string id;
    std::vector<PlantedFile> planted;
    std::vector<std::string> decoys;
    std::vector<std::string> support;    // files created because configs reference them
    std::vector<InjectedFault> injected;
    std::vector<std::string> touched;          // files given an access time at/after the cutoff
    std::vector<std::string> active_expected;  // read events inside the window
    std::string access_log;                    // sidecar path on disk, "" when absent
};

struct CorpusManifest {
    std::uint64_t seed = 0;
    std::int64_t epoch = 0;   // base wall-clock for generated timestamps
    std::int64_t cutoff = 0;  // activity boundary used for access times
    int window_seconds = 10;
    std::vector<InstancePlan> instances;
};

inline constexpr std::int64_t kGeneratedEpoch = 1700000000;

/// Writes one directory per instance under `out_dir` plus "manifest.json".
CorpusManifest generate_corpus(const GenProfile& profile, const std::string& out_dir);

void save_manifest(const CorpusManifest& manifest, const std::string& path);
CorpusManifest load_manifest(const std::string& path);

/// Fault request passed into a single file generation; `applied` reports
/// what was actually rewritten.
struct FaultRequest {
    std::string kind;
    bool applied = false;
    std::string key;
    std::string value;
};

/// Content of one synthetic config file. Same application and species
/// always yield the same keyword vocabulary; values, ordering, comments,
/// and repeats vary with the RNG. For httpd the first two lines are always
/// plain single-line directives.
std::string generate_app_file(const std::string& app, int species, Rng& rng,
                              std::vector<std::string>* support_paths = nullptr,
                              FaultRequest* fault = nullptr);

int species_count(const std::string& app);

}  // namespace confex
