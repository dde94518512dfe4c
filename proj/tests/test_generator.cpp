#include <doctest.h>

#include <sys/stat.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "confex/active.hpp"
#include "confex/corpus.hpp"
#include "confex/discovery.hpp"
#include "confex/generator.hpp"
#include "confex/parsers.hpp"

using namespace confex;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("confex-gen-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
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
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Relative listing of every regular file with its content, for tree equality.
std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[e.path().lexically_relative(root).string()] = slurp(e.path());
    return out;
}

Format format_for(const std::string& app) {
    if (app == "httpd") return Format::Httpd;
    if (app == "nginx") return Format::Nginx;
    return Format::Ini;
}

GenProfile small_profile() {
    GenProfile p;
    p.seed = 99;
    p.instances = 8;
    p.decoys_per_instance = 6;
    return p;
}

}  // namespace

TEST_CASE("the same seed reproduces the corpus byte for byte") {
    TempDir tmp;
    GenProfile profile = small_profile();
    profile.write_access_log = true;
    profile.logged_reads = 3;
    profile.logged_writes = 1;
    profile.late_reads = 1;
    profile.inject_fraction = 0.25;

    auto m1 = generate_corpus(profile, tmp.sub("one"));
    auto m2 = generate_corpus(profile, tmp.sub("two"));
    CHECK(m1.instances.size() == m2.instances.size());
    CHECK(tree_contents(tmp.sub("one")) == tree_contents(tmp.sub("two")));

    profile.seed = 100;
    generate_corpus(profile, tmp.sub("three"));
    CHECK(tree_contents(tmp.sub("one")) != tree_contents(tmp.sub("three")));
}

TEST_CASE("the manifest mirrors what was written to disk") {
    TempDir tmp;
    GenProfile profile = small_profile();
    auto manifest = generate_corpus(profile, tmp.sub("corpus"));

    CHECK(manifest.seed == profile.seed);
    CHECK(manifest.epoch == kGeneratedEpoch);
    CHECK(manifest.cutoff == kGeneratedEpoch);
    REQUIRE(int(manifest.instances.size()) == profile.instances);

    for (const auto& inst : manifest.instances) {
        fs::path root = fs::path(tmp.sub("corpus")) / inst.id;
        REQUIRE(fs::is_directory(root));
        for (const auto& planted : inst.planted) {
            fs::path on_disk = root / planted.path.substr(1);
            CHECK_MESSAGE(fs::is_regular_file(on_disk), planted.path);
            CHECK_NOTHROW(parse_as(format_for(planted.application), slurp(on_disk)));
        }
        for (const auto& decoy : inst.decoys) CHECK(fs::is_regular_file(root / decoy.substr(1)));
        for (const auto& support : inst.support)
            CHECK(fs::is_regular_file(root / support.substr(1)));
        CHECK(inst.planted.size() == profile.apps.size());
    }

    auto loaded = load_manifest(tmp.sub("corpus") + "/manifest.json");
    CHECK(loaded.seed == manifest.seed);
    CHECK(loaded.cutoff == manifest.cutoff);
    REQUIRE(loaded.instances.size() == manifest.instances.size());
    CHECK(loaded.instances[3].id == manifest.instances[3].id);
    CHECK(loaded.instances[3].planted.size() == manifest.instances[3].planted.size());
}

TEST_CASE("roughly the requested fraction of planted paths is non-standard") {
    TempDir tmp;
    GenProfile profile;
    profile.seed = 5;
    profile.instances = 40;
    profile.decoys_per_instance = 0;
    profile.nonstandard_fraction = 0.5;
    auto manifest = generate_corpus(profile, tmp.sub("corpus"));

    int standard = 0, nonstandard = 0;
    for (const auto& inst : manifest.instances)
        for (const auto& p : inst.planted) (p.standard_path ? standard : nonstandard) += 1;
    int total = standard + nonstandard;
    CHECK(total == 40 * 3);
    CHECK(nonstandard >= int(total * 0.35));
    CHECK(nonstandard <= int(total * 0.65));

    profile.nonstandard_fraction = 0.0;
    profile.seed = 6;
    auto all_std = generate_corpus(profile, tmp.sub("std"));
    for (const auto& inst : all_std.instances)
        for (const auto& p : inst.planted) CHECK(p.standard_path);
}

TEST_CASE("fault injection marks the requested share of instances, one fault each") {
    TempDir tmp;
    GenProfile profile;
    profile.seed = 71;
    profile.instances = 12;
    profile.decoys_per_instance = 0;
    profile.inject_fraction = 0.5;
    auto manifest = generate_corpus(profile, tmp.sub("corpus"));

    int flagged = 0;
    std::set<std::string> kinds;
    for (const auto& inst : manifest.instances) {
        REQUIRE(inst.injected.size() <= 1);
        if (inst.injected.empty()) continue;
        ++flagged;
        const auto& fault = inst.injected[0];
        kinds.insert(fault.kind);
        CHECK_FALSE(fault.key.empty());
        CHECK_FALSE(fault.value.empty());

        // the fault's value is really present in the planted file
        fs::path root = fs::path(tmp.sub("corpus")) / inst.id;
        std::string content = slurp(root / fault.path.substr(1));
        std::string label = inst.id + " " + fault.kind + " " + fault.value;
        CHECK_MESSAGE(content.find(fault.value) != std::string::npos, label);
    }
    CHECK(flagged == 6);  // floor(0.5 * 12)
    CHECK(kinds == std::set<std::string>{"placeholder", "winpath", "outlier"});
}

TEST_CASE("generated httpd files start with two plain directives") {
    Rng rng(13);
    for (int trial = 0; trial < 60; ++trial) {
        std::string content = generate_app_file("httpd", trial % 3, rng);
        std::size_t first_end = content.find('\n');
        std::size_t second_end = content.find('\n', first_end + 1);
        REQUIRE(second_end != std::string::npos);
        std::string first = content.substr(0, first_end);
        std::string second = content.substr(first_end + 1, second_end - first_end - 1);
        for (const std::string& line : {first, second}) {
            CHECK_FALSE(line.empty());
            CHECK(line[0] != '<');
            CHECK(line[0] != '#');
            CHECK(line.find('\n') == std::string::npos);
        }
    }
}

TEST_CASE("one application species always speaks the same keyword vocabulary") {
    for (const std::string app : {"httpd", "nginx", "mysql"}) {
        for (int species = 0; species < species_count(app); ++species) {
            Rng rng_a(1), rng_b(777);
            auto kw_a = extract_keywords(generate_app_file(app, species, rng_a));
            auto kw_b = extract_keywords(generate_app_file(app, species, rng_b));
            std::string label = app + " species " + std::to_string(species);
            CHECK_MESSAGE(kw_a == kw_b, label);
        }
        // different species do differ, otherwise they would be pointless
        Rng rng(3);
        auto kw0 = extract_keywords(generate_app_file(app, 0, rng));
        auto kw1 = extract_keywords(generate_app_file(app, 1, rng));
        CHECK(kw0 != kw1);
    }
}

TEST_CASE("species rotate across instances so every app exposes all of them") {
    TempDir tmp;
    GenProfile profile;
    profile.seed = 21;
    profile.instances = 9;
    profile.decoys_per_instance = 0;
    auto manifest = generate_corpus(profile, tmp.sub("corpus"));
    std::map<std::string, std::set<int>> species_seen;
    for (const auto& inst : manifest.instances)
        for (const auto& p : inst.planted) species_seen[p.application].insert(p.species);
    for (const auto& app : profile.apps)
        CHECK(species_seen.at(app) == std::set<int>{0, 1, 2});
}

TEST_CASE("fault values carry the planted faults verbatim") {
    TempDir tmp;
    Rng rng(500);
    FaultRequest placeholder{"placeholder", false, "", ""};
    std::string content = generate_app_file("nginx", 1, rng, nullptr, &placeholder);
    CHECK(placeholder.applied);
    CHECK(content.find("__PROXY_PASS__") != std::string::npos);
    CHECK(placeholder.value == "__PROXY_PASS__");

    FaultRequest winpath{"winpath", false, "", ""};
    content = generate_app_file("httpd", 0, rng, nullptr, &winpath);
    CHECK(winpath.applied);
    CHECK(content.find("C:\\") != std::string::npos);

    FaultRequest outlier{"outlier", false, "", ""};
    content = generate_app_file("mysql", 0, rng, nullptr, &outlier);
    CHECK(outlier.applied);
    CHECK(content.find(outlier.value) != std::string::npos);
    CHECK(outlier.value == "59991");
}

TEST_CASE("support files exist for the path-valued settings") {
    Rng rng(600);
    std::vector<std::string> support;
    generate_app_file("nginx", 1, rng, &support);
    REQUIRE_FALSE(support.empty());
    for (const auto& p : support) {
        CHECK(p.size() > 1);
        CHECK(p[0] == '/');
    }
}

TEST_CASE("access logs replay exactly the planned reads inside the window") {
    TempDir tmp;
    GenProfile profile;
    profile.seed = 17;
    profile.instances = 5;
    profile.decoys_per_instance = 8;
    profile.write_access_log = true;
    profile.logged_reads = 4;
    profile.logged_writes = 2;
    profile.late_reads = 2;
    profile.window_seconds = 30;
    auto manifest = generate_corpus(profile, tmp.sub("corpus"));

    for (const auto& inst : manifest.instances) {
        REQUIRE_FALSE(inst.access_log.empty());
        CHECK(inst.access_log == inst.id + ".access.log");
        fs::path log_path = fs::path(tmp.sub("corpus")) / inst.access_log;
        REQUIRE(fs::is_regular_file(log_path));

        auto events = parse_access_log_text(slurp(log_path), log_path.string());
        REQUIRE_FALSE(events.empty());
        for (std::size_t i = 1; i < events.size(); ++i)
            CHECK(events[i - 1].timestamp <= events[i].timestamp);

        InstanceSnapshot snap;
        snap.instance_id = inst.id;
        for (const auto& e : events) {
            FileEntry entry;
            entry.path = e.path;
            snap.entries[e.path] = entry;
        }
        snap.access_log = events;
        auto active = active_by_events(snap, profile.window_seconds);
        std::vector<std::string> expected = inst.active_expected;
        std::sort(expected.begin(), expected.end());
        std::vector<std::string> got(active.active_paths.begin(), active.active_paths.end());
        std::sort(got.begin(), got.end());
        CHECK(got == expected);
        CHECK(int(expected.size()) == profile.logged_reads);
    }
}

TEST_CASE("touch plans drive the recorded access times") {
    TempDir tmp;
    GenProfile profile;
    profile.seed = 23;
    profile.instances = 3;
    profile.decoys_per_instance = 5;
    profile.touch_mode = GenProfile::Touch::Count;
    profile.touched_files = 4;
    auto manifest = generate_corpus(profile, tmp.sub("corpus"));

    for (const auto& inst : manifest.instances) {
        CHECK(inst.touched.size() == 4);
        fs::path root = fs::path(tmp.sub("corpus")) / inst.id;
        std::set<std::string> touched(inst.touched.begin(), inst.touched.end());
        for (const auto& planted : inst.planted) {
            struct ::stat st {};
            REQUIRE(::lstat((root / planted.path.substr(1)).c_str(), &st) == 0);
            if (touched.count(planted.path))
                CHECK(st.st_atime >= manifest.cutoff);
            else
                CHECK(st.st_atime < manifest.cutoff);
        }
    }

    GenProfile none = profile;
    none.touch_mode = GenProfile::Touch::None;
    auto m_none = generate_corpus(none, tmp.sub("none"));
    for (const auto& inst : m_none.instances) CHECK(inst.touched.empty());
}

TEST_CASE("bulk files inflate the instance without joining the manifest lists") {
    TempDir tmp;
    GenProfile profile;
    profile.seed = 29;
    profile.instances = 1;
    profile.decoys_per_instance = 2;
    profile.bulk_files = 50;
    auto manifest = generate_corpus(profile, tmp.sub("corpus"));
    const auto& inst = manifest.instances[0];
    fs::path bulk_dir = fs::path(tmp.sub("corpus")) / inst.id / "data/bulk";
    REQUIRE(fs::is_directory(bulk_dir));
    CHECK(std::distance(fs::directory_iterator(bulk_dir), fs::directory_iterator{}) == 50);
    CHECK(inst.decoys.size() == 2);
}

TEST_CASE("environment files appear unless disabled") {
    TempDir tmp;
    GenProfile with_env = small_profile();
    with_env.instances = 2;
    auto manifest = generate_corpus(with_env, tmp.sub("env"));
    for (const auto& inst : manifest.instances) {
        fs::path root = fs::path(tmp.sub("env")) / inst.id;
        CHECK(fs::is_regular_file(root / "etc/passwd"));
        CHECK(fs::is_regular_file(root / "etc/group"));
        CHECK(fs::is_regular_file(root / ".confex/manifest"));
    }

    GenProfile without = with_env;
    without.with_env_files = false;
    auto m2 = generate_corpus(without, tmp.sub("noenv"));
    for (const auto& inst : m2.instances) {
        fs::path root = fs::path(tmp.sub("noenv")) / inst.id;
        CHECK_FALSE(fs::exists(root / "etc/passwd"));
    }
}

TEST_CASE("an access log plan larger than the instance is rejected") {
    TempDir tmp;
    GenProfile profile;
    profile.seed = 31;
    profile.instances = 1;
    profile.decoys_per_instance = 0;
    profile.with_env_files = false;
    profile.write_access_log = true;
    profile.logged_reads = 500;
    CHECK_THROWS_WITH_AS(generate_corpus(profile, tmp.sub("corpus")),
                         doctest::Contains("too small"), std::invalid_argument);
}

TEST_CASE("manifests round trip through disk and reject foreign versions") {
    TempDir tmp;
    GenProfile profile = small_profile();
    profile.instances = 2;
    profile.inject_fraction = 0.5;
    auto manifest = generate_corpus(profile, tmp.sub("corpus"));
    std::string path = tmp.sub("manifest-copy.json");
    save_manifest(manifest, path);
    auto loaded = load_manifest(path);
    CHECK(loaded.seed == manifest.seed);
    CHECK(loaded.window_seconds == manifest.window_seconds);
    REQUIRE(loaded.instances.size() == 2);
    CHECK(loaded.instances[0].injected.size() == manifest.instances[0].injected.size());
    CHECK(loaded.instances[0].planted[0].path == manifest.instances[0].planted[0].path);
    CHECK(loaded.instances[0].planted[0].species == manifest.instances[0].planted[0].species);

    std::string stale = tmp.sub("stale.json");
    std::ofstream(stale) << R"({"format_version": 55})";
    CHECK_THROWS_WITH_AS(load_manifest(stale), doctest::Contains("format_version"),
                         std::runtime_error);
}
