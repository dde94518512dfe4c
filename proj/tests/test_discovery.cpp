#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "confex/discovery.hpp"
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

FileEntry text_entry(std::string path, std::string content) {
    FileEntry e;
    e.path = std::move(path);
    e.size_bytes = content.size();
    e.content = std::move(content);
    return e;
}

Vocabulary vocab_of(const std::string& app,
                    const std::vector<std::pair<std::string, std::string>>& files) {
    return train_vocabulary(app, files);
}

// Reference implementation without the union shortcut.
double exhaustive_best(const KeywordSet& test_set, const Vocabulary& vocab) {
    double best = 0.0;
    for (const auto& fset : vocab.file_sets) best = std::max(best, jaccard(test_set, fset.keywords));
    return best;
}

KeywordSet random_keyword_set(Rng& rng, std::size_t universe, std::size_t max_size) {
    KeywordSet s;
    std::size_t n = rng.below(max_size + 1);
    for (std::size_t i = 0; i < n; ++i) s.insert("kw" + std::to_string(rng.below(universe)));
    return s;
}

std::string content_for(const KeywordSet& keywords) {
    std::string text;
    for (const auto& k : keywords) text += k + " value\n";
    return text;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("confex-disc-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
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

TEST_CASE("keyword extraction takes the first token of each line") {
    KeywordSet expected = {"ServerRoot", "Listen", "IfModule", "User", "Group", "/IfModule"};
    CHECK(extract_keywords(kHttpdSnippet) == expected);
}

TEST_CASE("comment lines are skipped regardless of leading whitespace") {
    std::string content =
        "# a hash comment\n"
        "   # indented hash\n"
        "\t// slashes\n"
        " % percent\n"
        "Listen 80\n"
        "Timeout 60 # trailing hash is not a comment marker\n";
    KeywordSet expected = {"Listen", "Timeout"};
    CHECK(extract_keywords(content) == expected);
}

TEST_CASE("all declared delimiters split tokens") {
    CHECK(extract_keywords("key=value") == KeywordSet{"key"});
    CHECK(extract_keywords("key:value") == KeywordSet{"key"});
    CHECK(extract_keywords("key\tvalue") == KeywordSet{"key"});
    CHECK(extract_keywords("key,rest") == KeywordSet{"key"});
    CHECK(extract_keywords("[mysqld]") == KeywordSet{"mysqld"});
    CHECK(extract_keywords("<Directory /srv>") == KeywordSet{"Directory"});
    CHECK(extract_keywords("  \t  indented first") == KeywordSet{"indented"});
}

TEST_CASE("table rows contribute only their first column") {
    std::string fstab = "proc  /proc  proc  defaults  0  0\n/dev/sda1 / ext4 errors=remount-ro 0 1\n";
    KeywordSet expected = {"proc", "/dev/sda1"};
    CHECK(extract_keywords(fstab) == expected);
}

TEST_CASE("blank, comment-only, and delimiter-only content yields no keywords") {
    CHECK(extract_keywords("").empty());
    CHECK(extract_keywords("# one\n// two\n% three\n").empty());
    CHECK(extract_keywords("   \n\t\n").empty());
    CHECK(extract_keywords("===\n").empty());
    CHECK(extract_keywords("Listen 80\r\nUser daemon\r\n") == KeywordSet{"Listen", "User"});
}

TEST_CASE("jaccard similarity basics") {
    KeywordSet a = {"x", "y"};
    KeywordSet b = {"y", "z"};
    CHECK(jaccard(a, a) == 1.0);
    CHECK(jaccard(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(jaccard(a, KeywordSet{"p", "q"}) == 0.0);
    CHECK(jaccard(KeywordSet{}, KeywordSet{}) == 0.0);
    CHECK(jaccard(a, KeywordSet{}) == 0.0);
}

TEST_CASE("training keeps one keyword set per file plus their union") {
    auto vocab = vocab_of("httpd", {{"a.conf", "Listen 80\nUser daemon\n"},
                                    {"b.conf", "Listen 8080\nTimeout 60\n"}});
    CHECK(vocab.application == "httpd");
    REQUIRE(vocab.file_sets.size() == 2);
    CHECK(vocab.file_sets[0].source == "a.conf");
    CHECK(vocab.file_sets[0].keywords == KeywordSet{"Listen", "User"});
    CHECK(vocab.file_sets[1].keywords == KeywordSet{"Listen", "Timeout"});
    CHECK(vocab.keyword_union == KeywordSet{"Listen", "User", "Timeout"});
}

TEST_CASE("training from an empty file list is rejected") {
    CHECK_THROWS_AS(train_vocabulary("httpd", {}), std::invalid_argument);
}

TEST_CASE("extending skips already-seen sources and matches batch training") {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::pair<std::string, std::string>> files;
        for (int i = 0; i < 8; ++i)
            files.emplace_back("f" + std::to_string(i),
                               content_for(random_keyword_set(rng, 30, 12)));

        auto batch = train_vocabulary("app", files);
        std::size_t split = 1 + rng.below(files.size() - 1);
        auto incremental = train_vocabulary(
            "app", {files.begin(), files.begin() + static_cast<long>(split)});
        extend_vocabulary(incremental,
                          {files.begin() + static_cast<long>(split), files.end()});

        REQUIRE(incremental.file_sets.size() == batch.file_sets.size());
        for (std::size_t i = 0; i < batch.file_sets.size(); ++i) {
            CHECK(incremental.file_sets[i].source == batch.file_sets[i].source);
            CHECK(incremental.file_sets[i].keywords == batch.file_sets[i].keywords);
        }
        CHECK(incremental.keyword_union == batch.keyword_union);

        extend_vocabulary(incremental, {files[0]});
        CHECK(incremental.file_sets.size() == batch.file_sets.size());
    }
}

TEST_CASE("a training file re-presented matches its own vocabulary exactly") {
    auto vocab = vocab_of("httpd", {{"a.conf", kHttpdSnippet},
                                    {"b.conf", "Timeout 60\nKeepAlive On\n"}});
    auto m = best_match(extract_keywords(kHttpdSnippet), vocab, kDefaultConfidenceThreshold);
    CHECK(m.best_similarity == 1.0);
    CHECK(m.matched);
    CHECK(m.comparisons == 2);
}

TEST_CASE("a disjoint test set is rejected without any per-file comparison") {
    auto vocab = vocab_of("httpd", {{"a.conf", kHttpdSnippet}});
    auto m = best_match(KeywordSet{"wholly", "unrelated"}, vocab, 0.9);
    CHECK_FALSE(m.matched);
    CHECK(m.comparisons == 0);
    CHECK(m.best_similarity == 0.0);
}

TEST_CASE("an empty test set never matches") {
    auto vocab = vocab_of("httpd", {{"a.conf", kHttpdSnippet}});
    auto m = best_match(KeywordSet{}, vocab, 0.0);
    CHECK_FALSE(m.matched);
    CHECK(m.best_similarity == 0.0);
    CHECK(m.comparisons == 0);
}

TEST_CASE("the union shortcut never changes the match decision") {
    Rng rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::pair<std::string, std::string>> files;
        std::size_t n_files = 1 + rng.below(6);
        for (std::size_t i = 0; i < n_files; ++i)
            files.emplace_back("f" + std::to_string(i),
                               content_for(random_keyword_set(rng, 25, 10)));
        auto vocab = train_vocabulary("app", files);
        KeywordSet test_set = random_keyword_set(rng, 25, 10);
        double threshold = rng.real01();

        auto m = best_match(test_set, vocab, threshold);
        double oracle = exhaustive_best(test_set, vocab);

        if (test_set.empty()) {
            CHECK_FALSE(m.matched);
            continue;
        }
        std::size_t inter = 0;
        for (const auto& k : test_set)
            if (vocab.keyword_union.count(k)) ++inter;
        double upper = double(inter) / double(test_set.size());

        CHECK(oracle <= upper + 1e-12);
        CHECK(m.matched == (oracle >= threshold));
        if (upper < threshold) {
            CHECK(m.comparisons == 0);
            CHECK(m.best_similarity == upper);
        } else {
            CHECK(m.comparisons == vocab.file_sets.size());
            CHECK(m.best_similarity == oracle);
        }
    }
}

TEST_CASE("labeling picks the matching application and records syntax validity") {
    std::vector<Vocabulary> vocabs = {
        vocab_of("httpd", {{"a.conf", kHttpdSnippet}}),
        vocab_of("mysql", {{"my.cnf", "[mysqld]\nport=3306\ndatadir=/var/lib/mysql\n"}})};
    auto r = label_file(text_entry("/app/config/web.conf", kHttpdSnippet), vocabs);
    CHECK(r.application == "httpd");
    CHECK(r.labeled());
    CHECK(r.best_similarity == 1.0);
    CHECK(r.syntax_valid);
}

TEST_CASE("excluded extensions stay unlabeled even with matching content") {
    std::vector<Vocabulary> vocabs = {vocab_of("httpd", {{"a.conf", kHttpdSnippet}})};
    auto r = label_file(text_entry("/usr/include/apr.h", kHttpdSnippet), vocabs);
    CHECK_FALSE(r.labeled());
    CHECK(r.best_similarity == 0.0);
}

TEST_CASE("oversized, content-free, and binary entries stay unlabeled") {
    std::vector<Vocabulary> vocabs = {vocab_of("httpd", {{"a.conf", kHttpdSnippet}})};

    FileEntry big = text_entry("/etc/big.conf", kHttpdSnippet);
    big.size_bytes = kDefaultSizeCap + 1;
    CHECK_FALSE(label_file(big, vocabs).labeled());

    FileEntry bare;
    bare.path = "/etc/bare.conf";
    bare.size_bytes = 10;
    CHECK_FALSE(label_file(bare, vocabs).labeled());

    FileEntry binary = text_entry("/etc/blob.conf", std::string("Listen\x00\x01\x02", 9));
    CHECK_FALSE(label_file(binary, vocabs).labeled());
}

TEST_CASE("the syntax gate rejects keyword matches that do not parse") {
    std::string broken = "a=1\nb=2\nc=3\n===\n";
    std::vector<Vocabulary> vocabs = {vocab_of("mysql", {{"my.cnf", broken}})};

    auto gated = label_file(text_entry("/etc/my.cnf", broken), vocabs);
    CHECK_FALSE(gated.labeled());
    CHECK(gated.best_similarity == 1.0);
    CHECK_FALSE(gated.syntax_valid);

    LabelOptions open;
    open.syntax_gate = false;
    auto ungated = label_file(text_entry("/etc/my.cnf", broken), vocabs, open);
    CHECK(ungated.application == "mysql");
}

TEST_CASE("applications without a registered format pass the gate") {
    std::vector<Vocabulary> vocabs = {vocab_of("customapp", {{"c.conf", "=== broken\n<<<\n"}})};
    auto r = label_file(text_entry("/opt/c.conf", "=== broken\n<<<\n"), vocabs);
    CHECK(r.application == "customapp");
}

TEST_CASE("raising the threshold only removes labels") {
    auto vocab = vocab_of("httpd", {{"a.conf", "Alpha 1\nBeta 2\nGamma 3\nDelta 4\n"}});
    std::string test_content = "Alpha x\nBeta y\nGamma z\n";  // similarity 3/4

    LabelOptions low;
    low.threshold = 0.7;
    CHECK(label_file(text_entry("/etc/t.conf", test_content), {vocab}, low).labeled());
    LabelOptions high;
    high.threshold = 0.8;
    CHECK_FALSE(label_file(text_entry("/etc/t.conf", test_content), {vocab}, high).labeled());

    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        auto v = train_vocabulary("app", {{"f", content_for(random_keyword_set(rng, 15, 8))}});
        FileEntry e = text_entry("/etc/x.conf", content_for(random_keyword_set(rng, 15, 8)));
        LabelOptions a, b;
        a.threshold = rng.real01();
        b.threshold = a.threshold + (1.0 - a.threshold) * rng.real01();
        a.syntax_gate = b.syntax_gate = false;
        bool low_labeled = label_file(e, {v}, a).labeled();
        bool high_labeled = label_file(e, {v}, b).labeled();
        if (high_labeled) CHECK(low_labeled);
    }
}

TEST_CASE("ties between applications break toward the lexicographically first name") {
    std::string shared = "Common1 a\nCommon2 b\nCommon3 c\n";
    std::vector<Vocabulary> vocabs = {vocab_of("zeta", {{"z.conf", shared}}),
                                      vocab_of("alpha", {{"a.conf", shared}})};
    auto r = label_file(text_entry("/opt/app.conf", shared), vocabs);
    CHECK(r.application == "alpha");

    // A strictly better similarity still beats a smaller name.
    std::vector<Vocabulary> skewed = {
        vocab_of("zeta", {{"z.conf", shared}}),
        vocab_of("alpha", {{"a.conf", shared + "Extra d\n"}})};
    auto r2 = label_file(text_entry("/opt/app.conf", shared), skewed);
    CHECK(r2.application == "zeta");
    CHECK(r2.best_similarity == 1.0);
}

TEST_CASE("vocabularies survive a save/load round trip") {
    TempDir tmp;
    auto vocab = vocab_of("httpd", {{"a.conf", kHttpdSnippet},
                                    {"b.conf", "Timeout 60\nKeepAlive On\n"}});
    std::string path = tmp.file(vocabulary_filename("httpd"));
    save_vocabulary(vocab, path);
    auto loaded = load_vocabulary(path);
    CHECK(loaded.application == vocab.application);
    REQUIRE(loaded.file_sets.size() == vocab.file_sets.size());
    for (std::size_t i = 0; i < vocab.file_sets.size(); ++i) {
        CHECK(loaded.file_sets[i].source == vocab.file_sets[i].source);
        CHECK(loaded.file_sets[i].keywords == vocab.file_sets[i].keywords);
    }
    CHECK(loaded.keyword_union == vocab.keyword_union);
}

TEST_CASE("the stored union is ignored and recomputed on load") {
    TempDir tmp;
    std::string path = tmp.file("app.vocab.json");
    std::ofstream out(path);
    out << R"({"format_version": 1, "application": "app",
               "keyword_union": ["bogus", "stale"],
               "file_sets": [{"source": "f1", "keywords": ["alpha", "beta"]}]})";
    out.close();
    auto loaded = load_vocabulary(path);
    CHECK(loaded.keyword_union == KeywordSet{"alpha", "beta"});
}

TEST_CASE("vocabulary loading rejects missing files and foreign versions") {
    TempDir tmp;
    CHECK_THROWS_AS(load_vocabulary(tmp.file("absent.vocab.json")), std::runtime_error);
    std::string path = tmp.file("weird.vocab.json");
    std::ofstream(path) << R"({"format_version": 9, "application": "x", "file_sets": []})";
    CHECK_THROWS_WITH_AS(load_vocabulary(path),
                         doctest::Contains("format_version"), std::runtime_error);
}

TEST_CASE("a vocabulary directory loads sorted by application") {
    TempDir tmp;
    save_vocabulary(vocab_of("nginx", {{"n.conf", "worker_processes 4;\n"}}),
                    tmp.file(vocabulary_filename("nginx")));
    save_vocabulary(vocab_of("httpd", {{"h.conf", kHttpdSnippet}}),
                    tmp.file(vocabulary_filename("httpd")));
    std::ofstream(tmp.file("notes.txt")) << "not a vocabulary";
    auto vocabs = load_vocabulary_dir(tmp.path.string());
    REQUIRE(vocabs.size() == 2);
    CHECK(vocabs[0].application == "httpd");
    CHECK(vocabs[1].application == "nginx");
    CHECK(load_vocabulary_dir(tmp.file("missing-subdir")).empty());
}
