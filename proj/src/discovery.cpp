#include "confex/discovery.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace confex {

namespace {

bool is_delimiter(char c) {
    switch (c) {
        case '\t':
        case '=':
        case ' ':
        case ':':
        case '<':
        case '>':
        case '[':
        case ']':
        case ',':
            return true;
        default:
            return false;
    }
}

bool is_comment_line(const std::string& line) {
    std::size_t i = line.find_first_not_of(" \t");
    if (i == std::string::npos) return false;
    if (line[i] == '#' || line[i] == '%') return true;
    return line.compare(i, 2, "//") == 0;
}

}  // namespace

KeywordSet extract_keywords(const std::string& content) {
    KeywordSet keywords;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t eol = content.find('\n', pos);
        std::string line =
            content.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = eol == std::string::npos ? content.size() : eol + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || is_comment_line(line)) continue;

        std::size_t i = 0;
        while (i < line.size() && is_delimiter(line[i])) ++i;
        std::size_t start = i;
        while (i < line.size() && !is_delimiter(line[i])) ++i;
        if (i > start) keywords.insert(line.substr(start, i - start));
    }
    return keywords;
}

Vocabulary train_vocabulary(const std::string& application,
                            const std::vector<std::pair<std::string, std::string>>& files) {
    if (files.empty())
        throw std::invalid_argument("cannot train a vocabulary for " + application +
                                    " from an empty file list");
    Vocabulary vocab;
    vocab.application = application;
    extend_vocabulary(vocab, files);
    return vocab;
}

void extend_vocabulary(Vocabulary& vocab,
                       const std::vector<std::pair<std::string, std::string>>& files) {
    std::set<std::string> known;
    for (const auto& fset : vocab.file_sets) known.insert(fset.source);
    for (const auto& [source, content] : files) {
        if (!known.insert(source).second) continue;
        FileKeywordSet fset;
        fset.source = source;
        fset.keywords = extract_keywords(content);
        vocab.keyword_union.insert(fset.keywords.begin(), fset.keywords.end());
        vocab.file_sets.push_back(std::move(fset));
    }
}

double jaccard(const KeywordSet& a, const KeywordSet& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib)
            ++ia;
        else if (*ib < *ia)
            ++ib;
        else {
            ++inter;
            ++ia;
            ++ib;
        }
    }
    std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

MatchResult best_match(const KeywordSet& test_set, const Vocabulary& vocab, double threshold) {
    MatchResult result;
    if (test_set.empty()) return result;

    std::size_t inter = 0;
    for (const auto& k : test_set)
        if (vocab.keyword_union.count(k)) ++inter;
    double upper = static_cast<double>(inter) / static_cast<double>(test_set.size());
    if (upper < threshold) {
        result.best_similarity = upper;
        return result;
    }

    for (const auto& fset : vocab.file_sets) {
        ++result.comparisons;
        result.best_similarity = std::max(result.best_similarity, jaccard(test_set, fset.keywords));
    }
    result.matched = result.best_similarity >= threshold;
    return result;
}

const FormatMap& builtin_format_map() {
    static const FormatMap m = {{"httpd", Format::Httpd},
                                {"nginx", Format::Nginx},
                                {"mysql", Format::Ini},
                                {"ini", Format::Ini}};
    return m;
}

namespace {

bool syntax_check(const std::string& application, const std::string& content,
                  const LabelOptions& options) {
    auto it = options.formats.find(application);
    if (it == options.formats.end()) return true;  // no gate registered for this application
    try {
        parse_as(it->second, content);
        return true;
    } catch (const ParseError&) {
        return false;
    }
}

}  // namespace

LabelResult label_file(const FileEntry& entry, const std::vector<Vocabulary>& vocabularies,
                       const LabelOptions& options) {
    LabelResult result;
    result.path = entry.path;

    if (extension_excluded(entry.path, options.excluded_extensions)) return result;
    if (entry.size_bytes > options.size_cap) return result;
    if (!entry.content || !looks_like_text(entry.content->substr(0, 8192))) return result;

    KeywordSet test_set = extract_keywords(*entry.content);

    struct Candidate {
        const Vocabulary* vocab;
        double similarity;
    };
    std::vector<Candidate> matched;
    for (const auto& vocab : vocabularies) {
        MatchResult m = best_match(test_set, vocab, options.threshold);
        result.best_similarity = std::max(result.best_similarity, m.best_similarity);
        if (m.matched) matched.push_back({&vocab, m.best_similarity});
    }

    const Candidate* winner = nullptr;
    for (const auto& cand : matched) {
        if (options.syntax_gate && !syntax_check(cand.vocab->application, *entry.content, options))
            continue;
        if (!winner || cand.similarity > winner->similarity ||
            (cand.similarity == winner->similarity &&
             cand.vocab->application < winner->vocab->application))
            winner = &cand;
    }
    if (winner) {
        result.application = winner->vocab->application;
        result.best_similarity = winner->similarity;
        result.syntax_valid = true;
    }
    return result;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
    json file_sets = json::array();
    for (const auto& fset : vocab.file_sets) {
        json keywords = json::array();
        for (const auto& k : fset.keywords) keywords.push_back(k);
        file_sets.push_back({{"source", fset.source}, {"keywords", keywords}});
    }
    json doc = {{"format_version", 1}, {"application", vocab.application}, {"file_sets", file_sets}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
    out << doc.dump(2) << "\n";
}

Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read vocabulary: " + path);
    json doc = json::parse(in);
    if (doc.value("format_version", 0) != 1)
        throw std::runtime_error("unsupported vocabulary format_version in " + path);

    Vocabulary vocab;
    vocab.application = doc.at("application").get<std::string>();
    for (const auto& fs_json : doc.at("file_sets")) {
        FileKeywordSet fset;
        fset.source = fs_json.at("source").get<std::string>();
        for (const auto& k : fs_json.at("keywords")) fset.keywords.insert(k.get<std::string>());
        // the union is always recomputed, never trusted from disk
        vocab.keyword_union.insert(fset.keywords.begin(), fset.keywords.end());
        vocab.file_sets.push_back(std::move(fset));
    }
    return vocab;
}

std::string vocabulary_filename(const std::string& application) {
    return application + ".vocab.json";
}

std::vector<Vocabulary> load_vocabulary_dir(const std::string& dir) {
    std::vector<Vocabulary> vocabs;
    if (!fs::is_directory(dir)) return vocabs;
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string name = e.path().filename().string();
        if (name.size() > 11 && name.compare(name.size() - 11, 11, ".vocab.json") == 0)
            paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) vocabs.push_back(load_vocabulary(p.string()));
    return vocabs;
}

}  // namespace confex
