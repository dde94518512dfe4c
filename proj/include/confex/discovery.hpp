// Vocabulary-based identification of application config files.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "confex/corpus.hpp"
#include "confex/parsers.hpp"

namespace confex {

using KeywordSet = std::set<std::string>;

struct FileKeywordSet {
    std::string source;  // training file path
    KeywordSet keywords;
};

/// Per-application training state: one keyword set per training file plus
/// the union of all of them.
struct Vocabulary {
    std::string application;
    std::vector<FileKeywordSet> file_sets;
    KeywordSet keyword_union;
};

inline constexpr double kDefaultConfidenceThreshold = 0.9;

/// First token of every non-comment line. Comment lines are those whose
/// first non-whitespace characters are "//", "#", or "%". Tokens are split
/// on tab, '=', space, ':', '<', '>', '[', ']' and ','.
KeywordSet extract_keywords(const std::string& content);

Vocabulary train_vocabulary(const std::string& application,
                            const std::vector<std::pair<std::string, std::string>>& files);

/// Adds keyword sets for files whose source path is not already present.
void extend_vocabulary(Vocabulary& vocab,
                       const std::vector<std::pair<std::string, std::string>>& files);

double jaccard(const KeywordSet& a, const KeywordSet& b);

struct MatchResult {
    double best_similarity = 0.0;
    bool matched = false;
    std::size_t comparisons = 0;  // per-file-set similarity computations performed
};

/// Highest per-file-set similarity, short-circuited by the vocabulary-union
/// upper bound |test ∩ union| / |test|: when that bound is below the
/// threshold no file set can match, so none is compared.
MatchResult best_match(const KeywordSet& test_set, const Vocabulary& vocab, double threshold);

struct LabelResult {
    std::string path;
    std::string application = "unlabeled";
    double best_similarity = 0.0;
    bool syntax_valid = false;

    bool labeled() const { return application != "unlabeled"; }
};

/// Maps an application name to the format used for its syntax gate.
using FormatMap = std::map<std::string, Format>;

const FormatMap& builtin_format_map();

struct LabelOptions {
    double threshold = kDefaultConfidenceThreshold;
    std::uint64_t size_cap = kDefaultSizeCap;
    std::vector<std::string> excluded_extensions = default_excluded_extensions();
    FormatMap formats = builtin_format_map();
    bool syntax_gate = true;
};

/// Labels one file against every vocabulary. Non-text, oversized, excluded
/// extension, or content-free entries stay unlabeled without inspection.
/// A vocabulary match must also pass the application's syntax gate; among
/// surviving candidates the highest similarity wins, ties broken by
/// application name.
LabelResult label_file(const FileEntry& entry, const std::vector<Vocabulary>& vocabularies,
                       const LabelOptions& options = LabelOptions{});

void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

/// Loads every "*.vocab.json" under a directory, sorted by application name.
std::vector<Vocabulary> load_vocabulary_dir(const std::string& dir);
std::string vocabulary_filename(const std::string& application);

}  // namespace confex
