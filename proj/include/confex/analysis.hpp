// Corpus statistics, outlier ranking, and type/rule inference.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "confex/disambiguate.hpp"

namespace confex {

struct AnalysisError : std::runtime_error {
    explicit AnalysisError(const std::string& what) : std::runtime_error(what) {}
};

/// Value distribution of one key across a corpus. A value repeated within a
/// single instance is counted once per (instance, value).
struct ValueHistogram {
    std::string key;
    std::map<std::string, int> counts;
    int instance_count = 0;  // instances containing the key

    int total_observations() const;
    int distinct_values() const;
};

using RecordCorpus = std::vector<std::pair<std::string, std::vector<ConfigRecord>>>;

struct CorpusModel {
    std::map<std::string, ValueHistogram> histograms;
    std::set<std::string> instance_ids;
};

CorpusModel build_histograms(const RecordCorpus& corpus);

struct ScoredRecord {
    ConfigRecord record;
    double score = 0.0;
};

struct SuspectRanking {
    std::string instance_id;
    std::vector<ScoredRecord> suspects;  // descending score
};

/// Smoothed rarity score in [0,1): (n - c + 1) / (n + m) where n counts all
/// observations of the key, c the observations of this value, and m the
/// distinct values including an unseen test value. Keys absent from the
/// model score 0. The model must not contain the test instance.
SuspectRanking peerpressure_rank(const std::string& test_instance_id,
                                 const std::vector<ConfigRecord>& test_records,
                                 const CorpusModel& model);

enum class ValueType { Integer, IpAddress, FilePath, Port, Boolean, EnumSmall, Uri };

std::string value_type_name(ValueType t);
ValueType value_type_from_name(const std::string& name);

struct InferredType {
    std::string key;
    ValueType type = ValueType::EnumSmall;
    int evidence_count = 0;
};

/// Answers "does this absolute path exist in some training snapshot".
using PathOracle = std::set<std::string>;

double shannon_entropy_bits(const ValueHistogram& hist);

bool type_syntax_ok(ValueType t, const std::string& value);
bool type_semantic_ok(ValueType t, const std::string& value, const PathOracle& known_paths);

/// Types every key whose value entropy reaches the threshold and whose
/// non-empty values all pass one type's syntax and semantic checks; more
/// specific types win when several pass.
std::vector<InferredType> infer_types(const CorpusModel& model, double entropy_threshold,
                                      const PathOracle& known_paths);

enum class RuleTemplate { EqualToSameTypeEntry, SubstringOfEntry, ValueInSet };

std::string rule_template_name(RuleTemplate t);
RuleTemplate rule_template_from_name(const std::string& name);

struct InferredRule {
    RuleTemplate rule_template = RuleTemplate::ValueInSet;
    std::vector<std::string> keys;     // 1 key for value sets, 2 for pair rules
    std::set<std::string> value_set;   // ValueInSet only
    double support = 0.0;
    double confidence = 0.0;
};

inline constexpr double kDefaultSupportMin = 0.10;
inline constexpr double kDefaultConfidenceMin = 0.90;
inline constexpr double kDefaultEntropyThreshold = 0.5;

/// Threshold comparison used for both support and confidence: accepts the
/// boundary exactly and rejects one observation below it.
bool meets_fraction(int count, int total, double minimum);

/// Enumerates the rule templates over same-typed keys and keeps rules whose
/// support and confidence reach the minima.
std::vector<InferredRule> infer_rules(const RecordCorpus& corpus,
                                      const std::vector<InferredType>& types,
                                      double support_min = kDefaultSupportMin,
                                      double confidence_min = kDefaultConfidenceMin);

struct Violation {
    ConfigRecord record;
    std::string kind;        // "type" or "rule"
    std::string subject;     // type name or rule template name
    std::string explanation;
};

/// Checks one instance's records against inferred types and rules. The path
/// oracle should describe the instance under test.
std::vector<Violation> detect_violations(const std::vector<ConfigRecord>& test_records,
                                         const std::vector<InferredType>& types,
                                         const std::vector<InferredRule>& rules,
                                         const PathOracle& instance_paths);

struct AnalysisModel {
    CorpusModel corpus;
    std::vector<InferredType> types;
    std::vector<InferredRule> rules;
    PathOracle known_paths;
};

void save_model(const AnalysisModel& model, const std::string& path);
AnalysisModel load_model(const std::string& path);

struct InstanceReport {
    std::string instance_id;
    std::vector<ScoredRecord> suspects;
    std::vector<Violation> violations;
};

void save_report(const InstanceReport& report, const std::string& path);
InstanceReport load_report(const std::string& path);
std::string render_report_text(const InstanceReport& report);

}  // namespace confex
