// End-to-end orchestration: snapshot -> active files -> labels -> records,
// and corpus-level model building, shared by the CLI and the tests.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "confex/active.hpp"
#include "confex/analysis.hpp"
#include "confex/corpus.hpp"
#include "confex/discovery.hpp"
#include "confex/disambiguate.hpp"

namespace confex {

struct PipelineConfig {
    double threshold = kDefaultConfidenceThreshold;
    std::uint64_t size_cap = kDefaultSizeCap;
    std::vector<std::string> excluded_extensions = default_excluded_extensions();
    bool syntax_gate = true;

    ActiveMethod active_method = ActiveMethod::None;
    std::int64_t cutoff_time = 0;   // timestamps method
    int window_seconds = 10;        // events method

    double entropy_threshold = kDefaultEntropyThreshold;
    double support_min = kDefaultSupportMin;
    double confidence_min = kDefaultConfidenceMin;
    int top_n = 10;
    int jobs = 0;  // 0 = hardware concurrency

    std::string vocab_dir;
    std::string rule_dir;  // empty = built-in rules
};

/// Reads a JSON object of config fields; unknown fields are rejected so
/// typos do not silently fall back to defaults.
PipelineConfig load_pipeline_config(const std::string& path);

/// Accepts a decimal epoch or "YYYY-MM-DDTHH:MM:SS" (optional trailing Z),
/// interpreted as UTC.
std::int64_t parse_time(const std::string& text);

using RuleMap = std::map<Format, std::vector<TransformRule>>;

/// Loads "<format>.rules.json" files from a directory; formats without a
/// file keep the built-in rules.
RuleMap load_rule_dir(const std::string& dir);

struct ScanOutcome {
    std::string instance_id;
    std::vector<ConfigRecord> records;
    std::vector<LabelResult> labels;  // labeled files only
    std::vector<std::string> known_paths;
    std::vector<std::string> warnings;
    std::size_t files_total = 0;
    std::size_t files_active = 0;
};

/// Runs one snapshot through active filtering, labeling, parsing,
/// disambiguation, flattening, and environment extraction. Per-file parse
/// or transform problems degrade to warnings; a missing access log under
/// the events method propagates as IngestError.
ScanOutcome scan_instance(const InstanceSnapshot& snapshot,
                          const std::vector<Vocabulary>& vocabularies,
                          const PipelineConfig& config, const RuleMap* rule_override = nullptr);

struct ScanJob {
    std::string root;             // directory or tar archive
    std::string instance_id;
    std::string access_log_path;  // "" = none
};

struct ScanSummaryRow {
    std::string instance_id;
    bool ok = false;
    std::string error;
    std::size_t files_total = 0;
    std::size_t files_active = 0;
    std::size_t files_labeled = 0;
    std::size_t record_count = 0;
    std::vector<LabelResult> labels;
    std::vector<std::string> warnings;
};

/// Scans jobs on a bounded worker pool and writes, per instance,
/// "<id>.records.jsonl" and "<id>.paths" plus one shared
/// "scan_summary.json" into `out_dir`. One instance failing marks its row
/// and never aborts the rest.
std::vector<ScanSummaryRow> run_scan(const std::vector<ScanJob>& jobs,
                                     const std::vector<Vocabulary>& vocabularies,
                                     const PipelineConfig& config, const std::string& out_dir,
                                     const RuleMap* rule_override = nullptr);

/// Loads every "<id>.records.jsonl" under a scan output directory.
RecordCorpus load_scan_records(const std::string& dir);

/// Loads every "<id>.paths" under a scan output directory.
std::map<std::string, PathOracle> load_scan_paths(const std::string& dir);

AnalysisModel build_model(const RecordCorpus& corpus, const PathOracle& known_paths,
                          const PipelineConfig& config);

RecordCorpus corpus_without(const RecordCorpus& corpus, const std::string& instance_id);

InstanceReport analyze_instance(const std::string& instance_id,
                                const std::vector<ConfigRecord>& records,
                                const AnalysisModel& model, const PathOracle& instance_paths,
                                int top_n);

/// Writes via a temp file in the same directory plus rename, so readers
/// never observe a half-written artifact.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace confex
