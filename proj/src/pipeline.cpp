#include "confex/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "confex/envdata.hpp"
#include "confex/parsers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace confex {

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read config file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("config file " + path + " must hold an object");

    PipelineConfig cfg;
    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "threshold") cfg.threshold = value.get<double>();
            else if (key == "size_cap") cfg.size_cap = value.get<std::uint64_t>();
            else if (key == "excluded_extensions")
                cfg.excluded_extensions = value.get<std::vector<std::string>>();
            else if (key == "syntax_gate") cfg.syntax_gate = value.get<bool>();
            else if (key == "active_method")
                cfg.active_method = active_method_from_name(value.get<std::string>());
            else if (key == "cutoff") cfg.cutoff_time = parse_time(value.get<std::string>());
            else if (key == "window_seconds") cfg.window_seconds = value.get<int>();
            else if (key == "entropy_threshold") cfg.entropy_threshold = value.get<double>();
            else if (key == "support_min") cfg.support_min = value.get<double>();
            else if (key == "confidence_min") cfg.confidence_min = value.get<double>();
            else if (key == "top_n") cfg.top_n = value.get<int>();
            else if (key == "jobs") cfg.jobs = value.get<int>();
            else if (key == "vocab_dir") cfg.vocab_dir = value.get<std::string>();
            else if (key == "rule_dir") cfg.rule_dir = value.get<std::string>();
            else throw std::invalid_argument("unknown config field \"" + key + "\"");
        } catch (const json::exception& e) {
            throw std::invalid_argument("config field \"" + key + "\": " + e.what());
        }
    }
    return cfg;
}

std::int64_t parse_time(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("empty time value");
    bool digits = true;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (i == 0 && text[i] == '-') continue;
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) digits = false;
    }
    if (digits) return std::stoll(text);

    int y, mo, d, h, mi, s;
    char tail = '\0';
    int n = std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &s, &tail);
    if (n < 6 || (n == 7 && tail != 'Z'))
        throw std::invalid_argument("time \"" + text +
                                    "\" is neither an epoch nor YYYY-MM-DDTHH:MM:SS[Z]");
    struct tm tm {};
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = s;
    return static_cast<std::int64_t>(timegm(&tm));
}

RuleMap load_rule_dir(const std::string& dir) {
    RuleMap rules;
    if (!fs::is_directory(dir)) throw std::runtime_error("rule directory not found: " + dir);
    static const Format formats[] = {Format::Httpd, Format::Nginx, Format::Ini,
                                     Format::FstabTable, Format::ColonTable};
    for (Format f : formats) {
        fs::path p = fs::path(dir) / (format_name(f) + ".rules.json");
        if (fs::exists(p)) rules[f] = load_rules(p.string());
    }
    return rules;
}

ScanOutcome scan_instance(const InstanceSnapshot& snapshot,
                          const std::vector<Vocabulary>& vocabularies,
                          const PipelineConfig& config, const RuleMap* rule_override) {
    ScanOutcome outcome;
    outcome.instance_id = snapshot.instance_id;
    outcome.files_total = snapshot.entries.size();

    ActiveFileReport active;
    switch (config.active_method) {
        case ActiveMethod::Timestamps:
            active = active_by_timestamps(snapshot, config.cutoff_time, &outcome.warnings);
            break;
        case ActiveMethod::Events:
            active = active_by_events(snapshot, config.window_seconds);
            break;
        case ActiveMethod::None:
            active = active_none(snapshot);
            break;
    }
    outcome.files_active = active.active_paths.size();

    LabelOptions options;
    options.threshold = config.threshold;
    options.size_cap = config.size_cap;
    options.excluded_extensions = config.excluded_extensions;
    options.syntax_gate = config.syntax_gate;

    for (const auto& path : active.active_paths) {
        auto it = snapshot.entries.find(path);
        if (it == snapshot.entries.end()) continue;  // logged path absent from the snapshot
        const FileEntry& entry = it->second;

        LabelResult label = label_file(entry, vocabularies, options);
        if (!label.labeled()) continue;
        outcome.labels.push_back(label);

        auto fmt_it = options.formats.find(label.application);
        if (fmt_it == options.formats.end()) {
            outcome.warnings.push_back("no parse format registered for application \"" +
                                       label.application + "\", skipping " + path);
            continue;
        }
        try {
            ConfigTree tree = parse_as(fmt_it->second, *entry.content, path);
            const std::vector<TransformRule>* rules = nullptr;
            std::vector<TransformRule> builtin;
            if (rule_override) {
                auto rit = rule_override->find(fmt_it->second);
                if (rit != rule_override->end()) rules = &rit->second;
            }
            if (!rules) {
                builtin = builtin_rules(fmt_it->second);
                rules = &builtin;
            }
            ConfigTree canonical = disambiguate(tree, *rules);
            for (auto& record : flatten(canonical, label.application, path))
                outcome.records.push_back(std::move(record));
        } catch (const ParseError& e) {
            outcome.warnings.push_back(std::string("parse failed: ") + e.what());
        } catch (const TransformError& e) {
            outcome.warnings.push_back(std::string("transform failed: ") + e.what());
        }
    }

    EnvironmentProfile env = collect_environment(snapshot, &outcome.warnings);
    for (auto& record : env_to_records(env)) outcome.records.push_back(std::move(record));

    for (const auto& [path, entry] : snapshot.entries) outcome.known_paths.push_back(path);
    return outcome;
}

namespace {

json label_to_json(const LabelResult& label) {
    return {{"path", label.path},
            {"application", label.application},
            {"similarity", label.best_similarity}};
}

}  // namespace

std::vector<ScanSummaryRow> run_scan(const std::vector<ScanJob>& jobs,
                                     const std::vector<Vocabulary>& vocabularies,
                                     const PipelineConfig& config, const std::string& out_dir,
                                     const RuleMap* rule_override) {
    fs::create_directories(out_dir);
    std::vector<ScanSummaryRow> rows(jobs.size());

    unsigned workers = config.jobs > 0 ? static_cast<unsigned>(config.jobs)
                                       : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, std::max<std::size_t>(jobs.size(), 1));

    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const ScanJob& job = jobs[i];
            ScanSummaryRow& row = rows[i];
            row.instance_id = job.instance_id;
            try {
                std::vector<std::string> warnings;
                InstanceSnapshot snapshot =
                    ingest_directory(job.root, job.instance_id,
                                     default_retain_predicate(config.size_cap,
                                                              config.excluded_extensions),
                                     &warnings);
                if (!job.access_log_path.empty())
                    snapshot = ingest_access_log(snapshot, job.access_log_path);

                ScanOutcome outcome = scan_instance(snapshot, vocabularies, config, rule_override);
                warnings.insert(warnings.end(), outcome.warnings.begin(), outcome.warnings.end());

                std::string records_path =
                    (fs::path(out_dir) / (job.instance_id + ".records.jsonl")).string();
                write_file_atomic(records_path, records_to_jsonl(outcome.records));

                std::string paths;
                for (const auto& p : outcome.known_paths) paths += p + "\n";
                write_file_atomic((fs::path(out_dir) / (job.instance_id + ".paths")).string(),
                                  paths);

                row.ok = true;
                row.files_total = outcome.files_total;
                row.files_active = outcome.files_active;
                row.files_labeled = outcome.labels.size();
                row.record_count = outcome.records.size();
                row.labels = outcome.labels;
                row.warnings = std::move(warnings);
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
        }
    };

    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    json summary = json::array();
    for (const auto& row : rows) {
        json labels = json::array();
        for (const auto& label : row.labels) labels.push_back(label_to_json(label));
        summary.push_back({{"instance_id", row.instance_id},
                           {"ok", row.ok},
                           {"error", row.error},
                           {"files_total", row.files_total},
                           {"files_active", row.files_active},
                           {"files_labeled", row.files_labeled},
                           {"records", row.record_count},
                           {"labels", labels},
                           {"warnings", row.warnings}});
    }
    write_file_atomic((fs::path(out_dir) / "scan_summary.json").string(),
                      json({{"format_version", 1}, {"instances", summary}}).dump(2) + "\n");
    return rows;
}

RecordCorpus load_scan_records(const std::string& dir) {
    RecordCorpus corpus;
    if (!fs::is_directory(dir)) throw std::invalid_argument("scan directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string name = e.path().filename().string();
        if (name.size() > 14 && name.rfind(".records.jsonl") == name.size() - 14)
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::string name = file.filename().string();
        std::string id = name.substr(0, name.size() - 14);
        corpus.push_back({id, load_records(file.string())});
    }
    return corpus;
}

std::map<std::string, PathOracle> load_scan_paths(const std::string& dir) {
    std::map<std::string, PathOracle> result;
    if (!fs::is_directory(dir)) throw std::invalid_argument("scan directory not found: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string name = e.path().filename().string();
        if (name.size() <= 6 || name.rfind(".paths") != name.size() - 6) continue;
        std::string id = name.substr(0, name.size() - 6);
        std::ifstream in(e.path(), std::ios::binary);
        PathOracle oracle;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) oracle.insert(line);
        }
        result[id] = std::move(oracle);
    }
    return result;
}

AnalysisModel build_model(const RecordCorpus& corpus, const PathOracle& known_paths,
                          const PipelineConfig& config) {
    AnalysisModel model;
    model.corpus = build_histograms(corpus);
    model.known_paths = known_paths;
    model.types = infer_types(model.corpus, config.entropy_threshold, known_paths);
    model.rules = infer_rules(corpus, model.types, config.support_min, config.confidence_min);
    return model;
}

RecordCorpus corpus_without(const RecordCorpus& corpus, const std::string& instance_id) {
    RecordCorpus rest;
    for (const auto& entry : corpus)
        if (entry.first != instance_id) rest.push_back(entry);
    return rest;
}

InstanceReport analyze_instance(const std::string& instance_id,
                                const std::vector<ConfigRecord>& records,
                                const AnalysisModel& model, const PathOracle& instance_paths,
                                int top_n) {
    InstanceReport report;
    report.instance_id = instance_id;
    SuspectRanking ranking = peerpressure_rank(instance_id, records, model.corpus);
    if (top_n >= 0 && static_cast<std::size_t>(top_n) < ranking.suspects.size())
        ranking.suspects.resize(static_cast<std::size_t>(top_n));
    report.suspects = std::move(ranking.suspects);
    report.violations = detect_violations(records, model.types, model.rules, instance_paths);
    return report;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

}  // namespace confex
