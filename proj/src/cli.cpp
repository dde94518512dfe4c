#include "confex/cli.hpp"

#include <sys/stat.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "confex/generator.hpp"
#include "confex/parsers.hpp"
#include "confex/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace confex {
namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string glob_to_regex(const std::string& glob) {
    std::string re = "^";
    for (std::size_t i = 0; i < glob.size(); ++i) {
        char c = glob[i];
        if (c == '*') {
            if (i + 2 < glob.size() && glob[i + 1] == '*' && glob[i + 2] == '/') {
                re += "(.*/)?";
                i += 2;
            } else if (i + 1 < glob.size() && glob[i + 1] == '*') {
                re += ".*";
                ++i;
            } else {
                re += "[^/]*";
            }
        } else if (c == '?') {
            re += "[^/]";
        } else if (std::strchr("\\^$.|+()[]{}", c)) {
            re += '\\';
            re += c;
        } else {
            re += c;
        }
    }
    return re + "$";
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns,
                                      std::vector<std::string>* unmatched) {
    std::set<std::string> out;
    for (const auto& pattern : patterns) {
        std::size_t wc = pattern.find_first_of("*?");
        if (wc == std::string::npos) {
            if (fs::is_regular_file(pattern)) out.insert(pattern);
            else if (unmatched) unmatched->push_back(pattern);
            continue;
        }
        std::size_t slash = pattern.rfind('/', wc);
        std::string root =
            slash == std::string::npos ? "." : pattern.substr(0, slash == 0 ? 1 : slash);
        if (!fs::is_directory(root)) {
            if (unmatched) unmatched->push_back(pattern);
            continue;
        }
        std::regex re(glob_to_regex(pattern));
        bool any = false;
        for (auto it = fs::recursive_directory_iterator(
                 root, fs::directory_options::skip_permission_denied);
             it != fs::recursive_directory_iterator(); ++it) {
            if (!it->is_regular_file()) continue;
            std::string full = it->path().string();
            std::string rel = fs::relative(it->path(), root).string();
            if (std::regex_match(full, re) || std::regex_match(rel, re)) {
                out.insert(full);
                any = true;
            }
        }
        if (!any && unmatched) unmatched->push_back(pattern);
    }
    return {out.begin(), out.end()};
}

FileEntry entry_from_disk(const std::string& path) {
    struct stat st {};
    if (::stat(path.c_str(), &st) != 0) throw std::runtime_error("cannot stat " + path);
    FileEntry entry;
    entry.path = path;
    entry.size_bytes = static_cast<std::uint64_t>(st.st_size);
    entry.mtime = st.st_mtime;
    entry.atime = st.st_atime;
    entry.mode_bits = st.st_mode & 07777u;
    entry.owner_uid = st.st_uid;
    entry.owner_gid = st.st_gid;
    entry.content = read_file(path);
    return entry;
}

std::string env_default_dir(const char* leaf) {
    const char* home = std::getenv("CONFEX_HOME");
    if (!home || !*home) return "";
    return (fs::path(home) / leaf).string();
}

// Options shared by the pipeline-backed subcommands. Flag values live in
// shadow fields; resolve() layers them over the config file so an explicit
// flag always wins.
struct PipelineOpts {
    std::string config_file;
    std::string vocab_dir, rule_dir;
    double threshold = 0.0;
    std::uint64_t size_cap = 0;
    bool no_syntax_check = false;
    std::string active = "none";
    std::string cutoff;
    int window = 0, jobs = 0, top_n = 0;
    double entropy = 0.0, support_min = 0.0, confidence_min = 0.0;

    CLI::Option *o_vocab = nullptr, *o_rules = nullptr, *o_threshold = nullptr,
                *o_size_cap = nullptr, *o_no_syntax = nullptr, *o_active = nullptr,
                *o_cutoff = nullptr, *o_window = nullptr, *o_jobs = nullptr, *o_top = nullptr,
                *o_entropy = nullptr, *o_support = nullptr, *o_confidence = nullptr;

    void add_common(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "JSON config file; flags override its fields");
        o_vocab = cmd->add_option("--vocab-dir", vocab_dir, "vocabulary directory");
    }

    void add_discovery(CLI::App* cmd) {
        o_threshold = cmd->add_option("--threshold", threshold, "similarity threshold");
        o_size_cap = cmd->add_option("--size-cap", size_cap, "max file size considered");
        o_no_syntax = cmd->add_flag("--no-syntax-check", no_syntax_check,
                                    "label on keywords alone, skip the parse gate");
    }

    void add_scan(CLI::App* cmd) {
        o_rules = cmd->add_option("--rule-dir", rule_dir, "transform rule directory");
        o_active = cmd->add_option("--active-method", active,
                                   "active-file method: timestamps|events|none")
                       ->check(CLI::IsMember({"timestamps", "events", "none"}));
        o_cutoff = cmd->add_option("--cutoff", cutoff,
                                   "activity cutoff (epoch or YYYY-MM-DDTHH:MM:SS)");
        o_window = cmd->add_option("--window-seconds", window, "event window seconds");
        o_jobs = cmd->add_option("--jobs", jobs, "worker threads (0 = auto)");
    }

    void add_analysis(CLI::App* cmd) {
        o_top = cmd->add_option("--top", top_n, "suspects to keep per instance");
        o_entropy = cmd->add_option("--entropy", entropy, "min value entropy (bits) for typing");
        o_support = cmd->add_option("--support", support_min, "min rule support fraction");
        o_confidence = cmd->add_option("--confidence", confidence_min, "min rule confidence");
    }

    PipelineConfig resolve() const {
        PipelineConfig cfg;
        if (!config_file.empty()) cfg = load_pipeline_config(config_file);
        if (o_vocab && o_vocab->count()) cfg.vocab_dir = vocab_dir;
        if (o_rules && o_rules->count()) cfg.rule_dir = rule_dir;
        if (o_threshold && o_threshold->count()) cfg.threshold = threshold;
        if (o_size_cap && o_size_cap->count()) cfg.size_cap = size_cap;
        if (o_no_syntax && o_no_syntax->count()) cfg.syntax_gate = !no_syntax_check;
        if (o_active && o_active->count()) cfg.active_method = active_method_from_name(active);
        if (o_cutoff && o_cutoff->count()) cfg.cutoff_time = parse_time(cutoff);
        if (o_window && o_window->count()) cfg.window_seconds = window;
        if (o_jobs && o_jobs->count()) cfg.jobs = jobs;
        if (o_top && o_top->count()) cfg.top_n = top_n;
        if (o_entropy && o_entropy->count()) cfg.entropy_threshold = entropy;
        if (o_support && o_support->count()) cfg.support_min = support_min;
        if (o_confidence && o_confidence->count()) cfg.confidence_min = confidence_min;
        if (cfg.vocab_dir.empty()) cfg.vocab_dir = env_default_dir("vocab");
        if (cfg.rule_dir.empty()) {
            std::string d = env_default_dir("rules");
            if (!d.empty() && fs::is_directory(d)) cfg.rule_dir = d;
        }
        return cfg;
    }
};

std::vector<Vocabulary> load_vocabularies_or_fail(const std::string& dir, std::ostream& err) {
    if (dir.empty()) {
        err << "error: no vocabulary directory; pass --vocab-dir or set CONFEX_HOME\n";
        return {};
    }
    if (!fs::is_directory(dir)) {
        err << "error: vocabulary directory not found: " << dir << "\n";
        return {};
    }
    auto vocabularies = load_vocabulary_dir(dir);
    if (vocabularies.empty())
        err << "error: no *.vocab.json files under " << dir << "\n";
    return vocabularies;
}

int cmd_train(const std::string& app_name, const std::vector<std::string>& inputs,
              std::string out_file, const std::string& vocab_dir, std::ostream& out,
              std::ostream& err) {
    std::vector<std::string> unmatched;
    std::vector<std::string> files = expand_globs(inputs, &unmatched);
    for (const auto& miss : unmatched) err << "warning: no files match " << miss << "\n";
    if (files.empty()) {
        err << "error: no training files found\n";
        return 2;
    }

    std::vector<std::pair<std::string, std::string>> sets;
    for (const auto& file : files) {
        std::string content;
        try {
            content = read_file(file);
        } catch (const std::exception& e) {
            err << "warning: " << e.what() << "\n";
            continue;
        }
        if (!looks_like_text(content.substr(0, 8192))) {
            err << "warning: skipping non-text file " << file << "\n";
            continue;
        }
        sets.emplace_back(file, std::move(content));
    }
    if (sets.empty()) {
        err << "error: no usable training files\n";
        return 2;
    }

    if (out_file.empty()) {
        std::string dir = !vocab_dir.empty() ? vocab_dir : env_default_dir("vocab");
        if (dir.empty()) dir = ".";
        fs::create_directories(dir);
        out_file = (fs::path(dir) / vocabulary_filename(app_name)).string();
    }

    Vocabulary vocab;
    if (fs::exists(out_file)) {
        vocab = load_vocabulary(out_file);
        if (vocab.application != app_name) {
            err << "error: " << out_file << " holds vocabulary for \"" << vocab.application
                << "\", not \"" << app_name << "\"\n";
            return 2;
        }
        extend_vocabulary(vocab, sets);
    } else {
        vocab = train_vocabulary(app_name, sets);
    }
    save_vocabulary(vocab, out_file);
    out << "vocabulary " << app_name << ": " << vocab.file_sets.size() << " file sets, "
        << vocab.keyword_union.size() << " keywords -> " << out_file << "\n";
    return 0;
}

int cmd_discover(const PipelineOpts& opts, const std::vector<std::string>& inputs, bool as_json,
                 std::ostream& out, std::ostream& err) {
    PipelineConfig cfg = opts.resolve();
    auto vocabularies = load_vocabularies_or_fail(cfg.vocab_dir, err);
    if (vocabularies.empty()) return 2;

    std::vector<std::string> unmatched;
    std::vector<std::string> files = expand_globs(inputs, &unmatched);
    for (const auto& miss : unmatched) err << "warning: no files match " << miss << "\n";
    if (files.empty()) {
        err << "error: no input files\n";
        return 2;
    }

    LabelOptions options;
    options.threshold = cfg.threshold;
    options.size_cap = cfg.size_cap;
    options.excluded_extensions = cfg.excluded_extensions;
    options.syntax_gate = cfg.syntax_gate;

    bool partial = false;
    for (const auto& file : files) {
        FileEntry entry;
        try {
            entry = entry_from_disk(file);
        } catch (const std::exception& e) {
            err << "warning: " << e.what() << "\n";
            partial = true;
            continue;
        }
        LabelResult label = label_file(entry, vocabularies, options);
        if (as_json) {
            out << json({{"path", label.path},
                         {"application", label.application},
                         {"similarity", label.best_similarity},
                         {"syntax_valid", label.syntax_valid}})
                       .dump()
                << "\n";
        } else {
            char sim[32];
            std::snprintf(sim, sizeof sim, "%.6f", label.best_similarity);
            out << label.path << "\t" << label.application << "\t" << sim << "\n";
        }
    }
    return partial ? 3 : 0;
}

int cmd_scan(const PipelineOpts& opts, const std::vector<std::string>& roots,
             const std::string& out_dir, std::ostream& out, std::ostream& err) {
    PipelineConfig cfg = opts.resolve();
    auto vocabularies = load_vocabularies_or_fail(cfg.vocab_dir, err);
    if (vocabularies.empty()) return 2;

    RuleMap rule_override;
    const RuleMap* rules = nullptr;
    if (!cfg.rule_dir.empty()) {
        rule_override = load_rule_dir(cfg.rule_dir);
        rules = &rule_override;
    }

    std::vector<ScanJob> jobs;
    for (std::string root : roots) {
        while (root.size() > 1 && root.back() == '/') root.pop_back();
        std::string id = fs::path(root).filename().string();
        if (id.size() > 4 && id.rfind(".tar") == id.size() - 4) id.resize(id.size() - 4);
        std::string sidecar = root + ".access.log";
        jobs.push_back({root, id, fs::exists(sidecar) ? sidecar : ""});
    }

    auto rows = run_scan(jobs, vocabularies, cfg, out_dir, rules);

    bool partial = false;
    for (const auto& row : rows) {
        if (row.ok) {
            out << row.instance_id << " ok files=" << row.files_total
                << " active=" << row.files_active << " labeled=" << row.files_labeled
                << " records=" << row.record_count << "\n";
            for (const auto& w : row.warnings) err << row.instance_id << ": warning: " << w << "\n";
        } else {
            partial = true;
            err << row.instance_id << " FAILED: " << row.error << "\n";
        }
    }
    out << "scan artifacts -> " << out_dir << "\n";
    return partial ? 3 : 0;
}

int cmd_analyze(const PipelineOpts& opts, const std::string& scan_dir,
                const std::string& model_file, const std::string& save_model_file,
                bool leave_one_out, std::vector<std::string> targets, const std::string& out_dir,
                std::ostream& out, std::ostream& err) {
    PipelineConfig cfg = opts.resolve();

    RecordCorpus corpus = load_scan_records(scan_dir);
    if (corpus.empty()) {
        err << "error: no *.records.jsonl under " << scan_dir << "\n";
        return 2;
    }
    auto paths_map = load_scan_paths(scan_dir);

    std::map<std::string, const std::vector<ConfigRecord>*> by_id;
    for (const auto& [id, records] : corpus) by_id[id] = &records;

    if (targets.empty())
        for (const auto& [id, records] : corpus) targets.push_back(id);
    for (const auto& target : targets) {
        if (!by_id.count(target)) {
            err << "error: instance \"" << target << "\" not found under " << scan_dir << "\n";
            return 2;
        }
    }

    auto paths_union = [&](const std::string& excluded_id) {
        PathOracle oracle;
        for (const auto& [id, paths] : paths_map)
            if (id != excluded_id) oracle.insert(paths.begin(), paths.end());
        return oracle;
    };

    std::optional<AnalysisModel> loaded;
    if (!model_file.empty()) loaded = load_model(model_file);

    std::optional<AnalysisModel> full;
    auto ensure_full = [&]() -> const AnalysisModel& {
        if (!full) full = build_model(corpus, paths_union(""), cfg);
        return *full;
    };

    if (!save_model_file.empty()) {
        save_model(loaded ? *loaded : ensure_full(), save_model_file);
        out << "model -> " << save_model_file << "\n";
    }

    if (!out_dir.empty()) fs::create_directories(out_dir);

    for (const auto& target : targets) {
        const AnalysisModel* model = nullptr;
        std::optional<AnalysisModel> loo_model;
        if (loaded) {
            if (loaded->corpus.instance_ids.count(target)) {
                if (leave_one_out) {
                    err << "error: cannot leave \"" << target
                        << "\" out of a prebuilt model; analyze from --scan-dir instead\n";
                    return 2;
                }
                err << "error: instance \"" << target
                    << "\" is part of the model; rerun with --leave-one-out\n";
                return 2;
            }
            model = &*loaded;
        } else if (leave_one_out) {
            loo_model = build_model(corpus_without(corpus, target), paths_union(target), cfg);
            model = &*loo_model;
        } else {
            const AnalysisModel& m = ensure_full();
            if (m.corpus.instance_ids.count(target)) {
                err << "error: instance \"" << target
                    << "\" is part of the training corpus; rerun with --leave-one-out\n";
                return 2;
            }
            model = &m;
        }

        PathOracle instance_paths;
        auto pit = paths_map.find(target);
        if (pit != paths_map.end()) instance_paths = pit->second;

        InstanceReport report =
            analyze_instance(target, *by_id.at(target), *model, instance_paths, cfg.top_n);
        out << render_report_text(report);
        if (!out_dir.empty()) {
            std::string path = (fs::path(out_dir) / (target + ".report.json")).string();
            save_report(report, path);
        }
    }
    if (!out_dir.empty()) out << "reports -> " << out_dir << "\n";
    return 0;
}

int cmd_generate(const GenProfile& profile, const std::string& out_dir, std::ostream& out) {
    CorpusManifest manifest = generate_corpus(profile, out_dir);
    out << "generated " << manifest.instances.size() << " instances -> " << out_dir << " (seed "
        << manifest.seed << ")\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& files, std::ostream& out) {
    for (const auto& file : files) out << render_report_text(load_report(file));
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"configuration corpus toolkit: discover, normalize, and cross-check "
                 "config files across machine snapshots"};
    app.set_version_flag("--version", "confex 1.0.0");
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "build or extend a keyword vocabulary");
    std::string train_app, train_out, train_vocab_dir;
    std::vector<std::string> train_inputs;
    std::vector<std::string> train_file_opts;
    train->add_option("--app", train_app, "application name for the vocabulary")->required();
    train->add_option("--out", train_out, "output vocabulary file");
    train->add_option("--vocab-dir", train_vocab_dir, "directory for the default output path");
    train->add_option("--files", train_file_opts, "labeled config files or globs");
    train->add_option("inputs", train_inputs, "labeled config files or globs");

    // discover
    auto* discover = app.add_subcommand("discover", "label loose files against vocabularies");
    PipelineOpts discover_opts;
    std::vector<std::string> discover_inputs;
    bool discover_json = false;
    discover_opts.add_common(discover);
    discover_opts.add_discovery(discover);
    discover->add_flag("--json", discover_json, "emit one JSON object per file");
    discover->add_option("inputs", discover_inputs, "files or globs to label")->required();

    // scan
    auto* scan = app.add_subcommand("scan", "turn instance snapshots into record files");
    PipelineOpts scan_opts;
    std::vector<std::string> scan_roots;
    std::string scan_out;
    scan_opts.add_common(scan);
    scan_opts.add_discovery(scan);
    scan_opts.add_scan(scan);
    scan->add_option("--out", scan_out, "output directory for scan artifacts")->required();
    scan->add_option("roots", scan_roots, "instance directories or tar archives")->required();

    // analyze
    auto* analyze = app.add_subcommand("analyze", "rank outliers and check inferred rules");
    PipelineOpts analyze_opts;
    std::string analyze_scan_dir, analyze_model, analyze_save_model, analyze_out;
    std::vector<std::string> analyze_targets;
    bool analyze_loo = false;
    analyze_opts.add_common(analyze);
    analyze_opts.add_analysis(analyze);
    analyze->add_option("--scan-dir", analyze_scan_dir, "directory produced by scan")->required();
    analyze->add_option("--model", analyze_model, "analyze against a saved model");
    analyze->add_option("--save-model", analyze_save_model, "write the trained model");
    analyze->add_flag("--leave-one-out", analyze_loo,
                      "rebuild the model without each target before ranking it");
    analyze->add_option("--target", analyze_targets, "instance ids to analyze (default: all)");
    analyze->add_option("--out", analyze_out, "directory for per-instance report JSON");

    // generate
    auto* generate = app.add_subcommand("generate", "write a seeded synthetic corpus");
    GenProfile profile;
    std::string gen_out, gen_touch = "all";
    bool gen_access_log = false, gen_no_env = false;
    generate->add_option("--out", gen_out, "corpus output directory")->required();
    generate->add_option("--seed", profile.seed, "corpus seed");
    generate->add_option("--instances", profile.instances, "instance count");
    generate->add_option("--apps", profile.apps, "applications to plant");
    generate->add_option("--planted-per-app", profile.planted_per_app,
                         "config files per app per instance");
    generate->add_option("--nonstandard", profile.nonstandard_fraction,
                         "fraction of planted files placed off default paths");
    generate->add_option("--decoys", profile.decoys_per_instance, "decoy text files per instance");
    generate->add_option("--inject", profile.inject_fraction,
                         "fraction of instances given one fault");
    generate->add_option("--bulk", profile.bulk_files, "extra bulk files per instance");
    generate->add_option("--touch", gen_touch, "files marked recently read: all|none|<count>");
    generate->add_flag("--access-log", gen_access_log, "write per-instance access log sidecars");
    generate->add_option("--reads", profile.logged_reads, "logged in-window reads per instance");
    generate->add_option("--writes", profile.logged_writes, "logged in-window writes");
    generate->add_option("--late-reads", profile.late_reads, "logged reads after the window");
    generate->add_option("--window", profile.window_seconds, "access log window seconds");
    generate->add_flag("--no-env", gen_no_env, "skip /etc/passwd, /etc/group, env manifest");

    // report
    auto* report = app.add_subcommand("report", "pretty-print saved report JSON");
    std::vector<std::string> report_files;
    report->add_option("files", report_files, "report files")->required();

    std::vector<const char*> argv;
    argv.push_back("confex");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*train) {
            train_inputs.insert(train_inputs.end(), train_file_opts.begin(),
                                train_file_opts.end());
            if (train_inputs.empty()) {
                err << "error: train needs input files (positional or --files)\n";
                return 2;
            }
            return cmd_train(train_app, train_inputs, train_out, train_vocab_dir, out, err);
        }
        if (*discover) return cmd_discover(discover_opts, discover_inputs, discover_json, out, err);
        if (*scan) return cmd_scan(scan_opts, scan_roots, scan_out, out, err);
        if (*analyze)
            return cmd_analyze(analyze_opts, analyze_scan_dir, analyze_model, analyze_save_model,
                               analyze_loo, analyze_targets, analyze_out, out, err);
        if (*generate) {
            if (gen_touch == "all") {
                profile.touch_mode = GenProfile::Touch::All;
            } else if (gen_touch == "none") {
                profile.touch_mode = GenProfile::Touch::None;
            } else {
                try {
                    profile.touched_files = std::stoi(gen_touch);
                } catch (const std::exception&) {
                    err << "error: --touch expects all, none, or a count\n";
                    return 2;
                }
                profile.touch_mode = GenProfile::Touch::Count;
            }
            profile.write_access_log = gen_access_log;
            profile.with_env_files = !gen_no_env;
            return cmd_generate(profile, gen_out, out);
        }
        if (*report) return cmd_report(report_files, out);
        err << "error: no subcommand\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace confex
