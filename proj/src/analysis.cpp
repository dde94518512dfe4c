#include "confex/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace confex {

int ValueHistogram::total_observations() const {
    int n = 0;
    for (const auto& [v, c] : counts) n += c;
    return n;
}

int ValueHistogram::distinct_values() const { return static_cast<int>(counts.size()); }

CorpusModel build_histograms(const RecordCorpus& corpus) {
    if (corpus.empty()) throw AnalysisError("cannot build histograms from an empty corpus");
    CorpusModel model;
    for (const auto& [instance_id, records] : corpus) {
        if (!model.instance_ids.insert(instance_id).second)
            throw AnalysisError("duplicate instance id in corpus: " + instance_id);
        std::map<std::string, std::set<std::string>> per_key;
        for (const auto& rec : records) per_key[rec.key].insert(rec.value);
        for (const auto& [key, values] : per_key) {
            ValueHistogram& hist = model.histograms[key];
            hist.key = key;
            hist.instance_count += 1;
            for (const auto& v : values) hist.counts[v] += 1;
        }
    }
    return model;
}

SuspectRanking peerpressure_rank(const std::string& test_instance_id,
                                 const std::vector<ConfigRecord>& test_records,
                                 const CorpusModel& model) {
    if (model.instance_ids.count(test_instance_id))
        throw AnalysisError("model was built with the test instance '" + test_instance_id +
                            "'; rebuild it leave-one-out before ranking");

    SuspectRanking ranking;
    ranking.instance_id = test_instance_id;
    for (const auto& rec : test_records) {
        ScoredRecord sr;
        sr.record = rec;
        auto it = model.histograms.find(rec.key);
        if (it != model.histograms.end()) {
            const ValueHistogram& hist = it->second;
            int n = hist.total_observations();
            auto cit = hist.counts.find(rec.value);
            int c = cit == hist.counts.end() ? 0 : cit->second;
            int m = hist.distinct_values() + (cit == hist.counts.end() ? 1 : 0);
            sr.score = static_cast<double>(n - c + 1) / static_cast<double>(n + m);
        }
        ranking.suspects.push_back(std::move(sr));
    }
    std::stable_sort(ranking.suspects.begin(), ranking.suspects.end(),
                     [](const ScoredRecord& a, const ScoredRecord& b) {
                         if (a.score != b.score) return a.score > b.score;
                         if (a.record.key != b.record.key) return a.record.key < b.record.key;
                         return a.record.entry_ordinal < b.record.entry_ordinal;
                     });
    return ranking;
}

double shannon_entropy_bits(const ValueHistogram& hist) {
    int n = hist.total_observations();
    if (n == 0) return 0.0;
    double h = 0.0;
    for (const auto& [v, c] : hist.counts) {
        double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

namespace {

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

bool ip_shape(const std::string& v) {
    int octets = 0;
    std::size_t pos = 0;
    while (pos <= v.size()) {
        std::size_t dot = v.find('.', pos);
        std::string part = v.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty() || part.size() > 3 || !all_digits(part)) return false;
        ++octets;
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    return octets == 4;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

bool type_syntax_ok(ValueType t, const std::string& value) {
    switch (t) {
        case ValueType::Integer: {
            std::size_t i = 0;
            if (i < value.size() && (value[i] == '+' || value[i] == '-')) ++i;
            std::size_t digits = 0;
            while (i < value.size() && std::isdigit(static_cast<unsigned char>(value[i]))) {
                ++i;
                ++digits;
            }
            if (digits == 0) return false;
            if (i < value.size()) {
                char s = value[i];
                if (s != 'K' && s != 'M' && s != 'G' && s != 'k' && s != 'm' && s != 'g')
                    return false;
                ++i;
            }
            return i == value.size();
        }
        case ValueType::IpAddress:
            return ip_shape(value);
        case ValueType::FilePath:
            return !value.empty() && value[0] == '/';
        case ValueType::Port:
            return all_digits(value) && value.size() <= 5 && std::stol(value) <= 65535;
        case ValueType::Boolean: {
            std::string v = lower(value);
            return v == "on" || v == "off" || v == "true" || v == "false" || v == "yes" ||
                   v == "no" || v == "0" || v == "1";
        }
        case ValueType::EnumSmall: {
            if (value.empty()) return false;
            for (char c : value) {
                bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
                          c == ',' || c == '-';
                if (!ok) return false;
            }
            return true;
        }
        case ValueType::Uri: {
            std::size_t scheme = value.find("://");
            if (scheme == std::string::npos || scheme == 0) return false;
            if (!std::isalpha(static_cast<unsigned char>(value[0]))) return false;
            for (std::size_t i = 1; i < scheme; ++i) {
                char c = value[i];
                if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '.' && c != '-')
                    return false;
            }
            if (scheme + 3 >= value.size()) return false;
            return value.find_first_of(" \t") == std::string::npos;
        }
    }
    return false;
}

bool type_semantic_ok(ValueType t, const std::string& value, const PathOracle& known_paths) {
    switch (t) {
        case ValueType::IpAddress: {
            std::size_t pos = 0;
            while (pos <= value.size()) {
                std::size_t dot = value.find('.', pos);
                std::string part =
                    value.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
                if (std::stol(part) > 255) return false;
                if (dot == std::string::npos) break;
                pos = dot + 1;
            }
            return true;
        }
        case ValueType::FilePath: {
            // an empty oracle means no filesystem knowledge, not a missing file
            if (known_paths.empty()) return true;
            if (value.empty()) return false;
            if (known_paths.count(value) > 0) return true;
            // a directory is witnessed by any known file beneath it
            std::string prefix = value.back() == '/' ? value : value + "/";
            auto it = known_paths.lower_bound(prefix);
            return it != known_paths.end() && it->compare(0, prefix.size(), prefix) == 0;
        }
        default:
            return true;
    }
}

namespace {

const std::vector<ValueType>& type_precedence() {
    static const std::vector<ValueType> order = {
        ValueType::Boolean, ValueType::Port,    ValueType::Integer, ValueType::IpAddress,
        ValueType::FilePath, ValueType::Uri,    ValueType::EnumSmall};
    return order;
}

constexpr int kEnumSmallMaxDistinct = 8;

}  // namespace

std::vector<InferredType> infer_types(const CorpusModel& model, double entropy_threshold,
                                      const PathOracle& known_paths) {
    std::vector<InferredType> types;
    for (const auto& [key, hist] : model.histograms) {
        if (shannon_entropy_bits(hist) < entropy_threshold) continue;
        std::vector<std::string> values;
        for (const auto& [v, c] : hist.counts)
            if (!v.empty()) values.push_back(v);
        if (values.empty()) continue;

        for (ValueType t : type_precedence()) {
            if (t == ValueType::EnumSmall &&
                hist.distinct_values() > kEnumSmallMaxDistinct)
                continue;
            bool all_pass = true;
            for (const auto& v : values) {
                if (!type_syntax_ok(t, v) || !type_semantic_ok(t, v, known_paths)) {
                    all_pass = false;
                    break;
                }
            }
            if (all_pass) {
                types.push_back({key, t, hist.total_observations()});
                break;
            }
        }
    }
    return types;
}

bool meets_fraction(int count, int total, double minimum) {
    if (total <= 0) return false;
    return static_cast<double>(count) + 1e-9 >= minimum * static_cast<double>(total);
}

namespace {

using InstanceValues = std::map<std::string, std::set<std::string>>;

std::vector<InstanceValues> instance_value_maps(const RecordCorpus& corpus) {
    std::vector<InstanceValues> maps;
    maps.reserve(corpus.size());
    for (const auto& [id, records] : corpus) {
        InstanceValues m;
        for (const auto& rec : records) m[rec.key].insert(rec.value);
        maps.push_back(std::move(m));
    }
    return maps;
}

bool substring_holds(const std::set<std::string>& a, const std::set<std::string>& b) {
    for (const auto& va : a) {
        bool found = false;
        for (const auto& vb : b)
            if (vb.find(va) != std::string::npos) {
                found = true;
                break;
            }
        if (!found) return false;
    }
    return true;
}

}  // namespace

std::vector<InferredRule> infer_rules(const RecordCorpus& corpus,
                                      const std::vector<InferredType>& types, double support_min,
                                      double confidence_min) {
    const int total = static_cast<int>(corpus.size());
    std::vector<InferredRule> rules;
    if (total == 0) return rules;

    std::vector<InstanceValues> inst = instance_value_maps(corpus);
    std::map<ValueType, std::vector<std::string>> keys_by_type;
    for (const auto& t : types) keys_by_type[t.type].push_back(t.key);
    for (auto& [t, keys] : keys_by_type) std::sort(keys.begin(), keys.end());

    for (const auto& [type, keys] : keys_by_type) {
        // pair templates over same-typed keys
        for (std::size_t i = 0; i < keys.size(); ++i) {
            for (std::size_t j = 0; j < keys.size(); ++j) {
                if (i == j) continue;
                const std::string& a = keys[i];
                const std::string& b = keys[j];
                int both = 0, equal_holds = 0, substr_holds = 0;
                for (const auto& m : inst) {
                    auto ia = m.find(a);
                    auto ib = m.find(b);
                    if (ia == m.end() || ib == m.end()) continue;
                    ++both;
                    if (ia->second == ib->second) ++equal_holds;
                    if (substring_holds(ia->second, ib->second)) ++substr_holds;
                }
                if (both == 0) continue;
                if (i < j && meets_fraction(both, total, support_min) &&
                    meets_fraction(equal_holds, both, confidence_min)) {
                    InferredRule r;
                    r.rule_template = RuleTemplate::EqualToSameTypeEntry;
                    r.keys = {a, b};
                    r.support = static_cast<double>(both) / total;
                    r.confidence = static_cast<double>(equal_holds) / both;
                    rules.push_back(std::move(r));
                }
                if (meets_fraction(both, total, support_min) &&
                    meets_fraction(substr_holds, both, confidence_min)) {
                    InferredRule r;
                    r.rule_template = RuleTemplate::SubstringOfEntry;
                    r.keys = {a, b};
                    r.support = static_cast<double>(both) / total;
                    r.confidence = static_cast<double>(substr_holds) / both;
                    rules.push_back(std::move(r));
                }
            }
        }

        // closed value sets per key: values seen in at least two instances
        for (const auto& key : keys) {
            std::map<std::string, int> value_instances;
            int containing = 0;
            for (const auto& m : inst) {
                auto it = m.find(key);
                if (it == m.end()) continue;
                ++containing;
                for (const auto& v : it->second) value_instances[v] += 1;
            }
            std::set<std::string> value_set;
            for (const auto& [v, c] : value_instances)
                if (c >= 2) value_set.insert(v);
            if (value_set.empty() || containing == 0) continue;

            int holds = 0;
            for (const auto& m : inst) {
                auto it = m.find(key);
                if (it == m.end()) continue;
                bool ok = true;
                for (const auto& v : it->second)
                    if (!value_set.count(v)) {
                        ok = false;
                        break;
                    }
                if (ok) ++holds;
            }
            if (meets_fraction(containing, total, support_min) &&
                meets_fraction(holds, containing, confidence_min)) {
                InferredRule r;
                r.rule_template = RuleTemplate::ValueInSet;
                r.keys = {key};
                r.value_set = std::move(value_set);
                r.support = static_cast<double>(containing) / total;
                r.confidence = static_cast<double>(holds) / containing;
                rules.push_back(std::move(r));
            }
        }
    }

    std::sort(rules.begin(), rules.end(), [](const InferredRule& a, const InferredRule& b) {
        if (a.rule_template != b.rule_template)
            return static_cast<int>(a.rule_template) < static_cast<int>(b.rule_template);
        return a.keys < b.keys;
    });
    return rules;
}

namespace {

bool placeholder_like(const std::string& value) {
    return value.find("__") != std::string::npos || value.find("{{") != std::string::npos ||
           value.find("}}") != std::string::npos;
}

}  // namespace

std::vector<Violation> detect_violations(const std::vector<ConfigRecord>& test_records,
                                         const std::vector<InferredType>& types,
                                         const std::vector<InferredRule>& rules,
                                         const PathOracle& instance_paths) {
    std::vector<Violation> violations;
    std::map<std::string, ValueType> type_of;
    for (const auto& t : types) type_of[t.key] = t.type;

    for (const auto& rec : test_records) {
        auto it = type_of.find(rec.key);
        if (it == type_of.end()) continue;
        ValueType t = it->second;
        std::string tname = value_type_name(t);
        if (placeholder_like(rec.value)) {
            violations.push_back(
                {rec, "type", tname, "placeholder-like value '" + rec.value + "'"});
            continue;
        }
        if (!type_syntax_ok(t, rec.value)) {
            std::string why = "value does not fit " + tname + " syntax";
            if (t == ValueType::FilePath && rec.value.find('\\') != std::string::npos)
                why = "Windows-style path separators in a file path value";
            violations.push_back({rec, "type", tname, why});
            continue;
        }
        if (!type_semantic_ok(t, rec.value, instance_paths)) {
            std::string why = t == ValueType::FilePath
                                  ? "path does not exist in the instance"
                                  : "value fails the " + tname + " semantic check";
            violations.push_back({rec, "type", tname, why});
        }
    }

    std::map<std::string, std::set<std::string>> values_of;
    std::map<std::string, const ConfigRecord*> first_record;
    for (const auto& rec : test_records) {
        values_of[rec.key].insert(rec.value);
        if (!first_record.count(rec.key)) first_record[rec.key] = &rec;
    }

    for (const auto& rule : rules) {
        switch (rule.rule_template) {
            case RuleTemplate::EqualToSameTypeEntry: {
                auto a = values_of.find(rule.keys[0]);
                auto b = values_of.find(rule.keys[1]);
                if (a == values_of.end() || b == values_of.end()) break;
                if (a->second != b->second)
                    violations.push_back({*first_record[rule.keys[0]], "rule",
                                          rule_template_name(rule.rule_template),
                                          "expected the same value as '" + rule.keys[1] + "'"});
                break;
            }
            case RuleTemplate::SubstringOfEntry: {
                auto a = values_of.find(rule.keys[0]);
                auto b = values_of.find(rule.keys[1]);
                if (a == values_of.end() || b == values_of.end()) break;
                if (!substring_holds(a->second, b->second))
                    violations.push_back({*first_record[rule.keys[0]], "rule",
                                          rule_template_name(rule.rule_template),
                                          "expected a value contained in '" + rule.keys[1] + "'"});
                break;
            }
            case RuleTemplate::ValueInSet: {
                for (const auto& rec : test_records) {
                    if (rec.key != rule.keys[0]) continue;
                    if (!rule.value_set.count(rec.value))
                        violations.push_back({rec, "rule",
                                              rule_template_name(rule.rule_template),
                                              "value '" + rec.value +
                                                  "' was never shared across the corpus"});
                }
                break;
            }
        }
    }
    return violations;
}

std::string value_type_name(ValueType t) {
    switch (t) {
        case ValueType::Integer: return "integer";
        case ValueType::IpAddress: return "ip_address";
        case ValueType::FilePath: return "file_path";
        case ValueType::Port: return "port";
        case ValueType::Boolean: return "boolean";
        case ValueType::EnumSmall: return "enum_small";
        case ValueType::Uri: return "uri";
    }
    return "enum_small";
}

ValueType value_type_from_name(const std::string& name) {
    if (name == "integer") return ValueType::Integer;
    if (name == "ip_address") return ValueType::IpAddress;
    if (name == "file_path") return ValueType::FilePath;
    if (name == "port") return ValueType::Port;
    if (name == "boolean") return ValueType::Boolean;
    if (name == "enum_small") return ValueType::EnumSmall;
    if (name == "uri") return ValueType::Uri;
    throw std::invalid_argument("unknown value type: " + name);
}

std::string rule_template_name(RuleTemplate t) {
    switch (t) {
        case RuleTemplate::EqualToSameTypeEntry: return "equal_to_same_type_entry";
        case RuleTemplate::SubstringOfEntry: return "substring_of_entry";
        case RuleTemplate::ValueInSet: return "value_in_set";
    }
    return "value_in_set";
}

RuleTemplate rule_template_from_name(const std::string& name) {
    if (name == "equal_to_same_type_entry") return RuleTemplate::EqualToSameTypeEntry;
    if (name == "substring_of_entry") return RuleTemplate::SubstringOfEntry;
    if (name == "value_in_set") return RuleTemplate::ValueInSet;
    throw std::invalid_argument("unknown rule template: " + name);
}

void save_model(const AnalysisModel& model, const std::string& path) {
    json hists = json::array();
    for (const auto& [key, hist] : model.corpus.histograms) {
        json counts = json::array();
        for (const auto& [v, c] : hist.counts) counts.push_back({v, c});
        hists.push_back({{"key", key}, {"instance_count", hist.instance_count}, {"counts", counts}});
    }
    json types = json::array();
    for (const auto& t : model.types)
        types.push_back({{"key", t.key},
                         {"type", value_type_name(t.type)},
                         {"evidence_count", t.evidence_count}});
    json rules = json::array();
    for (const auto& r : model.rules) {
        json j = {{"template", rule_template_name(r.rule_template)},
                  {"keys", r.keys},
                  {"support", r.support},
                  {"confidence", r.confidence}};
        if (r.rule_template == RuleTemplate::ValueInSet) j["values"] = r.value_set;
        rules.push_back(std::move(j));
    }
    json doc = {{"format_version", 1},
                {"instances", model.corpus.instance_ids},
                {"histograms", hists},
                {"types", types},
                {"rules", rules},
                {"known_paths", model.known_paths}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw AnalysisError("cannot write model: " + path);
    out << doc.dump() << "\n";
}

AnalysisModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw AnalysisError("cannot read model: " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw AnalysisError("model is not valid structured text: " + path);
    if (doc.value("format_version", 0) != 1)
        throw AnalysisError("unsupported model format_version in " + path);

    AnalysisModel model;
    for (const auto& id : doc.at("instances")) model.corpus.instance_ids.insert(id.get<std::string>());
    for (const auto& h : doc.at("histograms")) {
        ValueHistogram hist;
        hist.key = h.at("key").get<std::string>();
        hist.instance_count = h.at("instance_count").get<int>();
        for (const auto& vc : h.at("counts"))
            hist.counts[vc.at(0).get<std::string>()] = vc.at(1).get<int>();
        model.corpus.histograms[hist.key] = std::move(hist);
    }
    for (const auto& t : doc.at("types"))
        model.types.push_back({t.at("key").get<std::string>(),
                               value_type_from_name(t.at("type").get<std::string>()),
                               t.at("evidence_count").get<int>()});
    for (const auto& r : doc.at("rules")) {
        InferredRule rule;
        rule.rule_template = rule_template_from_name(r.at("template").get<std::string>());
        rule.keys = r.at("keys").get<std::vector<std::string>>();
        rule.support = r.at("support").get<double>();
        rule.confidence = r.at("confidence").get<double>();
        if (r.contains("values"))
            for (const auto& v : r.at("values")) rule.value_set.insert(v.get<std::string>());
        model.rules.push_back(std::move(rule));
    }
    for (const auto& p : doc.at("known_paths")) model.known_paths.insert(p.get<std::string>());
    return model;
}

namespace {

json record_json(const ConfigRecord& rec) {
    return {{"application", rec.application},
            {"file_path", rec.file_path},
            {"key", rec.key},
            {"value", rec.value},
            {"entry_ordinal", rec.entry_ordinal}};
}

ConfigRecord record_from_json(const json& j) {
    ConfigRecord rec;
    rec.application = j.at("application").get<std::string>();
    rec.file_path = j.at("file_path").get<std::string>();
    rec.key = j.at("key").get<std::string>();
    rec.value = j.at("value").get<std::string>();
    rec.entry_ordinal = j.at("entry_ordinal").get<int>();
    return rec;
}

}  // namespace

void save_report(const InstanceReport& report, const std::string& path) {
    json suspects = json::array();
    for (const auto& s : report.suspects) {
        json j = record_json(s.record);
        j["score"] = s.score;
        suspects.push_back(std::move(j));
    }
    json violations = json::array();
    for (const auto& v : report.violations) {
        json j = record_json(v.record);
        j["kind"] = v.kind;
        j["subject"] = v.subject;
        j["explanation"] = v.explanation;
        violations.push_back(std::move(j));
    }
    json doc = {{"format_version", 1},
                {"instance_id", report.instance_id},
                {"suspects", suspects},
                {"violations", violations}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw AnalysisError("cannot write report: " + path);
    out << doc.dump(2) << "\n";
}

InstanceReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw AnalysisError("cannot read report: " + path);
    json doc = json::parse(in);
    if (doc.value("format_version", 0) != 1)
        throw AnalysisError("unsupported report format_version in " + path);
    InstanceReport report;
    report.instance_id = doc.at("instance_id").get<std::string>();
    for (const auto& s : doc.at("suspects"))
        report.suspects.push_back({record_from_json(s), s.at("score").get<double>()});
    for (const auto& v : doc.at("violations"))
        report.violations.push_back({record_from_json(v), v.at("kind").get<std::string>(),
                                     v.at("subject").get<std::string>(),
                                     v.at("explanation").get<std::string>()});
    return report;
}

std::string render_report_text(const InstanceReport& report) {
    std::ostringstream out;
    out << "instance " << report.instance_id << "\n";
    out << "  suspects (" << report.suspects.size() << "):\n";
    for (const auto& s : report.suspects) {
        out << "    " << s.score << "  " << s.record.key << " = " << s.record.value << "  ["
            << s.record.application << " " << s.record.file_path << "]\n";
    }
    out << "  violations (" << report.violations.size() << "):\n";
    for (const auto& v : report.violations) {
        out << "    " << v.kind << "/" << v.subject << "  " << v.record.key << " = "
            << v.record.value << ": " << v.explanation << "\n";
    }
    return out.str();
}

}  // namespace confex
