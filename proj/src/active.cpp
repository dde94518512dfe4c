#include "confex/active.hpp"

#include <stdexcept>

namespace confex {

ActiveFileReport active_by_timestamps(const InstanceSnapshot& snapshot, std::int64_t cutoff,
                                      std::vector<std::string>* warnings) {
    ActiveFileReport report;
    report.method = ActiveMethod::Timestamps;
    report.cutoff_time = cutoff;
    for (const auto& [path, e] : snapshot.entries) {
        if (!e.atime) {
            if (warnings) warnings->push_back("no access time, treated as inactive: " + path);
            continue;
        }
        if (*e.atime >= cutoff) report.active_paths.insert(path);
    }
    return report;
}

ActiveFileReport active_by_events(const InstanceSnapshot& snapshot, std::int64_t window_seconds) {
    if (!snapshot.access_log)
        throw IngestError("instance " + snapshot.instance_id +
                          " has no access log; use the timestamp or none method instead");
    ActiveFileReport report;
    report.method = ActiveMethod::Events;
    const auto& log = *snapshot.access_log;
    if (log.empty()) return report;
    std::int64_t window_end = log.front().timestamp + window_seconds;
    for (const auto& ev : log) {
        if (ev.flag != AccessFlag::Read) continue;
        if (ev.timestamp <= window_end) report.active_paths.insert(ev.path);
    }
    return report;
}

ActiveFileReport active_none(const InstanceSnapshot& snapshot) {
    ActiveFileReport report;
    report.method = ActiveMethod::None;
    for (const auto& [path, e] : snapshot.entries) report.active_paths.insert(path);
    return report;
}

ActiveMethod active_method_from_name(const std::string& name) {
    if (name == "timestamps") return ActiveMethod::Timestamps;
    if (name == "events") return ActiveMethod::Events;
    if (name == "none") return ActiveMethod::None;
    throw std::invalid_argument("unknown active method: " + name);
}

std::string active_method_name(ActiveMethod m) {
    switch (m) {
        case ActiveMethod::Timestamps: return "timestamps";
        case ActiveMethod::Events: return "events";
        case ActiveMethod::None: return "none";
    }
    return "none";
}

}  // namespace confex
