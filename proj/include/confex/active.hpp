// Narrowing a snapshot to the files an instance actually uses.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "confex/corpus.hpp"

namespace confex {

enum class ActiveMethod { Timestamps, Events, None };

struct ActiveFileReport {
    std::set<std::string> active_paths;
    ActiveMethod method = ActiveMethod::None;
    std::optional<std::int64_t> cutoff_time;
};

/// Entries whose access time is at or after `cutoff`. Entries without an
/// access time are treated as inactive, with a warning.
ActiveFileReport active_by_timestamps(const InstanceSnapshot& snapshot, std::int64_t cutoff,
                                      std::vector<std::string>* warnings = nullptr);

/// Paths of read-flagged events whose timestamp falls within `window_seconds`
/// of the first logged event (inclusive at the window end). Requires an
/// attached access log.
ActiveFileReport active_by_events(const InstanceSnapshot& snapshot, std::int64_t window_seconds = 10);

/// Every entry path; for offline images with no usable access data.
ActiveFileReport active_none(const InstanceSnapshot& snapshot);

ActiveMethod active_method_from_name(const std::string& name);
std::string active_method_name(ActiveMethod m);

}  // namespace confex
