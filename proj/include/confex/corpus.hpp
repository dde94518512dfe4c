// Snapshot model and ingestion: filesystem trees, tar archives, access logs.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace confex {

struct IngestError : std::runtime_error {
    explicit IngestError(const std::string& what) : std::runtime_error(what) {}
};

/// Metadata (and optionally content) of one file in a snapshot.
struct FileEntry {
    std::string path;            // absolute, as seen inside the instance
    std::uint64_t size_bytes = 0;
    std::int64_t mtime = 0;      // seconds since epoch
    std::optional<std::int64_t> atime;
    std::uint32_t mode_bits = 0;
    std::uint32_t owner_uid = 0;
    std::uint32_t owner_gid = 0;
    std::optional<std::string> content;  // retained only for small text files
};

enum class AccessFlag { Read, Write };

struct AccessEvent {
    std::string path;
    AccessFlag flag = AccessFlag::Read;
    std::int64_t timestamp = 0;
};

/// One machine/container image: an immutable set of file entries plus an
/// optional access log. Access-log paths need not exist among the entries.
struct InstanceSnapshot {
    std::string instance_id;
    std::map<std::string, FileEntry> entries;  // keyed by path
    std::optional<std::vector<AccessEvent>> access_log;
    std::int64_t reference_time = 0;
};

/// Decides whether a file's content is kept in memory. The default keeps
/// text files up to the size cap whose extension is not excluded.
using RetainPredicate = std::function<bool(const FileEntry&, const std::string& content_head)>;

inline constexpr std::uint64_t kDefaultSizeCap = 204800;

const std::vector<std::string>& default_excluded_extensions();

/// True when the first 8KB contain no NUL byte and at least 95% of bytes are
/// printable or whitespace under an 8-bit encoding.
bool looks_like_text(const std::string& head);

/// Lowercased extension including the dot ("" when none).
std::string path_extension(const std::string& path);

bool extension_excluded(const std::string& path, const std::vector<std::string>& excluded);

RetainPredicate default_retain_predicate(std::uint64_t size_cap = kDefaultSizeCap,
                                         std::vector<std::string> excluded = default_excluded_extensions());

/// Walks `root` and builds a snapshot. Entry paths are absolute paths rooted
/// at "/" relative to `root`. Symlinks are recorded as metadata-only entries
/// and never followed. Unreadable or non-regular files degrade to
/// metadata-only entries with a warning. An unreadable root is an error.
/// When `root` is a tar archive the members are ingested the same way, with
/// repeated member paths resolved last-writer-wins.
InstanceSnapshot ingest_directory(const std::string& root,
                                  const std::string& instance_id,
                                  const RetainPredicate& retain = default_retain_predicate(),
                                  std::vector<std::string>* warnings = nullptr,
                                  std::optional<std::int64_t> reference_time = std::nullopt);

/// Parses a tab-separated access log ("<epoch>\t<r|w>\t<path>" per line) and
/// returns a copy of the snapshot with the log attached. Malformed lines and
/// decreasing timestamps raise IngestError naming the line number.
InstanceSnapshot ingest_access_log(const InstanceSnapshot& snapshot, const std::string& log_path);

std::vector<AccessEvent> parse_access_log_text(const std::string& text, const std::string& origin);

/// Writes `manifest.jsonl` plus zlib-compressed content blobs keyed by a
/// 64-bit FNV-1a hash of the entry path; reload restores an equal snapshot.
void save_snapshot(const InstanceSnapshot& snapshot, const std::string& dir);
InstanceSnapshot load_snapshot(const std::string& dir);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace confex
