#include "confex/corpus.hpp"

#include <sys/stat.h>
#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace confex {

const std::vector<std::string>& default_excluded_extensions() {
    static const std::vector<std::string> exts = {
        ".h", ".c", ".cpp", ".js", ".css", ".md", ".md5sums", ".html", ".svg"};
    return exts;
}

bool looks_like_text(const std::string& head) {
    if (head.empty()) return true;
    const std::size_t n = std::min<std::size_t>(head.size(), 8192);
    std::size_t good = 0;
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char b = static_cast<unsigned char>(head[i]);
        if (b == 0) return false;
        bool printable = (b >= 0x20 && b <= 0x7e) || b >= 0xa0;
        bool ws = b == '\t' || b == '\n' || b == '\r' || b == '\f' || b == '\v';
        if (printable || ws) ++good;
    }
    return static_cast<double>(good) >= 0.95 * static_cast<double>(n);
}

std::string path_extension(const std::string& path) {
    auto slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    if (dot == std::string::npos || dot == 0) return "";
    std::string ext = base.substr(dot);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

bool extension_excluded(const std::string& path, const std::vector<std::string>& excluded) {
    std::string ext = path_extension(path);
    if (ext.empty()) return false;
    return std::find(excluded.begin(), excluded.end(), ext) != excluded.end();
}

RetainPredicate default_retain_predicate(std::uint64_t size_cap, std::vector<std::string> excluded) {
    return [size_cap, excluded = std::move(excluded)](const FileEntry& e, const std::string& head) {
        if (e.size_bytes > size_cap) return false;
        if (extension_excluded(e.path, excluded)) return false;
        return looks_like_text(head);
    };
}

namespace {

void warn(std::vector<std::string>* warnings, const std::string& msg) {
    if (warnings) warnings->push_back(msg);
}

std::string read_file_bytes(const fs::path& p, bool* ok) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        *ok = false;
        return {};
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    *ok = !in.bad();
    return buf.str();
}

std::string entry_path_for(const fs::path& root, const fs::path& p) {
    // lexical on purpose: fs::relative would resolve symlinks and alias
    // a link entry onto its target's path
    std::string rel = p.lexically_relative(root).generic_string();
    if (rel == ".") rel.clear();
    return "/" + rel;
}

bool is_probably_tar(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return false;
    char block[512];
    in.read(block, sizeof block);
    if (in.gcount() < 512) return false;
    return std::memcmp(block + 257, "ustar", 5) == 0;
}

std::uint64_t parse_octal(const char* field, std::size_t len) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < len; ++i) {
        char c = field[i];
        if (c == '\0' || c == ' ') break;
        if (c < '0' || c > '7') continue;
        v = v * 8 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

void ingest_tar(const fs::path& archive, InstanceSnapshot& snap, const RetainPredicate& retain,
                std::vector<std::string>* warnings) {
    bool ok = true;
    std::string bytes = read_file_bytes(archive, &ok);
    if (!ok) throw IngestError("cannot read archive: " + archive.string());

    std::size_t off = 0;
    std::string pending_longname;
    while (off + 512 <= bytes.size()) {
        const char* hdr = bytes.data() + off;
        bool all_zero = std::all_of(hdr, hdr + 512, [](char c) { return c == '\0'; });
        if (all_zero) break;
        off += 512;

        std::string name(hdr, strnlen(hdr, 100));
        std::uint64_t size = parse_octal(hdr + 124, 12);
        std::uint64_t mode = parse_octal(hdr + 100, 8);
        std::uint64_t uid = parse_octal(hdr + 108, 8);
        std::uint64_t gid = parse_octal(hdr + 116, 8);
        std::uint64_t mtime = parse_octal(hdr + 136, 12);
        char type = hdr[156];
        std::string prefix(hdr + 345, strnlen(hdr + 345, 155));

        std::size_t data_blocks = (size + 511) / 512;
        std::string data;
        if (off + size <= bytes.size()) data.assign(bytes.data() + off, size);
        off += data_blocks * 512;

        if (type == 'L') {  // GNU long name for the next member
            pending_longname = data.c_str();
            continue;
        }
        if (!pending_longname.empty()) {
            name = pending_longname;
            pending_longname.clear();
        } else if (!prefix.empty()) {
            name = prefix + "/" + name;
        }
        if (type == '5' || name.empty() || name.back() == '/') continue;  // directory
        if (type == 'g' || type == 'x') continue;                         // pax metadata

        std::string path = name;
        if (path.rfind("./", 0) == 0) path = path.substr(1);
        if (path.empty()) continue;
        if (path[0] != '/') path = "/" + path;

        FileEntry e;
        e.path = path;
        e.size_bytes = size;
        e.mtime = static_cast<std::int64_t>(mtime);
        e.mode_bits = static_cast<std::uint32_t>(mode);
        e.owner_uid = static_cast<std::uint32_t>(uid);
        e.owner_gid = static_cast<std::uint32_t>(gid);
        if (type == '2') {  // symlink: metadata only
            warn(warnings, "symlink recorded without content: " + path);
        } else if (type == '0' || type == '\0') {
            if (retain(e, data.substr(0, 8192))) e.content = data;
        } else {
            warn(warnings, "non-regular archive member recorded without content: " + path);
        }
        snap.entries[path] = std::move(e);  // last writer wins across layers
    }
}

}  // namespace

InstanceSnapshot ingest_directory(const std::string& root, const std::string& instance_id,
                                  const RetainPredicate& retain, std::vector<std::string>* warnings,
                                  std::optional<std::int64_t> reference_time) {
    InstanceSnapshot snap;
    snap.instance_id = instance_id;
    snap.reference_time = reference_time ? *reference_time
                                         : static_cast<std::int64_t>(::time(nullptr));

    fs::path rootp(root);
    std::error_code ec;
    fs::file_status st = fs::symlink_status(rootp, ec);
    if (ec || st.type() == fs::file_type::not_found)
        throw IngestError("cannot ingest root: " + root);

    if (fs::is_regular_file(st) && is_probably_tar(rootp)) {
        ingest_tar(rootp, snap, retain, warnings);
        return snap;
    }
    if (!fs::is_directory(st)) throw IngestError("ingest root is neither a directory nor a tar archive: " + root);

    std::vector<fs::path> paths;
    for (auto it = fs::recursive_directory_iterator(rootp, fs::directory_options::none, ec);
         it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) throw IngestError("walk failed under " + root + ": " + ec.message());
        if (it->is_directory(ec) && !it->is_symlink()) continue;
        paths.push_back(it->path());
    }
    std::sort(paths.begin(), paths.end());

    for (const auto& p : paths) {
        struct ::stat sb {};
        if (::lstat(p.c_str(), &sb) != 0) {
            warn(warnings, "stat failed, entry skipped: " + p.string());
            continue;
        }
        FileEntry e;
        e.path = entry_path_for(rootp, p);
        e.size_bytes = static_cast<std::uint64_t>(sb.st_size);
        e.mtime = sb.st_mtime;
        e.atime = sb.st_atime;
        e.mode_bits = sb.st_mode & 07777;
        e.owner_uid = sb.st_uid;
        e.owner_gid = sb.st_gid;

        if (S_ISLNK(sb.st_mode)) {
            warn(warnings, "symlink recorded without content: " + e.path);
        } else if (!S_ISREG(sb.st_mode)) {
            warn(warnings, "non-regular file recorded without content: " + e.path);
        } else {
            bool ok = true;
            std::ifstream in(p, std::ios::binary);
            std::string head;
            if (in) {
                head.resize(8192);
                in.read(head.data(), 8192);
                head.resize(static_cast<std::size_t>(in.gcount()));
            } else {
                ok = false;
            }
            if (!ok) {
                warn(warnings, "unreadable file recorded without content: " + e.path);
            } else if (retain(e, head)) {
                std::string body = read_file_bytes(p, &ok);
                if (ok)
                    e.content = std::move(body);
                else
                    warn(warnings, "unreadable file recorded without content: " + e.path);
            }
        }
        snap.entries[e.path] = std::move(e);
    }
    return snap;
}

std::vector<AccessEvent> parse_access_log_text(const std::string& text, const std::string& origin) {
    std::vector<AccessEvent> events;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    std::int64_t last_ts = std::numeric_limits<std::int64_t>::min();
    while (pos <= text.size()) {
        if (pos == text.size()) break;
        std::size_t eol = text.find('\n', pos);
        std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = eol == std::string::npos ? text.size() : eol + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        auto bad = [&](const std::string& why) {
            return IngestError(origin + " line " + std::to_string(lineno) + ": " + why);
        };
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos) throw bad("expected 3 tab-separated fields");
        std::string ts_s = line.substr(0, t1);
        std::string flag_s = line.substr(t1 + 1, t2 - t1 - 1);
        std::string path = line.substr(t2 + 1);
        if (path.find('\t') != std::string::npos) throw bad("expected 3 tab-separated fields");
        if (ts_s.empty() || ts_s.find_first_not_of("0123456789") != std::string::npos)
            throw bad("bad timestamp '" + ts_s + "'");
        if (flag_s != "r" && flag_s != "w") throw bad("bad access flag '" + flag_s + "'");
        if (path.empty() || path[0] != '/') throw bad("path must be absolute");

        AccessEvent ev;
        ev.timestamp = std::stoll(ts_s);
        ev.flag = flag_s == "r" ? AccessFlag::Read : AccessFlag::Write;
        ev.path = path;
        if (ev.timestamp < last_ts) throw bad("timestamps must be non-decreasing");
        last_ts = ev.timestamp;
        events.push_back(std::move(ev));
    }
    return events;
}

InstanceSnapshot ingest_access_log(const InstanceSnapshot& snapshot, const std::string& log_path) {
    bool ok = true;
    std::string text = read_file_bytes(log_path, &ok);
    if (!ok) throw IngestError("cannot read access log: " + log_path);
    InstanceSnapshot out = snapshot;
    out.access_log = parse_access_log_text(text, log_path);
    return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

std::string hash_hex(const std::string& s) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(s)));
    return buf;
}

std::string zlib_deflate(const std::string& in) {
    uLongf bound = compressBound(static_cast<uLong>(in.size()));
    std::string out(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                  reinterpret_cast<const Bytef*>(in.data()), static_cast<uLong>(in.size()),
                  Z_BEST_SPEED) != Z_OK)
        throw IngestError("content compression failed");
    out.resize(bound);
    return out;
}

std::string zlib_inflate(const std::string& in, std::size_t original_size) {
    std::string out(original_size, '\0');
    uLongf got = static_cast<uLongf>(original_size);
    if (uncompress(reinterpret_cast<Bytef*>(out.data()), &got,
                   reinterpret_cast<const Bytef*>(in.data()), static_cast<uLong>(in.size())) != Z_OK ||
        got != original_size)
        throw IngestError("content decompression failed");
    return out;
}

}  // namespace

void save_snapshot(const InstanceSnapshot& snapshot, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "content");
    std::ofstream mf(fs::path(dir) / "manifest.jsonl", std::ios::binary | std::ios::trunc);
    if (!mf) throw IngestError("cannot write snapshot manifest under " + dir);

    json head = {{"format_version", 1},
                 {"instance_id", snapshot.instance_id},
                 {"reference_time", snapshot.reference_time},
                 {"has_access_log", snapshot.access_log.has_value()}};
    mf << head.dump() << "\n";

    for (const auto& [path, e] : snapshot.entries) {
        json j = {{"path", e.path},         {"size_bytes", e.size_bytes}, {"mtime", e.mtime},
                  {"mode_bits", e.mode_bits}, {"owner_uid", e.owner_uid},  {"owner_gid", e.owner_gid}};
        if (e.atime) j["atime"] = *e.atime;
        if (e.content) {
            std::string key = hash_hex(e.path);
            j["content_key"] = key;
            j["content_size"] = e.content->size();
            std::ofstream cf(fs::path(dir) / "content" / (key + ".z"), std::ios::binary | std::ios::trunc);
            std::string z = zlib_deflate(*e.content);
            cf.write(z.data(), static_cast<std::streamsize>(z.size()));
        }
        mf << j.dump() << "\n";
    }

    if (snapshot.access_log) {
        std::ofstream lf(fs::path(dir) / "access_log.tsv", std::ios::binary | std::ios::trunc);
        for (const auto& ev : *snapshot.access_log)
            lf << ev.timestamp << '\t' << (ev.flag == AccessFlag::Read ? 'r' : 'w') << '\t' << ev.path
               << '\n';
    }
}

InstanceSnapshot load_snapshot(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.jsonl", std::ios::binary);
    if (!mf) throw IngestError("cannot read snapshot manifest under " + dir);
    std::string line;
    if (!std::getline(mf, line)) throw IngestError("empty snapshot manifest under " + dir);
    json head = json::parse(line);
    if (head.value("format_version", 0) != 1)
        throw IngestError("unsupported snapshot format_version in " + dir);

    InstanceSnapshot snap;
    snap.instance_id = head.value("instance_id", "");
    snap.reference_time = head.value("reference_time", std::int64_t{0});

    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        FileEntry e;
        e.path = j.at("path").get<std::string>();
        e.size_bytes = j.at("size_bytes").get<std::uint64_t>();
        e.mtime = j.at("mtime").get<std::int64_t>();
        if (j.contains("atime")) e.atime = j.at("atime").get<std::int64_t>();
        e.mode_bits = j.at("mode_bits").get<std::uint32_t>();
        e.owner_uid = j.at("owner_uid").get<std::uint32_t>();
        e.owner_gid = j.at("owner_gid").get<std::uint32_t>();
        if (j.contains("content_key")) {
            bool ok = true;
            std::string z = read_file_bytes(
                fs::path(dir) / "content" / (j.at("content_key").get<std::string>() + ".z"), &ok);
            if (!ok) throw IngestError("missing content blob for " + e.path);
            e.content = zlib_inflate(z, j.at("content_size").get<std::size_t>());
        }
        snap.entries[e.path] = std::move(e);
    }

    if (head.value("has_access_log", false)) {
        bool ok = true;
        std::string text = read_file_bytes(fs::path(dir) / "access_log.tsv", &ok);
        if (!ok) throw IngestError("missing access log in snapshot " + dir);
        snap.access_log = parse_access_log_text(text, dir + "/access_log.tsv");
    }
    return snap;
}

}  // namespace confex
