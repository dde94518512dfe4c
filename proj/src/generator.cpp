#include "confex/generator.hpp"

#include <fcntl.h>
#include <sys/stat.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace confex {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

namespace {

struct WeightedValue {
    const char* value;
    int weight;
};
using Pool = std::vector<WeightedValue>;

std::string pick_weighted(Rng& rng, const Pool& pool) {
    int total = 0;
    for (const auto& wv : pool) total += wv.weight;
    int r = static_cast<int>(rng.below(static_cast<std::size_t>(total)));
    for (const auto& wv : pool) {
        r -= wv.weight;
        if (r < 0) return wv.value;
    }
    return pool.back().value;
}

std::string maybe_quote(Rng& rng, const std::string& v) {
    return rng.chance(0.5) ? "\"" + v + "\"" : v;
}

const std::vector<std::string>& comment_pool() {
    static const std::vector<std::string> c = {
        "# managed by corp-cm, local edits are overwritten",
        "# do not edit by hand",
        "# generated from the golden image",
        "# tuning reviewed 2023-06",
        "# local overrides below",
        "# see the platform wiki for details"};
    return c;
}

// A block is one directive line or one whole section; blocks are shuffled
// and interleaved with comments without changing the keyword vocabulary.
using Block = std::vector<std::string>;

std::string render_blocks(Rng& rng, std::vector<Block> tail, Block head, int head_keep,
                          bool comments_anywhere) {
    rng.shuffle(tail);
    std::vector<std::string> lines;
    for (int i = 0; i < head_keep && i < static_cast<int>(head.size()); ++i)
        lines.push_back(head[i]);
    for (const auto& block : tail) {
        if (comments_anywhere || !lines.empty()) {
            if (rng.chance(0.25)) lines.push_back(rng.pick(comment_pool()));
            if (rng.chance(0.2)) lines.push_back("");
        }
        for (const auto& l : block) lines.push_back(l);
    }
    if (rng.chance(0.3)) lines.push_back(rng.pick(comment_pool()));
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

struct FaultSink {
    FaultRequest* req;

    bool want(const char* kind) const { return req && !req->applied && req->kind == kind; }

    std::string path_value(const std::string& normal, const std::string& record_key) {
        if (want("placeholder")) return apply(record_key, "__PROXY_PASS__");
        if (want("winpath")) return apply(record_key, "C:\\Apache\\logs\\error.log");
        return normal;
    }

    std::string numeric_value(const std::string& normal, const std::string& record_key) {
        if (want("outlier")) return apply(record_key, "59991");
        return normal;
    }

    std::string apply(const std::string& key, const std::string& value) {
        req->applied = true;
        req->key = key;
        req->value = value;
        return value;
    }
};

void note_support(std::vector<std::string>* support, const std::string& path) {
    if (support) support->push_back(path);
}

std::string emit_httpd(int species, Rng& rng, std::vector<std::string>* support,
                       FaultRequest* fault) {
    FaultSink sink{fault};
    Block head;
    std::vector<Block> tail;

    static const Pool ports = {{"80", 760}, {"8080", 120}, {"8443", 120}};
    static const Pool onoff = {{"On", 700}, {"Off", 300}};

    switch (species % 3) {
        case 0: {
            static const Pool roots = {{"/var/www", 760}, {"/srv/www", 120}, {"/opt/www", 120}};
            static const Pool timeouts = {{"60", 500}, {"120", 300}, {"300", 200}};
            static const Pool levels = {{"warn", 550}, {"info", 210}, {"error", 120}, {"debug", 120}};
            static const Pool errlogs = {{"/var/log/httpd/error.log", 760},
                                         {"/var/log/httpd/err.log", 120},
                                         {"/var/log/apache-error.log", 120}};
            static const Pool users = {{"daemon", 700}, {"www-data", 180}, {"apache", 120}};

            head.push_back("Listen " + sink.numeric_value(pick_weighted(rng, ports), "Listen"));
            head.push_back("ServerRoot " + maybe_quote(rng, pick_weighted(rng, roots)));

            tail.push_back({"Timeout " + pick_weighted(rng, timeouts)});
            tail.push_back({"KeepAlive " + pick_weighted(rng, onoff)});
            tail.push_back({"LogLevel " + pick_weighted(rng, levels)});
            std::string errlog = sink.path_value(pick_weighted(rng, errlogs), "ErrorLog");
            if (errlog[0] == '/') note_support(support, errlog);
            tail.push_back({"ErrorLog " + maybe_quote(rng, errlog)});
            tail.push_back({"<IfModule unixd_module>",
                            "    User " + pick_weighted(rng, users),
                            "    Group " + pick_weighted(rng, users), "</IfModule>"});
            if (rng.chance(0.3)) tail.push_back({"Listen " + pick_weighted(rng, ports)});
            break;
        }
        case 1: {
            static const Pool admins = {{"webmaster@example.com", 700}, {"admin@example.com", 300}};
            static const Pool docroots = {{"/var/www/html", 700}, {"/srv/site", 180}, {"/opt/site", 120}};
            static const Pool indexes = {{"index.html", 800}, {"index.htm", 200}};
            static const Pool maxreq = {{"100", 600}, {"500", 250}, {"1000", 150}};
            static const Pool red_from = {{"/old", 700}, {"/legacy", 300}};
            static const Pool red_to = {{"/new", 700}, {"/current", 300}};
            static const Pool overrides = {{"None", 800}, {"All", 200}};

            head.push_back("ServerAdmin " + pick_weighted(rng, admins));
            std::string docroot = sink.path_value(pick_weighted(rng, docroots), "DocumentRoot");
            if (docroot[0] == '/') note_support(support, docroot + "/index.html");
            head.push_back("DocumentRoot " + maybe_quote(rng, docroot));

            tail.push_back({"DirectoryIndex " + pick_weighted(rng, indexes)});
            tail.push_back({"HostnameLookups " + pick_weighted(rng, onoff)});
            tail.push_back({"MaxKeepAliveRequests " +
                            sink.numeric_value(pick_weighted(rng, maxreq), "MaxKeepAliveRequests")});
            tail.push_back({"Redirect " + pick_weighted(rng, red_from) + " " +
                            pick_weighted(rng, red_to)});
            tail.push_back({"<Directory " + maybe_quote(rng, pick_weighted(rng, docroots)) + ">",
                            "    AllowOverride " + pick_weighted(rng, overrides),
                            "    Require all granted", "</Directory>"});
            break;
        }
        default: {
            static const Pool tokens = {{"Prod", 500}, {"Full", 300}, {"Minimal", 200}};
            static const Pool starts = {{"5", 600}, {"3", 250}, {"8", 150}};
            static const Pool minspare = {{"5", 700}, {"10", 300}};
            static const Pool maxspare = {{"10", 600}, {"20", 400}};
            static const Pool workers = {{"256", 600}, {"150", 250}, {"400", 150}};
            static const Pool pidfiles = {{"/var/run/httpd.pid", 760},
                                          {"/run/httpd/httpd.pid", 120},
                                          {"/var/run/apache2.pid", 120}};
            static const Pool limits = {{"256", 700}, {"512", 300}};

            head.push_back("ServerTokens " + pick_weighted(rng, tokens));
            head.push_back("StartServers " + pick_weighted(rng, starts));

            tail.push_back({"MinSpareServers " + pick_weighted(rng, minspare)});
            tail.push_back({"MaxSpareServers " + pick_weighted(rng, maxspare)});
            tail.push_back({"MaxRequestWorkers " +
                            sink.numeric_value(pick_weighted(rng, workers), "MaxRequestWorkers")});
            tail.push_back({"EnableSendfile " + pick_weighted(rng, onoff)});
            std::string pidfile = sink.path_value(pick_weighted(rng, pidfiles), "PidFile");
            if (pidfile[0] == '/') note_support(support, pidfile);
            tail.push_back({"PidFile " + maybe_quote(rng, pidfile)});
            tail.push_back({"<IfModule mpm_prefork_module>",
                            "    ServerLimit " + pick_weighted(rng, limits), "</IfModule>"});
            break;
        }
    }
    return render_blocks(rng, std::move(tail), std::move(head), 2, false);
}

std::string emit_nginx(int species, Rng& rng, std::vector<std::string>* support,
                       FaultRequest* fault) {
    FaultSink sink{fault};
    std::vector<Block> blocks;
    static const Pool gzswitch = {{"on", 750}, {"off", 250}};

    switch (species % 3) {
        case 0: {
            static const Pool wprocs = {{"4", 600}, {"2", 250}, {"8", 150}};
            static const Pool pids = {{"/run/nginx.pid", 760},
                                      {"/var/run/nginx.pid", 120},
                                      {"/run/nginx/nginx.pid", 120}};
            static const Pool errlogs = {{"/var/log/nginx/error.log", 850},
                                         {"/var/log/nginx/err.log", 150}};
            static const Pool wconns = {{"1024", 700}, {"768", 180}, {"512", 120}};
            static const Pool keepal = {{"65", 800}, {"75", 200}};

            blocks.push_back({"worker_processes " +
                              sink.numeric_value(pick_weighted(rng, wprocs), "worker_processes") +
                              ";"});
            std::string pid = sink.path_value(pick_weighted(rng, pids), "pid");
            if (pid[0] == '/') note_support(support, pid);
            blocks.push_back({"pid " + pid + ";"});
            std::string errlog = pick_weighted(rng, errlogs);
            note_support(support, errlog);
            blocks.push_back({"error_log " + errlog + ";"});
            blocks.push_back({"events {", "    worker_connections " + pick_weighted(rng, wconns) + ";",
                              "}"});
            blocks.push_back({"http {", "    sendfile " + pick_weighted(rng, gzswitch) + ";",
                              "    keepalive_timeout " + pick_weighted(rng, keepal) + ";", "}"});
            break;
        }
        case 1: {
            static const Pool nusers = {{"nginx", 800}, {"www-data", 200}};
            static const Pool lports = {{"80", 880}, {"8080", 120}};
            static const Pool snames = {{"localhost", 600}, {"example.com", 400}};
            static const Pool nroots = {{"/usr/share/nginx/html", 760},
                                        {"/srv/www/public", 120},
                                        {"/var/www/nginx", 120}};
            static const Pool idx = {{"index.html index.htm", 700}, {"index.html", 300}};

            blocks.push_back({"user " + pick_weighted(rng, nusers) + ";"});
            std::string root = sink.path_value(pick_weighted(rng, nroots), "http/server/root");
            if (root[0] == '/') note_support(support, root + "/index.html");
            blocks.push_back(
                {"http {", "    server {",
                 "        listen " + sink.numeric_value(pick_weighted(rng, lports),
                                                        "http/server/listen") + ";",
                 "        server_name " + pick_weighted(rng, snames) + ";",
                 "        root " + root + ";", "        index " + pick_weighted(rng, idx) + ";",
                 "        location / {", "            try_files $uri $uri/ =404;", "        }",
                 "    }", "}"});
            break;
        }
        default: {
            static const Pool rlimits = {{"65535", 700}, {"30000", 300}};
            static const Pool acclogs = {{"/var/log/nginx/access.log", 760},
                                         {"/var/log/nginx/acc.log", 120},
                                         {"/var/log/nginx-access.log", 120}};
            static const Pool upstreams = {{"10.0.0.5:8080", 700}, {"10.0.0.6:8080", 300}};

            blocks.push_back({"worker_rlimit_nofile " +
                              sink.numeric_value(pick_weighted(rng, rlimits),
                                                 "worker_rlimit_nofile") + ";"});
            std::string acclog = sink.path_value(pick_weighted(rng, acclogs), "http/access_log");
            if (acclog[0] == '/') note_support(support, acclog);
            blocks.push_back({"http {", "    gzip " + pick_weighted(rng, gzswitch) + ";",
                              "    access_log " + acclog + ";", "    upstream backend {",
                              "        server " + pick_weighted(rng, upstreams) + ";", "    }",
                              "}"});
            break;
        }
    }
    return render_blocks(rng, std::move(blocks), {}, 0, true);
}

std::string emit_ini(int species, Rng& rng, std::vector<std::string>* support,
                     FaultRequest* fault) {
    FaultSink sink{fault};
    // sections stay contiguous; only the keys inside them are shuffled
    std::vector<std::pair<std::string, std::vector<std::string>>> sections;

    switch (species % 3) {
        case 0: {
            static const Pool mports = {{"3306", 760}, {"3307", 120}, {"33060", 120}};
            static const Pool socks = {{"/var/run/mysqld/mysqld.sock", 880}, {"/tmp/mysql.sock", 120}};
            static const Pool datadirs = {{"/var/lib/mysql", 760},
                                          {"/data/mysql", 120},
                                          {"/srv/mysql", 120}};
            static const Pool binds = {{"127.0.0.1", 850}, {"0.0.0.0", 150}};
            static const Pool musers = {{"mysql", 850}, {"mysqld", 150}};

            std::string sock = pick_weighted(rng, socks);
            sections.push_back(
                {"client", {"port=" + pick_weighted(rng, mports), "socket=" + sock}});
            std::string datadir = sink.path_value(pick_weighted(rng, datadirs), "mysqld/datadir");
            if (datadir[0] == '/') note_support(support, datadir + "/ibdata1");
            sections.push_back({"mysqld",
                                {"user=" + pick_weighted(rng, musers),
                                 "port=" + sink.numeric_value(pick_weighted(rng, mports),
                                                              "mysqld/port"),
                                 "datadir=" + datadir,
                                 "bind-address=" + pick_weighted(rng, binds)}});
            break;
        }
        case 1: {
            static const Pool kbuf = {{"16M", 700}, {"32M", 180}, {"8M", 120}};
            static const Pool maxpkt = {{"64M", 600}, {"16M", 400}};
            static const Pool tstack = {{"192K", 800}, {"256K", 200}};
            static const Pool tcache = {{"8", 600}, {"16", 400}};
            static const Pool tmpdirs = {{"/tmp", 760}, {"/var/tmp", 120}, {"/var/tmp/mysql", 120}};

            std::string tmpdir = sink.path_value(pick_weighted(rng, tmpdirs), "mysqld/tmpdir");
            if (tmpdir[0] == '/') note_support(support, tmpdir + "/.keep");
            sections.push_back(
                {"mysqld",
                 {"key_buffer_size=" + pick_weighted(rng, kbuf),
                  "max_allowed_packet=" + pick_weighted(rng, maxpkt),
                  "thread_stack=" + pick_weighted(rng, tstack),
                  "thread_cache_size=" + sink.numeric_value(pick_weighted(rng, tcache),
                                                            "mysqld/thread_cache_size"),
                  "skip-external-locking", "tmpdir=" + tmpdir}});
            break;
        }
        default: {
            static const Pool ibp = {{"128M", 700}, {"256M", 180}, {"64M", 120}};
            static const Pool ilog = {{"48M", 800}, {"96M", 200}};
            static const Pool slow = {{"1", 700}, {"0", 300}};
            static const Pool slowlogs = {{"/var/log/mysql/slow.log", 760},
                                          {"/var/log/mysql-slow.log", 120},
                                          {"/var/log/mysql/slow-query.log", 120}};
            static const Pool lqt = {{"2", 700}, {"10", 300}};
            static const Pool cset = {{"utf8mb4", 800}, {"latin1", 200}};
            static const Pool dumppkt = {{"16M", 600}, {"64M", 400}};

            std::string slowlog = sink.path_value(pick_weighted(rng, slowlogs),
                                                  "mysqld/slow_query_log_file");
            if (slowlog[0] == '/') note_support(support, slowlog);
            sections.push_back(
                {"mysqld",
                 {"innodb_buffer_pool_size=" + pick_weighted(rng, ibp),
                  "innodb_log_file_size=" + sink.numeric_value(pick_weighted(rng, ilog),
                                                               "mysqld/innodb_log_file_size"),
                  "slow_query_log=" + pick_weighted(rng, slow),
                  "slow_query_log_file=" + slowlog,
                  "long_query_time=" + pick_weighted(rng, lqt),
                  "character-set-server=" + pick_weighted(rng, cset)}});
            sections.push_back({"mysqldump", {"quick", "max_allowed_packet=" +
                                                           pick_weighted(rng, dumppkt)}});
            break;
        }
    }

    std::string out;
    rng.shuffle(sections);
    for (auto& [name, keys] : sections) {
        if (rng.chance(0.3)) out += rng.pick(comment_pool()) + "\n";
        out += "[" + name + "]\n";
        rng.shuffle(keys);
        for (const auto& k : keys) out += k + "\n";
        if (rng.chance(0.25)) out += "\n";
    }
    return out;
}

const std::vector<std::string>& prose_words() {
    static const std::vector<std::string> w = {
        "the",      "nightly",  "backups",  "are",     "stored",   "offsite", "review",
        "rotation", "policy",   "before",   "changing", "retention", "operators", "should",
        "check",    "dashboards", "after",  "deploys", "capacity", "plans",   "assume",
        "steady",   "growth",   "contact",  "platform", "team",    "for",     "exceptions"};
    return w;
}

std::string emit_decoy(int kind, Rng& rng) {
    std::string out;
    switch (kind % 5) {
        case 0: {  // prose
            int lines = static_cast<int>(rng.range(4, 18));
            for (int i = 0; i < lines; ++i) {
                int words = static_cast<int>(rng.range(5, 9));
                for (int w = 0; w < words; ++w) {
                    std::string word = rng.pick(prose_words());
                    if (w == 0) word[0] = static_cast<char>(std::toupper(word[0]));
                    out += word + (w + 1 == words ? "" : " ");
                }
                out += ".\n";
            }
            break;
        }
        case 1: {  // service log
            static const std::vector<std::string> levels = {"INFO", "WARN", "ERROR", "DEBUG"};
            static const std::vector<std::string> msgs = {
                "worker started",   "cache flushed",  "request completed",
                "connection reset", "job queued",     "retrying upstream"};
            int lines = static_cast<int>(rng.range(6, 40));
            for (int i = 0; i < lines; ++i) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "2023-11-%02d %02d:%02d:%02d",
                              static_cast<int>(rng.range(1, 28)), static_cast<int>(rng.range(0, 23)),
                              static_cast<int>(rng.range(0, 59)), static_cast<int>(rng.range(0, 59)));
                out += std::string(buf) + " " + rng.pick(levels) + " " + rng.pick(msgs) + " " +
                       std::to_string(rng.range(1, 900)) + "\n";
            }
            break;
        }
        case 2: {  // shell script
            static const std::vector<std::string> cmds = {
                "echo starting sync", "cd /opt/app",       "./bin/run --once",
                "sleep 30",           "echo done",          "rm -f /tmp/app.lock"};
            out += "#!/bin/sh\nset -e\n";
            int lines = static_cast<int>(rng.range(3, 8));
            for (int i = 0; i < lines; ++i) out += rng.pick(cmds) + "\n";
            break;
        }
        case 3: {  // csv
            static const std::vector<std::string> names = {"alpha", "beta", "gamma", "delta"};
            out += "id,name,count\n";
            int rows = static_cast<int>(rng.range(5, 25));
            for (int i = 0; i < rows; ++i)
                out += std::to_string(i + 1) + "," + rng.pick(names) + "," +
                       std::to_string(rng.range(1, 500)) + "\n";
            break;
        }
        default: {  // notes
            int lines = static_cast<int>(rng.range(4, 12));
            for (int i = 0; i < lines; ++i)
                out += "- " + rng.pick(prose_words()) + " " + rng.pick(prose_words()) + "\n";
            break;
        }
    }
    return out;
}

struct PathPools {
    std::vector<std::string> standard;
    std::vector<std::string> nonstandard;
};

const PathPools& app_paths(const std::string& app) {
    static const std::map<std::string, PathPools> pools = {
        {"httpd",
         {{"/etc/httpd/conf/httpd.conf", "/etc/apache2/apache2.conf",
           "/etc/httpd/conf.d/site.conf", "/etc/apache2/sites-enabled/000-default.conf"},
          {"/app/config/web.conf", "/opt/stack/httpd-custom.conf", "/usr/local/etc/server.conf",
           "/home/deploy/web/app.conf"}}},
        {"nginx",
         {{"/etc/nginx/nginx.conf", "/etc/nginx/conf.d/default.conf",
           "/etc/nginx/sites-enabled/site.conf"},
          {"/app/config/proxy.conf", "/opt/stack/nginx-edge.conf", "/data/conf/frontend.conf",
           "/usr/local/etc/gateway.conf"}}},
        {"mysql",
         {{"/etc/my.cnf", "/etc/mysql/my.cnf", "/etc/mysql/conf.d/mysql.cnf",
           "/etc/mysql/mysql.conf.d/mysqld.cnf"},
          {"/app/config/db.cnf", "/data/conf/mysql-main.cnf", "/home/deploy/db/server.cnf",
           "/healthcheck.cnf"}}}};
    auto it = pools.find(app);
    if (it == pools.end()) throw std::invalid_argument("no generator profile for app: " + app);
    return it->second;
}

void write_instance_file(const fs::path& instance_dir, const std::string& inner_path,
                         const std::string& content) {
    fs::path full = instance_dir / inner_path.substr(1);
    fs::create_directories(full.parent_path());
    std::ofstream out(full, std::ios::binary | std::ios::trunc);
    out << content;
}

void set_times(const fs::path& file, std::int64_t atime, std::int64_t mtime) {
    struct timespec ts[2];
    ts[0].tv_sec = atime;
    ts[0].tv_nsec = 0;
    ts[1].tv_sec = mtime;
    ts[1].tv_nsec = 0;
    utimensat(AT_FDCWD, file.c_str(), ts, 0);
}

std::string passwd_content(Rng& rng) {
    std::string out =
        "root:x:0:0:root:/root:/bin/bash\n"
        "daemon:x:1:1:daemon:/usr/sbin:/usr/sbin/nologin\n"
        "bin:x:2:2:bin:/bin:/usr/sbin/nologin\n"
        "www-data:x:33:33:www-data:/var/www:/usr/sbin/nologin\n"
        "mysql:x:27:27:MySQL Server:/var/lib/mysql:/bin/false\n"
        "nginx:x:101:101:nginx user:/var/cache/nginx:/sbin/nologin\n";
    if (rng.chance(0.5)) out += "deploy:x:1000:1000:deploy:/home/deploy:/bin/bash\n";
    return out;
}

std::string group_content(Rng& rng) {
    std::string out =
        "root:x:0:\n"
        "daemon:x:1:root\n"
        "www-data:x:33:\n"
        "mysql:x:27:\n";
    if (rng.chance(0.5)) out += "adm:x:4:deploy\n";
    return out;
}

std::string env_manifest_content(Rng& rng) {
    static const std::vector<std::string> langs = {"en_US.UTF-8", "C.UTF-8"};
    static const std::vector<std::string> zones = {"UTC", "Etc/UTC"};
    static const std::vector<std::string> modes = {"production", "staging"};
    json doc = {{"format_version", 1},
                {"env",
                 {{"PATH", "/usr/local/sbin:/usr/local/bin:/usr/sbin:/usr/bin:/sbin:/bin"},
                  {"LANG", rng.pick(langs)},
                  {"TZ", rng.pick(zones)},
                  {"APP_MODE", rng.pick(modes)}}},
                {"network_addresses", {"10.0." + std::to_string(rng.range(0, 9)) + "." +
                                           std::to_string(rng.range(1, 250))}},
                {"ports", {22, 80}}};
    return doc.dump(2) + "\n";
}

}  // namespace

int species_count(const std::string&) { return 3; }

std::string generate_app_file(const std::string& app, int species, Rng& rng,
                              std::vector<std::string>* support_paths, FaultRequest* fault) {
    if (app == "httpd") return emit_httpd(species, rng, support_paths, fault);
    if (app == "nginx") return emit_nginx(species, rng, support_paths, fault);
    if (app == "mysql") return emit_ini(species, rng, support_paths, fault);
    throw std::invalid_argument("no generator profile for app: " + app);
}

CorpusManifest generate_corpus(const GenProfile& profile, const std::string& out_dir) {
    CorpusManifest manifest;
    manifest.seed = profile.seed;
    manifest.epoch = kGeneratedEpoch;
    manifest.cutoff = kGeneratedEpoch;
    manifest.window_seconds = profile.window_seconds;

    fs::create_directories(out_dir);

    Rng corpus_rng(mix_seed(profile.seed, 0));
    std::vector<int> order(static_cast<std::size_t>(profile.instances));
    for (int i = 0; i < profile.instances; ++i) order[static_cast<std::size_t>(i)] = i;
    corpus_rng.shuffle(order);
    int flagged_count = static_cast<int>(profile.inject_fraction * profile.instances);
    std::set<int> flagged(order.begin(), order.begin() + flagged_count);
    static const std::vector<std::string> fault_kinds = {"placeholder", "winpath", "outlier"};

    for (int i = 0; i < profile.instances; ++i) {
        Rng rng(mix_seed(profile.seed, static_cast<std::uint64_t>(i) + 1));
        InstancePlan plan;
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "inst-%04d", i);
        plan.id = idbuf;
        fs::path dir = fs::path(out_dir) / plan.id;
        fs::create_directories(dir);

        std::map<std::string, std::string> files;  // inner path -> content
        std::vector<std::string> support;

        std::optional<FaultRequest> fault;
        int fault_app_index = 0;
        if (flagged.count(i)) {
            fault = FaultRequest{};
            fault->kind = fault_kinds[static_cast<std::size_t>(i) % fault_kinds.size()];
            fault_app_index = static_cast<int>(rng.below(profile.apps.size()));
        }

        for (std::size_t a = 0; a < profile.apps.size(); ++a) {
            const std::string& app = profile.apps[a];
            const PathPools& pools = app_paths(app);
            for (int p = 0; p < profile.planted_per_app; ++p) {
                PlantedFile planted;
                planted.application = app;
                planted.species = (i + static_cast<int>(a) + p) % species_count(app);
                planted.standard_path = !rng.chance(profile.nonstandard_fraction);
                const auto& pathpool = planted.standard_path ? pools.standard : pools.nonstandard;
                planted.path = pathpool[rng.below(pathpool.size())];
                if (files.count(planted.path)) {
                    planted.path = "/opt/extra/" + app + "-" + std::to_string(p) + ".conf";
                    planted.standard_path = false;
                }

                FaultRequest* want_fault =
                    fault && !fault->applied && static_cast<int>(a) == fault_app_index && p == 0
                        ? &*fault
                        : nullptr;
                files[planted.path] =
                    generate_app_file(app, planted.species, rng, &support, want_fault);
                if (want_fault && want_fault->applied) {
                    plan.injected.push_back({planted.path, app, fault->kind, fault->key,
                                             fault->value});
                }
                plan.planted.push_back(std::move(planted));
            }
        }

        int decoy_serial = 0;
        static const std::vector<std::string> decoy_dirs = {
            "/usr/share/doc", "/var/log/app", "/opt/app/data", "/usr/lib/pkg", "/home/user/notes",
            "/srv/reports"};
        static const std::vector<std::string> decoy_names = {"README", "install.log", "setup.sh",
                                                             "data.csv", "notes.txt"};
        for (int d = 0; d < profile.decoys_per_instance; ++d) {
            int kind = static_cast<int>(rng.below(5));
            std::string path = rng.pick(decoy_dirs) + "/pkg" + std::to_string(decoy_serial++) +
                               "/" + decoy_names[static_cast<std::size_t>(kind)];
            if (files.count(path)) continue;
            files[path] = emit_decoy(kind, rng);
            plan.decoys.push_back(path);
        }

        for (int b = 0; b < profile.bulk_files; ++b) {
            std::string path = "/data/bulk/item-" + std::to_string(b) + ".txt";
            files[path] = "bulk item " + std::to_string(b) + "\n";
        }

        if (profile.with_env_files) {
            files["/etc/passwd"] = passwd_content(rng);
            files["/etc/group"] = group_content(rng);
            files["/.confex/manifest"] = env_manifest_content(rng);
        }

        for (const auto& s : support) {
            if (files.count(s)) continue;
            files[s] = "";
            plan.support.push_back(s);
        }

        for (const auto& [path, content] : files) write_instance_file(dir, path, content);

        // access times straddle the cutoff according to the touch mode
        std::vector<std::string> all_paths;
        for (const auto& [path, content] : files) all_paths.push_back(path);
        std::set<std::string> touched;
        switch (profile.touch_mode) {
            case GenProfile::Touch::All:
                touched.insert(all_paths.begin(), all_paths.end());
                break;
            case GenProfile::Touch::None:
                break;
            case GenProfile::Touch::Count: {
                std::vector<std::string> pool = all_paths;
                rng.shuffle(pool);
                for (int k = 0; k < profile.touched_files &&
                                k < static_cast<int>(pool.size()); ++k)
                    touched.insert(pool[static_cast<std::size_t>(k)]);
                break;
            }
        }
        for (const auto& path : all_paths) {
            std::int64_t atime = touched.count(path) ? manifest.cutoff + rng.range(0, 900)
                                                     : manifest.cutoff - rng.range(10, 9000);
            std::int64_t mtime = manifest.epoch - rng.range(1000, 50000);
            set_times(dir / path.substr(1), atime, mtime);
        }
        plan.touched.assign(touched.begin(), touched.end());

        if (profile.write_access_log) {
            std::vector<std::string> pool = all_paths;
            rng.shuffle(pool);
            std::size_t need = static_cast<std::size_t>(profile.logged_reads + profile.late_reads);
            if (pool.size() < need) throw std::invalid_argument("instance too small for access log plan");

            std::int64_t t0 = manifest.epoch + 2000;
            std::vector<std::pair<std::int64_t, std::string>> reads, writes, late;
            for (int r = 0; r < profile.logged_reads; ++r) {
                std::int64_t ts =
                    profile.logged_reads == 1
                        ? t0
                        : t0 + r * profile.window_seconds / (profile.logged_reads - 1);
                const std::string& path = pool[static_cast<std::size_t>(r)];
                reads.push_back({ts, path});
                plan.active_expected.push_back(path);
            }
            for (int w = 0; w < profile.logged_writes; ++w)
                writes.push_back({t0 + rng.range(0, profile.window_seconds),
                                  pool[rng.below(pool.size())]});
            for (int l = 0; l < profile.late_reads; ++l)
                late.push_back({t0 + profile.window_seconds + 5 + 3 * l,
                                pool[static_cast<std::size_t>(profile.logged_reads + l)]});

            std::vector<std::tuple<std::int64_t, char, std::string>> events;
            for (const auto& [ts, p] : reads) events.emplace_back(ts, 'r', p);
            for (const auto& [ts, p] : writes) events.emplace_back(ts, 'w', p);
            for (const auto& [ts, p] : late) events.emplace_back(ts, 'r', p);
            std::stable_sort(events.begin(), events.end(),
                             [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });

            // manifest keeps the sidecar name relative to the corpus root so
            // equal seeds give byte-identical corpora wherever they land
            plan.access_log = plan.id + ".access.log";
            std::ofstream log(fs::path(out_dir) / plan.access_log,
                              std::ios::binary | std::ios::trunc);
            for (const auto& [ts, flag, path] : events)
                log << ts << '\t' << flag << '\t' << path << '\n';
            std::sort(plan.active_expected.begin(), plan.active_expected.end());
        }

        manifest.instances.push_back(std::move(plan));
    }

    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

void save_manifest(const CorpusManifest& manifest, const std::string& path) {
    json instances = json::array();
    for (const auto& plan : manifest.instances) {
        json planted = json::array();
        for (const auto& p : plan.planted)
            planted.push_back({{"path", p.path},
                               {"application", p.application},
                               {"species", p.species},
                               {"standard_path", p.standard_path}});
        json injected = json::array();
        for (const auto& f : plan.injected)
            injected.push_back({{"path", f.path},
                                {"application", f.application},
                                {"kind", f.kind},
                                {"key", f.key},
                                {"value", f.value}});
        instances.push_back({{"id", plan.id},
                             {"planted", planted},
                             {"decoys", plan.decoys},
                             {"support", plan.support},
                             {"injected", injected},
                             {"touched", plan.touched},
                             {"active_expected", plan.active_expected},
                             {"access_log", plan.access_log}});
    }
    json doc = {{"format_version", 1},
                {"seed", manifest.seed},
                {"epoch", manifest.epoch},
                {"cutoff", manifest.cutoff},
                {"window_seconds", manifest.window_seconds},
                {"instances", instances}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << doc.dump(2) << "\n";
}

CorpusManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read manifest: " + path);
    json doc = json::parse(in);
    if (doc.value("format_version", 0) != 1)
        throw std::runtime_error("unsupported manifest format_version in " + path);

    CorpusManifest manifest;
    manifest.seed = doc.at("seed").get<std::uint64_t>();
    manifest.epoch = doc.at("epoch").get<std::int64_t>();
    manifest.cutoff = doc.at("cutoff").get<std::int64_t>();
    manifest.window_seconds = doc.at("window_seconds").get<int>();
    for (const auto& pj : doc.at("instances")) {
        InstancePlan plan;
        plan.id = pj.at("id").get<std::string>();
        for (const auto& p : pj.at("planted"))
            plan.planted.push_back({p.at("path").get<std::string>(),
                                    p.at("application").get<std::string>(),
                                    p.at("species").get<int>(),
                                    p.at("standard_path").get<bool>()});
        plan.decoys = pj.at("decoys").get<std::vector<std::string>>();
        plan.support = pj.at("support").get<std::vector<std::string>>();
        for (const auto& f : pj.at("injected"))
            plan.injected.push_back({f.at("path").get<std::string>(),
                                     f.at("application").get<std::string>(),
                                     f.at("kind").get<std::string>(),
                                     f.at("key").get<std::string>(),
                                     f.at("value").get<std::string>()});
        plan.touched = pj.at("touched").get<std::vector<std::string>>();
        plan.active_expected = pj.at("active_expected").get<std::vector<std::string>>();
        plan.access_log = pj.at("access_log").get<std::string>();
        manifest.instances.push_back(std::move(plan));
    }
    return manifest;
}

}  // namespace confex
