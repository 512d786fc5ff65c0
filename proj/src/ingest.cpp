#include "vulnsev/ingest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "vulnsev/error.hpp"

namespace vulnsev {

namespace fs = std::filesystem;

namespace {

bool is_http(std::string_view uri) { return uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0; }

std::string read_file(const fs::path& p, const std::string& feed) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FetchError(feed, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw FetchError(feed, "read error on " + p.string());
    return ss.str();
}

std::vector<RawDocument> fetch_http(const FeedConfig& cfg, Timestamp fetched_at) {
    // Split "scheme://host[:port]" from the path.
    const auto scheme_end = cfg.uri.find("://") + 3;
    const auto path_start = cfg.uri.find('/', scheme_end);
    const std::string origin = cfg.uri.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : cfg.uri.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(60, 0);
    client.set_follow_location(true);
    const httplib::Headers headers = {{"User-Agent", std::string(kUserAgent)}};
    auto res = client.Get(path, headers);
    if (!res) throw FetchError(cfg.name, "GET " + cfg.uri + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw FetchError(cfg.name, "GET " + cfg.uri + " returned HTTP " + std::to_string(res->status));
    return {RawDocument{cfg.kind, std::move(res->body), cfg.uri, fetched_at}};
}

std::vector<RawDocument> fetch_local(const FeedConfig& cfg, Timestamp fetched_at) {
    fs::path root = cfg.uri.rfind("file://", 0) == 0 ? fs::path(cfg.uri.substr(7)) : fs::path(cfg.uri);
    std::error_code ec;
    const auto status = fs::status(root, ec);
    if (ec || !fs::exists(status)) throw FetchError(cfg.name, "path not found: " + root.string());
    if (fs::is_regular_file(status))
        return {RawDocument{cfg.kind, read_file(root, cfg.name), root.string(), fetched_at}};
    if (!fs::is_directory(status)) throw FetchError(cfg.name, "not a file or directory: " + root.string());

    std::vector<fs::path> files;
    fs::directory_iterator it(root, ec);
    if (ec) throw FetchError(cfg.name, "cannot list " + root.string() + ": " + ec.message());
    for (const auto& entry : it) {
        if (entry.is_regular_file(ec)) files.push_back(entry.path());
        if (ec) throw FetchError(cfg.name, "cannot stat " + entry.path().string() + ": " + ec.message());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

    std::vector<RawDocument> docs;
    docs.reserve(files.size());
    for (const auto& f : files) docs.push_back({cfg.kind, read_file(f, cfg.name), f.string(), fetched_at});
    return docs;
}

}  // namespace

void FeedConfig::validate() const {
    if (name.empty()) throw ConfigError("feed without a name");
    if (uri.empty()) throw ConfigError("feed '" + name + "' has an empty uri");
}

std::vector<RawDocument> fetch_feed(const FeedConfig& cfg, Timestamp fetched_at) {
    cfg.validate();
    if (!cfg.enabled) throw PreconditionError("feed '" + cfg.name + "' is disabled");
    return is_http(cfg.uri) ? fetch_http(cfg, fetched_at) : fetch_local(cfg, fetched_at);
}

std::string last_sync_key(std::string_view feed) { return "last_sync/" + std::string(feed); }

Json to_json(const SyncResult& r) {
    Json j;
    j["feed"] = r.feed;
    j["fetched"] = r.fetched;
    j["parsed"] = r.parsed;
    j["stored_new"] = r.stored_new;
    j["stored_updated"] = r.stored_updated;
    j["warnings"] = r.warnings;
    j["started_at"] = format_timestamp(r.started_at);
    j["ended_at"] = format_timestamp(r.ended_at);
    return j;
}

SyncResult sync(const FeedConfig& cfg, KvStore& store) {
    SyncResult result;
    result.feed = cfg.name;
    result.started_at = now_utc();

    const auto docs = fetch_feed(cfg, result.started_at);
    result.fetched = docs.size();

    std::vector<AdvisoryRecord> records;
    for (const auto& doc : docs) {
        ParseReport report;
        try {
            report = parse_any(doc);
        } catch (const ParseError& ex) {
            throw FetchError(cfg.name, std::string("parse failed: ") + ex.what());
        }
        for (const auto& w : report.warnings) result.messages.push_back(doc.origin_uri + w.path + ": " + w.message);
        for (auto& r : report.records) records.push_back(std::move(r));
    }
    result.parsed = records.size();

    for (const auto& rec : records) {
        const std::string canonical = canonical_json(rec).dump();
        if (auto existing = store.get(Namespace::records, rec.id)) {
            std::optional<AdvisoryRecord> old;
            try {
                old = record_from_json(Json::parse(*existing));
            } catch (const std::exception&) {
                result.messages.push_back(rec.id + ": stored value unreadable, overwritten");
            }
            if (old && canonical_json(*old).dump() == canonical) continue;
            if (old && old->source != rec.source)
                result.messages.push_back(rec.id + ": " + std::string(to_string(rec.source)) + " record from feed '" +
                                          cfg.name + "' replaces " + std::string(to_string(old->source)) +
                                          " record");
            store.put(Namespace::records, rec.id, storage_json(rec).dump());
            ++result.stored_updated;
        } else {
            store.put(Namespace::records, rec.id, storage_json(rec).dump());
            ++result.stored_new;
        }
    }

    result.ended_at = now_utc();
    store.put(Namespace::meta, last_sync_key(cfg.name), format_timestamp(result.ended_at));
    store.flush();
    result.warnings = result.messages.size();
    return result;
}

void for_each_record(const KvStore& store, const std::function<void(const AdvisoryRecord&)>& fn) {
    for (const auto& key : store.keys(Namespace::records)) {
        auto value = store.get(Namespace::records, key);
        if (!value) throw ScanError(key, "key vanished during scan");
        AdvisoryRecord rec;
        try {
            rec = record_from_json(Json::parse(*value));
        } catch (const nlohmann::json::exception& ex) {
            throw ScanError(key, ex.what());
        } catch (const ParseError& ex) {
            throw ScanError(key, ex.what());
        }
        if (rec.id != key) throw ScanError(key, "stored id '" + rec.id + "' does not match key");
        fn(rec);
    }
}

std::vector<AdvisoryRecord> scan_records(const KvStore& store) {
    std::vector<AdvisoryRecord> out;
    for_each_record(store, [&](const AdvisoryRecord& r) { out.push_back(r); });
    return out;
}

}  // namespace vulnsev
