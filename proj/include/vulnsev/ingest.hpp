#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "vulnsev/feeds.hpp"
#include "vulnsev/kv_store.hpp"

namespace vulnsev {

inline constexpr std::string_view kUserAgent = "vulnsev-ingest/1.0";

struct FeedConfig {
    std::string name;
    SourceKind kind = SourceKind::cve;
    // http(s) URL, file:// URL, local directory, or a single local file.
    std::string uri;
    bool enabled = true;

    void validate() const;
};

// Directories are read completely (every regular file, lexicographic order)
// or not at all. Network and filesystem failures surface as FetchError.
std::vector<RawDocument> fetch_feed(const FeedConfig& cfg, Timestamp fetched_at = now_utc());

struct SyncResult {
    std::string feed;
    std::size_t fetched = 0;  // documents
    std::size_t parsed = 0;   // records
    std::size_t stored_new = 0;
    std::size_t stored_updated = 0;
    std::size_t warnings = 0;
    std::vector<std::string> messages;
    Timestamp started_at{};
    Timestamp ended_at{};
};

Json to_json(const SyncResult& r);

// Store keys: records/<id> holds storage_json(record); meta/last_sync/<feed>
// holds the RFC 3339 end time. Everything is fetched and parsed before the
// first write, so a failing feed leaves the store untouched.
SyncResult sync(const FeedConfig& cfg, KvStore& store);

std::string last_sync_key(std::string_view feed);

// Every stored record, ordered by id. A value that does not decode throws
// ScanError naming its key.
std::vector<AdvisoryRecord> scan_records(const KvStore& store);
void for_each_record(const KvStore& store, const std::function<void(const AdvisoryRecord&)>& fn);

}  // namespace vulnsev
