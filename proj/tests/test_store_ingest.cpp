#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fcntl.h>
#include <unistd.h>

#include <set>

#include "httplib.h"
#include "support.hpp"
#include "vulnsev/error.hpp"
#include "vulnsev/ingest.hpp"
#include "vulnsev/kv_store.hpp"

using namespace vulnsev;
using namespace vulnsev::testing;
namespace fs = std::filesystem;

namespace {

void truncate_by(const fs::path& p, std::uintmax_t n) { fs::resize_file(p, fs::file_size(p) - n); }

void flip_byte(const fs::path& p, std::uintmax_t offset) {
    std::string bytes = read_file(p);
    bytes[offset] = static_cast<char>(bytes[offset] ^ 0x5a);
    write_file(p, bytes);
}

FeedConfig dir_feed(const std::string& name, SourceKind kind, const fs::path& dir) {
    FeedConfig f;
    f.name = name;
    f.kind = kind;
    f.uri = dir.string();
    return f;
}

}  // namespace

TEST_CASE("memory store basics") {
    MemoryKvStore s;
    CHECK_FALSE(s.get(Namespace::records, "a"));
    s.put(Namespace::records, "b", "2");
    s.put(Namespace::records, "a", "1");
    s.put(Namespace::meta, "a", "m");
    CHECK(s.get(Namespace::records, "a") == "1");
    CHECK(s.get(Namespace::meta, "a") == "m");
    CHECK(s.keys(Namespace::records) == std::vector<std::string>{"a", "b"});
    s.put(Namespace::records, "a", "3");
    CHECK(s.get(Namespace::records, "a") == "3");
}

TEST_CASE("file store survives reopen, overwrites and binary values") {
    TempDir tmp;
    const auto path = tmp / "store.kvlog";
    const std::string binary("\0\xff\n\x01zz", 6);
    {
        FileKvStore s(path);
        s.put(Namespace::records, "k1", "v1");
        s.put(Namespace::records, "k2", binary);
        s.put(Namespace::records, "k1", "v1b");
        s.put(Namespace::meta, "k1", "meta");
        s.put(Namespace::records, "", "empty key");
        CHECK(s.dead_entries() == 1);
    }
    FileKvStore s(path, FileKvStore::Mode::read_only);
    CHECK(s.get(Namespace::records, "k1") == "v1b");
    CHECK(s.get(Namespace::records, "k2") == binary);
    CHECK(s.get(Namespace::meta, "k1") == "meta");
    CHECK(s.get(Namespace::records, "") == "empty key");
    CHECK(s.keys(Namespace::records) == std::vector<std::string>{"", "k1", "k2"});
    CHECK_THROWS_AS(s.put(Namespace::records, "x", "y"), StoreError);
}

TEST_CASE("torn tail is dropped, mid-file damage refuses to open") {
    TempDir tmp;
    const auto path = tmp / "store.kvlog";
    {
        FileKvStore s(path);
        s.put(Namespace::records, "a", "first");
        s.put(Namespace::records, "b", "second");
    }
    const auto full = fs::file_size(path);
    truncate_by(path, 3);
    {
        FileKvStore s(path);
        CHECK(s.get(Namespace::records, "a") == "first");
        CHECK_FALSE(s.get(Namespace::records, "b"));
        s.put(Namespace::records, "c", "third");
    }
    {
        FileKvStore s(path, FileKvStore::Mode::read_only);
        CHECK(s.get(Namespace::records, "c") == "third");
        CHECK(fs::file_size(path) < full + 30);
    }
    // Damage inside the first entry: no longer a tail problem.
    flip_byte(path, 8 + 9 + 1 + 1);
    CHECK_THROWS_AS(FileKvStore(path, FileKvStore::Mode::read_only), StoreError);

    write_file(tmp / "junk", "NOTASTORE");
    CHECK_THROWS_AS(FileKvStore(tmp / "junk", FileKvStore::Mode::read_write), StoreError);
}

TEST_CASE("single writer lock") {
    TempDir tmp;
    FileKvStore a(tmp / "s");
    CHECK_THROWS_AS(FileKvStore(tmp / "s", FileKvStore::Mode::read_write), StoreError);
    FileKvStore reader(tmp / "s", FileKvStore::Mode::read_only);
    CHECK(reader.keys(Namespace::records).empty());
}

TEST_CASE("compaction keeps live data and the lock") {
    TempDir tmp;
    const auto path = tmp / "s";
    {
        FileKvStore s(path);
        for (int round = 0; round < 5; ++round)
            for (int i = 0; i < 100; ++i) s.put(Namespace::records, "k" + std::to_string(i), "v" + std::to_string(round));
        const auto before = fs::file_size(path);
        s.compact();
        CHECK(fs::file_size(path) < before);
        CHECK(s.dead_entries() == 0);
        CHECK_THROWS_AS(FileKvStore(path, FileKvStore::Mode::read_write), StoreError);
        s.put(Namespace::records, "after", "compaction");
    }
    FileKvStore s(path, FileKvStore::Mode::read_only);
    CHECK(s.keys(Namespace::records).size() == 101);
    CHECK(s.get(Namespace::records, "k42") == "v4");
    CHECK(s.get(Namespace::records, "after") == "compaction");
}

TEST_CASE("fetch_feed on directories") {
    TempDir tmp;
    write_file(tmp / "feed" / "b.json", "{}");
    write_file(tmp / "feed" / "a.json", "{}");
    write_file(tmp / "feed" / "c.json", "{}");
    fs::create_directories(tmp / "feed" / "subdir");
    auto docs = fetch_feed(dir_feed("f", SourceKind::osv, tmp / "feed"));
    REQUIRE(docs.size() == 3);
    CHECK(fs::path(docs[0].origin_uri).filename() == "a.json");
    CHECK(fs::path(docs[2].origin_uri).filename() == "c.json");
    CHECK(docs[0].source == SourceKind::osv);

    fs::create_directories(tmp / "empty");
    CHECK(fetch_feed(dir_feed("e", SourceKind::cve, tmp / "empty")).empty());

    try {
        fetch_feed(dir_feed("missing-feed", SourceKind::cve, tmp / "nope"));
        FAIL("expected FetchError");
    } catch (const FetchError& ex) {
        CHECK(ex.feed() == "missing-feed");
        CHECK(std::string(ex.what()).find("missing-feed") != std::string::npos);
    }
    auto single = fetch_feed(dir_feed("one", SourceKind::cve, "file://" + (tmp / "feed" / "a.json").string()));
    CHECK(single.size() == 1);

    FeedConfig disabled = dir_feed("off", SourceKind::cve, tmp / "feed");
    disabled.enabled = false;
    CHECK_THROWS_AS(fetch_feed(disabled), PreconditionError);
}

TEST_CASE("fetch_feed over http sends the user agent and names the feed on failure") {
    httplib::Server svr;
    std::string seen_agent;
    svr.Get("/feed.json", [&](const httplib::Request& req, httplib::Response& res) {
        seen_agent = req.get_header_value("User-Agent");
        res.set_content(read_file(fixture_root() / "osv" / "ghsa_minimal.json"), "application/json");
    });
    const int port = svr.bind_to_any_port("127.0.0.1");
    std::thread t([&] { svr.listen_after_bind(); });
    svr.wait_until_ready();

    FeedConfig f;
    f.name = "remote";
    f.kind = SourceKind::osv;
    f.uri = "http://127.0.0.1:" + std::to_string(port) + "/feed.json";
    MemoryKvStore store;
    const auto r = sync(f, store);
    CHECK(r.fetched == 1);
    CHECK(r.stored_new == 1);
    CHECK(seen_agent == std::string(kUserAgent));

    f.uri = "http://127.0.0.1:" + std::to_string(port) + "/missing";
    CHECK_THROWS_AS(fetch_feed(f), FetchError);
    svr.stop();
    t.join();

    f.name = "unreachable";
    try {
        fetch_feed(f);
        FAIL("expected FetchError");
    } catch (const FetchError& ex) {
        CHECK(ex.feed() == "unreachable");
    }
}

TEST_CASE("sync: new, idempotent, updated, durable") {
    TempDir tmp;
    const auto feed_dir = tmp / "osv";
    write_file(feed_dir / "batch.json", read_file(fixture_root() / "osv" / "osv_batch_three.json"));
    const auto f = dir_feed("osv", SourceKind::osv, feed_dir);
    const auto store_path = tmp / "store";
    {
        FileKvStore store(store_path);
        auto r = sync(f, store);
        CHECK(r.stored_new == 3);
        CHECK(r.stored_updated == 0);
        CHECK(r.parsed == 3);
        r = sync(f, store);
        CHECK(r.stored_new == 0);
        CHECK(r.stored_updated == 0);
        CHECK(store.get(Namespace::meta, last_sync_key("osv")).has_value());
    }
    {
        std::string text = read_file(feed_dir / "batch.json");
        const auto at = text.find("exhausts CPU");
        REQUIRE(at != std::string::npos);
        text.replace(at, 12, "exhausts all CPU");
        write_file(feed_dir / "batch.json", text);
        FileKvStore store(store_path);
        const auto r = sync(f, store);
        CHECK(r.stored_new == 0);
        CHECK(r.stored_updated == 1);
    }
    FileKvStore reopened(store_path, FileKvStore::Mode::read_only);
    const auto recs = scan_records(reopened);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].id == "GHSA-mnop-5678-ijkl");
    CHECK(recs[1].description.find("exhausts all CPU") != std::string::npos);
}

TEST_CASE("sync: failing feed leaves the store untouched") {
    TempDir tmp;
    write_file(tmp / "good" / "a.json", read_file(fixture_root() / "cve" / "cve_minimal.json"));
    write_file(tmp / "bad" / "a.json", read_file(fixture_root() / "cve" / "cve_no_metrics.json"));
    write_file(tmp / "bad" / "b.json", "{ truncated");
    MemoryKvStore store;
    sync(dir_feed("good", SourceKind::cve, tmp / "good"), store);
    const auto before = store.keys(Namespace::records);
    CHECK_THROWS_AS(sync(dir_feed("bad", SourceKind::cve, tmp / "bad"), store), FetchError);
    CHECK(store.keys(Namespace::records) == before);
    CHECK_FALSE(store.get(Namespace::meta, last_sync_key("bad")));
    CHECK(store.get(Namespace::meta, last_sync_key("good")));
}

TEST_CASE("sync: cross-source replacement is last write wins with a warning") {
    TempDir tmp;
    write_file(tmp / "cve" / "a.json", read_file(fixture_root() / "cve" / "cve_minimal.json"));
    Json csaf = Json::parse(read_file(fixture_root() / "csaf" / "csaf_two_vulns.json"));
    csaf["vulnerabilities"][0]["cve"] = "CVE-2024-0001";
    write_file(tmp / "csaf" / "a.json", csaf.dump());
    MemoryKvStore store;
    sync(dir_feed("cve", SourceKind::cve, tmp / "cve"), store);
    const auto r = sync(dir_feed("csaf", SourceKind::csaf, tmp / "csaf"), store);
    CHECK(r.stored_updated == 1);
    CHECK(r.stored_new == 1);
    bool warned = false;
    for (const auto& m : r.messages) warned = warned || m.find("replaces cve record") != std::string::npos;
    CHECK(warned);
    CHECK(scan_records(store).front().source == SourceKind::csaf);
}

TEST_CASE("scan_records ordering, scale and corruption") {
    MemoryKvStore store;
    for (std::string id : {"B", "A", "C"}) store.put(Namespace::records, id, storage_json(make_record(id, "desc " + id)).dump());
    auto recs = scan_records(store);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].id == "A");
    CHECK(recs[1].id == "B");
    CHECK(recs[2].id == "C");

    CHECK(scan_records(MemoryKvStore{}).empty());

    TempDir tmp;
    {
        FileKvStore big(tmp / "big");
        for (int i = 0; i < 10000; ++i) {
            const std::string id = "SYN-" + std::to_string(i * 7919 % 10000);
            big.put(Namespace::records, id, storage_json(make_record(id, "synthetic description")).dump());
        }
    }
    FileKvStore big(tmp / "big", FileKvStore::Mode::read_only);
    std::set<std::string> seen;
    std::string prev;
    std::size_t n = 0;
    for_each_record(big, [&](const AdvisoryRecord& r) {
        CHECK(r.id > prev);
        prev = r.id;
        seen.insert(r.id);
        ++n;
    });
    CHECK(n == 10000);
    CHECK(seen.size() == 10000);

    store.put(Namespace::records, "BROKEN", "{not json");
    try {
        scan_records(store);
        FAIL("expected ScanError");
    } catch (const ScanError& ex) {
        CHECK(ex.key() == "BROKEN");
    }
}
