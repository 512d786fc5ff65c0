#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "support.hpp"
#include "vulnsev/error.hpp"
#include "vulnsev/feeds.hpp"

using namespace vulnsev;
using namespace vulnsev::testing;
namespace fs = std::filesystem;

namespace {

RawDocument load(SourceKind kind, const std::string& rel) {
    RawDocument d;
    d.source = kind;
    d.origin_uri = rel;
    d.bytes = read_file(fixture_root() / rel);
    return d;
}

RawDocument raw(SourceKind kind, std::string bytes) {
    RawDocument d;
    d.source = kind;
    d.origin_uri = "mem";
    d.bytes = std::move(bytes);
    return d;
}

std::vector<std::pair<SourceKind, fs::path>> all_fixtures() {
    std::vector<std::pair<SourceKind, fs::path>> out;
    for (auto [kind, dir] : {std::pair{SourceKind::cve, "cve"}, {SourceKind::osv, "osv"}, {SourceKind::csaf, "csaf"}}) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(fixture_root() / dir)) {
            const auto name = e.path().filename().string();
            if (name.size() > 14 && name.ends_with(".expected.json")) continue;
            files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (auto& f : files) out.emplace_back(kind, f);
    }
    return out;
}

}  // namespace

TEST_CASE("golden fixtures reproduce byte for byte") {
    const auto fixtures = all_fixtures();
    CHECK(fixtures.size() >= 9);
    std::size_t per_kind[3] = {};
    for (const auto& [kind, path] : fixtures) {
        ++per_kind[static_cast<int>(kind)];
        CAPTURE(path.string());
        RawDocument d;
        d.source = kind;
        d.origin_uri = path.string();
        d.bytes = read_file(path);
        fs::path expected = path;
        expected.replace_extension(".expected.json");
        REQUIRE(fs::exists(expected));
        CHECK(to_json(parse_any(d)).dump(2) + "\n" == read_file(expected));
    }
    for (auto n : per_kind) CHECK(n >= 3);
}

TEST_CASE("cve_minimal traced by hand") {
    const auto r = parse_cve(load(SourceKind::cve, "cve/cve_minimal.json"));
    REQUIRE(r.records.size() == 1);
    CHECK(r.skipped == 0);
    const auto& rec = r.records[0];
    CHECK(rec.id == "CVE-2024-0001");
    REQUIRE(rec.scores.size() == 1);
    CHECK(rec.scores[0].version == CvssVersion::v3_1);
    CHECK(rec.scores[0].base_score.tenths() == 98);
    CHECK(rec.source == SourceKind::cve);
}

TEST_CASE("cve edge cases") {
    auto r = parse_cve(load(SourceKind::cve, "cve/cve_no_metrics.json"));
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].scores.empty());
    CHECK(r.records[0].description.find("  ") == std::string::npos);

    r = parse_cve(load(SourceKind::cve, "cve/cve_non_english.json"));
    CHECK(r.records.empty());
    CHECK(r.skipped == 1);
    CHECK(r.warnings.size() == 1);

    r = parse_cve(load(SourceKind::cve, "cve/cve_rejected.json"));
    CHECK(r.records.empty());
    CHECK(r.skipped == 1);

    r = parse_cve(raw(SourceKind::cve, R"({"containers":{"cna":{"descriptions":[{"lang":"en","value":"x y z"}]}}})"));
    CHECK(r.records.empty());
    CHECK(r.skipped == 1);
    CHECK(r.warnings.at(0).path == "/cveMetadata/cveId");

    CHECK_THROWS_AS(parse_cve(raw(SourceKind::cve, "{not json")), ParseError);
    CHECK_THROWS_AS(parse_cve(raw(SourceKind::cve, "[]")), ParseError);
}

TEST_CASE("osv examples") {
    auto r = parse_osv(load(SourceKind::osv, "osv/ghsa_minimal.json"));
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].id == "GHSA-abcd-1234-efgh");
    REQUIRE(r.records[0].scores.size() == 1);
    CHECK(r.records[0].scores[0].version == CvssVersion::v3_1);
    CHECK(r.records[0].scores[0].base_score.tenths() == 53);
    CHECK(r.records[0].description.starts_with("The login handler"));

    r = parse_osv(load(SourceKind::osv, "osv/osv_withdrawn.json"));
    CHECK(r.records.empty());
    CHECK(r.skipped == 1);

    r = parse_osv(load(SourceKind::osv, "osv/osv_batch_three.json"));
    CHECK(r.records.size() == 3);
    CHECK(r.skipped == 0);

    r = parse_osv(raw(SourceKind::osv, R"({"id":"GHSA-1","summary":"s","severity":[{"type":"CVSS_V3","score":"CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:N/A:N"}],"database_specific":{"cvss":{"score":7.5}}})"));
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].scores.at(0).version == CvssVersion::v3_0);

    CHECK_THROWS_AS(parse_osv(raw(SourceKind::osv, "42")), ParseError);
}

TEST_CASE("csaf examples") {
    auto r = parse_csaf(load(SourceKind::csaf, "csaf/csaf_two_vulns.json"));
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0].scores == std::vector<CvssEntry>{{CvssVersion::v3_1, Score::from_tenths(75), "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:H"}});
    CHECK(r.records[1].scores.at(0).base_score.tenths() == 61);
    CHECK(r.records[1].scores.at(0).version == CvssVersion::v3_1);

    r = parse_csaf(load(SourceKind::csaf, "csaf/csaf_missing_cve.json"));
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].id == "RHSA-x#0");
    CHECK(r.skipped == 1);

    r = parse_csaf(load(SourceKind::csaf, "csaf/csaf_empty.json"));
    CHECK(r.records.empty());
    CHECK(r.skipped == 0);
    CHECK(r.warnings.empty());

    CHECK_THROWS_AS(parse_csaf(raw(SourceKind::csaf, R"({"vulnerabilities":[]})")), ParseError);
}

TEST_CASE("parse_any dispatches and rejects unknown kinds") {
    const auto d = load(SourceKind::cve, "cve/cve_minimal.json");
    CHECK(parse_any(d) == parse_cve(d));
    const auto o = load(SourceKind::osv, "osv/ghsa_minimal.json");
    CHECK(parse_any(o) == parse_osv(o));
    const auto c = load(SourceKind::csaf, "csaf/csaf_two_vulns.json");
    CHECK(parse_any(c) == parse_csaf(c));
    RawDocument bad = d;
    bad.source = static_cast<SourceKind>(9);
    CHECK_THROWS_AS(parse_any(bad), ConfigError);
}

TEST_CASE("parsing is deterministic") {
    for (const auto& [kind, path] : all_fixtures()) {
        RawDocument d;
        d.source = kind;
        d.bytes = read_file(path);
        CHECK(parse_any(d) == parse_any(d));
    }
}

TEST_CASE("hostile inputs") {
    CHECK_THROWS_AS(parse_osv(raw(SourceKind::osv, std::string(100000, '['))), ParseError);
    CHECK_THROWS_AS(parse_osv(raw(SourceKind::osv, "\"\xff\xfe\"")), ParseError);
    CHECK_THROWS_AS(parse_osv(raw(SourceKind::osv, "")), ParseError);
    // Wrong types deep inside an entry cost only that entry.
    auto r = parse_osv(raw(SourceKind::osv, R"([{"id":"A","details":"fine text here","severity":{"x":1}},{"id":7},{"id":"B","details":"other text"}])"));
    CHECK(r.records.size() == 2);
    CHECK(r.skipped == 1);
    r = parse_csaf(raw(SourceKind::csaf, R"({"document":{"tracking":{"id":"D"}},"product_tree":{"branches":5},"vulnerabilities":[{"notes":[{"category":"summary","text":"long enough text"}],"scores":[{"cvss_v3":{"baseScore":"11.0"}}]}]})"));
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].scores.empty());
    CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("fuzz: 10k mutated and random inputs never crash") {
    std::vector<RawDocument> seeds;
    for (const auto& [kind, path] : all_fixtures()) {
        RawDocument d;
        d.source = kind;
        d.bytes = read_file(path);
        seeds.push_back(std::move(d));
    }
    std::mt19937_64 rng(1234);
    const char tokens[] = "{}[]\":,0123456789.-eEtrufalsn \\\n";
    std::size_t parsed = 0, rejected = 0;
    for (int i = 0; i < 10000; ++i) {
        RawDocument d = seeds[rng() % seeds.size()];
        d.source = static_cast<SourceKind>(rng() % 3);
        const int mode = static_cast<int>(rng() % 4);
        if (mode == 0) {
            d.bytes.resize(rng() % (d.bytes.size() + 1));
        } else if (mode == 1) {
            const int edits = 1 + static_cast<int>(rng() % 8);
            for (int e = 0; e < edits && !d.bytes.empty(); ++e)
                d.bytes[rng() % d.bytes.size()] = tokens[rng() % (sizeof tokens - 1)];
        } else if (mode == 2) {
            std::string s(rng() % 256, '\0');
            for (auto& c : s) c = static_cast<char>(rng() % 256);
            d.bytes = s;
        } else {
            // Splice a random slice of one document into another.
            const auto& other = seeds[rng() % seeds.size()].bytes;
            const std::size_t a = rng() % other.size(), b = a + rng() % (other.size() - a + 1);
            d.bytes.insert(rng() % (d.bytes.size() + 1), other.substr(a, b - a));
        }
        try {
            const auto r = parse_any(d);
            for (const auto& rec : r.records) rec.validate();
            ++parsed;
        } catch (const ParseError&) {
            ++rejected;
        }
    }
    CHECK(parsed + rejected == 10000);
    CHECK(parsed > 0);
    CHECK(rejected > 0);
}
