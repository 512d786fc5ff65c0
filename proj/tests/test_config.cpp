#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>

#include "support.hpp"
#include "vulnsev/config.hpp"
#include "vulnsev/error.hpp"

using namespace vulnsev;
using namespace vulnsev::testing;
namespace fs = std::filesystem;

TEST_CASE("shipped example config loads") {
    ::unsetenv(kBindEnvVar);
    const auto path = fs::path(VULNSEV_FIXTURE_DIR).parent_path() / "config" / "vulnsev.example.json";
    const auto cfg = load_config(path);
    CHECK(cfg.feeds.size() == 4);
    CHECK_FALSE(cfg.feeds[3].enabled);
    CHECK(cfg.feeds[3].uri.rfind("https://", 0) == 0);
    CHECK(fs::path(cfg.feeds[0].uri).is_absolute());
    CHECK(fs::exists(cfg.feeds[0].uri));
    CHECK(cfg.bind.port == 8080);
    REQUIRE(cfg.backends.size() == 1);
    CHECK(cfg.backends[0].artifact_path == cfg.model_path);
    CHECK(cfg.train.rng_seed == 42);
    CHECK(cfg.features.dims == 262144u);
}

TEST_CASE("defaults, relative paths and overrides") {
    ::unsetenv(kBindEnvVar);
    const fs::path base = "/srv/vulnsev";
    auto cfg = config_from_json(Json::object(), base);
    CHECK(cfg.feeds.empty());
    CHECK(cfg.store_path == base / "data/store.kvlog");
    CHECK(cfg.snapshot_dir == base / "data/snapshots");
    CHECK(cfg.model_path == base / "data/models/baseline.vsm");
    CHECK(cfg.bind.host == "127.0.0.1");
    CHECK(cfg.backends.empty());

    cfg = config_from_json(Json::parse(R"({"store_path":"/abs/store","feeds":[{"name":"f","kind":"osv","uri":"file:///x"}],
                                           "gateway":{"bind":"0.0.0.0:9000","backends":[{"name":"b","artifact_path":"m.vsm"}]}})"),
                           base);
    CHECK(cfg.store_path == "/abs/store");
    CHECK(cfg.feeds[0].uri == "file:///x");
    CHECK(cfg.bind.port == 9000);
    CHECK(cfg.backends[0].kind == BackendKind::native_baseline);
    CHECK(cfg.backends[0].artifact_path == base / "m.vsm");

    ::setenv(kBindEnvVar, "127.0.0.2:7000", 1);
    cfg = config_from_json(Json::parse(R"({"gateway":{"bind":"0.0.0.0:9000"}})"), base);
    CHECK(cfg.bind.host == "127.0.0.2");
    CHECK(cfg.bind.port == 7000);
    ::unsetenv(kBindEnvVar);
}

TEST_CASE("bad configs are ConfigErrors") {
    const fs::path base = "/tmp";
    for (const char* text : {R"({"stor_path":"x"})", R"({"train":{"epochs":0}})", R"({"train":{"lr":1}})",
                             R"({"labeling":{"band_starts":[4.0,4.0,9.0]}})", R"({"features":{"dims":1000}})",
                             R"({"feeds":[{"name":"a","kind":"cve","uri":"x"},{"name":"a","kind":"cve","uri":"y"}]})",
                             R"({"feeds":[{"name":"a","kind":"rss","uri":"x"}]})", R"({"gateway":{"bind":"nope"}})",
                             R"({"gateway":{"backends":[{"name":"b","kind":"gpu","artifact_path":"m"}]}})", R"([])"}) {
        CAPTURE(text);
        CHECK_THROWS_AS(config_from_json(Json::parse(text), base), ConfigError);
    }
    TempDir tmp;
    CHECK_THROWS_AS(load_config(tmp / "missing.json"), ConfigError);
    write_file(tmp / "broken.json", "{");
    CHECK_THROWS_AS(load_config(tmp / "broken.json"), ConfigError);
}
