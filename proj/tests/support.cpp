#include "support.hpp"

#include <fstream>
#include <sstream>

#include "vulnsev/error.hpp"

namespace vulnsev::testing {

namespace fs = std::filesystem;

fs::path fixture_root() { return fs::path(VULNSEV_FIXTURE_DIR); }

TempDir::TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    for (int attempt = 0; attempt < 100; ++attempt) {
        fs::path p = fs::temp_directory_path() / ("vulnsev-test-" + std::to_string(rng()));
        if (fs::create_directory(p)) {
            path_ = p;
            return;
        }
    }
    throw IoError("cannot create a temp directory");
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, std::string_view bytes) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + p.string());
}

const char* const kPlantedKeywords[4] = {"cosmetic-low-kw", "disclosure-medium-kw", "escalation-high-kw",
                                         "overflow-critical-kw"};

namespace {

const char* const kFiller[] = {
    "the", "a", "component", "module", "service", "attacker", "user", "remote", "local", "request",
    "response", "server", "client", "library", "function", "handler", "input", "parameter", "field", "value",
    "version", "before", "after", "allows", "via", "crafted", "specially", "when", "configured", "default",
    "plugin", "interface", "api", "endpoint", "session", "token", "cookie", "header", "file", "path",
    "directory", "process", "thread", "memory", "buffer", "string", "parser", "encoder", "decoder", "network",
    "packet", "message", "queue", "cache", "database", "query", "table", "record", "index", "page",
    "template", "script", "command", "option", "flag", "setting", "account", "role", "permission", "policy",
    "product", "vendor", "release", "update", "patch", "firmware", "device", "driver", "kernel", "system",
    "application", "web", "mobile", "desktop", "cloud", "container", "image", "package", "dependency", "build",
};
constexpr std::size_t kFillerCount = sizeof(kFiller) / sizeof(kFiller[0]);

// Bands in tenths: low 1..39, medium 40..69, high 70..89, critical 90..100.
constexpr int kBandLo[4] = {1, 40, 70, 90};
constexpr int kBandHi[4] = {39, 69, 89, 100};

std::string score_text(double s) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << s;
    return os.str();
}

}  // namespace

std::vector<PlantedRecord> planted_corpus(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<PlantedRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % 4);
        PlantedRecord r;
        char id[32];
        std::snprintf(id, sizeof id, "SYN-%05zu", i);
        r.id = id;
        r.label = severity_from_rank(cls);
        const int tenths = kBandLo[cls] + static_cast<int>(rng() % static_cast<std::uint64_t>(kBandHi[cls] - kBandLo[cls] + 1));
        r.score = tenths / 10.0;
        const std::size_t words = 8 + rng() % 17;
        const std::size_t at = rng() % words;
        std::string text;
        for (std::size_t w = 0; w < words; ++w) {
            if (!text.empty()) text += ' ';
            text += w == at ? kPlantedKeywords[cls] : kFiller[rng() % kFillerCount];
        }
        r.description = text;
        out.push_back(std::move(r));
    }
    return out;
}

void write_planted_feeds(const std::vector<PlantedRecord>& corpus, const fs::path& root) {
    // Every third record per format: CVE files, one OSV array, one CSAF document.
    Json osv = Json::array();
    Json csaf_vulns = Json::array();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& r = corpus[i];
        const std::string score = score_text(r.score);
        switch (i % 3) {
        case 0: {
            Json doc = {
                {"dataType", "CVE_RECORD"},
                {"dataVersion", "5.1"},
                {"cveMetadata", {{"cveId", r.id}, {"state", "PUBLISHED"}}},
                {"containers",
                 {{"cna",
                   {{"descriptions", Json::array({{{"lang", "en"}, {"value", r.description}}})},
                    {"metrics", Json::array({{{"cvssV3_1", {{"baseScore", std::stod(score)}}}}})}}}}}};
            write_file(root / "cve" / (r.id + ".json"), doc.dump(2));
            break;
        }
        case 1:
            osv.push_back({{"id", r.id}, {"details", r.description}, {"severity", Json::array({{{"type", "CVSS_V3"}, {"score", std::stod(score)}}})}});
            break;
        default:
            csaf_vulns.push_back({{"cve", r.id},
                                  {"notes", Json::array({{{"category", "description"}, {"text", r.description}}})},
                                  {"scores", Json::array({{{"cvss_v3", {{"version", "3.1"}, {"baseScore", std::stod(score)}}}}})}});
            break;
        }
    }
    fs::create_directories(root / "cve");
    write_file(root / "osv" / "planted.json", osv.dump(1));
    Json csaf = {{"document", {{"category", "csaf_security_advisory"}, {"csaf_version", "2.0"}, {"title", "planted"},
                               {"tracking", {{"id", "SYN-CSAF-1"}}}}},
                 {"vulnerabilities", csaf_vulns}};
    write_file(root / "csaf" / "planted.json", csaf.dump(1));
}

AdvisoryRecord make_record(const std::string& id, const std::string& description, std::vector<CvssEntry> scores) {
    AdvisoryRecord r;
    r.id = id;
    r.description = description;
    r.scores = std::move(scores);
    r.source = SourceKind::cve;
    return r;
}

}  // namespace vulnsev::testing
